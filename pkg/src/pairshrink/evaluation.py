"""Predictive metrics, synthetic data generation, and evaluation harnesses.

Metrics: mean absolute difference of pairwise probabilities between two
models, relative parameter-space (alpha) and probability-space (beta)
improvement of a shrunk estimate over the MLE against known truth, per-item
win-rate MSE, and per-matchup Brier error. Generators build round-robin or
two-conference schedules (dense within a conference, sparse across, the
regime where shrinkage matters) and simulate outcomes from a known model.
The harnesses run k-fold cross-validation over covariance schemes and
subsample learning curves.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .bootstrap import (BootstrapScheme, ledoit_wolf_shrink, parse_scheme,
                        run_bootstrap, sample_covariance, select_nu)
from .data import Dataset, ItemUniverse, RaschStructure, split_folds
from .estimation import FitConfig, QualityVector, fit_mle
from .fisher import (SCHEMES, expected_information, inverse_covariance,
                     observed_information)
from .shrinkage import james_stein, james_stein_implicit, make_prior


@dataclass(frozen=True)
class Schedule:
    """Unordered matchup pairs with multiplicity over items 0..n-1."""

    pairs: tuple[tuple[int, int], ...]
    n: int

    def __post_init__(self):
        for i, j in self.pairs:
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"bad pair ({i}, {j}) for n={self.n}")

    @property
    def size(self) -> int:
        return len(self.pairs)

    def matchup_counts(self) -> np.ndarray:
        B = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.pairs:
            B[i, j] += 1
            B[j, i] += 1
        return B


def pairwise_distance(g: QualityVector, g2: QualityVector) -> float:
    """Mean absolute difference of the two models' pairwise probabilities,
    averaged over all n^2 ordered pairs (the diagonal contributes zero)."""
    if g.n != g2.n:
        raise ValueError("dimension mismatch")
    a, b = g.gamma, g2.gamma
    Pa = a[:, None] / (a[:, None] + a[None, :])
    Pb = b[:, None] / (b[:, None] + b[None, :])
    return float(np.abs(Pa - Pb).sum() / g.n**2)


def alpha_metric(truth: QualityVector, mle: QualityVector,
                 shr: QualityVector) -> float:
    """Relative squared-error improvement of shr over mle, in parameter space."""
    base = float(np.sum((truth.gamma - mle.gamma) ** 2))
    if base == 0.0:
        raise ValueError("mle equals truth exactly; improvement undefined")
    return (base - float(np.sum((truth.gamma - shr.gamma) ** 2))) / base


def beta_metric(truth: QualityVector, mle: QualityVector,
                shr: QualityVector) -> float:
    """Relative improvement in mean pairwise-probability distance to truth."""
    base = pairwise_distance(truth, mle)
    if base == 0.0:
        raise ValueError("mle equals truth exactly; improvement undefined")
    return (base - pairwise_distance(truth, shr)) / base


def predicted_win_rate(model: QualityVector, schedule: Schedule) -> np.ndarray:
    """Mean win probability of each item over its scheduled games.

    Items with no games get NaN.
    """
    if schedule.n != model.n:
        raise ValueError("schedule does not match model dimension")
    g = model.gamma
    prob_sum = np.zeros(model.n)
    games = np.zeros(model.n)
    if schedule.pairs:
        pairs = np.asarray(schedule.pairs)
        i, j = pairs[:, 0], pairs[:, 1]
        p_i = g[i] / (g[i] + g[j])
        np.add.at(prob_sum, i, p_i)
        np.add.at(prob_sum, j, 1.0 - p_i)
        np.add.at(games, i, 1)
        np.add.at(games, j, 1)
    with np.errstate(invalid="ignore"):
        return np.where(games > 0, prob_sum / np.maximum(games, 1), np.nan)


def win_rate_mse(model: QualityVector, test: Dataset) -> float:
    """MSE between observed and predicted win fractions on the test schedule,
    averaged over items that play at least one test game."""
    if test.N == 0:
        raise ValueError("empty test set")
    rec = np.asarray(test.records)
    wins = np.zeros(test.n)
    games = np.zeros(test.n)
    np.add.at(wins, rec[:, 0], 1)
    np.add.at(games, rec[:, 0], 1)
    np.add.at(games, rec[:, 1], 1)
    predicted = predicted_win_rate(
        model, Schedule(tuple((int(w), int(l)) for w, l in rec), test.n))
    played = games > 0
    observed = wins[played] / games[played]
    return float(np.mean((observed - predicted[played]) ** 2))


def matchup_brier(model: QualityVector, test: Dataset) -> float:
    """Mean squared error (1 - p_winner)^2 over individual test records."""
    if test.N == 0:
        raise ValueError("empty test set")
    rec = np.asarray(test.records)
    g = model.gamma
    p = g[rec[:, 0]] / (g[rec[:, 0]] + g[rec[:, 1]])
    return float(np.mean((1.0 - p) ** 2))


def sample_simplex_uniform(n: int, rng: np.random.Generator) -> QualityVector:
    """Uniform draw from the simplex (flat Dirichlet)."""
    if n < 2:
        raise ValueError("need at least 2 items")
    g = np.maximum(rng.dirichlet(np.ones(n)), 1e-12)
    return QualityVector(g / g.sum())


def _matching_rounds(members: np.ndarray, rounds: int,
                     rng: np.random.Generator) -> list[tuple[int, int]]:
    # Each round is a random perfect matching: every member plays once.
    pairs = []
    for _ in range(rounds):
        perm = rng.permutation(members)
        pairs.extend((int(perm[k]), int(perm[k + 1])) for k in range(0, len(perm), 2))
    return pairs


def _cycle_rounds(members: np.ndarray, cycles: int,
                  rng: np.random.Generator) -> list[tuple[int, int]]:
    # Each random cycle gives every member exactly two games.
    pairs = []
    for _ in range(cycles):
        perm = rng.permutation(members)
        pairs.extend((int(perm[k]), int(perm[(k + 1) % len(perm)]))
                     for k in range(len(perm)))
    return pairs


def synth_schedule(kind: str, n: int, multiplicity: int = 1,
                   within: int | None = None, across: int | None = None,
                   seed: int = 0) -> Schedule:
    """Build a synthetic matchup schedule.

    round_robin: every unordered pair, `multiplicity` times.
    two_conference: items split into two equal conferences; every item plays
    `within` games inside its conference and `across` games against the
    other, built from random one-game-per-item rounds (deterministic under
    seed). Infeasible quotas (odd total within a conference) are an error.
    """
    if n < 2:
        raise ValueError("need at least 2 items")
    if kind == "round_robin":
        if multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)] * multiplicity
        return Schedule(tuple(pairs), n)
    if kind != "two_conference":
        raise ValueError(f"unknown schedule kind {kind!r}")

    if within is None or across is None:
        raise ValueError("two_conference needs within and across quotas")
    if n % 2 != 0:
        raise ValueError("two_conference needs an even number of items")
    if within < 0 or across < 0:
        raise ValueError("quotas must be nonnegative")
    m = n // 2
    if (m * within) % 2 != 0:
        raise ValueError(f"infeasible: {m} items cannot each play {within} "
                         "games within their conference")
    rng = np.random.default_rng(seed)
    pairs: list[tuple[int, int]] = []
    for conf in (np.arange(m), np.arange(m, n)):
        if m % 2 == 0:
            pairs.extend(_matching_rounds(conf, within, rng))
        else:  # m odd forces within even; use two-games-per-cycle rounds
            pairs.extend(_cycle_rounds(conf, within // 2, rng))
    first = np.arange(m)
    for _ in range(across):
        perm = rng.permutation(np.arange(m, n))
        pairs.extend((int(first[k]), int(perm[k])) for k in range(m))
    return Schedule(tuple(pairs), n)


def default_universe(n: int) -> ItemUniverse:
    """Synthetic item ids t0..t{n-1}."""
    return ItemUniverse(tuple(f"t{i}" for i in range(n)))


def simulate_outcomes(truth: QualityVector, schedule: Schedule,
                      rng: np.random.Generator,
                      universe: ItemUniverse | None = None) -> Dataset:
    """One record per scheduled game, winners drawn from the truth model."""
    if schedule.n != truth.n:
        raise ValueError("schedule does not match model dimension")
    if universe is None:
        universe = default_universe(truth.n)
    g = truth.gamma
    records = []
    if schedule.pairs:
        pairs = np.asarray(schedule.pairs)
        i, j = pairs[:, 0], pairs[:, 1]
        p_i = g[i] / (g[i] + g[j])
        i_wins = rng.random(schedule.size) < p_i
        winners = np.where(i_wins, i, j)
        losers = np.where(i_wins, j, i)
        records = list(zip(winners, losers))
    return Dataset(universe, tuple((int(w), int(l)) for w, l in records))


@dataclass
class EvalReport:
    """Cross-validated predictive errors per covariance scheme.

    Improvements are (MSE_mle - MSE_scheme) / MSE_mle; alpha and beta are
    present only when ground-truth parameters were supplied.
    """

    schemes: tuple[str, ...]
    win_rate_mse: dict[str, float]
    matchup_mse: dict[str, float]
    win_rate_improvement: dict[str, float]
    matchup_improvement: dict[str, float]
    folds: int
    runs: int
    seed: int
    alpha: dict[str, float] | None = None
    beta: dict[str, float] | None = None
    extras: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = {
            "schemes": list(self.schemes),
            "win_rate_mse": self.win_rate_mse,
            "matchup_mse": self.matchup_mse,
            "win_rate_improvement": self.win_rate_improvement,
            "matchup_improvement": self.matchup_improvement,
            "folds": self.folds, "runs": self.runs, "seed": self.seed,
        }
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        if self.beta is not None:
            doc["beta"] = self.beta
        doc.update(self.extras)
        return json.dumps(doc, indent=2)

    def to_csv(self) -> str:
        """Flat CSV, one row per scheme x metric."""
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["scheme", "metric", "value"])
        metric_maps = [("win_rate_mse", self.win_rate_mse),
                       ("matchup_mse", self.matchup_mse),
                       ("win_rate_improvement", self.win_rate_improvement),
                       ("matchup_improvement", self.matchup_improvement)]
        if self.alpha is not None:
            metric_maps.append(("alpha", self.alpha))
        if self.beta is not None:
            metric_maps.append(("beta", self.beta))
        for scheme in self.schemes:
            for name, values in metric_maps:
                if scheme in values:
                    writer.writerow([scheme, name, f"{values[scheme]:.10g}"])
        return out.getvalue()


def shrink_with_scheme(scheme: str, model: QualityVector, train: Dataset,
                       fit: FitConfig, K: int, nu: float | None, seed: int,
                       structure: RaschStructure | None = None) -> QualityVector:
    """Fit the named covariance scheme on `train` and shrink `model` with it.

    Fisher schemes go through the inverse-information (implicit) path, which
    never inverts the information matrix and so stays stable when items near
    the prior floor inflate its spectrum. Bootstrap schemes use Ledoit-Wolf
    mixing with the given nu, selecting it by internal cross-validation when
    nu is None.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    prior = make_prior(model, structure)
    if scheme.startswith("fisher"):
        info = (observed_information if scheme == "fisher-observed"
                else expected_information)(model, train)
        return james_stein_implicit(model, inverse_covariance(info), prior)
    boot: BootstrapScheme = parse_scheme(scheme)
    if nu is None:
        nu = select_nu(train, boot, fit=fit, seed=seed, K=K)
    run = run_bootstrap(train, boot, K, fit, seed=seed, model=model)
    sig = ledoit_wolf_shrink(sample_covariance(run), nu)
    return james_stein(model, sig, prior)


def run_cv(data: Dataset, schemes: list[str], k: int = 2, runs: int = 10,
           fit: FitConfig = FitConfig(), seed: int = 0, K: int = 200,
           nu: float | None = None, structure: RaschStructure | None = None,
           truth: QualityVector | None = None) -> EvalReport:
    """k-fold cross-validation of shrinkage schemes against the MLE baseline.

    Per run and fold: fit the MLE on the training fold, shrink it once per
    scheme, and score win-rate MSE and matchup Brier on the test fold.
    Scores are averaged over all runs and folds; when `truth` is given the
    parameter-recovery metrics alpha and beta are averaged the same way.
    """
    for s in schemes:
        if s != "mle" and s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    ss = np.random.SeedSequence(seed)
    run_seeds = [int(c.generate_state(1)[0]) for c in ss.spawn(runs)]
    sums: dict[str, np.ndarray] = {s: np.zeros(4) for s in schemes}
    count = 0
    for run_seed in run_seeds:
        for f, (train, test) in enumerate(split_folds(data, k, run_seed)):
            model = fit_mle(train, fit)
            count += 1
            for s in schemes:
                if s == "mle":
                    estimate = model
                else:
                    estimate = shrink_with_scheme(s, model, train, fit, K, nu,
                                                  seed=run_seed + f, structure=structure)
                acc = sums[s]
                acc[0] += win_rate_mse(estimate, test)
                acc[1] += matchup_brier(estimate, test)
                if truth is not None:
                    acc[2] += alpha_metric(truth, model, estimate)
                    acc[3] += beta_metric(truth, model, estimate)

    win = {s: sums[s][0] / count for s in schemes}
    brier = {s: sums[s][1] / count for s in schemes}
    def improvement(values: dict[str, float]) -> dict[str, float]:
        if "mle" not in values:
            return {s: float("nan") for s in values}
        base = values["mle"]
        return {s: (base - v) / base for s, v in values.items()}
    report = EvalReport(
        schemes=tuple(schemes),
        win_rate_mse=win, matchup_mse=brier,
        win_rate_improvement=improvement(win),
        matchup_improvement=improvement(brier),
        folds=k, runs=runs, seed=seed,
        extras={"n": data.n, "N": data.N, "K": K,
                "nu": nu, "epsilon": fit.epsilon},
    )
    if truth is not None:
        report.alpha = {s: sums[s][2] / count for s in schemes}
        report.beta = {s: sums[s][3] / count for s in schemes}
    return report


def learning_curve(data: Dataset, fractions: list[float], scheme: str,
                   runs: int = 25, fit: FitConfig = FitConfig(), seed: int = 0,
                   K: int = 200, nu: float | None = None,
                   structure: RaschStructure | None = None) -> list[dict]:
    """Out-of-sample MSE ratio (shrunk / MLE) as training size grows.

    Per run, one shuffle of the records yields nested training prefixes (one
    per fraction); the complement of each prefix is scored. Ratios divide
    the run-averaged MSEs. Returns one row dict per fraction.
    """
    for f in fractions:
        if not 0.0 < f < 1.0:
            raise ValueError(f"fractions must lie in (0, 1), got {f}")
    ss = np.random.SeedSequence(seed)
    run_seeds = [int(c.generate_state(1)[0]) for c in ss.spawn(runs)]
    totals = {f: np.zeros(4) for f in fractions}  # win/brier x mle/shr
    for run_seed in run_seeds:
        rng = np.random.default_rng(run_seed)
        perm = rng.permutation(data.N)
        for frac in fractions:
            n_train = min(max(int(round(frac * data.N)), 1), data.N - 1)
            train = data.replace_records(data.records[t] for t in perm[:n_train])
            test = data.replace_records(data.records[t] for t in perm[n_train:])
            model = fit_mle(train, fit)
            shrunk = shrink_with_scheme(scheme, model, train, fit, K, nu,
                                        seed=run_seed, structure=structure)
            totals[frac] += [win_rate_mse(model, test), matchup_brier(model, test),
                             win_rate_mse(shrunk, test), matchup_brier(shrunk, test)]
    rows = []
    for frac in fractions:
        mle_win, mle_brier, shr_win, shr_brier = totals[frac] / runs
        rows.append({"fraction": frac,
                     "win_rate_mse_mle": mle_win, "win_rate_mse_shr": shr_win,
                     "matchup_mse_mle": mle_brier, "matchup_mse_shr": shr_brier,
                     "win_rate_ratio": shr_win / mle_win,
                     "matchup_ratio": shr_brier / mle_brier})
    return rows


def curve_to_csv(rows: list[dict]) -> str:
    """Flat CSV of learning-curve rows."""
    out = io.StringIO()
    fields = ["fraction", "win_rate_mse_mle", "win_rate_mse_shr",
              "matchup_mse_mle", "matchup_mse_shr",
              "win_rate_ratio", "matchup_ratio"]
    writer = csv.DictWriter(out, fieldnames=fields)
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v)
                         for k, v in row.items()})
    return out.getvalue()
