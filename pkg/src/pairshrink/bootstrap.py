"""Bootstrap resampling of comparison data and covariance estimation.

Four replicate schemes, crossing two choices: blocked schemes keep the
matchup-count matrix B fixed and resample only outcomes, non-blocked ones
resample whole records (or matchups) with replacement; parametric schemes
draw winners from a fitted model, non-parametric ones reuse observed
outcomes. Replicates are refit and their sample covariance, optionally
stabilized by Ledoit-Wolf mixing toward a scaled identity, estimates the
covariance of the MLE.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset, split_folds
from .estimation import FitConfig, FitError, QualityVector, fit_mle
from .fisher import CovarianceEstimate


@dataclass(frozen=True)
class BootstrapScheme:
    """One of the four replicate schemes: {b, nb} x {p, np}."""

    blocked: bool
    parametric: bool

    @property
    def name(self) -> str:
        return ("b" if self.blocked else "nb") + "-" + ("p" if self.parametric else "np")

    @property
    def scheme_tag(self) -> str:
        return "boot-" + self.name


def parse_scheme(tag: str) -> BootstrapScheme:
    """Parse 'boot-b-p' / 'b-p' style names into a BootstrapScheme."""
    name = tag.removeprefix("boot-")
    parts = name.split("-")
    if len(parts) == 2 and parts[0] in ("b", "nb") and parts[1] in ("p", "np"):
        return BootstrapScheme(blocked=parts[0] == "b", parametric=parts[1] == "p")
    raise ValueError(f"unknown bootstrap scheme {tag!r}")


@dataclass(frozen=True)
class BootstrapRun:
    """K refitted replicate quality vectors, with provenance."""

    gammas: np.ndarray  # K x n, each row on the simplex
    scheme: BootstrapScheme
    seed: int

    def __post_init__(self):
        self.gammas.setflags(write=False)

    @property
    def K(self) -> int:
        return self.gammas.shape[0]

    def to_json(self) -> str:
        return json.dumps({"scheme": self.scheme.scheme_tag, "K": self.K,
                           "seed": self.seed, "gammas": self.gammas.tolist()})


def make_replicate(data: Dataset, scheme: BootstrapScheme,
                   model: QualityVector | None,
                   rng: np.random.Generator) -> Dataset:
    """One bootstrap replicate of the same size N.

    (nb,np) resamples records with replacement; (b,np) resamples, per pair,
    among that pair's own records; (b,p) keeps every matchup and redraws the
    winner from the model; (nb,p) resamples matchups with replacement, then
    draws winners from the model.
    """
    if scheme.parametric and model is None:
        raise ValueError("parametric bootstrap needs a fitted model")
    N = data.N
    rec = np.asarray(data.records)

    if scheme.blocked and not scheme.parametric:
        by_pair: dict[tuple[int, int], list[int]] = {}
        for k, (w, l) in enumerate(data.records):
            by_pair.setdefault((min(w, l), max(w, l)), []).append(k)
        chosen: list[int] = []
        for pair in sorted(by_pair):
            idx = by_pair[pair]
            chosen.extend(idx[t] for t in rng.integers(0, len(idx), size=len(idx)))
        return data.replace_records(data.records[k] for k in chosen)

    if scheme.blocked:  # (b,p): same matchups, winners redrawn
        pairs = rec
    else:
        resampled = rng.integers(0, N, size=N)
        if not scheme.parametric:  # (nb,np)
            return data.replace_records(data.records[k] for k in resampled)
        pairs = rec[resampled]  # (nb,p): resampled matchups

    g = model.gamma
    p_first = g[pairs[:, 0]] / (g[pairs[:, 0]] + g[pairs[:, 1]])
    first_wins = rng.random(N) < p_first
    winners = np.where(first_wins, pairs[:, 0], pairs[:, 1])
    losers = np.where(first_wins, pairs[:, 1], pairs[:, 0])
    return data.replace_records(zip(winners, losers))


def run_bootstrap(data: Dataset, scheme: BootstrapScheme, K: int,
                  fit: FitConfig = FitConfig(), seed: int = 0,
                  model: QualityVector | None = None) -> BootstrapRun:
    """Generate and refit K replicates with per-replicate derived substreams.

    The fit uses the configured epsilon prior (default 1e-6), so replicates
    whose comparison graph is not strongly connected are fitted rather than
    rejected. For parametric schemes the reference model is fitted from
    `data` when not supplied.

    Raises:
        FitError: naming the replicate index that failed to fit.
    """
    if K < 2:
        raise ValueError("need at least 2 replicates")
    if scheme.parametric and model is None:
        model = fit_mle(data, fit)
    gammas = np.empty((K, data.n))
    for k, child in enumerate(np.random.SeedSequence(seed).spawn(K)):
        replicate = make_replicate(data, scheme, model, np.random.default_rng(child))
        try:
            gammas[k] = fit_mle(replicate, fit).gamma
        except FitError as exc:
            raise FitError(f"replicate {k}: {exc}", exc.last_estimate) from exc
    return BootstrapRun(gammas=gammas, scheme=scheme, seed=seed)


def sample_covariance(run: BootstrapRun) -> CovarianceEstimate:
    """Unbiased sample covariance of the replicate quality vectors."""
    if run.K < 2:
        raise ValueError("need at least 2 replicates")
    dev = run.gammas - run.gammas.mean(axis=0)
    sig = dev.T @ dev / (run.K - 1)
    return CovarianceEstimate(matrix=(sig + sig.T) / 2.0, scheme=run.scheme.scheme_tag)


def ledoit_wolf_shrink(sigma: CovarianceEstimate, nu: float) -> CovarianceEstimate:
    """Mix the sample covariance with sigma_bar * I, weight nu on the identity.

    sigma_bar is the mean sample variance, so the trace is preserved exactly.
    """
    if not 0.0 <= nu <= 1.0:
        raise ValueError(f"nu must be in [0, 1], got {nu}")
    sig = sigma.sigma()
    sigma_bar = float(np.trace(sig)) / sigma.n
    out = (1.0 - nu) * sig + nu * sigma_bar * np.eye(sigma.n)
    return CovarianceEstimate(matrix=out, scheme=sigma.scheme)


DEFAULT_NU_GRID = tuple(round(0.1 * k, 1) for k in range(11))


def select_nu(data: Dataset, scheme: BootstrapScheme,
              grid: tuple[float, ...] = DEFAULT_NU_GRID,
              fit: FitConfig = FitConfig(), seed: int = 0,
              K: int = 200) -> float:
    """Pick the identity-mixing weight by internal 2-fold cross-validation.

    Each fold fits and bootstraps the training half once, then scores every
    candidate nu by the matchup Brier error of the shrunk model on the held
    out half. Ties break toward more shrinkage (larger nu).
    """
    from .evaluation import matchup_brier
    from .shrinkage import james_stein, make_prior

    if not grid:
        raise ValueError("nu grid is empty")
    ss = np.random.SeedSequence(seed)
    fold_seed, boot_seed = (int(s.generate_state(1)[0]) for s in ss.spawn(2))
    scores = np.zeros(len(grid))
    for f, (train, test) in enumerate(split_folds(data, 2, fold_seed)):
        model = fit_mle(train, fit)
        run = run_bootstrap(train, scheme, K, fit, seed=boot_seed + f, model=model)
        sig = sample_covariance(run)
        prior = make_prior(model)
        for i, nu in enumerate(grid):
            shrunk = james_stein(model, ledoit_wolf_shrink(sig, nu), prior)
            scores[i] += matchup_brier(shrunk, test)
    best = scores.min()
    return max(nu for nu, s in zip(grid, scores) if s == best)
