"""Command-line front end: fit, shrink, evaluate, synth, predict.

Exit codes: 0 success, 2 usage or data error, 3 numerical failure.
JSON is the model exchange format; CSV carries comparisons, pair
probabilities, and report tables. Commands that resample or shuffle
require --seed and are bit-reproducible given one.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bootstrap import (DEFAULT_NU_GRID, ledoit_wolf_shrink, parse_scheme,
                        run_bootstrap, sample_covariance, select_nu)
from .data import (Dataset, ParseError, PartitionError, RaschStructure,
                   build_graph, detect_rasch, is_strongly_connected,
                   parse_comparisons)
from .estimation import (FitConfig, FitError, QualityVector, fit_mle,
                         log_likelihood, model_from_json, model_to_json)
from .evaluation import (EvalReport, curve_to_csv, default_universe,
                         learning_curve, run_cv, sample_simplex_uniform,
                         simulate_outcomes, synth_schedule)
from .fisher import SCHEMES, expected_information, inverse_covariance, observed_information
from .shrinkage import james_stein, james_stein_implicit, make_prior

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

ALL_SCHEMES = ("mle",) + SCHEMES

EPILOG = """\
exit codes: 0 ok, 2 usage/data error, 3 numerical failure.
model JSON: {"items": [...], "gamma": [...], "epsilon": ..., "loglik": ...}.
File formats and report schemas are documented in SCHEMAS.md.
"""


class UsageError(ValueError):
    """Bad flags or bad data; maps to exit code 2."""


def _read_text(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    return p.read_text()


def _load_dataset(path: str) -> Dataset:
    text = _read_text(path)
    if path.endswith(".json"):
        return Dataset.from_json(text)
    return parse_comparisons(text)


def _fractions(raw: str) -> list[float]:
    try:
        return [float(tok) for tok in raw.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"bad fractions list: {raw!r}")


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError("--seed is required for this command")
    return args.seed


def _partition_from_file(path: str, data: Dataset) -> RaschStructure:
    rows = list(csv.reader(_read_text(path).splitlines()))
    if not rows or [c.strip().lower() for c in rows[0]] != ["item", "group"]:
        raise UsageError(f"{path}: expected header item,group")
    labels: dict[str, str] = {}
    for row in rows[1:]:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise UsageError(f"{path}: bad row {row!r}")
        labels[row[0].strip()] = row[1].strip()
    names = sorted(set(labels.values()))
    if len(names) != 2:
        raise UsageError(f"{path}: need exactly 2 groups, got {names}")
    groups = []
    for item in data.universe.items:
        if item not in labels:
            raise UsageError(f"{path}: no group for item {item!r}")
        groups.append(names.index(labels[item]))
    return RaschStructure(tuple(groups))


def _resolve_structure(args, data: Dataset) -> RaschStructure | None:
    if args.prior != "rasch":
        return None
    if args.partition:
        structure = _partition_from_file(args.partition, data)
        # validates every record crosses groups
        detect_rasch(data, declared_partition=structure.groups)
        return structure
    structure = detect_rasch(data)
    if structure is None:
        raise UsageError("--prior rasch: data is not bipartite and no "
                         "--partition file was given")
    return structure


def _write_out(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)


def cmd_fit(args) -> int:
    data = _load_dataset(args.input)
    config = FitConfig(epsilon=args.epsilon)
    connected = is_strongly_connected(build_graph(data))
    model = fit_mle(data, config)
    loglik = log_likelihood(model, data)
    print(f"n={data.n} N={data.N} strongly_connected={connected} "
          f"loglik={loglik:.6f}", file=sys.stderr)
    _write_out(args, model_to_json(model, data.universe.items,
                                   args.epsilon, loglik))
    return EXIT_OK


def _shrink_once(args, data: Dataset, model: QualityVector,
                 structure: RaschStructure | None):
    """Returns (shrunk, covariance_estimate, bootstrap_run_or_None, nu)."""
    fit = FitConfig(epsilon=args.epsilon)
    prior = make_prior(model, structure)
    if args.scheme.startswith("fisher"):
        info = (observed_information if args.scheme == "fisher-observed"
                else expected_information)(model, data)
        sig = inverse_covariance(info)
        return james_stein_implicit(model, sig, prior), sig, None, None
    scheme = parse_scheme(args.scheme)
    seed = _require_seed(args)
    nu = args.nu
    if nu is None:
        grid = tuple(_fractions(args.nu_grid)) if args.nu_grid else DEFAULT_NU_GRID
        nu = select_nu(data, scheme, grid=grid, fit=fit, seed=seed, K=args.K)
    run = run_bootstrap(data, scheme, args.K, fit, seed=seed, model=model)
    sig = ledoit_wolf_shrink(sample_covariance(run), nu)
    return james_stein(model, sig, prior), sig, run, nu


def cmd_shrink(args) -> int:
    data = _load_dataset(args.input)
    structure = _resolve_structure(args, data)
    fit = FitConfig(epsilon=args.epsilon)
    if args.model:
        model, items = model_from_json(_read_text(args.model))
        if items != data.universe.items:
            raise UsageError("model items do not match the input data")
    else:
        model = fit_mle(data, fit)
    shrunk, sig, run, nu = _shrink_once(args, data, model, structure)
    if args.emit_cov:
        Path(args.emit_cov).write_text(sig.to_json())
    if args.emit_replicates:
        if run is None:
            raise UsageError("--emit-replicates applies to bootstrap schemes only")
        Path(args.emit_replicates).write_text(run.to_json())
    doc = {
        "items": list(data.universe.items),
        "gamma_mle": [float(x) for x in model.gamma],
        "gamma_shr": [float(x) for x in shrunk.gamma],
        "scheme": args.scheme,
        "nu": nu,
        "prior": args.prior,
        "epsilon": args.epsilon,
        "seed": args.seed,
        "loglik_mle": log_likelihood(model, data),
        "loglik_shr": log_likelihood(shrunk, data),
    }
    _write_out(args, json.dumps(doc, indent=2))
    return EXIT_OK


def _report_paths(out: str) -> tuple[Path, Path, Path]:
    stem = Path(out)
    if stem.suffix == ".json":
        stem = stem.with_suffix("")
    return (stem.with_suffix(".json"), stem.with_suffix(".csv"),
            stem.with_suffix(".png"))


def cmd_evaluate(args) -> int:
    from . import figures

    data = _load_dataset(args.input)
    structure = _resolve_structure(args, data)
    seed = _require_seed(args)
    fit = FitConfig(epsilon=args.epsilon)
    if not args.out:
        raise UsageError("--out is required for evaluate")
    json_path, csv_path, fig_path = _report_paths(args.out)

    if args.curve:
        fractions = _fractions(args.fractions)
        rows = learning_curve(data, fractions, args.scheme, runs=args.runs,
                              fit=fit, seed=seed, K=args.K, nu=args.nu,
                              structure=structure)
        json_path.write_text(json.dumps(rows, indent=2))
        csv_path.write_text(curve_to_csv(rows))
        figures.render_curve_figure(rows, str(fig_path))
        for row in rows:
            print(f"fraction={row['fraction']:g} "
                  f"win_ratio={row['win_rate_ratio']:.4f} "
                  f"matchup_ratio={row['matchup_ratio']:.4f}")
        return EXIT_OK

    schemes = [s.strip() for s in args.schemes.split(",") if s.strip()]
    for s in schemes:
        if s not in ALL_SCHEMES:
            raise UsageError(f"unknown scheme {s!r}; choose from {ALL_SCHEMES}")
    if "mle" not in schemes:
        schemes.insert(0, "mle")
    report = run_cv(data, schemes, k=args.folds, runs=args.runs, fit=fit,
                    seed=seed, K=args.K, nu=args.nu, structure=structure)
    json_path.write_text(report.to_json())
    csv_path.write_text(report.to_csv())
    figures.render_report_figure(report, str(fig_path))
    _print_report(report)
    return EXIT_OK


def _print_report(report: EvalReport) -> None:
    print(f"{'scheme':<16} {'win_mse':>10} {'%better':>8} {'matchup_mse':>12} {'%better':>8}")
    for s in report.schemes:
        wi = 100 * report.win_rate_improvement[s]
        mi = 100 * report.matchup_improvement[s]
        print(f"{s:<16} {report.win_rate_mse[s]:>10.5f} "
              f"{('-' if s == 'mle' else f'{wi:+.1f}%'):>8} "
              f"{report.matchup_mse[s]:>12.5f} "
              f"{('-' if s == 'mle' else f'{mi:+.1f}%'):>8}")


def cmd_synth(args) -> int:
    seed = _require_seed(args)
    rng = np.random.default_rng(seed)
    schedule = synth_schedule(args.kind, args.n, multiplicity=args.multiplicity,
                              within=args.within, across=args.across,
                              seed=int(rng.integers(2**63)))
    truth = sample_simplex_uniform(args.n, rng)
    universe = default_universe(args.n)
    data = simulate_outcomes(truth, schedule, rng, universe)
    lines = ["winner,loser"]
    lines += [f"{universe.items[w]},{universe.items[l]}" for w, l in data.records]
    if not args.out:
        raise UsageError("--out is required for synth")
    Path(args.out).write_text("\n".join(lines) + "\n")
    truth_path = args.truth_out or str(Path(args.out).with_suffix("")) + "_truth.json"
    Path(truth_path).write_text(json.dumps({
        "items": list(universe.items),
        "gamma": [float(x) for x in truth.gamma],
    }))
    print(f"wrote {data.N} games over {args.n} items to {args.out}; "
          f"truth in {truth_path}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    model, items = model_from_json(_read_text(args.model))
    index = {item: i for i, item in enumerate(items)}
    rows = list(csv.reader(_read_text(args.pairs).splitlines()))
    if not rows or [c.strip().lower() for c in rows[0]] != ["a", "b"]:
        raise UsageError("pairs file must have header a,b")
    out_lines = ["a,b,prob_a_beats_b"]
    g = model.gamma
    for row in rows[1:]:
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise UsageError(f"bad pair row {row!r}")
        a, b = row[0].strip(), row[1].strip()
        for ident in (a, b):
            if ident not in index:
                raise UsageError(f"unknown item {ident!r}")
        if a == b:
            raise UsageError(f"cannot compare {a!r} with itself")
        i, j = index[a], index[b]
        p = g[i] / (g[i] + g[j])
        out_lines.append(f"{a},{b},{p:.10g}")
    _write_out(args, "\n".join(out_lines) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairshrink",
        description="Fit pairwise-comparison quality models and improve "
                    "them with Empirical Bayes shrinkage.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_help="seed for reproducibility"):
        p.add_argument("--seed", type=int, default=None, help=seed_help)
        p.add_argument("--epsilon", type=float, default=1e-6,
                       help="prior strength for fitting (default 1e-6)")
        p.add_argument("--out", default=None, help="output path")

    p = sub.add_parser("fit", help="fit the quality model from comparisons")
    p.add_argument("--input", required=True, help="comparisons CSV (or dataset JSON)")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("shrink", help="fit, estimate covariance, and shrink")
    p.add_argument("--input", required=True)
    p.add_argument("--model", default=None, help="pre-fitted model JSON")
    p.add_argument("--scheme", required=True, choices=SCHEMES)
    p.add_argument("--K", type=int, default=200, help="bootstrap replicates")
    p.add_argument("--nu", type=float, default=None,
                   help="Ledoit-Wolf mixing weight (default: select by CV)")
    p.add_argument("--nu-grid", default=None,
                   help="comma-separated candidate nu values for selection")
    p.add_argument("--prior", choices=["uniform", "rasch"], default="uniform")
    p.add_argument("--partition", default=None, help="item,group CSV for rasch prior")
    p.add_argument("--emit-cov", default=None, help="write covariance JSON here")
    p.add_argument("--emit-replicates", default=None,
                   help="write bootstrap replicates JSON here")
    common(p)
    p.set_defaults(func=cmd_shrink)

    p = sub.add_parser("evaluate", help="cross-validate schemes or learning curve")
    p.add_argument("--input", required=True)
    p.add_argument("--schemes", default=",".join(ALL_SCHEMES),
                   help="comma-separated schemes (CV mode)")
    p.add_argument("--scheme", default="fisher-expected", choices=SCHEMES,
                   help="scheme for --curve mode")
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--K", type=int, default=200)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--prior", choices=["uniform", "rasch"], default="uniform")
    p.add_argument("--partition", default=None)
    p.add_argument("--curve", action="store_true", help="learning-curve mode")
    p.add_argument("--fractions", default="0.01,0.02,0.05,0.1,0.2,0.4",
                   help="training fractions for --curve")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", help="generate synthetic comparisons + truth")
    p.add_argument("--kind", choices=["round_robin", "two_conference"],
                   required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--within", type=int, default=None)
    p.add_argument("--across", type=int, default=None)
    p.add_argument("--multiplicity", type=int, default=1)
    p.add_argument("--truth-out", default=None)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("predict", help="pairwise probabilities from a model")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs", required=True, help="CSV with header a,b")
    common(p)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParseError, PartitionError, ValueError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FitError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except np.linalg.LinAlgError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
