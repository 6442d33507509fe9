"""Command-line interface: ``lyaplasso <subcommand> [flags]``.

Exit status: 0 on success, 1 for usage, input or config errors, 2 when a
numerical routine fails.
"""
import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .dataio import (
    STANDARDIZATION,
    InputError,
    ingest_csv,
    read_header,
    read_matrix,
    read_support,
    write_edge_list,
    write_matrix,
)
from .experiments import ConfigError, ExperimentConfig, run_experiment
from .irrep import SingularGramError, irrep_constant, support_of
from .lasso import DegenerateGramError, fit_path
from .linalg import NonStableDriftError, NumericalError, solve_lyapunov
from .metrics import MLEError, SCOPES, confusion, ebic_path_select, metric_record, path_summary
from .model import GramSystem
from .simulation import (
    RNG_ALGORITHM,
    VOLATILITY_SCHEMES,
    RngSeed,
    SamplingError,
    sample_covariance,
    sample_gaussian,
    sample_stable_dominant,
    sample_volatility,
)

logger = logging.getLogger("lyaplasso")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2
NUMERICAL_ERRORS = (
    NonStableDriftError,
    NumericalError,
    MLEError,
    SamplingError,
    SingularGramError,
    DegenerateGramError,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _grid_size(text):
    value = _positive_int(text)
    if value < 2:
        raise argparse.ArgumentTypeError("grid size must be at least 2")
    return value


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {value}")
    return value


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {value}")
    return value


def build_parser():
    parser = _Parser(prog="lyaplasso", description="Sparse drift estimation for Lyapunov models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, data=True):
        p.add_argument("--output-dir", type=Path, required=True)
        if data:
            p.add_argument("--input", type=Path, help="data CSV with a header row")
            p.add_argument("--covariance", type=Path, help="precomputed covariance CSV (needs --n)")
            p.add_argument("--n", type=_positive_int, help="sample size behind --covariance")
            p.add_argument("--volatility", default="identity",
                           help="'identity' (2 I) or a CSV holding the volatility matrix")

    def grid(p):
        p.add_argument("--grid-size", type=_grid_size, default=100)
        p.add_argument("--span", type=_positive_float, default=1e4)

    p = sub.add_parser("simulate", help="draw a stable drift and Gaussian equilibrium data")
    common(p, data=False)
    p.add_argument("--p", type=_positive_int, default=5, help="number of variables")
    p.add_argument("--density", type=float, default=None, help="edge probability (default 2/p)")
    p.add_argument("--drift", type=Path, help="use this drift CSV instead of drawing one")
    p.add_argument("--n", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--volatility", default="identity",
                   help=f"one of {', '.join(VOLATILITY_SCHEMES)} or a CSV matrix")

    p = sub.add_parser("fit", help="lasso path over a log-spaced penalty grid")
    common(p)
    grid(p)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--truth", type=Path, help="true drift CSV or edge list for metrics")
    p.add_argument("--scope", choices=SCOPES, default="offdiag")

    p = sub.add_parser("ebic", help="extended-BIC graph selection along the lasso path")
    common(p)
    grid(p)
    p.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--gamma", type=_nonneg_float, default=1.0)
    p.add_argument("--dedup", action=argparse.BooleanOptionalAction, default=True,
                   help="score each distinct support once (default) or every path entry")

    p = sub.add_parser("irrep", help="irrepresentability diagnostics of a drift matrix")
    common(p, data=False)
    p.add_argument("--drift", type=Path, required=True)
    p.add_argument("--volatility", default="identity")

    p = sub.add_parser("metrics", help="compare an estimated support against the truth")
    common(p, data=False)
    p.add_argument("--estimate", type=Path, required=True, help="drift CSV or edge list")
    p.add_argument("--truth", type=Path, required=True, help="drift CSV or edge list")
    p.add_argument("--names", type=Path, help="CSV whose header gives variable names for edge lists")
    p.add_argument("--scope", choices=SCOPES, default="offdiag")

    p = sub.add_parser("experiment", help="run a simulation study from a JSON config")
    common(p, data=False)
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--seed", type=int, default=None, help="override base_seed in the config")
    return parser


# -- helpers -----------------------------------------------------------------


def _metadata(args, **extra):
    flags = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "argv"}
    return {
        "package": "lyaplasso",
        "version": __version__,
        "kernel_backend": BACKEND,
        "rng": RNG_ALGORITHM,
        "command": args.command,
        "flags": flags,
        "argv": args.argv,
        **extra,
    }


def _write_json(path, obj):
    path.write_text(json.dumps(obj, indent=2, default=_json_default), encoding="utf-8")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _volatility(spec, p):
    if spec == "identity":
        return 2.0 * np.eye(p)
    path = Path(spec)
    if not path.is_file():
        raise InputError(f"volatility must be 'identity' or an existing CSV file, got {spec!r}")
    c, _ = read_matrix(path)
    if c.shape != (p, p):
        raise InputError(f"{path}: volatility is {c.shape[0]} x {c.shape[1]}, expected {p} x {p}")
    return c


def _load_covariance(args):
    """``(sigma_hat, n, names, extra_metadata)`` from ``--input`` or ``--covariance``."""
    if (args.input is None) == (args.covariance is None):
        raise UsageError("give exactly one of --input or --covariance")
    if args.covariance is not None:
        if args.n is None:
            raise UsageError("--covariance needs --n")
        sigma, names = read_matrix(args.covariance)
        if np.abs(sigma - sigma.T).max() > 1e-8 * max(1.0, np.abs(sigma).max()):
            raise InputError(f"{args.covariance}: covariance is not symmetric")
        return 0.5 * (sigma + sigma.T), args.n, names, {"input_kind": "covariance"}
    ds = ingest_csv(args.input, standardize=args.standardize)
    meta = {"input_kind": "data", "rows": ds.n}
    if args.standardize:
        meta["standardization"] = STANDARDIZATION
    return sample_covariance(ds), ds.n, ds.names, meta


def _edge_text(support, names):
    return ";".join(f"{names[a]}->{names[b]}" for a, b in support.edges)


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(args):
    out = args.output_dir
    gen = RngSeed(args.seed).generator()
    if args.drift is not None:
        m, names = read_matrix(args.drift)
    else:
        density = 2.0 / args.p if args.density is None else args.density
        if not 0.0 <= density <= 1.0:
            raise UsageError("--density must lie in [0, 1]")
        m = sample_stable_dominant(args.p, min(1.0, density), gen)
        names = [f"X{k + 1}" for k in range(args.p)]
    p = m.shape[0]
    if args.volatility in VOLATILITY_SCHEMES:
        c = sample_volatility(args.volatility, p, gen)
    else:
        c = _volatility(args.volatility, p)
    sigma = solve_lyapunov(m, c)
    ds = sample_gaussian(sigma, args.n, gen, names=names)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "data.csv", ds.rows, names)
    write_matrix(out / "drift.csv", m, names)
    write_matrix(out / "volatility.csv", c, names)
    write_matrix(out / "covariance.csv", sigma, names)
    write_edge_list(out / "truth_edges.txt", support_of(m), names, weights=m)
    _write_json(out / "metadata.json", _metadata(args, seed=args.seed))
    return EXIT_OK


def cmd_fit(args):
    sigma_hat, n, names, meta = _load_covariance(args)
    p = sigma_hat.shape[0]
    gram = GramSystem.from_covariance(sigma_hat, _volatility(args.volatility, p))
    path = fit_path(gram, grid_size=args.grid_size, span=args.span)
    out = args.output_dir
    est_dir = out / "estimates"
    est_dir.mkdir(parents=True, exist_ok=True)
    width = len(str(len(path.solutions) - 1))
    with open(out / "path.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "lambda", "objective", "kkt_residual", "iterations", "converged", "n_edges", "edges"])
        for k, sol in enumerate(path.solutions):
            write_matrix(est_dir / f"lambda_{k:0{width}d}.csv", sol.m_hat, names)
            sup = support_of(sol.m_hat)
            w.writerow([k, repr(sol.lam), repr(sol.objective), repr(sol.kkt_residual), sol.iterations,
                        sol.converged, sup.n_edges, _edge_text(sup, names)])
    summary = {
        "lambda_max": path.lambda_max,
        "grid_size": args.grid_size,
        "span": args.span,
        "n": n,
        "all_converged": path.all_converged,
        "max_kkt_residual": path.max_kkt,
    }
    if args.truth is not None:
        truth = read_support(args.truth, names)
        if truth.p != p:
            raise InputError(f"{args.truth}: truth has {truth.p} variables, data have {p}")
        with open(out / "metrics.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "lambda", "tp", "fp", "tn", "fn", "tpr", "fpr", "acc", "f1", "precision"])
            for k, (lam, sup) in enumerate(zip(path.lambdas, path.supports())):
                c = confusion(sup, truth, args.scope)
                r = metric_record(c)
                w.writerow([k, repr(float(lam)), c.tp, c.fp, c.tn, c.fn,
                            *("" if v is None else v for v in (r.tpr, r.fpr, r.acc, r.f1, r.precision))])
        summary["metrics"] = {"scope": args.scope, **path_summary(path, truth, args.scope)}
    _write_json(out / "summary.json", {"metadata": _metadata(args, **meta), **summary})
    return EXIT_OK if path.all_converged else EXIT_NUMERICAL


def cmd_ebic(args):
    sigma_hat, n, names, meta = _load_covariance(args)
    p = sigma_hat.shape[0]
    c = _volatility(args.volatility, p)
    path = fit_path(GramSystem.from_covariance(sigma_hat, c), grid_size=args.grid_size, span=args.span)
    res, idx = ebic_path_select(path, sigma_hat, n, gamma=args.gamma, dedup=args.dedup, c=c)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    best = res.estimates[res.selected_index]
    write_edge_list(out / "edges.txt", res.selected_graph, names, weights=best)
    write_matrix(out / "selected_drift.csv", best, names)
    with open(out / "scores.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["candidate", "path_index", "lambda", "n_edges", "neg2_loglik", "ebic", "selected"])
        for k, (g, pi) in enumerate(zip(_candidates(path, idx), idx)):
            w.writerow([k, pi, repr(float(path.lambdas[pi])), g.n_edges, repr(float(res.mle_values[k])),
                        repr(float(res.scores[k])), k == res.selected_index])
    _write_json(out / "summary.json", {
        "metadata": _metadata(args, **meta),
        "n": n,
        "gamma": args.gamma,
        "candidates": len(idx),
        "selected_candidate": res.selected_index,
        "selected_lambda": float(path.lambdas[idx[res.selected_index]]),
        "selected_edges": [f"{names[a]} -> {names[b]}" for a, b in res.selected_graph.edges],
        "failed_candidates": res.failures,
        "gradient_check": res.gradient_check,
    })
    return EXIT_OK


def _candidates(path, idx):
    supports = path.supports()
    return [supports[k] for k in idx]


def cmd_irrep(args):
    m, names = read_matrix(args.drift)
    rep = irrep_constant(m, _volatility(args.volatility, m.shape[0]))
    args.output_dir.mkdir(parents=True, exist_ok=True)
    body = {
        "rho": rep.rho,
        "weak_rho": rep.weak_rho,
        "holds": rep.holds,
        "weak_holds": rep.weak_holds,
        "support_block_invertible": rep.gamma_ss_invertible,
        "support_block_condition": rep.condition,
        "c_gamma": rep.c_gamma,
        "c_m": rep.c_m,
        "c_sigma": rep.c_sigma,
        "c_c": rep.c_c,
        "edges": [f"{names[a]} -> {names[b]}" for a, b in support_of(m).edges],
    }
    _write_json(args.output_dir / "irrep.json", {"metadata": _metadata(args), **body})
    return EXIT_OK


def cmd_metrics(args):
    names = read_header(args.names) if args.names else (_names_from(args.truth) or _names_from(args.estimate))
    if names is None:
        raise UsageError("edge-list inputs need --names or a matrix CSV among --estimate/--truth")
    est, truth = read_support(args.estimate, names), read_support(args.truth, names)
    c = confusion(est, truth, args.scope)
    r = metric_record(c)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    _write_json(args.output_dir / "metrics.json", {
        "metadata": _metadata(args),
        "scope": args.scope,
        "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
        "record": {"tpr": r.tpr, "fpr": r.fpr, "acc": r.acc, "f1": r.f1, "precision": r.precision},
    })
    return EXIT_OK


def _names_from(path):
    """Header names of a matrix CSV, ``None`` for an edge list."""
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    if "->" in path.read_text(encoding="utf-8"):
        return None
    return read_header(path)


def cmd_experiment(args):
    try:
        data = json.loads(args.config.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"{args.config}: file not found") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON ({exc})") from None
    if args.seed is not None and isinstance(data, dict):
        data["base_seed"] = args.seed
    config = ExperimentConfig.from_dict(data)
    result = run_experiment(config)
    result.write(args.output_dir)
    _write_json(args.output_dir / "metadata.json", _metadata(args, config=config.to_dict()))
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "ebic": cmd_ebic,
    "irrep": cmd_irrep,
    "metrics": cmd_metrics,
    "experiment": cmd_experiment,
}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else [str(a) for a in argv]
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"lyaplasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for pointer, message in exc.errors:
            print(f"lyaplasso: config error at {pointer or '/'}: {message}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, InputError) as exc:
        print(f"lyaplasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"lyaplasso: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"lyaplasso: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
