"""Command-line entry point: ``chislr {benchmark,solve,synth,classify,inspect}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver divergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .classify import residual_classify, src_classify
from .dataio import generate_synthetic, load_dictionary, save_synthetic
from .dictionary import GroupedDictionary
from .errors import (ChislrError, DataError, DimensionMismatch, InvalidConfig, InvalidInput,
                     NonFiniteIterate)
from .experiment import (EXPERIMENT_MODELS, read_config_file, resolve_config, run_experiment,
                         write_reports)
from .linalg import norm, read_csv, svd_thin, write_csv
from .prox import GroupPartition
from .solvers import SolverConfig, admm_solve, sparsity_from_fraction

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED = 0, 2, 3, 4

log = logging.getLogger("chislr")


def _out_dir(args, command: str) -> Path:
    if args.out:
        return Path(args.out)
    return Path("runs") / f"{command}-{time.strftime('%Y%m%d-%H%M%S')}"


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--lambda-L", dest="lambda_L", type=float)
    g.add_argument("--lambda-g", dest="lambda_g", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--max-outer-iters", type=int)
    g.add_argument("--inner-iters", type=int)
    g.add_argument("--linearized-iters", type=int)
    g.add_argument("--rel-tol", type=float)
    g.add_argument("--step-scale", type=float)


_SOLVER_FLAGS = ("lambda_L", "lambda_g", "beta", "max_outer_iters", "inner_iters",
                 "linearized_iters", "rel_tol", "step_scale")


def _solver_from_args(args, model: str) -> SolverConfig:
    over = {k: getattr(args, k) for k in _SOLVER_FLAGS if getattr(args, k, None) is not None}
    return SolverConfig.for_model(model, **over)


def _load_dict_arg(path: str) -> GroupedDictionary:
    """A dictionary directory (atoms.csv + manifest.txt) or a bare CSV (one group)."""
    p = Path(path)
    if p.is_dir():
        return load_dictionary(p)
    atoms = read_csv(p)
    return GroupedDictionary.build(atoms, GroupPartition(atoms.shape[1], [range(atoms.shape[1])]),
                                   ["all"])


# ---------------------------------------------------------------- commands

def cmd_benchmark(args) -> int:
    file_values = read_config_file(args.config) if args.config else {}
    flags = {
        "experiment.model": args.model, "experiment.runs": args.runs,
        "experiment.base_seed": args.seed, "experiment.tau_trn": args.tau_trn,
        "experiment.tau_tst": args.tau_tst, "experiment.train_per_class": args.train_per_class,
        "experiment.test_per_class": args.test_per_class, "experiment.workers": args.workers,
        "data.path": args.data, "src.sparsity_fraction": args.sparsity,
        "eigenface.components": args.components,
    }
    flags.update({f"solver.{k}": getattr(args, k) for k in _SOLVER_FLAGS})
    cfg = resolve_config(file_values, flags)
    result = run_experiment(cfg)
    out = write_reports(result, _out_dir(args, "benchmark"))
    summary = result.summary
    if summary is not None:
        print(f"{cfg.model}: total recognition rate {summary.rate_mean:.4f} "
              f"+/- {summary.rate_std:.4f} over {len(result.runs)} run(s)")
    print(f"reports written to {out}")
    if not result.complete:
        print(f"error: solver diverged: {result.error}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_solve(args) -> int:
    y = read_csv(args.y)
    dictionary = _load_dict_arg(args.dict)
    if y.shape[0] != dictionary.d:
        raise DimensionMismatch(
            f"Y is {y.shape[0]}x{y.shape[1]} but dictionary is {dictionary.d}x{dictionary.n}")
    cfg = _solver_from_args(args, args.model)
    try:
        result = admm_solve(y, dictionary, cfg)
    except NonFiniteIterate as exc:
        out = _out_dir(args, "solve")
        out.mkdir(parents=True, exist_ok=True)
        (out / "residuals.csv").write_text("".join(f"{r:.17g}\n" for r in exc.history))
        raise
    out = _out_dir(args, "solve")
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "X.csv", result.x)
    write_csv(out / "L.csv", result.l)
    (out / "residuals.csv").write_text("".join(f"{r:.17g}\n" for r in result.residual_history))
    (out / "solver.txt").write_text(
        "".join(f"{k}={v!r}\n" for k, v in cfg.as_dict().items())
        + f"model={result.model}\niterations={result.iterations_run}\n"
          f"converged={result.converged}\nfinal_residual={result.final_residual:.17g}\n")
    print(f"{result.model}: {result.iterations_run} iterations, "
          f"final relative residual {result.final_residual:.3e}"
          f"{'' if result.converged else ' (iteration cap reached)'}")
    print(f"outputs written to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        problem = generate_synthetic(args.seed, d=args.d, per_class_atoms=args.per_class,
                                     k=args.classes, tau=args.tau, noise_sigma=args.noise,
                                     active_fraction=args.active_fraction,
                                     low_rank_ratio=args.low_rank_ratio)
    except (InvalidConfig, InvalidInput, ValueError) as exc:
        raise InvalidConfig(str(exc)) from None
    out = _out_dir(args, "synth")
    save_synthetic(problem, out, extra={
        "d": args.d, "per_class_atoms": args.per_class, "classes": args.classes, "tau": args.tau,
        "active_fraction": repr(args.active_fraction), "low_rank_ratio": repr(args.low_rank_ratio)})
    print(f"synthetic problem (seed {args.seed}, active class "
          f"{problem.dictionary.labels[problem.active_class]}) written to {out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    y = read_csv(args.y)
    dictionary = _load_dict_arg(args.dict)
    if y.shape[0] != dictionary.d:
        raise DimensionMismatch(
            f"Y is {y.shape[0]}x{y.shape[1]} but dictionary is {dictionary.d}x{dictionary.n}")
    if args.model == "src":
        if y.shape[1] != 1:
            raise DimensionMismatch(f"src classifies a single column, got {y.shape[1]} columns")
        report = src_classify(y[:, 0], dictionary,
                              sparsity_from_fraction(args.sparsity, dictionary.n))
    else:
        result = admm_solve(y, dictionary, _solver_from_args(args, args.model))
        report = residual_classify(y, dictionary, result)
    for lab, r in zip(dictionary.labels, report.residuals):
        print(f"{lab:>12s} {r:.6g}")
    print(f"predicted: {dictionary.labels[report.predicted]} (margin {report.margin:.6g})")
    return EXIT_OK


def cmd_inspect(args) -> int:
    m = read_csv(args.matrix)
    f = svd_thin(m)
    print(f"shape: {m.shape[0]}x{m.shape[1]}")
    print(f"min/max/mean: {m.min():.6g} / {m.max():.6g} / {m.mean():.6g}")
    for kind in ("entrywise_l1", "frobenius", "nuclear", "spectral"):
        print(f"{kind}: {norm(m, kind):.6g}")
    print(f"numerical rank: {f.rank}")
    print(f"nonzero entries: {int(np.count_nonzero(m))}")
    print("leading singular values: " + " ".join(f"{s:.4g}" for s in f.sigma[:8]))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chislr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("benchmark", help="repeated-split evaluation on a dataset or synthetic data")
    b.add_argument("--config", help="key=value config file with [sections]")
    b.add_argument("--model", choices=EXPERIMENT_MODELS)
    b.add_argument("--data", help="dataset root (<class>/<sequence>/<frame>.pgm); synthetic if omitted")
    b.add_argument("--runs", type=int)
    b.add_argument("--seed", type=int, help="base seed; run r uses seed + r")
    b.add_argument("--tau-trn", type=int)
    b.add_argument("--tau-tst", type=int)
    b.add_argument("--train-per-class", type=int)
    b.add_argument("--test-per-class", type=int)
    b.add_argument("--sparsity", type=float, help="OMP sparsity as a fraction of atoms (src)")
    b.add_argument("--components", type=int, help="eigenface components (0: automatic)")
    b.add_argument("--workers", type=int)
    b.add_argument("--out")
    _add_solver_flags(b)
    b.set_defaults(func=cmd_benchmark)

    s = sub.add_parser("solve", help="decompose Y = DX + L with SLR or C-HiSLR")
    s.add_argument("--y", required=True, help="observation matrix CSV")
    s.add_argument("--dict", required=True, help="dictionary directory or atoms CSV")
    s.add_argument("--model", choices=("chislr", "slr"), default="chislr")
    s.add_argument("--out")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    y = sub.add_parser("synth", help="write a synthetic problem with known X and L")
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--d", type=int, default=128)
    y.add_argument("--per-class", type=int, default=8)
    y.add_argument("--classes", type=int, default=7)
    y.add_argument("--tau", type=int, default=8)
    y.add_argument("--noise", type=float, default=0.0)
    y.add_argument("--active-fraction", type=float, default=0.25)
    y.add_argument("--low-rank-ratio", type=float, default=1.0)
    y.add_argument("--out")
    y.set_defaults(func=cmd_synth)

    c = sub.add_parser("classify", help="classify a single test unit")
    c.add_argument("--y", required=True)
    c.add_argument("--dict", required=True)
    c.add_argument("--model", choices=("chislr", "slr", "src"), default="chislr")
    c.add_argument("--sparsity", type=float, default=0.35)
    _add_solver_flags(c)
    c.set_defaults(func=cmd_classify)

    i = sub.add_parser("inspect", help="print statistics of a matrix CSV")
    i.add_argument("matrix")
    i.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NonFiniteIterate as exc:
        print(f"error: solver diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (DataError, DimensionMismatch, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InvalidConfig, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChislrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
