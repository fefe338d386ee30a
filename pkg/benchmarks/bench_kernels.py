"""Time the compiled kernels against the numpy fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Every timing is the best of ``--repeat`` runs.  Outputs of the two backends
are compared before timing so a speedup is never reported for a wrong answer.
"""
import argparse
import time

import numpy as np

from chislr import _kernels_py
from chislr.dataio import generate_synthetic
from chislr.solvers import SolverConfig, admm_solve

try:
    from chislr import _kernels as _kernels_c
except ImportError:  # extension not built
    _kernels_c = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def kernel_cases(rng):
    n, tau, k = 420, 8, 7
    a = rng.standard_normal((128, n))
    a /= np.linalg.norm(a, axis=0)
    gram = np.ascontiguousarray(a.T @ a)
    corr = np.ascontiguousarray(a.T @ rng.standard_normal((128, tau)))
    rg = np.repeat(np.arange(k), n // k).astype(np.intp)
    one_group = np.zeros(n, dtype=np.intp)
    m = rng.standard_normal((n, tau))
    step = 1.0 / np.linalg.eigvalsh(gram)[-1]
    x0 = np.zeros((n, tau))
    return {
        "soft_threshold 420x8": lambda mod: mod.soft_threshold(m, 0.3),
        "hierarchical_prox 420x8": lambda mod: mod.hierarchical_prox(m, rg, k, 0.3, 0.5),
        "ista 1 step": lambda mod: mod.prox_gradient(gram, corr, x0, step, step, 4.5 * step,
                                                     rg, k, 1, False),
        "fista 100 steps": lambda mod: mod.prox_gradient(gram, corr, x0, step, step, 0.0,
                                                         one_group, 1, 100, True),
    }


def admm_case(model, use_compiled):
    import chislr.prox
    import chislr.solvers
    mod = _kernels_c if use_compiled else _kernels_py
    saved = chislr.prox.kernels, chislr.solvers.kernels
    chislr.prox.kernels = chislr.solvers.kernels = mod
    try:
        p = generate_synthetic(0, noise_sigma=0.01)
        cfg = SolverConfig.for_model(model, rel_tol=0.0)
        return admm_solve(p.y, p.dictionary, cfg)
    finally:
        chislr.prox.kernels, chislr.solvers.kernels = saved


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; only the numpy backend is available")
        return 1
    rng = np.random.default_rng(0)
    rows = []
    for name, case in kernel_cases(rng).items():
        np.testing.assert_allclose(case(_kernels_c), case(_kernels_py), rtol=1e-10, atol=1e-12)
        rows.append((name, best_of(lambda: case(_kernels_py), args.repeat),
                     best_of(lambda: case(_kernels_c), args.repeat)))
    for model in ("chislr", "slr"):
        a, b = admm_case(model, True), admm_case(model, False)
        np.testing.assert_allclose(a.x, b.x, rtol=1e-8, atol=1e-10)
        label = f"admm_solve {model} ({a.iterations_run} iters)"
        rows.append((label, best_of(lambda: admm_case(model, False), max(1, args.repeat // 2)),
                     best_of(lambda: admm_case(model, True), max(1, args.repeat // 2))))
    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'numpy [ms]':>11}  {'cython [ms]':>11}  {'speedup':>7}")
    for name, tp, tc in rows:
        print(f"{name:<{width}}  {tp * 1e3:11.3f}  {tc * 1e3:11.3f}  {tp / tc:7.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
