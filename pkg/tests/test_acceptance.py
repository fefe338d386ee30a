"""Acceptance criteria, each checked at its stated tolerance.

Every test records a one-line verdict that is printed in the pytest terminal
summary under "acceptance criteria".
"""
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from chislr.classify import residual_classify
from chislr.dataio import generate_synthetic
from chislr.experiment import resolve_config, run_experiment
from chislr.prox import (GroupPartition, group_shrink, hierarchical_prox,
                         singular_value_threshold, soft_threshold)
from chislr.solvers import SolverConfig, admm_solve, omp

import oracles
from acceptance_log import record

N_PROX_INPUTS = 100
N_SEEDS = 50


def _random_prox_input(seed):
    rng = np.random.default_rng(seed)
    rows, cols = int(rng.integers(1, 9)), int(rng.integers(1, 6))
    m = rng.standard_normal((rows, cols)) * rng.uniform(0.2, 3.0)
    sizes = []
    while sum(sizes) < rows:
        sizes.append(int(rng.integers(1, rows - sum(sizes) + 1)))
    t1, tg = rng.uniform(0, 1.5, 2)
    return m, GroupPartition.contiguous(sizes), float(t1), float(tg)


# ---------------------------------------------------------------- 1

def test_criterion_1_prox_oracle_equivalence():
    worst = {"soft_threshold": 0.0, "group_shrink": 0.0, "hierarchical_prox": 0.0,
             "singular_value_threshold": 0.0}
    for seed in range(N_PROX_INPUTS):
        m, p, t1, tg = _random_prox_input(seed)
        checks = {
            "soft_threshold": (soft_threshold(m, t1),
                               oracles.prox_sparse_group(m, p.groups, t1, 0.0)),
            "group_shrink": (group_shrink(m, p, tg),
                             oracles.prox_sparse_group(m, p.groups, 0.0, tg)),
            "hierarchical_prox": (hierarchical_prox(m, p, t1, tg),
                                  oracles.prox_sparse_group_split(m, p.groups, t1, tg)),
            "singular_value_threshold": (singular_value_threshold(m, t1),
                                         oracles.prox_nuclear(m, t1)),
        }
        for name, (ours, ref) in checks.items():
            worst[name] = max(worst[name], float(np.abs(ours - ref).max()))
    v = np.array([0.9, 0.4])
    grid_err = float(np.abs(hierarchical_prox(v[:, None], GroupPartition.contiguous([2]), 0.5, 0.2)[:, 0]
                            - oracles.grid_prox_2d(v, 0.5, 0.2)).max())
    ok = all(e <= 1e-6 for e in worst.values()) and grid_err <= 1e-3
    detail = ", ".join(f"{k} max err {e:.1e}" for k, e in worst.items())
    record(1, "prox oracle equivalence", ok,
           f"{N_PROX_INPUTS} inputs each; {detail}; 2-D grid err {grid_err:.1e} (tol 1e-6 / 1e-3)")
    assert ok, worst


# ---------------------------------------------------------------- 2

def test_criterion_2_admm_synthetic_recovery():
    converged = correct = 0
    for seed in range(N_SEEDS):
        p = generate_synthetic(seed)
        res = admm_solve(p.y, p.dictionary, SolverConfig(max_outer_iters=600))
        converged += res.final_residual < 1e-3
        correct += residual_classify(p.y, p.dictionary, res).predicted == p.active_class
    frac, acc = converged / N_SEEDS, correct / N_SEEDS
    ok = frac >= 0.95 and acc >= 0.9
    record(2, "ADMM synthetic recovery", ok,
           f"residual < 1e-3 on {frac:.0%} of {N_SEEDS} seeds (need 95%), accuracy {acc:.2f} "
           "(need 0.9)")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_3_degeneracies():
    rng = np.random.default_rng(33)
    exact = True
    for seed in range(N_PROX_INPUTS):
        m, p, t1, _ = _random_prox_input(seed)
        exact &= np.array_equal(hierarchical_prox(m, p, t1, 0.0), soft_threshold(m, t1))
    p = generate_synthetic(0)
    y = rng.standard_normal(p.y.shape)
    ratios = [np.linalg.norm(admm_solve(y, p.dictionary, SolverConfig.for_model(model, lambda_L=1e6)).l)
              / np.linalg.norm(y) for model in ("chislr", "slr")]
    ok = bool(exact) and max(ratios) < 1e-3
    record(3, "degeneracy checks", ok,
           f"lambda_g = 0 prox bit-identical to soft threshold: {bool(exact)}; "
           f"lambda_L = 1e6 gives max ||L||/||Y|| = {max(ratios):.1e} (need < 1e-3)")
    assert ok


# ---------------------------------------------------------------- 4

def _true_group_energy(x, problem):
    g = problem.dictionary.partition.groups[problem.active_class]
    total = np.sum(x * x)
    return float(np.sum(x[g] ** 2) / total) if total > 0 else 0.0


def test_criterion_4_group_sparsity_structure():
    wins = concentrated = 0
    for seed in range(N_SEEDS):
        p = generate_synthetic(seed, noise_sigma=0.01)
        ours = _true_group_energy(admm_solve(p.y, p.dictionary).x, p)
        slr = _true_group_energy(admm_solve(p.y, p.dictionary, SolverConfig.for_model("slr")).x, p)
        concentrated += ours >= 0.8
        wins += ours >= 0.8 and ours > slr
    ok = wins / N_SEEDS >= 0.7
    record(4, "group-sparsity structure", ok,
           f"C-HiSLR >= 80% energy in true group on {concentrated}/{N_SEEDS} seeds; "
           f"wins {wins}/{N_SEEDS} pairs against SLR (need 70%)")
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5_omp_exactness():
    trials = success = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        d = rng.standard_normal((64, 32))
        d /= np.linalg.norm(d, axis=0)
        for k in range(1, 5):
            support = rng.choice(32, k, replace=False)
            x = np.zeros(32)
            x[support] = rng.standard_normal(k)
            sol = omp(d @ x, d, k)
            trials += 1
            success += (set(sol.support) == set(support.tolist())
                        and oracles.omp_exhaustive_residual(d @ x, d, sol.support) < 1e-10)
    ok = success / trials >= 0.95
    record(5, "OMP exactness", ok,
           f"{success}/{trials} exact recoveries over 100 seeds x k = 1..4 (need 95%)")
    assert ok


# ---------------------------------------------------------------- 6

CKPLUS = os.environ.get("CHISLR_CKPLUS", "")

PUBLISHED = {"chislr": (0.80, 0.10), "slr": (0.70, 0.20), "src": (0.80, 0.10)}


@pytest.mark.skipif(not CKPLUS or not Path(CKPLUS).is_dir(),
                    reason="set CHISLR_CKPLUS to a CK+ tree (<class>/<sequence>/<frame>.pgm)")
@pytest.mark.slow
def test_criterion_6_published_rates():
    rates = {}
    for model in PUBLISHED:
        over = {"experiment.model": model, "data.path": CKPLUS, "experiment.runs": 20,
                "experiment.train_per_class": 15, "experiment.test_per_class": 10}
        if model != "src":
            over["solver.lambda_L"] = 10.0
        if model == "chislr":
            over.update({"solver.lambda_g": 4.5, "solver.max_outer_iters": 600})
        rates[model] = run_experiment(resolve_config({}, over)).summary.rate_mean
    ok = all(abs(rates[m] - target) <= tol for m, (target, tol) in PUBLISHED.items())
    record(6, "published recognition rates", ok,
           ", ".join(f"{m} {rates[m]:.3f} (target {t:.2f} +/- {tol:.2f})"
                     for m, (t, tol) in PUBLISHED.items()))
    assert ok


def test_criterion_6_skip_notice():
    if not CKPLUS or not Path(CKPLUS).is_dir():
        record(6, "published recognition rates", None,
               "dataset absent (set CHISLR_CKPLUS); skipped, not failed")
        pytest.skip("CK+ dataset not available")


# ---------------------------------------------------------------- 7

SMALL_CONFIG = """\
[experiment]
runs = 2
train_per_class = 3
test_per_class = 2
[synthetic]
d = 32
classes = 3
per_class = 6
frames = 9
[solver]
max_outer_iters = 80
"""


def _cli(args, cwd):
    proc = subprocess.run([sys.executable, "-m", "chislr"] + args, capture_output=True,
                          cwd=cwd, check=False)
    return proc.returncode, proc.stdout.replace(str(cwd).encode(), b"<tmp>")


def _tree(root):
    return {p.relative_to(root): p.read_bytes() for p in sorted(Path(root).rglob("*"))
            if p.is_file()}


def test_criterion_7_determinism(tmp_path):
    (tmp_path / "small.ini").write_text(SMALL_CONFIG)
    commands = {"synth": lambda out: ["synth", "--seed", "7", "--out", out]}
    for model in ("chislr", "slr", "src", "eigenface_nn", "eigenface_ns"):
        commands[f"benchmark-{model}"] = (lambda out, model=model: [
            "benchmark", "--config", "small.ini", "--model", model, "--seed", "3", "--out", out])
    commands["solve"] = lambda out: ["solve", "--y", "p0/Y.csv", "--dict", "p0/dictionary",
                                     "--out", out]
    _cli(["synth", "--seed", "7", "--out", "p0"], tmp_path)
    printed = {
        "classify": ["classify", "--y", "p0/Y.csv", "--dict", "p0/dictionary"],
        "classify-src": ["classify", "--y", "p0/dictionary/atoms.csv", "--dict", "p0/dictionary",
                         "--model", "src"],
        "inspect": ["inspect", "p0/Y.csv"],
    }
    mismatched = []
    for name, build in commands.items():
        outs = []
        for attempt in ("a", "b"):
            code, _ = _cli(build(f"{name}-{attempt}"), tmp_path)
            assert code == 0, name
            outs.append(_tree(tmp_path / f"{name}-{attempt}"))
        if outs[0] != outs[1] or not outs[0]:
            mismatched.append(name)
    for name, args in printed.items():
        first, second = _cli(args, tmp_path), _cli(args, tmp_path)
        if first != second or (name != "classify-src" and first[0] != 0):
            mismatched.append(name)
    n = len(commands) + len(printed)
    ok = not mismatched
    record(7, "determinism", ok,
           f"{n - len(mismatched)}/{n} command invocations byte-identical across two runs"
           + (f"; differing: {', '.join(mismatched)}" if mismatched else ""))
    assert ok, mismatched
