"""Independent reference solvers used as test oracles.

None of these call into ``chislr``; each minimizes the defining objective
numerically so the closed forms in the package are checked, not restated.
"""
import warnings

import cvxpy as cp
import numpy as np

_SOLVER_OPTS = dict(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                    tol_feas=1e-12, tol_ktratio=1e-10)


def _solve(objective, var):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cp.Problem(cp.Minimize(objective)).solve(**_SOLVER_OPTS)
    return np.asarray(var.value, dtype=np.float64).reshape(var.shape)


def _sum_group_norms(x, groups):
    return sum(cp.norm(x[g, :], "fro") for g in groups)


def prox_sparse_group(v, groups, t1, tg):
    """argmin_x ½‖x−v‖² + t1‖x‖₁ + tg Σ_G ‖x^[G]‖_F (cvxpy)."""
    v = np.asarray(v, dtype=np.float64)
    x = cp.Variable(v.shape)
    obj = 0.5 * cp.sum_squares(x - v)
    if t1:
        obj = obj + t1 * cp.sum(cp.abs(x))
    if tg:
        obj = obj + tg * _sum_group_norms(x, [list(g) for g in groups])
    return _solve(obj, x)


def prox_sparse_group_split(v, groups, t1, tg, rho=1.0, iters=20_000, tol=1e-14):
    """Same minimizer as :func:`prox_sparse_group`, by ADMM splitting.

    Splits the objective into f(x) = ½‖x−v‖² + t1‖x‖₁ and g(z) = tg Σ‖z^[G]‖_F
    with x = z.  Each sub-step uses only the prox of a single term, so the
    composition identity under test is never assumed.  Interior-point
    solvers stall near the group-norm kink at about 1e-5; this converges to
    machine precision.
    """
    v = np.asarray(v, dtype=np.float64)
    groups = [list(g) for g in groups]
    z = np.zeros_like(v)
    u = np.zeros_like(v)
    for _ in range(iters):
        w = (v + rho * (z - u)) / (1.0 + rho)
        x = np.sign(w) * np.maximum(np.abs(w) - t1 / (1.0 + rho), 0.0)
        z_old = z
        z = x + u
        for g in groups:
            nrm = np.linalg.norm(z[g])
            z[g] *= max(0.0, 1.0 - tg / (rho * nrm)) if nrm > 0 else 0.0
        u = u + x - z
        if np.abs(x - z).max() < tol and np.abs(z - z_old).max() < tol:
            break
    return z


def prox_nuclear(v, t):
    """argmin_x ½‖x−v‖²_F + t‖x‖_* (cvxpy, SDP)."""
    v = np.asarray(v, dtype=np.float64)
    x = cp.Variable(v.shape)
    return _solve(0.5 * cp.sum_squares(x - v) + t * cp.normNuc(x), x)


def grid_prox_2d(v, t1, tg, lo=-1.0, hi=1.0, step=1e-3):
    """Brute-force minimizer of ½‖x−v‖² + t1‖x‖₁ + tg‖x‖₂ over a square grid."""
    axis = np.arange(lo, hi + step / 2, step)
    a, b = np.meshgrid(axis, axis, indexing="ij")
    f = (0.5 * ((a - v[0]) ** 2 + (b - v[1]) ** 2) + t1 * (np.abs(a) + np.abs(b))
         + tg * np.hypot(a, b))
    i, j = np.unravel_index(np.argmin(f), f.shape)
    return np.array([axis[i], axis[j]])


def lasso_objective(x, y, d, beta):
    return np.abs(x).sum() + 0.5 * beta * np.sum((y - d @ x) ** 2)


def lasso_coordinate_descent(y, d, beta, iters=5000):
    """Cyclic coordinate descent on ‖x‖₁ + (β/2)‖y − Dx‖² for one column."""
    y = np.asarray(y, dtype=np.float64).ravel()
    n = d.shape[1]
    x = np.zeros(n)
    r = y.copy()
    col_sq = np.sum(d * d, axis=0)
    for _ in range(iters):
        for j in range(n):
            if col_sq[j] == 0:
                continue
            rho = d[:, j] @ r + col_sq[j] * x[j]
            new = np.sign(rho) * max(abs(rho) - 1.0 / beta, 0.0) / col_sq[j]
            r += d[:, j] * (x[j] - new)
            x[j] = new
    return x


def sparse_group_objective(x, y, d, groups, beta, lambda_g):
    grp = sum(np.linalg.norm(x[list(g)]) for g in groups)
    return np.abs(x).sum() + lambda_g * grp + 0.5 * beta * np.sum((y - d @ x) ** 2)


def sparse_group_ista(y, d, groups, beta, lambda_g, iters=100_000):
    """Plain proximal gradient with a separately written sparse-group prox."""
    step = 1.0 / (beta * np.linalg.norm(d, 2) ** 2)
    x = np.zeros((d.shape[1], y.shape[1]))
    for _ in range(iters):
        v = x - step * beta * (d.T @ (d @ x - y))
        v = np.sign(v) * np.maximum(np.abs(v) - step, 0.0)
        for g in groups:
            g = list(g)
            nrm = np.linalg.norm(v[g])
            v[g] *= max(0.0, 1.0 - step * lambda_g / nrm) if nrm > 0 else 0.0
        x = v
    return x


def omp_exhaustive_residual(y, d, support):
    """Least-squares residual of ``y`` on ``d[:, support]``."""
    sub = d[:, sorted(support)]
    coef, *_ = np.linalg.lstsq(sub, y, rcond=None)
    return float(np.linalg.norm(y - sub @ coef))
