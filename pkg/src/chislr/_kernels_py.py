"""Pure-numpy versions of the hot kernels.

Signatures mirror the compiled ``_kernels`` module exactly; callers go through
:mod:`chislr._backend` and never import either module directly.  Inputs are
C-contiguous float64 matrices and an ``intp`` row-to-group map; a map with
values outside ``[0, n_groups)`` raises ``ValueError`` in both backends.
"""
import numpy as np


def _check_groups(rows, row_group, n_groups):
    if row_group.shape[0] != rows:
        raise ValueError(f"row_group has {row_group.shape[0]} entries for {rows} rows")
    if rows and (row_group.min() < 0 or row_group.max() >= n_groups):
        raise ValueError(f"row_group values outside [0, {n_groups})")


def soft_threshold(m, t):
    return np.sign(m) * np.maximum(np.abs(m) - t, 0.0)


def _group_factors(m, row_group, n_groups, t):
    sq = np.bincount(row_group, weights=np.einsum("ij,ij->i", m, m), minlength=n_groups)
    gnorm = np.sqrt(sq)
    safe = np.where(gnorm > 0.0, gnorm, 1.0)
    return np.where(gnorm > 0.0, np.maximum(1.0 - t / safe, 0.0), 0.0)


def group_shrink(m, row_group, n_groups, t):
    _check_groups(m.shape[0], row_group, n_groups)
    f = _group_factors(m, row_group, n_groups, t)
    return m * f[row_group][:, None]


def hierarchical_prox(m, row_group, n_groups, t1, tg):
    return group_shrink(soft_threshold(m, t1), row_group, n_groups, tg)


def prox_gradient(gram, corr, x0, step, t1, tg, row_group, n_groups, iters, momentum):
    """Run ``iters`` proximal-gradient steps on ``0.5 <X, gram X> - <corr, X>``.

    The prox is the sparse-group shrinkage with thresholds ``t1`` (entrywise)
    and ``tg`` (per group); ``momentum`` switches ISTA to FISTA.
    """
    if gram.shape != (gram.shape[0],) * 2 or corr.shape != x0.shape or corr.shape[0] != gram.shape[0]:
        raise ValueError("gram, corr and x0 shapes disagree")
    _check_groups(gram.shape[0], row_group, n_groups)
    x = np.array(x0, dtype=np.float64, copy=True)
    z = x
    t = 1.0
    for _ in range(iters):
        v = z - step * (gram @ z - corr)
        x_new = hierarchical_prox(v, row_group, n_groups, t1, tg)
        if momentum:
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            z = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        else:
            z = x_new
        x = x_new
    return x
