"""Proximal operators used by the ADMM sub-steps.

Each operator is the exact minimiser of ``0.5 * ||X - M||_F^2 + penalty(X)``:

* :func:`soft_threshold` -- ``t * ||X||_1`` (entrywise),
* :func:`group_shrink` -- ``t * sum_G ||X^[G]||_F`` over row groups,
* :func:`hierarchical_prox` -- the sum of the two above,
* :func:`singular_value_threshold` -- ``t * ||X||_*``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ._backend import kernels
from .errors import DimensionMismatch, InvalidInput
from .linalg import as_matrix, svd_thin


class GroupPartition:
    """Non-overlapping partition of the row indices ``0..n-1`` into ``K`` groups.

    Indices are 0-based.  ``row_group[i]`` gives the group of row ``i``.
    Instances are immutable.
    """

    __slots__ = ("n", "groups", "_row_group")

    def __init__(self, n: int, groups: Sequence[Sequence[int]]):
        n = int(n)
        gs = tuple(np.asarray(g, dtype=np.intp).ravel() for g in groups)
        if n < 1 or not gs:
            raise InvalidInput("partition needs n >= 1 and at least one group")
        seen = np.zeros(n, dtype=np.int64)
        for g in gs:
            if g.size == 0:
                raise InvalidInput("partition groups must be non-empty")
            if g.min() < 0 or g.max() >= n:
                raise InvalidInput(f"group index out of range 0..{n - 1}")
            np.add.at(seen, g, 1)
        if np.any(seen != 1):
            raise InvalidInput("groups must be disjoint and cover every index exactly once")
        for g in gs:
            g.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "groups", gs)
        row_group = np.empty(n, dtype=np.intp)
        for k, g in enumerate(gs):
            row_group[g] = k
        row_group.setflags(write=False)
        object.__setattr__(self, "_row_group", row_group)

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "GroupPartition":
        """Consecutive blocks of the given sizes."""
        edges = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        return cls(int(edges[-1]), [range(a, b) for a, b in zip(edges[:-1], edges[1:])])

    @classmethod
    def from_labels(cls, row_group) -> "GroupPartition":
        """Build from a per-row group index array with values ``0..K-1``."""
        rg = np.asarray(row_group, dtype=np.intp)
        k = int(rg.max()) + 1 if rg.size else 0
        return cls(rg.size, [np.flatnonzero(rg == c) for c in range(k)])

    @classmethod
    def singletons(cls, n: int) -> "GroupPartition":
        return cls(n, [[i] for i in range(n)])

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def row_group(self) -> np.ndarray:
        return self._row_group

    def __eq__(self, other):
        if not isinstance(other, GroupPartition):
            return NotImplemented
        return self.n == other.n and self.k == other.k and all(
            np.array_equal(a, b) for a, b in zip(self.groups, other.groups))

    def __hash__(self):
        return hash((self.n, tuple(tuple(g.tolist()) for g in self.groups)))

    def __setattr__(self, name, value):
        raise AttributeError("GroupPartition is immutable")

    def __reduce__(self):
        return (GroupPartition, (self.n, [g.tolist() for g in self.groups]))

    def __repr__(self):
        sizes = [g.size for g in self.groups]
        return f"GroupPartition(n={self.n}, k={self.k}, sizes={sizes})"


def _check_threshold(t, name="t") -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0:
        raise InvalidInput(f"{name} must be a finite nonnegative number, got {t}")
    return t


def _check_partition(m: np.ndarray, partition: GroupPartition) -> None:
    if partition.n != m.shape[0]:
        raise DimensionMismatch(
            f"partition covers {partition.n} rows but matrix has {m.shape[0]}")


def soft_threshold(m, t: float) -> np.ndarray:
    """Entrywise ``sign(x) * max(|x| - t, 0)``."""
    t = _check_threshold(t)
    return kernels.soft_threshold(as_matrix(m), t)


def group_shrink(m, partition: GroupPartition, t: float) -> np.ndarray:
    """Scale each row group ``V`` by ``max(1 - t / ||V||_F, 0)``; zero groups stay zero."""
    t = _check_threshold(t)
    m = as_matrix(m)
    _check_partition(m, partition)
    return kernels.group_shrink(m, partition.row_group, partition.k, t)


def hierarchical_prox(m, partition: GroupPartition, t1: float, tg: float) -> np.ndarray:
    """Prox of ``t1 * ||X||_1 + tg * sum_G ||X^[G]||_F``.

    The entrywise shrinkage is applied first, then the group shrinkage; this
    order gives the exact prox of the sum.
    """
    t1 = _check_threshold(t1, "t1")
    tg = _check_threshold(tg, "tg")
    m = as_matrix(m)
    _check_partition(m, partition)
    return kernels.hierarchical_prox(m, partition.row_group, partition.k, t1, tg)


def singular_value_threshold(m, t: float) -> np.ndarray:
    """``U diag(max(sigma - t, 0)) V^T``, the prox of ``t * ||X||_*``."""
    t = _check_threshold(t)
    f = svd_thin(m)
    s = np.maximum(f.sigma - t, 0.0)
    k = int(np.count_nonzero(s))
    if k == 0:
        return np.zeros((f.u.shape[0], f.vt.shape[1]))
    return (f.u[:, :k] * s[:k]) @ f.vt[:k]
