"""Class-partitioned dictionary of training atoms."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidInput, ZeroAtom
from .linalg import as_matrix
from .prox import GroupPartition

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class GroupedDictionary:
    """Atoms ``D`` (d x n, unit columns) with a class partition of the columns.

    Use :meth:`build` to normalise raw columns; the constructor only checks.
    """

    atoms: np.ndarray
    partition: GroupPartition
    labels: tuple
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        atoms = as_matrix(self.atoms, "atoms")
        atoms.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if self.partition.n != atoms.shape[1]:
            raise DimensionMismatch(
                f"partition covers {self.partition.n} columns, dictionary has {atoms.shape[1]}")
        if len(self.labels) != self.partition.k:
            raise InvalidInput(f"{len(self.labels)} labels for {self.partition.k} groups")
        norms = np.linalg.norm(atoms, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise InvalidInput("dictionary columns must have unit l2 norm; use GroupedDictionary.build")

    @classmethod
    def build(cls, columns, partition: GroupPartition, labels: Sequence[str] | None = None,
              meta: dict | None = None) -> "GroupedDictionary":
        """Normalise ``columns`` to unit length and attach the partition.

        Raises :class:`ZeroAtom` if any column is identically zero.
        """
        cols = as_matrix(columns, "columns")
        norms = np.linalg.norm(cols, axis=0)
        bad = np.flatnonzero(norms == 0.0)
        if bad.size:
            raise ZeroAtom(f"zero dictionary column(s) at index {bad.tolist()}")
        if labels is None:
            labels = [str(c) for c in range(partition.k)]
        return cls(cols / norms, partition, tuple(labels), dict(meta or {}))

    @property
    def d(self) -> int:
        return self.atoms.shape[0]

    @property
    def n(self) -> int:
        return self.atoms.shape[1]

    @property
    def k(self) -> int:
        return self.partition.k

    def sub(self, c: int) -> np.ndarray:
        """Columns of class ``c``."""
        return self.atoms[:, self.partition.groups[c]]
