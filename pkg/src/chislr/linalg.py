"""Dense matrix helpers: validation, thin SVD for tall-thin matrices, norms, CSV I/O.

Matrices are plain ``numpy.ndarray`` objects of dtype float64.  Functions never
modify their inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BadMatrixFile, DimensionMismatch, InvalidInput

# relative cut below which singular values are treated as exactly zero
SVD_RANK_TOL = 1e-12


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite, C-contiguous 2-D float64 array.

    A 1-D input is read as a single column.
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise InvalidInput(f"{name} must be 2-D, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise InvalidInput(f"{name} must be non-empty, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInput(f"{name} contains non-finite entries")
    return np.ascontiguousarray(a)


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``m = u @ diag(sigma) @ vt`` with ``r = min(rows, cols)``."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.vt

    @property
    def rank(self) -> int:
        if self.sigma.size == 0 or self.sigma[0] == 0.0:
            return 0
        return int(np.count_nonzero(self.sigma > SVD_RANK_TOL * self.sigma[0]))


def _complete_basis(q: np.ndarray, total: int) -> np.ndarray:
    """Extend the orthonormal columns of ``q`` to ``total`` columns.

    Candidates are standard basis vectors, taken in order, so the result is
    deterministic.
    """
    d = q.shape[0]
    cols = [q[:, j] for j in range(q.shape[1])]
    for i in range(d):
        if len(cols) == total:
            break
        e = np.zeros(d)
        e[i] = 1.0
        for _ in range(2):
            for c in cols:
                e -= (c @ e) * c
        nrm = np.linalg.norm(e)
        if nrm > 1e-8:
            cols.append(e / nrm)
    return np.column_stack(cols) if cols else np.zeros((d, 0))


def _svd_tall(m: np.ndarray) -> SvdFactors:
    # rows >= cols: eigendecompose the small cols x cols Gram matrix
    _, v = np.linalg.eigh(m.T @ m)
    # sigma from the columns of M V rather than sqrt(eigenvalue): squaring would
    # limit zero singular values to ~sqrt(eps) * smax instead of ~eps * smax
    b = m @ v
    sigma = np.sqrt(np.einsum("ij,ij->j", b, b))
    order = np.argsort(-sigma, kind="stable")
    sigma, v, b = sigma[order], v[:, order], b[:, order]
    r = m.shape[1]
    smax = sigma[0] if r else 0.0
    keep = sigma > SVD_RANK_TOL * smax if smax > 0 else np.zeros(r, dtype=bool)
    k = int(np.count_nonzero(keep))
    sigma[~keep] = 0.0
    u = np.zeros((m.shape[0], r))
    if k:
        # one QR pass restores orthonormality of U = M V / sigma
        q, rr = np.linalg.qr(b[:, :k] / sigma[:k])
        signs = np.where(np.diag(rr) < 0, -1.0, 1.0)
        u[:, :k] = q * signs
    if k < r:
        u = _complete_basis(u[:, :k], r)
    return SvdFactors(u=u, sigma=sigma, vt=np.ascontiguousarray(v.T))


def svd_thin(m) -> SvdFactors:
    """Thin SVD through the eigendecomposition of the smaller Gram matrix.

    Cost is O(d * tau^2) for a d x tau input with tau << d.  Singular values
    below ``1e-12 * max(sigma)`` are set to zero; the matching singular
    vectors are completed to an orthonormal set.
    """
    m = as_matrix(m)
    # scale first so the Gram product cannot overflow
    s = float(np.abs(m).max())
    scale = s if s > 0 else 1.0
    if m.shape[0] >= m.shape[1]:
        f = _svd_tall(m / scale)
        return SvdFactors(u=f.u, sigma=f.sigma * scale, vt=f.vt)
    f = _svd_tall(np.ascontiguousarray(m.T) / scale)
    return SvdFactors(u=np.ascontiguousarray(f.vt.T), sigma=f.sigma * scale,
                      vt=np.ascontiguousarray(f.u.T))


NORM_KINDS = ("entrywise_l1", "frobenius", "nuclear", "spectral")


def norm(m, kind: str = "frobenius") -> float:
    """Matrix norm: ``entrywise_l1``, ``frobenius``, ``nuclear`` or ``spectral``."""
    m = as_matrix(m)
    if kind == "entrywise_l1":
        return float(np.abs(m).sum())
    if kind == "frobenius":
        return float(np.sqrt(np.sum(m * m)))
    if kind == "nuclear":
        return float(svd_thin(m).sigma.sum())
    if kind == "spectral":
        return float(svd_thin(m).sigma[0])
    raise InvalidInput(f"unknown norm kind {kind!r}; expected one of {NORM_KINDS}")


def write_csv(path, m) -> None:
    """Write ``rows,cols`` then one row per line at 17 significant digits."""
    m = as_matrix(m)
    lines = [f"{m.shape[0]},{m.shape[1]}"]
    lines.extend(",".join(format(x, ".17g") for x in row) for row in m)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> np.ndarray:
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise BadMatrixFile(f"{path}: empty matrix file")
    try:
        rows, cols = (int(s) for s in text[0].split(","))
        data = [[float(s) for s in line.split(",")] for line in text[1:]]
    except ValueError as exc:
        raise BadMatrixFile(f"{path}: malformed matrix file ({exc})") from None
    if len(data) != rows or any(len(r) != cols for r in data):
        raise BadMatrixFile(f"{path}: header says {rows}x{cols} but body disagrees")
    return as_matrix(np.array(data, dtype=np.float64).reshape(rows, cols), str(path))
