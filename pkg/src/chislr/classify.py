"""Minimal-residual classification, SRC and eigenface baselines, confusion matrices."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dictionary import GroupedDictionary
from .errors import DimensionMismatch, InvalidInput
from .linalg import as_matrix, svd_thin
from .solvers import DecompositionResult, omp

EIGENFACE_MODES = ("nearest_neighbor", "nearest_subspace")


@dataclass(frozen=True)
class ClassificationReport:
    residuals: np.ndarray
    predicted: int
    margin: float

    @classmethod
    def from_residuals(cls, residuals) -> "ClassificationReport":
        """Pick the smallest residual; ``np.argmin`` resolves ties to the lowest index."""
        r = np.asarray(residuals, dtype=np.float64)
        if r.ndim != 1 or r.size == 0 or not np.all(np.isfinite(r)):
            raise InvalidInput("residuals must be a non-empty finite vector")
        best = int(np.argmin(r))
        if r.size > 1:
            margin = float(np.partition(r, 1)[1] - r[best])
        else:
            margin = float("inf")
        r.setflags(write=False)
        return cls(residuals=r, predicted=best, margin=margin)


def residual_classify(y, dictionary: GroupedDictionary, result: DecompositionResult
                      ) -> ClassificationReport:
    """``argmin_c ||Y - D_[Gc] X^[Gc] - L||_F``."""
    y = as_matrix(y, "y")
    x, l = result.x, result.l
    if (y.shape != l.shape or x.shape[0] != dictionary.n or x.shape[1] != y.shape[1]
            or y.shape[0] != dictionary.d):
        raise DimensionMismatch(
            f"Y {y.shape}, D {dictionary.atoms.shape}, X {x.shape}, L {l.shape} are inconsistent")
    base = y - l
    res = [np.linalg.norm(base - dictionary.sub(c) @ x[g]) for c, g in
           enumerate(dictionary.partition.groups)]
    return ClassificationReport.from_residuals(res)


def src_classify(y, dictionary: GroupedDictionary, sparsity: int) -> ClassificationReport:
    """Sparse-representation classification of a single vector with OMP coding."""
    y = np.asarray(y, dtype=np.float64).ravel()
    sol = omp(y, dictionary.atoms, sparsity)
    res = [np.linalg.norm(y - dictionary.sub(c) @ sol.coeffs[g])
           for c, g in enumerate(dictionary.partition.groups)]
    return ClassificationReport.from_residuals(res)


@dataclass(frozen=True)
class EigenfaceModel:
    """PCA basis fitted on training vectors plus their projections and labels."""

    mean: np.ndarray
    basis: np.ndarray
    projections: np.ndarray
    labels: np.ndarray
    n_classes: int

    def project(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64).ravel()
        if y.size != self.mean.size:
            raise DimensionMismatch(f"vector length {y.size} vs model dimension {self.mean.size}")
        return self.basis.T @ (y - self.mean)


def default_components(n_train: int, cap: int = 50) -> int:
    return max(1, min(cap, n_train - 1))


def eigenface_fit(train, k_components: int, labels: Sequence[int],
                  n_classes: int | None = None) -> EigenfaceModel:
    """Principal components of mean-centred training columns (d x N).

    ``labels[i]`` is the class index of column ``i``.
    """
    train = as_matrix(train, "train")
    d, n = train.shape
    labels = np.asarray(labels, dtype=np.intp).ravel()
    if labels.size != n:
        raise DimensionMismatch(f"{labels.size} labels for {n} training columns")
    k = int(k_components)
    if not 1 <= k <= min(d, n):
        raise InvalidInput(f"k_components must lie in 1..{min(d, n)}, got {k_components}")
    mean = train.mean(axis=1)
    centred = train - mean[:, None]
    basis = np.ascontiguousarray(svd_thin(centred).u[:, :k])
    n_classes = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    return EigenfaceModel(mean=mean, basis=basis, projections=basis.T @ centred,
                          labels=labels, n_classes=n_classes)


def eigenface_classify(y, model: EigenfaceModel, mode: str = "nearest_subspace"
                       ) -> ClassificationReport:
    """Classify in PCA space.

    ``nearest_neighbor``: class residual is the distance to the closest training
    projection of that class.  ``nearest_subspace``: class residual is the
    least-squares residual of the projection against the span of the class's
    training projections.
    """
    if mode not in EIGENFACE_MODES:
        raise InvalidInput(f"unknown eigenface mode {mode!r}; expected one of {EIGENFACE_MODES}")
    p = model.project(y)
    res = np.empty(model.n_classes)
    for c in range(model.n_classes):
        q = model.projections[:, model.labels == c]
        if q.shape[1] == 0:
            raise InvalidInput(f"class {c} has no training samples")
        if mode == "nearest_neighbor":
            res[c] = np.min(np.linalg.norm(q - p[:, None], axis=0))
        else:
            coef, *_ = np.linalg.lstsq(q, p, rcond=None)
            res[c] = np.linalg.norm(p - q @ coef)
    return ClassificationReport.from_residuals(res)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with rows = ground truth and columns = prediction."""

    counts: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise InvalidInput(f"confusion counts must be square, got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        labels = tuple(self.labels) or tuple(str(i) for i in range(c.shape[0]))
        if len(labels) != c.shape[0]:
            raise InvalidInput(f"{len(labels)} labels for a {c.shape[0]}-class matrix")
        object.__setattr__(self, "labels", labels)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def total_rate(self) -> float:
        return float(np.trace(self.counts)) / self.total if self.total else float("nan")

    def row_normalized(self) -> np.ndarray:
        rows = self.counts.sum(axis=1, keepdims=True).astype(np.float64)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(rows > 0, self.counts / np.where(rows > 0, rows, 1.0), np.nan)

    @property
    def sensitivity(self) -> np.ndarray:
        return np.diag(self.row_normalized()).copy()


def accumulate_confusion(pairs: Iterable[tuple[int, ClassificationReport]], k: int,
                         labels: Sequence[str] = ()) -> ConfusionMatrix:
    """Count ``(truth, report)`` pairs into a ``k x k`` matrix."""
    counts = np.zeros((k, k), dtype=np.int64)
    for truth, report in pairs:
        pred = report.predicted if isinstance(report, ClassificationReport) else int(report)
        if not (0 <= truth < k and 0 <= pred < k):
            raise InvalidInput(f"class index out of range: truth={truth}, predicted={pred}")
        counts[truth, pred] += 1
    return ConfusionMatrix(counts, tuple(labels))


@dataclass(frozen=True)
class ConfusionSummary:
    """Statistics over repeated runs (one :class:`ConfusionMatrix` per run).

    Rates are averaged per run; the standard deviation is the population
    standard deviation (``ddof=0``) of the per-run total rates.
    """

    runs: tuple
    labels: tuple = field(default=())

    @property
    def rates(self) -> np.ndarray:
        return np.array([m.total_rate for m in self.runs])

    @property
    def rate_mean(self) -> float:
        return float(np.mean(self.rates))

    @property
    def rate_std(self) -> float:
        return float(np.std(self.rates))

    @property
    def pooled(self) -> ConfusionMatrix:
        return ConfusionMatrix(sum(m.counts for m in self.runs), self.labels)

    @property
    def mean_normalized(self) -> np.ndarray:
        return np.nanmean(np.stack([m.row_normalized() for m in self.runs]), axis=0)

    @property
    def sensitivity_mean(self) -> np.ndarray:
        return np.diag(self.mean_normalized).copy()


def aggregate_runs(matrices: Sequence[ConfusionMatrix]) -> ConfusionSummary:
    if not matrices:
        raise InvalidInput("need at least one run to aggregate")
    ks = {m.k for m in matrices}
    if len(ks) != 1:
        raise DimensionMismatch(f"runs disagree on class count: {sorted(ks)}")
    return ConfusionSummary(tuple(matrices), matrices[0].labels)


def _headers(labels: Sequence[str]) -> list[str]:
    """Two-letter column heads (``An``, ``Co``, ...); full names if two would collide."""
    short = [s[:2].capitalize() for s in labels]
    return short if len(set(short)) == len(short) else list(labels)


def format_table(values: np.ndarray, labels: Sequence[str], fmt: str = "{:.2f}",
                 corner: str = "", row_labels: Sequence[str] | None = None) -> str:
    """Aligned plain-text table, rows = ground truth, columns = prediction."""
    heads = _headers(labels)
    rows = heads if row_labels is None else list(row_labels)
    cells = [[fmt.format(v) if np.isfinite(v) else "-" for v in row] for row in values]
    width = max([len(h) for h in heads] + [len(c) for row in cells for c in row])
    first = max([len(r) for r in rows] + [len(corner)])
    out = [" ".join([corner.ljust(first)] + [h.rjust(width) for h in heads])]
    out.extend(" ".join([r.ljust(first)] + [c.rjust(width) for c in row])
               for r, row in zip(rows, cells))
    return "\n".join(out) + "\n"


def to_csv(values: np.ndarray, labels: Sequence[str], fmt: str = "{:.17g}") -> str:
    buf = io.StringIO()
    buf.write("truth\\pred," + ",".join(labels) + "\n")
    for lab, row in zip(labels, values):
        buf.write(lab + "," + ",".join(fmt.format(v) for v in row) + "\n")
    return buf.getvalue()
