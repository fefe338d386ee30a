"""ADMM for ``min f(X) + lambda_L ||L||_*  s.t.  Y = D X + L`` and the OMP baseline.

Two choices of ``f`` are supported:

* SLR: ``f(X) = ||X||_1``; the X-step is a Lasso solved by FISTA.
* C-HiSLR: ``f(X) = ||X||_1 + lambda_g * sum_G ||X^[G]||_F``; the X-step is
  linearised around the previous iterate (proximal-gradient sub-iterations).

Every outer iteration performs, in order::

    L      <- SVT(Y - D X + Lambda / beta, lambda_L / beta)
    X      <- argmin f(X) + beta/2 ||Y - D X - L + Lambda / beta||_F^2   (approx.)
    Lambda <- Lambda + beta (Y - D X - L)
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import NamedTuple

import numpy as np

from ._backend import kernels
from .dictionary import GroupedDictionary
from .errors import DimensionMismatch, InvalidConfig, InvalidInput, NonFiniteIterate
from .linalg import as_matrix, norm
from .prox import singular_value_threshold

log = logging.getLogger(__name__)

MODELS = ("chislr", "slr")


@dataclass(frozen=True)
class SolverConfig:
    """Hyperparameters of :func:`admm_solve`.

    ``lambda_g == 0`` selects SLR.  ``inner_iters`` is the FISTA budget of the
    SLR Lasso step; ``linearized_iters`` is the number of proximal-gradient
    sub-iterations of the C-HiSLR X-step.
    """

    lambda_L: float = 10.0
    lambda_g: float = 4.5
    beta: float = 1.0
    max_outer_iters: int = 600
    inner_iters: int = 100
    linearized_iters: int = 1
    rel_tol: float = 1e-6
    step_scale: float = 1.0

    def __post_init__(self):
        for name in ("lambda_L", "lambda_g", "beta", "rel_tol", "step_scale"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not np.isfinite(v):
                raise InvalidConfig(f"{name} must be a finite number, got {v!r}")
        if self.lambda_L < 0 or self.lambda_g < 0 or self.rel_tol < 0:
            raise InvalidConfig("lambda_L, lambda_g and rel_tol must be nonnegative")
        if self.beta <= 0:
            raise InvalidConfig(f"beta must be positive, got {self.beta}")
        if not 0 < self.step_scale <= 1:
            raise InvalidConfig(f"step_scale must lie in (0, 1], got {self.step_scale}")
        for name in ("max_outer_iters", "inner_iters", "linearized_iters"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidConfig(f"{name} must be a positive integer, got {v!r}")

    @classmethod
    def for_model(cls, model: str, **overrides) -> "SolverConfig":
        """Defaults for ``"chislr"`` (600 outer iterations) or ``"slr"`` (100, no group term)."""
        if model == "chislr":
            base = cls()
        elif model == "slr":
            base = cls(lambda_g=0.0, max_outer_iters=100)
        else:
            raise InvalidConfig(f"unknown model {model!r}; expected one of {MODELS}")
        return replace(base, **overrides)

    @property
    def model(self) -> str:
        return "slr" if self.lambda_g == 0 else "chislr"

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DecompositionResult:
    x: np.ndarray
    l: np.ndarray
    residual_history: tuple
    iterations_run: int
    converged: bool
    model: str
    multipliers: np.ndarray = field(repr=False, default=None)

    @property
    def final_residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")


class _LeastSquaresOp:
    """Cached ``D``, ``D^T D`` and ``||D||_2^2`` for repeated X-steps."""

    def __init__(self, d: np.ndarray):
        self.d = as_matrix(d, "dictionary")
        if not np.any(self.d):
            raise InvalidInput("dictionary is identically zero")
        self.dt = np.ascontiguousarray(self.d.T)
        self.gram = np.ascontiguousarray(self.dt @ self.d)
        self.lipschitz = norm(self.d, "spectral") ** 2
        self._scaled = {}

    def scaled_gram(self, beta: float) -> np.ndarray:
        g = self._scaled.get(beta)
        if g is None:
            g = self._scaled[beta] = np.ascontiguousarray(beta * self.gram)
        return g

    def steps(self, y_eff, beta, x0, iters, step, t1, tg, row_group, n_groups, momentum):
        if y_eff.shape[0] != self.d.shape[0]:
            raise DimensionMismatch(
                f"observation has {y_eff.shape[0]} rows, dictionary {self.d.shape[0]}")
        if x0 is None:
            x0 = np.zeros((self.d.shape[1], y_eff.shape[1]))
        x0 = np.ascontiguousarray(x0, dtype=np.float64)
        if x0.shape != (self.d.shape[1], y_eff.shape[1]):
            raise DimensionMismatch(f"warm start has shape {x0.shape}")
        corr = np.ascontiguousarray(beta * (self.dt @ y_eff))
        return kernels.prox_gradient(self.scaled_gram(beta), corr, x0, step, t1, tg, row_group, n_groups,
                                     int(iters), bool(momentum))


def _check_iters(iters):
    if int(iters) < 1:
        raise InvalidInput(f"iteration count must be positive, got {iters}")


def x_step_slr(y_eff, d, beta: float, iters: int, x0=None, momentum: bool = True,
               _op: _LeastSquaresOp | None = None) -> np.ndarray:
    """Approximate ``argmin ||X||_1 + beta/2 ||y_eff - D X||_F^2`` column by column.

    FISTA with step ``1 / (beta ||D||_2^2)``, ``iters`` iterations, started
    from ``x0`` (zeros by default).  ``momentum=False`` gives plain ISTA.
    """
    _check_iters(iters)
    op = _op or _LeastSquaresOp(d)
    y_eff = as_matrix(y_eff, "y_eff")
    step = 1.0 / (beta * op.lipschitz)
    # single dummy group with tg = 0: the group stage is the identity
    rg = np.zeros(op.d.shape[1], dtype=np.intp)
    return op.steps(y_eff, beta, x0, iters, step, step, 0.0, rg, 1, momentum)


def x_step_chislr(y_eff, dictionary: GroupedDictionary, beta: float, lambda_g: float,
                  iters: int, step_scale: float = 1.0, x0=None,
                  _op: _LeastSquaresOp | None = None) -> np.ndarray:
    """Linearised C-HiSLR X-step.

    ``iters`` proximal-gradient steps on ``beta/2 ||y_eff - D X||_F^2`` with
    step ``eta = step_scale / (beta ||D||_2^2)``, each followed by the
    sparse-group prox with thresholds ``(eta, eta * lambda_g)``.  Warm-started
    at ``x0`` (the previous outer iterate).
    """
    _check_iters(iters)
    op = _op or _LeastSquaresOp(dictionary.atoms)
    y_eff = as_matrix(y_eff, "y_eff")
    eta = step_scale / (beta * op.lipschitz)
    p = dictionary.partition
    return op.steps(y_eff, beta, x0, iters, eta, eta, eta * lambda_g, p.row_group, p.k,
                    False)


def admm_solve(y, dictionary: GroupedDictionary, cfg: SolverConfig | None = None
               ) -> DecompositionResult:
    """Decompose ``y`` into ``D X + L`` with sparse (group-sparse) ``X`` and low-rank ``L``.

    Starts from ``X = L = Lambda = 0`` and stops when
    ``||Y - DX - L||_F / ||Y||_F <= rel_tol`` or after ``max_outer_iters``.

    Raises
    ------
    DimensionMismatch
        If ``y`` and the dictionary disagree on the atom dimension.
    NonFiniteIterate
        If any iterate becomes NaN/Inf; the residual history is attached.
    """
    cfg = cfg or SolverConfig()
    y = as_matrix(y, "y")
    if y.shape[0] != dictionary.d:
        raise DimensionMismatch(
            f"observation is {y.shape[0]}x{y.shape[1]} but dictionary atoms have "
            f"dimension {dictionary.d} (dictionary is {dictionary.d}x{dictionary.n})")
    op = _LeastSquaresOp(dictionary.atoms)
    beta = cfg.beta
    model = cfg.model
    x = np.zeros((dictionary.n, y.shape[1]))
    lam = np.zeros_like(y)
    l = np.zeros_like(y)
    ynorm = float(np.linalg.norm(y))
    scale = ynorm if ynorm > 0 else 1.0
    history = []
    converged = False
    for k in range(cfg.max_outer_iters):
        target = y - op.d @ x + lam / beta
        if not np.all(np.isfinite(target)):
            raise NonFiniteIterate(f"non-finite iterate at outer iteration {k + 1}", history)
        l = singular_value_threshold(target, cfg.lambda_L / beta)
        y_eff = y - l + lam / beta
        if model == "slr":
            x = x_step_slr(y_eff, None, beta, cfg.inner_iters, x0=x, _op=op)
        else:
            x = x_step_chislr(y_eff, dictionary, beta, cfg.lambda_g, cfg.linearized_iters,
                              cfg.step_scale, x0=x, _op=op)
        resid = y - op.d @ x - l
        lam = lam + beta * resid
        r = float(np.linalg.norm(resid)) / scale
        history.append(r)
        if not (np.isfinite(r) and np.all(np.isfinite(x)) and np.all(np.isfinite(lam))):
            raise NonFiniteIterate(f"non-finite iterate at outer iteration {k + 1}", history)
        if r <= cfg.rel_tol:
            converged = True
            break
    log.debug("admm %s: %d iterations, residual %.3e", model, len(history), history[-1])
    return DecompositionResult(x=x, l=l, residual_history=tuple(history),
                               iterations_run=len(history), converged=converged,
                               model=model, multipliers=lam)


class OmpResult(NamedTuple):
    support: tuple
    coeffs: np.ndarray
    residual_norms: tuple


def omp(y, d, sparsity: int, tol: float = 1e-10) -> OmpResult:
    """Orthogonal Matching Pursuit.

    Greedily adds the atom most correlated with the residual and refits all
    selected coefficients by (minimum-norm) least squares.  Stops after
    ``sparsity`` atoms or once ``||r|| < tol * max(1, ||y||)``.

    Returns the support in selection order, the full coefficient vector and
    the residual norm after each step (starting with ``||y||``).
    """
    d = as_matrix(d, "dictionary")
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size != d.shape[0]:
        raise DimensionMismatch(f"signal length {y.size} vs atom dimension {d.shape[0]}")
    if not np.all(np.isfinite(y)):
        raise InvalidInput("signal contains non-finite entries")
    n = d.shape[1]
    if not 1 <= int(sparsity) <= n:
        raise InvalidInput(f"sparsity must lie in 1..{n}, got {sparsity}")
    coeffs = np.zeros(n)
    support: list[int] = []
    r = y.copy()
    rnorm = float(np.linalg.norm(r))
    history = [rnorm]
    stop = tol * max(1.0, rnorm)
    sub = np.zeros(0)
    while len(support) < sparsity and rnorm >= stop:
        corr = np.abs(d.T @ r)
        corr[support] = -1.0
        j = int(np.argmax(corr))
        if corr[j] <= 0.0:
            break
        support.append(j)
        sub, *_ = np.linalg.lstsq(d[:, support], y, rcond=None)
        r = y - d[:, support] @ sub
        rnorm = float(np.linalg.norm(r))
        history.append(rnorm)
    if support:
        coeffs[support] = sub
    return OmpResult(tuple(support), coeffs, tuple(history))


def sparsity_from_fraction(fraction: float, n_atoms: int) -> int:
    """``ceil(fraction * n_atoms)``, clipped to ``1..n_atoms``."""
    if not 0 < fraction <= 1:
        raise InvalidConfig(f"sparsity fraction must lie in (0, 1], got {fraction}")
    return int(min(n_atoms, max(1, np.ceil(fraction * n_atoms - 1e-12))))


__all__ = ["SolverConfig", "DecompositionResult", "admm_solve", "x_step_slr", "x_step_chislr",
           "omp", "OmpResult", "sparsity_from_fraction", "MODELS"]
