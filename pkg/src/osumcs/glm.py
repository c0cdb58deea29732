"""Canonical-link GLM families, weighted score equations and a damped Newton solver.

Information matrices are stored with a positive sign, ``J = (1/sum w) sum w b''(x'beta) x x'``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

# exp() argument cap for the Poisson cumulant
ETA_CAP = 30.0


class GlmFamily(str, enum.Enum):
    LINEAR = "linear"
    LOGISTIC = "logistic"
    POISSON = "poisson"

    def b(self, t):
        t = np.asarray(t, dtype=float)
        if self is GlmFamily.LINEAR:
            return 0.5 * t * t
        if self is GlmFamily.LOGISTIC:
            return np.logaddexp(0.0, t)
        return np.exp(np.clip(t, -ETA_CAP, ETA_CAP))

    def mean(self, t):
        """b'(t), the conditional mean under the canonical link."""
        t = np.asarray(t, dtype=float)
        if self is GlmFamily.LINEAR:
            return t.copy()
        if self is GlmFamily.LOGISTIC:
            return _expit(t)
        return np.exp(np.clip(t, -ETA_CAP, ETA_CAP))

    def variance(self, t):
        """b''(t)."""
        t = np.asarray(t, dtype=float)
        if self is GlmFamily.LINEAR:
            return np.ones_like(t)
        if self is GlmFamily.LOGISTIC:
            # e^{-|t|} / (1 + e^{-|t|})^2 stays positive where mu (1 - mu) underflows
            e = np.exp(-np.abs(t))
            return e / (1.0 + e) ** 2
        return np.exp(np.clip(t, -ETA_CAP, ETA_CAP))


def _expit(t: NDArray) -> NDArray:
    # split by sign so neither branch overflows
    out = np.empty_like(t, dtype=float)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def cumulant_derivs(family: GlmFamily, t: float) -> tuple[float, float, float]:
    """Return ``(b(t), b'(t), b''(t))`` for a scalar linear predictor."""
    t = float(t)
    if not math.isfinite(t):
        raise ValueError(f"linear predictor must be finite, got {t}")
    family = GlmFamily(family)
    arr = np.array([t])
    return float(family.b(arr)[0]), float(family.mean(arr)[0]), float(family.variance(arr)[0])


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    max_iter: int = 100
    max_halvings: int = 30
    jitter: float = 1e-10


@dataclass(frozen=True)
class FitResult:
    """``score_norm`` is ||sum_i w_i (y_i - b'(beta'x_i)) x_i|| / sum_i w_i."""

    beta: NDArray
    converged: bool
    iterations: int
    score_norm: float
    info: NDArray
    message: str = ""


def _check(X, y, w):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if y.shape[0] != X.shape[0] or w.shape[0] != X.shape[0]:
        raise ValueError(f"dimension mismatch: X has {X.shape[0]} rows, y {y.shape[0]}, w {w.shape[0]}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    return X, y, w


def weighted_score(family: GlmFamily, beta, X, y, w) -> NDArray:
    """sum_i w_i (y_i - b'(beta'x_i)) x_i."""
    X, y, w = _check(X, y, w)
    beta = np.asarray(beta, dtype=float).ravel()
    if beta.shape[0] != X.shape[1]:
        raise ValueError(f"beta has length {beta.shape[0]}, X has {X.shape[1]} columns")
    family = GlmFamily(family)
    return X.T @ (w * (y - family.mean(X @ beta)))


def fisher_info(family: GlmFamily, beta, X, w) -> NDArray:
    """Weighted average information (1/sum w) sum w_i b''(beta'x_i) x_i x_i'."""
    X = np.asarray(X, dtype=float)
    w = np.asarray(w, dtype=float).ravel()
    if w.shape[0] != X.shape[0]:
        raise ValueError("dimension mismatch between X and w")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("all weights are zero")
    beta = np.asarray(beta, dtype=float).ravel()
    d = w * GlmFamily(family).variance(X @ beta)
    J = (X * d[:, None]).T @ X / total
    return 0.5 * (J + J.T)


def _objective(family: GlmFamily, beta, X, y, w) -> float:
    eta = X @ beta
    return float(np.sum(w * (family.b(eta) - y * eta)))


def _solve_spd(H: NDArray, g: NDArray, jitter: float) -> NDArray | None:
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        p = H.shape[0]
        ridge = jitter * max(np.trace(H), np.finfo(float).tiny) / p
        try:
            L = np.linalg.cholesky(H + ridge * np.eye(p))
        except np.linalg.LinAlgError:
            return None
    z = np.linalg.solve(L, g)
    return np.linalg.solve(L.T, z)


def fit_glm(
    family: GlmFamily,
    X,
    y,
    w=None,
    init=None,
    opts: SolverOptions | None = None,
) -> FitResult:
    """Solve the weighted score equation by Newton's method with step halving.

    Never raises on numerical trouble; failure shows up as ``converged=False``
    with a short ``message``.
    """
    family = GlmFamily(family)
    opts = opts or SolverOptions()
    if w is None:
        w = np.ones(np.shape(X)[0])
    X, y, w = _check(X, y, w)
    n_rows, p = X.shape
    if np.count_nonzero(w > 0) < p:
        raise ValueError(f"need at least {p} rows with positive weight")
    beta = np.zeros(p) if init is None else np.array(init, dtype=float).ravel()
    if beta.shape[0] != p or not np.all(np.isfinite(beta)):
        raise ValueError("init must be a finite vector of length p")

    wsum = w.sum()
    msg = ""
    it = 0
    obj = _objective(family, beta, X, y, w)
    grad = X.T @ (w * (y - family.mean(X @ beta)))
    # the stopping rule uses the weight-averaged score, matching the scaling of
    # fisher_info; the raw sum has a roundoff floor that grows with sum(w) and |x|
    gnorm = float(np.linalg.norm(grad)) / wsum
    while gnorm > opts.tol and it < opts.max_iter:
        it += 1
        H = (X * (w * family.variance(X @ beta))[:, None]).T @ X
        step = _solve_spd(0.5 * (H + H.T), grad, opts.jitter)
        if step is None or not np.all(np.isfinite(step)):
            msg = "singular weighted information"
            break
        # near the optimum the objective decrease drops below its roundoff, so a step
        # is also accepted when the score norm shrinks
        slack = 64 * np.finfo(float).eps * max(abs(obj), 1.0)
        t = 1.0
        for _ in range(opts.max_halvings + 1):
            cand = beta + t * step
            cand_obj = _objective(family, cand, X, y, w)
            cand_grad = X.T @ (w * (y - family.mean(X @ cand)))
            cand_norm = float(np.linalg.norm(cand_grad)) / wsum
            if np.isfinite(cand_obj) and (cand_obj <= obj or (cand_obj <= obj + slack and cand_norm < gnorm)):
                break
            t *= 0.5
        else:
            msg = "line search failed"
            break
        if not np.all(np.isfinite(cand)) or not np.isfinite(cand_norm):
            msg = "non-finite iterate"
            break
        beta, obj, grad, gnorm = cand, cand_obj, cand_grad, cand_norm
    converged = gnorm <= opts.tol
    if not converged and not msg:
        msg = f"no convergence after {it} iterations"
    info = (X * (w * family.variance(X @ beta))[:, None]).T @ X / wsum
    return FitResult(
        beta=beta,
        converged=bool(converged),
        iterations=it,
        score_norm=gnorm,
        info=0.5 * (info + info.T),
        message=msg,
    )
