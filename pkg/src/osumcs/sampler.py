"""Selection scores, budget normalization with capping, and Poisson sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .glm import GlmFamily

MIN_PROB = 1e-8


class SingularInformationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SamplingPlan:
    pi: NDArray
    indicators: NDArray
    target_n: float

    @property
    def realized_m(self) -> int:
        return int(self.indicators.sum())

    @property
    def selected(self) -> NDArray:
        return np.flatnonzero(self.indicators)


def _inv_info_norms(J, X) -> NDArray:
    """Row norms ||J^{-1} x_i||."""
    J = np.asarray(J, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or J.shape != (X.shape[1], X.shape[1]):
        raise ValueError(f"J {J.shape} incompatible with X {X.shape}")
    singular = SingularInformationError("pilot information matrix is singular; enlarge the pilot sample")
    if not np.all(np.isfinite(J)) or np.trace(J) <= 0:
        raise singular
    try:
        L = np.linalg.cholesky(0.5 * (J + J.T))
    except np.linalg.LinAlgError:
        p = J.shape[0]
        ridge = 1e-10 * np.trace(J) / p
        try:
            L = np.linalg.cholesky(0.5 * (J + J.T) + ridge * np.eye(p))
        except np.linalg.LinAlgError:
            raise singular from None
    Z = np.linalg.solve(L, X.T)
    norms = np.linalg.norm(np.linalg.solve(L.T, Z), axis=0)
    if not np.all(np.isfinite(norms)):
        raise singular
    return norms


def osumcs_scores(root_moment, J, X) -> NDArray:
    """Surrogate-aware scores root_moment_i * ||J^{-1} x_i||."""
    root_moment = np.asarray(root_moment, dtype=float).ravel()
    if root_moment.shape[0] != np.shape(X)[0]:
        raise ValueError("root_moment and X disagree on N")
    return root_moment * _inv_info_norms(J, X)


def osumc_scores(family: GlmFamily, beta_pilot, J, X) -> NDArray:
    """Model-based scores sqrt(b''(beta'x_i)) * ||J^{-1} x_i|| (no surrogate)."""
    X = np.asarray(X, dtype=float)
    sd = np.sqrt(GlmFamily(family).variance(X @ np.asarray(beta_pilot, dtype=float)))
    return sd * _inv_info_norms(J, X)


def uniform_scores(N: int) -> NDArray:
    return np.ones(N)


def normalize_cap(v, n: float) -> NDArray:
    """Probabilities proportional to v summing to n, with water-filling at 1."""
    v = np.asarray(v, dtype=float).ravel()
    N = v.shape[0]
    if not 0 < n <= N:
        raise ValueError(f"budget n={n} must lie in (0, N={N}]")
    if np.any(~np.isfinite(v)) or np.any(v <= 0):
        raise ValueError("scores must be finite and strictly positive")
    if n == N:
        return np.ones(N)
    pi = np.empty(N)
    capped = np.zeros(N, dtype=bool)
    for _ in range(N):
        free = ~capped
        budget = n - capped.sum()
        pi[free] = budget * v[free] / v[free].sum()
        over = free & (pi > 1.0)
        if not over.any():
            break
        capped |= over
    pi[capped] = 1.0

    low = pi < MIN_PROB
    if low.any():
        # lift the tiny ones and take the excess from the other uncapped units
        adjustable = ~capped & ~low
        excess = (MIN_PROB - pi[low]).sum()
        pi[low] = MIN_PROB
        if adjustable.any():
            pi[adjustable] -= excess * pi[adjustable] / pi[adjustable].sum()
    return pi


def draw(pi, rng) -> NDArray:
    """Independent Bernoulli(pi_i) indicators."""
    pi = np.asarray(pi, dtype=float).ravel()
    return (rng.random(pi.shape[0]) < pi).astype(np.int8)


def make_plan(v, n: float, rng) -> SamplingPlan:
    pi = normalize_cap(v, n)
    return SamplingPlan(pi=pi, indicators=draw(pi, rng), target_n=float(n))
