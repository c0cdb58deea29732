"""Seeded generators for the simulation designs and their surrogates."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .data import Dataset
from .glm import GlmFamily

# design name -> (family, p)
DESIGNS: dict[str, tuple[GlmFamily, int]] = {
    "mzNormal": (GlmFamily.LOGISTIC, 10),
    "nzNormal": (GlmFamily.LOGISTIC, 10),
    "unNormal": (GlmFamily.LOGISTIC, 10),
    "mixNormal": (GlmFamily.LOGISTIC, 10),
    "T3scaled": (GlmFamily.LOGISTIC, 10),
    "Exp": (GlmFamily.LOGISTIC, 10),
    "GA": (GlmFamily.LINEAR, 30),
    "T3": (GlmFamily.LINEAR, 30),
    "T1": (GlmFamily.LINEAR, 30),
    "PoisMzNormal": (GlmFamily.POISSON, 10),
    "PoisNzNormal": (GlmFamily.POISSON, 10),
    "PoisUniform": (GlmFamily.POISSON, 10),
    "PoisT3": (GlmFamily.POISSON, 10),
}

DEFAULT_BETA = {GlmFamily.LOGISTIC: 0.5, GlmFamily.LINEAR: 0.5, GlmFamily.POISSON: 0.1}


@dataclass(frozen=True)
class SurrogateParams:
    """Means and variances of the surrogate noise terms; ``None`` means the family default."""

    zeta_mean: float | None = None
    zeta_var: float | None = None
    eta_mean: float | None = None
    eta_var: float | None = None
    eps_var: float | None = None


_SURROGATE_DEFAULTS = {
    GlmFamily.LOGISTIC: dict(zeta_mean=5.0, zeta_var=0.04, eta_mean=0.0, eta_var=0.25, eps_var=0.25),
    GlmFamily.LINEAR: dict(zeta_mean=10.0, zeta_var=0.0, eta_mean=2.0, eta_var=1.0, eps_var=1.0),
    GlmFamily.POISSON: dict(zeta_mean=5.0, zeta_var=0.09, eta_mean=0.0, eta_var=0.0, eps_var=1.0),
}


@dataclass(frozen=True)
class ScenarioSpec:
    design: str
    N: int = 20000
    family: GlmFamily | None = None
    p: int | None = None
    beta0: NDArray | None = field(default=None, compare=False)
    noise_sd: float = 3.0  # linear response noise
    surrogate: SurrogateParams = SurrogateParams()

    def __post_init__(self):
        if self.design not in DESIGNS:
            raise ValueError(f"unknown design {self.design!r}; choose from {sorted(DESIGNS)}")
        fam, p = DESIGNS[self.design]
        object.__setattr__(self, "family", GlmFamily(self.family or fam))
        object.__setattr__(self, "p", int(self.p or p))
        if self.beta0 is None:
            object.__setattr__(self, "beta0", np.full(self.p, DEFAULT_BETA[self.family]))
        else:
            b = np.asarray(self.beta0, dtype=float).ravel()
            if b.shape[0] != self.p:
                raise ValueError(f"beta0 has length {b.shape[0]}, expected p={self.p}")
            object.__setattr__(self, "beta0", b)

    def surrogate_constants(self) -> dict:
        out = dict(_SURROGATE_DEFAULTS[self.family])
        for k, v in vars(self.surrogate).items():
            if v is not None:
                out[k] = v
        return out

    def with_(self, **kw) -> "ScenarioSpec":
        return replace(self, **kw)


def equicorrelated(p: int, rho: float = 0.5) -> NDArray:
    """Sigma_ij = rho^{1(i != j)}."""
    return np.full((p, p), rho) + (1.0 - rho) * np.eye(p)


def ar1(p: int, scale: float = 2.0, rho: float = 0.5) -> NDArray:
    """Sigma_ij = scale * rho^|i-j|."""
    i = np.arange(p)
    return scale * rho ** np.abs(i[:, None] - i[None, :])


def mvnormal(rng, mean, cov, size: int) -> NDArray:
    L = np.linalg.cholesky(cov)
    Z = rng.standard_normal((size, cov.shape[0]))
    return np.asarray(mean) + Z @ L.T


def mvt(rng, df: float, cov, size: int) -> NDArray:
    """Elliptical multivariate t: one chi-square divisor per row."""
    Z = mvnormal(rng, 0.0, cov, size)
    w = np.sqrt(rng.chisquare(df, size) / df)
    return Z / w[:, None]


def gen_covariates(spec: ScenarioSpec, rng) -> NDArray:
    N, p, d = spec.N, spec.p, spec.design
    sigma = equicorrelated(p)
    if d in ("mzNormal", "PoisMzNormal"):
        return mvnormal(rng, 0.0, sigma, N)
    if d in ("nzNormal", "PoisNzNormal"):
        return mvnormal(rng, 0.5, sigma, N)
    if d == "unNormal":
        u = np.diag(1.0 / np.arange(1, p + 1))
        return mvnormal(rng, 0.0, u @ sigma @ u, N)
    if d == "mixNormal":
        sign = np.where(rng.random(N) < 0.5, 0.5, -0.5)
        return sign[:, None] + mvnormal(rng, 0.0, sigma, N)
    if d in ("T3scaled", "PoisT3"):
        return mvt(rng, 3, sigma, N) / 10.0
    if d == "Exp":
        return rng.exponential(scale=0.5, size=(N, p))
    if d == "GA":
        return mvnormal(rng, 1.0, ar1(p), N)
    if d == "T3":
        return mvt(rng, 3, sigma, N)
    if d == "T1":
        return mvt(rng, 1, sigma, N)
    if d == "PoisUniform":
        half = p // 2
        return np.hstack([rng.uniform(-1, 1, (N, half)), rng.uniform(-0.5, 0.5, (N, p - half))])
    raise ValueError(f"unknown design {d!r}")


def gen_response(family: GlmFamily, X, beta0, rng, noise_sd: float = 3.0) -> NDArray:
    family = GlmFamily(family)
    eta = np.asarray(X) @ np.asarray(beta0)
    if family is GlmFamily.LINEAR:
        return eta + noise_sd * rng.standard_normal(eta.shape[0]) if noise_sd else eta.copy()
    if family is GlmFamily.LOGISTIC:
        return (rng.random(eta.shape[0]) < family.mean(eta)).astype(float)
    return rng.poisson(family.mean(eta)).astype(float)


def _normal(rng, mean, var, size):
    if var == 0:
        return np.full(size, float(mean))
    return rng.normal(mean, np.sqrt(var), size)


def gen_surrogate(spec: ScenarioSpec, X, Y, beta0, rng) -> NDArray:
    """Surrogate built from Y, X and family-specific noise.

    zeta and eps are drawn per row; eta is one p-vector per dataset.
    """
    c = spec.surrogate_constants()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    N, p = X.shape
    lin = X @ np.asarray(beta0, dtype=float)
    fam = spec.family
    if fam is GlmFamily.LOGISTIC:
        zeta = _normal(rng, c["zeta_mean"], c["zeta_var"], N)
        eta = _normal(rng, c["eta_mean"], c["eta_var"], p)
        eps = _normal(rng, 0.0, c["eps_var"], N)
        return Y * zeta + 5.0 * lin + X @ eta + eps
    if fam is GlmFamily.LINEAR:
        eta = _normal(rng, c["eta_mean"], c["eta_var"], p)
        eps = _normal(rng, 0.0, c["eps_var"], N)
        return c["zeta_mean"] * Y + X @ eta + eps
    zeta = _normal(rng, c["zeta_mean"], c["zeta_var"], N)
    eps = _normal(rng, 0.0, c["eps_var"], N)
    return 5.0 * Y + zeta * lin + eps


def real_data_surrogate(X, gamma0, rng, scale: float = 3.0) -> NDArray:
    """scale * X gamma0 + N(0, 1) for data without a natural surrogate."""
    X = np.asarray(X, dtype=float)
    return scale * (X @ np.asarray(gamma0, dtype=float)) + rng.standard_normal(X.shape[0])


def generate(spec: ScenarioSpec, rng) -> Dataset:
    X = gen_covariates(spec, rng)
    Y = gen_response(spec.family, X, spec.beta0, rng, spec.noise_sd)
    S = gen_surrogate(spec, X, Y, spec.beta0, rng)
    return Dataset.from_arrays(X, S, Y)
