"""Pilot stage, weighted subsample fits, covariance plug-ins and the augmented estimator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .data import Dataset
from .glm import FitResult, GlmFamily, SolverOptions, fisher_info, fit_glm
from .moments import ForestParams, MomentModel, fit_forest, predict_root_moment, residual_targets, stack_features
from .sampler import SamplingPlan, make_plan, osumc_scores, osumcs_scores, uniform_scores

PINV_RTOL = 1e-10


class Method(str, enum.Enum):
    OSUMCS = "osumcs"
    OSUMC = "osumc"
    UNIFORM = "unif"


class PilotError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    n: float
    n0: float = 500
    method: Method = Method.OSUMCS
    family_y: GlmFamily = GlmFamily.LOGISTIC
    family_s: GlmFamily = GlmFamily.LINEAR
    augment: bool = True
    solver: SolverOptions = field(default_factory=SolverOptions)
    forest: ForestParams = field(default_factory=ForestParams)


@dataclass(frozen=True)
class Pilot:
    idx: NDArray
    beta: NDArray
    gamma: NDArray
    J: NDArray
    model: MomentModel | None


@dataclass
class AugmentedEstimate:
    beta_n: NDArray
    gamma_n: NDArray
    gamma_N: NDArray
    sigma12: NDArray
    sigma22: NDArray
    beta_A: NDArray
    plan: SamplingPlan
    diagnostics: dict

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics["converged"])


def draw_pilot(N: int, n0: float, rng) -> NDArray:
    """Uniform Bernoulli pilot with inclusion probability n0/N."""
    if not 0 < n0 <= N:
        raise ValueError(f"pilot size n0={n0} must lie in (0, N={N}]")
    if n0 == N:
        return np.arange(N)
    return np.flatnonzero(rng.random(N) < n0 / N)


def pilot_stage(
    dataset: Dataset,
    n0: float,
    family_y: GlmFamily,
    family_s: GlmFamily,
    rng,
    *,
    forest: ForestParams | None = None,
    solver: SolverOptions | None = None,
    idx=None,
    fit_moments: bool = True,
) -> Pilot:
    """Fit pilot GLMs, the pilot information matrix and the root-moment forest.

    ``idx`` fixes the pilot rows instead of drawing them from ``rng``.
    """
    idx = draw_pilot(dataset.N, n0, rng) if idx is None else np.asarray(idx, dtype=np.intp)
    p = dataset.p
    if idx.shape[0] < p:
        raise PilotError(f"pilot drew {idx.shape[0]} rows for p={p}; increase n0")
    X0 = dataset.X[idx]
    S0 = dataset.S[idx]
    Y0 = dataset.responses.fetch(idx)
    fit_b = fit_glm(family_y, X0, Y0, opts=solver)
    fit_g = fit_glm(family_s, X0, S0, opts=solver)
    if not (fit_b.converged and fit_g.converged):
        bad = fit_b if not fit_b.converged else fit_g
        raise PilotError(f"pilot fit did not converge ({bad.message}); increase n0")
    J = fisher_info(family_y, fit_b.beta, X0, np.ones(idx.shape[0]))
    model = None
    if fit_moments:
        targets = residual_targets(family_y, fit_b.beta, X0, Y0)
        model = fit_forest(stack_features(S0, X0), targets, forest, rng)
    return Pilot(idx=idx, beta=fit_b.beta, gamma=fit_g.beta, J=J, model=model)


def _sandwich_pieces(family_y, family_s, beta_n, gamma_n, X, S, Y_sampled, plan):
    sel = plan.selected
    Xs = X[sel]
    pi = plan.pi[sel]
    Y_sampled = np.asarray(Y_sampled, dtype=float).ravel()
    if Y_sampled.shape[0] != sel.shape[0]:
        raise ValueError("Y_sampled must hold one response per selected unit")
    r_y = Y_sampled - GlmFamily(family_y).mean(Xs @ beta_n)
    r_s = S[sel] - GlmFamily(family_s).mean(Xs @ gamma_n)
    phi = Xs * r_y[:, None]
    psi = Xs * r_s[:, None]
    return Xs, pi, phi, psi


def sigma_blocks(
    family_y, family_s, beta_n, gamma_n, gamma_N, X, S, Y_sampled, plan: SamplingPlan
) -> tuple[NDArray, NDArray]:
    """Plug-in estimates of Sigma_12 and Sigma_22.

    Both use the kernel (1/pi)(1/pi - 1) over selected units, sandwiched between the
    HT-weighted information at ``beta_n`` and the full-data information at ``gamma_N``.
    """
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    Xs, pi, phi, psi = _sandwich_pieces(family_y, family_s, beta_n, gamma_n, X, S, Y_sampled, plan)
    k = (1.0 / pi) * (1.0 / pi - 1.0)
    M12 = (phi * k[:, None]).T @ psi / N**2
    M22 = (psi * k[:, None]).T @ psi / N**2
    Jb_inv = np.linalg.inv(fisher_info(family_y, beta_n, Xs, 1.0 / pi))
    Jg_inv = np.linalg.inv(fisher_info(family_s, gamma_N, X, np.ones(N)))
    s12 = Jb_inv @ M12 @ Jg_inv
    s22 = Jg_inv @ M22 @ Jg_inv
    return s12, 0.5 * (s22 + s22.T)


def sigma11(family_y, family_s, beta_n, gamma_n, X, S, Y_sampled, plan: SamplingPlan) -> NDArray:
    """Plug-in Sigma_11 with kernel 1/pi^2 on the selected units."""
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    Xs, pi, phi, _ = _sandwich_pieces(family_y, family_s, beta_n, gamma_n, X, S, Y_sampled, plan)
    M11 = (phi / pi[:, None] ** 2).T @ phi / N**2
    Jb_inv = np.linalg.inv(fisher_info(family_y, beta_n, Xs, 1.0 / pi))
    s11 = Jb_inv @ M11 @ Jb_inv
    return 0.5 * (s11 + s11.T)


def augment(beta_n, gamma_n, gamma_N, sigma12, sigma22) -> NDArray:
    """beta_n - Sigma12 pinv(Sigma22) (gamma_n - gamma_N)."""
    beta_n = np.asarray(beta_n, dtype=float)
    sigma12 = np.atleast_2d(np.asarray(sigma12, dtype=float))
    sigma22 = np.atleast_2d(np.asarray(sigma22, dtype=float))
    diff = np.atleast_1d(np.asarray(gamma_n, dtype=float) - np.asarray(gamma_N, dtype=float))
    if not np.any(sigma12):
        return beta_n.copy()
    pinv = np.linalg.pinv(sigma22, rcond=PINV_RTOL, hermitian=True)
    return beta_n - sigma12 @ pinv @ diff


def fit_full_surrogate(dataset: Dataset, family_s: GlmFamily, init=None, solver=None) -> FitResult:
    """gamma_N: the surrogate model fitted on every row (uses no responses)."""
    return fit_glm(family_s, dataset.X, dataset.S, init=init, opts=solver)


def selection_scores(dataset: Dataset, pilot: Pilot, config: PipelineConfig) -> NDArray:
    method = Method(config.method)
    if method is Method.UNIFORM:
        return uniform_scores(dataset.N)
    if method is Method.OSUMC:
        return osumc_scores(config.family_y, pilot.beta, pilot.J, dataset.X)
    if pilot.model is None:
        raise ValueError("OSUMCS needs a pilot fitted with fit_moments=True")
    root = predict_root_moment(pilot.model, dataset.S, dataset.X)
    return osumcs_scores(root, pilot.J, dataset.X)


def run_pipeline(
    dataset: Dataset,
    config: PipelineConfig,
    rng,
    *,
    pilot: Pilot | None = None,
    gamma_full: FitResult | None = None,
    scores=None,
) -> AugmentedEstimate:
    """Pilot, sampling, weighted fits and augmentation for one replication.

    ``pilot`` and ``gamma_full`` can be shared across methods and budgets on the same
    dataset; ``scores`` overrides the method's selection scores.
    """
    fy = GlmFamily(config.family_y)
    fs = GlmFamily(config.family_s)
    if pilot is None:
        pilot = pilot_stage(
            dataset,
            config.n0,
            fy,
            fs,
            rng,
            forest=config.forest,
            solver=config.solver,
            fit_moments=Method(config.method) is Method.OSUMCS and scores is None,
        )
    if gamma_full is None:
        gamma_full = fit_full_surrogate(dataset, fs, init=pilot.gamma, solver=config.solver)

    v = selection_scores(dataset, pilot, config) if scores is None else np.asarray(scores, dtype=float)
    plan = make_plan(v, config.n, rng)
    sel = plan.selected
    p = dataset.p
    diag = {
        "realized_m": plan.realized_m,
        "pilot_size": int(pilot.idx.shape[0]),
        "cond_pilot_info": float(np.linalg.cond(pilot.J)),
        "gamma_N_converged": gamma_full.converged,
    }
    nan = np.full(p, np.nan)
    zeros = np.zeros((p, p))
    if sel.shape[0] < p:
        diag.update(converged=False, message=f"only {sel.shape[0]} units selected")
        return AugmentedEstimate(nan, nan, gamma_full.beta, zeros, zeros, nan, plan, diag)

    Xs = dataset.X[sel]
    Ys = dataset.responses.fetch(sel)
    w = 1.0 / plan.pi[sel]
    fit_b = fit_glm(fy, Xs, Ys, w, init=pilot.beta, opts=config.solver)
    fit_g = fit_glm(fs, Xs, dataset.S[sel], w, init=pilot.gamma, opts=config.solver)
    converged = fit_b.converged and fit_g.converged and gamma_full.converged
    diag.update(
        beta_n_converged=fit_b.converged,
        gamma_n_converged=fit_g.converged,
        converged=converged,
        message="; ".join(m for m in (fit_b.message, fit_g.message, gamma_full.message) if m),
    )
    if not (converged and config.augment):
        return AugmentedEstimate(
            fit_b.beta, fit_g.beta, gamma_full.beta, zeros, zeros, fit_b.beta.copy(), plan, diag
        )
    s12, s22 = sigma_blocks(fy, fs, fit_b.beta, fit_g.beta, gamma_full.beta, dataset.X, dataset.S, Ys, plan)
    diag["cond_sigma22"] = float(np.linalg.cond(s22)) if np.any(s22) else float("inf")
    beta_A = augment(fit_b.beta, fit_g.beta, gamma_full.beta, s12, s22)
    return AugmentedEstimate(fit_b.beta, fit_g.beta, gamma_full.beta, s12, s22, beta_A, plan, diag)
