"""Optimal subsampling for GLMs under a measurement budget, using surrogate outcomes."""

from .data import Dataset, ResponseOracle
from .estimator import AugmentedEstimate, Method, PipelineConfig, augment, pilot_stage, run_pipeline, sigma_blocks
from .glm import FitResult, GlmFamily, SolverOptions, cumulant_derivs, fisher_info, fit_glm, weighted_score
from .moments import ForestParams, MomentModel, fit_forest, predict_root_moment, residual_targets
from .sampler import SamplingPlan, draw, normalize_cap, osumc_scores, osumcs_scores
from .scenarios import ScenarioSpec, gen_covariates, gen_response, gen_surrogate, generate

__all__ = [
    "AugmentedEstimate",
    "Dataset",
    "FitResult",
    "ForestParams",
    "GlmFamily",
    "Method",
    "MomentModel",
    "PipelineConfig",
    "ResponseOracle",
    "SamplingPlan",
    "ScenarioSpec",
    "SolverOptions",
    "augment",
    "cumulant_derivs",
    "draw",
    "fisher_info",
    "fit_forest",
    "fit_glm",
    "gen_covariates",
    "gen_response",
    "gen_surrogate",
    "generate",
    "normalize_cap",
    "osumc_scores",
    "osumcs_scores",
    "pilot_stage",
    "predict_root_moment",
    "residual_targets",
    "run_pipeline",
    "sigma_blocks",
    "weighted_score",
]
