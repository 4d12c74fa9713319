"""Constructive sparse-to-dense training: grow masked networks along
high-magnitude paths and discover the operating density automatically."""

__version__ = "0.1.0"

from .model import MaskedNetwork, build_architecture, make_mlp, make_resnet
from .pathscore import (score_pass, candidate_scores, total_pwmp,
                        path_centrality, tau_core, avg_tau_core_ratio)
from .growth import (growth_amount, grow_score_biased,
                     grow_score_deterministic, grow_random, grow_gradient)
from .seedinit import initialize, init_phew, init_uniform_random, imp_c_step
from .stopping import DensityTrace, fit_logistic
from .train import RoughTrainPolicy, CostLedger, rough_train, flops_estimate
from .config import ExperimentConfig, load_config, save_config
from .pipeline import run_growth_pipeline, run_imp_c, run_static_baseline

__all__ = [
    "MaskedNetwork", "build_architecture", "make_mlp", "make_resnet",
    "score_pass", "candidate_scores", "total_pwmp", "path_centrality",
    "tau_core", "avg_tau_core_ratio",
    "growth_amount", "grow_score_biased", "grow_score_deterministic",
    "grow_random", "grow_gradient",
    "initialize", "init_phew", "init_uniform_random", "imp_c_step",
    "DensityTrace", "fit_logistic",
    "RoughTrainPolicy", "CostLedger", "rough_train", "flops_estimate",
    "ExperimentConfig", "load_config", "save_config",
    "run_growth_pipeline", "run_imp_c", "run_static_baseline",
]
