"""Adaptive observer for LTI systems with overparametrized dynamics and
exosystem-generated disturbances.

Reconstructs unmeasured physical states, disturbance states, physical
parameters and the observer gain from input/output data alone, under a
finite-excitation condition on the filtered regressor.
"""

from .config import ExperimentConfig, RuntimeSetup, build_runtime, default_config, load_config
from .engine import RunArtifacts, emit_plots, run_chain, simulate
from .errors import ConfigError, DivergenceError
from .hetero import HeteroMapping, Lre, lre_to_theta, lre_to_theta_ab, normalize_lre, verify_heterogeneity
from .lre_chain import GainProblem, gain_direct, gain_lre, stack_kappa
from .lti_core import (CanonicalForm, ExosystemSpec, ExtendedSystem, SystemSpec,
                       build_extended, canonical_transform, excitation_level, regressor_phi)
from .observer import ErrorRegressor, ObserverState, baseline_step, disturbance_estimate, error_regressor, estimation_step, observer_step
from .parametrizer import FilterBank, FilterConfig, build_qbar_phibar, compute_beta, lemma1_residual, mix, step_extension, step_filters

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "RuntimeSetup", "build_runtime", "default_config", "load_config",
    "RunArtifacts", "emit_plots", "run_chain", "simulate",
    "ConfigError", "DivergenceError",
    "HeteroMapping", "Lre", "lre_to_theta", "lre_to_theta_ab", "normalize_lre", "verify_heterogeneity",
    "GainProblem", "gain_direct", "gain_lre", "stack_kappa",
    "CanonicalForm", "ExosystemSpec", "ExtendedSystem", "SystemSpec",
    "build_extended", "canonical_transform", "excitation_level", "regressor_phi",
    "ErrorRegressor", "ObserverState", "baseline_step", "disturbance_estimate",
    "error_regressor", "estimation_step", "observer_step",
    "FilterBank", "FilterConfig", "build_qbar_phibar", "compute_beta",
    "lemma1_residual", "mix", "step_extension", "step_filters",
]
