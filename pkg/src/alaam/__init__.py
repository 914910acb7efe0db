"""Autologistic actor attribute models: estimation, simulation and goodness of fit."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from .ee import EEChain, EEConfig, RunEstimate, algorithm_s, batch_means_cov, run_ee, summarize_run
from .effects import CATALOGUE, EffectSpec, Model, change_statistics, compute_observed_stats, parse_model_text
from .errors import (ALAAMError, DataError, DegenerateModel, Diverged, InsufficientData, ModelError,
                     NoConvergedRuns, StudyError)
from .inference import GofReport, PooledEstimate, degeneracy_check, gof_test, pool_runs
from .network import (AttributeTable, Network, OutcomeVector, TwoPathMatrix, ZoneAssignment, bind_outcome,
                      load_attribute_files, load_attributes, load_network, load_outcome, load_zones)
from .sa import SAConfig, SAResult, estimate_covariance, estimate_sa
from .sampler import ChainState, SimOptions, metropolis_step, run_chain, simulate_outcomes
from .studylab import StudyConfig, StudyReport, generate_synthetic_attributes, run_study, wilson_interval

__all__ = [name for name in dir() if not name.startswith("_") and name not in ("version", "PackageNotFoundError")]
