"""Drift-adaptive Gaussian mixture scene classification.

Diagonal GMMs fitted by EM, a kernel-density drift detector (KD3), the
combine/merge/prune adaptation step (CMGMM), a per-scene classifier, a
synthetic drift-stream generator and a prequential evaluation harness.
"""

from .classifier import Instance, SceneClassifier, StepOutcome
from .cmgmm import AdaptConfig, adapt, combine, dissimilarity, merge_pair, merge_similar, prune, prune_scores
from .em import EmConfig, bic, em_trace, fit_em, select_k_bic
from .errors import (
    DegenerateMergeError,
    DriftGMMError,
    InsufficientDataError,
    RejectedInputError,
    SpecError,
    StreamParseError,
)
from .harness import PrequentialReport, RunConfig, run_prequential, sweep
from .kd3 import KD3, Kd3Config, Signal, SignalKind
from .kde import bandwidth, kde_eval, tv_divergence
from .mixture import GaussianComponent, MixtureModel, log_density, mixture_moments, sample, validate
from .streamgen import DriftStreamSpec, generate, read_stream, write_stream

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "DegenerateMergeError", "DriftGMMError", "DriftStreamSpec", "EmConfig",
    "GaussianComponent", "InsufficientDataError", "Instance", "KD3", "Kd3Config", "MixtureModel",
    "PrequentialReport", "RejectedInputError", "RunConfig", "SceneClassifier", "Signal",
    "SignalKind", "SpecError", "StepOutcome", "StreamParseError", "adapt", "bandwidth", "bic",
    "combine", "dissimilarity", "em_trace", "fit_em", "generate", "kde_eval", "log_density",
    "merge_pair", "merge_similar", "mixture_moments", "prune", "prune_scores", "read_stream",
    "run_prequential", "sample", "select_k_bic", "sweep", "tv_divergence", "validate",
    "write_stream",
]
