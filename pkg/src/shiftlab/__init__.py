"""Shift invariance, margins and adversarial robustness of kernels and two-layer nets."""

__version__ = "0.1.0"

from .attacks import AttackConfig, AttackResult, minimal_distance_linear, minimal_distance_search, pgd
from .classifier import Classifier, label_of
from .experiments import ExperimentReport, NetSettings, shift_consistency
from .kernels import FC_NTK, KernelKind, cntk_gap, gram, ntk_fc, ridge_fit
from .margin import LabeledSet, oracle_max_margin, orbit_margin
from .signals import circular_shift, dc_component, shift_orbit

__all__ = [
    "AttackConfig",
    "AttackResult",
    "Classifier",
    "ExperimentReport",
    "FC_NTK",
    "KernelKind",
    "LabeledSet",
    "NetSettings",
    "circular_shift",
    "cntk_gap",
    "dc_component",
    "gram",
    "label_of",
    "minimal_distance_linear",
    "minimal_distance_search",
    "ntk_fc",
    "oracle_max_margin",
    "orbit_margin",
    "pgd",
    "ridge_fit",
    "shift_consistency",
    "shift_orbit",
]
