"""Continuous-time limit: step-size families, limit tensors, driving noise, SDE and weak convergence."""

from .convergence import ConvergenceReport, Observable, default_observables, first_jump_ks, weak_convergence_study
from .driver import BracketReport, DriverSpec, DriverSynthesisError, synthesize_driver, verify_brackets
from .family import ALIASES, PRESETS, HFamily, preset
from .sde import SDEModel, SDEPath, integrate_sde, terminal_values
from .tensors import DEFAULT_HS, LimitTensors, estimate_limit_tensors


def model_for(fam: HFamily, probe_hs=DEFAULT_HS) -> SDEModel:
    """Limit model of a family with closed-form ``A~``, ``B~`` and a synthesised driver."""
    if fam.a_tilde is None or fam.b_tilde is None:
        raise ValueError(f"family {fam.name!r} has no closed-form limit operators")
    return SDEModel(fam.a_tilde, fam.b_tilde, synthesize_driver(estimate_limit_tensors(fam, probe_hs)))


__all__ = [
    "ALIASES",
    "BracketReport",
    "ConvergenceReport",
    "DEFAULT_HS",
    "DriverSpec",
    "DriverSynthesisError",
    "HFamily",
    "LimitTensors",
    "Observable",
    "PRESETS",
    "SDEModel",
    "SDEPath",
    "default_observables",
    "estimate_limit_tensors",
    "first_jump_ks",
    "integrate_sde",
    "model_for",
    "preset",
    "synthesize_driver",
    "terminal_values",
    "verify_brackets",
    "weak_convergence_study",
]
