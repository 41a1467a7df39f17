"""Jumptime and walltime unraveling of Markovian open quantum systems."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    LindbladModel,
    effective_hamiltonian,
    effective_potential,
    load_model,
    save_model,
    validate_state,
)
from .jumptime import completeness_matrix, evolve_jumptime, jump_map, waiting_time  # noqa: E402
from .darkstates import certify_trace_preservation, find_dark_states  # noqa: E402
from .walltime import evolve_walltime, liouvillian  # noqa: E402

__all__ = [
    "LindbladModel",
    "certify_trace_preservation",
    "completeness_matrix",
    "effective_hamiltonian",
    "effective_potential",
    "evolve_jumptime",
    "evolve_walltime",
    "find_dark_states",
    "jump_map",
    "liouvillian",
    "load_model",
    "save_model",
    "validate_state",
    "waiting_time",
]
