"""Numerical tolerances and the numba switch.

Set ``UNRAVEL_DISABLE_NUMBA=1`` in the environment before import to run the
pure-numpy kernels instead of the jitted ones.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA: bool = _numba_available() and not _env_flag("UNRAVEL_DISABLE_NUMBA")

#: environment variable consulted for the default worker-thread count
THREADS_ENV = "UNRAVEL_THREADS"


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Tolerances:
    """Absolute thresholds used by validation, spectral and dark-state tests."""

    herm: float = 1e-10
    psd: float = 1e-9
    tr: float = 1e-9
    spectral: float = 1e-9
    dark: float = 1e-8
    halt: float = 1e-12
    tp: float = 1e-8

    def with_overrides(self, **overrides: float) -> "Tolerances":
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise KeyError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_TOL = Tolerances()
