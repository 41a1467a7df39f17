"""Lindblad model type, derived operators and the JSON model format.

Units: hbar = 1.  The rate ``gamma`` is kept separate from the jump operators,
so the dissipator reads ``gamma * sum_j (L_j rho L_j^+ - {L_j^+ L_j, rho}/2)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .config import DEFAULT_TOL, Tolerances
from .errors import ModelFormatError, ModelInvalidError

FORMAT_VERSION = 1


def _as_operator(a: Any, name: str) -> np.ndarray:
    arr = np.array(a, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ModelInvalidError("square", f"{name} has shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelInvalidError("finite", f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


@dataclass(frozen=True, eq=False)
class LindbladModel:
    """Hamiltonian, ordered jump operators and a single rate.

    Arrays are copied and frozen on construction; instances are safe to share.
    """

    hamiltonian: np.ndarray
    jump_ops: tuple[np.ndarray, ...]
    gamma: float
    label: str = ""
    tol: Tolerances = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self) -> None:
        h = _as_operator(self.hamiltonian, "hamiltonian")
        if len(self.jump_ops) == 0:
            raise ModelInvalidError("jump_ops non-empty", "no jump operators given")
        ops = tuple(_as_operator(L, f"jump_ops[{j}]") for j, L in enumerate(self.jump_ops))
        for j, L in enumerate(ops):
            if L.shape != h.shape:
                raise ModelInvalidError(
                    "shared dim", f"jump_ops[{j}] has shape {L.shape}, hamiltonian {h.shape}"
                )
        defect = hermiticity_defect(h)
        if defect > self.tol.herm:
            raise ModelInvalidError("hamiltonian Hermitian", f"max |H - H^+| = {defect:.3e}")
        gamma = float(self.gamma)
        if not (np.isfinite(gamma) and gamma > 0):
            raise ModelInvalidError("gamma positive", f"gamma = {self.gamma!r}")
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", ops)
        object.__setattr__(self, "gamma", gamma)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_channels(self) -> int:
        return len(self.jump_ops)

    def transformed(self, u: np.ndarray) -> "LindbladModel":
        """Return the model conjugated by the unitary ``u`` (O -> u O u^+)."""
        ud = u.conj().T
        h = u @ self.hamiltonian @ ud
        h = 0.5 * (h + h.conj().T)
        return LindbladModel(
            h, tuple(u @ L @ ud for L in self.jump_ops), self.gamma, self.label, self.tol
        )

    def fingerprint(self) -> str:
        """Short content hash used in output metadata headers."""
        blob = json.dumps(model_to_dict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def effective_potential(model: LindbladModel) -> np.ndarray:
    """V = sum_j L_j^+ L_j (Hermitian, positive semidefinite)."""
    v = sum(L.conj().T @ L for L in model.jump_ops)
    return 0.5 * (v + v.conj().T)


def effective_hamiltonian(model: LindbladModel) -> np.ndarray:
    """H_eff = H - i gamma/2 V, the generator of the no-jump evolution."""
    return model.hamiltonian - 0.5j * model.gamma * effective_potential(model)


@dataclass(frozen=True)
class StateReport:
    ok: bool
    hermiticity_defect: float
    min_eigenvalue: float
    trace: float
    violations: tuple[str, ...]


def validate_state(rho: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> StateReport:
    """Check Hermiticity, positivity and 0 <= trace <= 1 (sub-normalized is legal)."""
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ModelInvalidError("square", f"state has shape {rho.shape}")
    violations = []
    defect = hermiticity_defect(rho)
    if defect > tol.herm:
        violations.append("hermitian")
    lam_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if lam_min < -tol.psd:
        violations.append("positive semidefinite")
    tr = float(np.trace(rho).real)
    if tr < -tol.tr or tr > 1 + tol.tr:
        violations.append("trace in [0, 1]")
    return StateReport(not violations, defect, lam_min, tr, tuple(violations))


def require_state(rho: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.complex128)
    report = validate_state(rho, tol)
    if not report.ok:
        raise ModelInvalidError(
            ", ".join(report.violations),
            f"herm defect {report.hermiticity_defect:.2e}, "
            f"min eig {report.min_eigenvalue:.2e}, trace {report.trace:.6g}",
        )
    return rho


# --- file format -------------------------------------------------------------


def _encode_matrix(a: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(a).reshape(-1)]


def _decode_matrix(data: Any, dim: int, name: str) -> np.ndarray:
    if not isinstance(data, list) or len(data) != dim * dim:
        n = len(data) if isinstance(data, list) else type(data).__name__
        raise ModelFormatError(f"expected {dim * dim} [re, im] pairs, got {n}", field=name)
    out = np.empty(dim * dim, dtype=np.complex128)
    for k, pair in enumerate(data):
        if (
            not isinstance(pair, list)
            or len(pair) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair)
        ):
            raise ModelFormatError(f"entry {k} is not a [re, im] pair: {pair!r}", field=name)
        out[k] = complex(pair[0], pair[1])
    return out.reshape(dim, dim)


def model_to_dict(model: LindbladModel) -> dict:
    d = {
        "format": FORMAT_VERSION,
        "dim": model.dim,
        "gamma": model.gamma,
        "hamiltonian": _encode_matrix(model.hamiltonian),
        "jump_ops": [_encode_matrix(L) for L in model.jump_ops],
    }
    if model.label:
        d["label"] = model.label
    return d


def model_from_dict(d: Any, tol: Tolerances = DEFAULT_TOL) -> LindbladModel:
    if not isinstance(d, dict):
        raise ModelFormatError("top level must be an object")
    for key in ("dim", "gamma", "hamiltonian", "jump_ops"):
        if key not in d:
            raise ModelFormatError("missing required field", field=key)
    dim = d["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ModelFormatError(f"must be a positive integer, got {dim!r}", field="dim")
    gamma = d["gamma"]
    if not isinstance(gamma, (int, float)) or isinstance(gamma, bool):
        raise ModelFormatError(f"must be a number, got {gamma!r}", field="gamma")
    h = _decode_matrix(d["hamiltonian"], dim, "hamiltonian")
    if not isinstance(d["jump_ops"], list):
        raise ModelFormatError("must be a list of matrices", field="jump_ops")
    ops = tuple(
        _decode_matrix(m, dim, f"jump_ops[{j}]") for j, m in enumerate(d["jump_ops"])
    )
    label = d.get("label", "")
    if not isinstance(label, str):
        raise ModelFormatError("must be a string", field="label")
    return LindbladModel(h, ops, float(gamma), label, tol)


def save_model(model: LindbladModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path, tol: Tolerances = DEFAULT_TOL) -> LindbladModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(exc.msg, line=exc.lineno) from exc
    return model_from_dict(data, tol)


def pure_state(psi: Sequence[complex] | np.ndarray) -> np.ndarray:
    """Projector |psi><psi| of a normalized copy of ``psi``."""
    v = np.asarray(psi, dtype=np.complex128)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())
