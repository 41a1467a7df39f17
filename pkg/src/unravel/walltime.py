"""Walltime Lindblad evolution by dense superoperator exponentiation.

Vectorization is column stacking: ``vec(A rho B) = (B^T kron A) vec(rho)``,
so ``vec(rho) = rho.reshape(-1, order="F")``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .errors import DomainError, IntegrationError
from .model import LindbladModel, effective_potential, require_state

# eigenvector-matrix condition number above which the Liouvillian is treated as defective
_COND_MAX = 1e8


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def liouvillian(model: LindbladModel) -> np.ndarray:
    """Matrix ``L`` with ``vec(drho/dt) = L vec(rho)``."""
    d = model.dim
    eye = np.eye(d)
    h = model.hamiltonian
    v = effective_potential(model)
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for L in model.jump_ops:
        sup += model.gamma * np.kron(L.conj(), L)
    sup -= 0.5 * model.gamma * (np.kron(eye, v) + np.kron(v.T, eye))
    return sup


def lindblad_rhs(model: LindbladModel, rho: np.ndarray) -> np.ndarray:
    """Right-hand side of the master equation in operator form."""
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for L in model.jump_ops:
        Ld = L.conj().T
        out += model.gamma * (L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L))
    return out


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return 0.5 * (rho + rho.conj().T)


def evolve_walltime(
    model: LindbladModel, rho0: np.ndarray, times: Sequence[float]
) -> list[np.ndarray]:
    """Return ``exp(L t_k) rho0`` for every requested time."""
    rho0 = require_state(rho0, model.tol)
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise DomainError("times must be non-negative and strictly increasing")
    d = model.dim
    sup = liouvillian(model)
    v0 = vec(rho0)

    w, vr = np.linalg.eig(sup)
    diagonalizable = np.linalg.cond(vr) < _COND_MAX
    if diagonalizable:
        coeff = np.linalg.solve(vr, v0)

    out = []
    for tk in t:
        if tk == 0.0:
            out.append(rho0.copy())
            continue
        if diagonalizable:
            vt = vr @ (np.exp(w * tk) * coeff)
        else:
            vt = expm(sup * tk) @ v0
        if not np.all(np.isfinite(vt)):
            raise IntegrationError("non-finite state", float(tk))
        out.append(_hermitize(unvec(vt, d)))
    return out


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of ``a - b`` for Hermitian arguments."""
    diff = _hermitize(np.asarray(a) - np.asarray(b))
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(diff))))
