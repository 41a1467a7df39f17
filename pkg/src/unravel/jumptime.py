"""Deterministic jumptime evolution.

One step maps the state averaged right after jump ``n`` to the state averaged
right after jump ``n + 1``::

    rho_{n+1} = gamma sum_j L_j X L_j^+,
    X = int_0^inf exp(-i H_eff tau) rho_n exp(i H_eff^+ tau) dtau.

``X`` solves the Sylvester equation ``i (H_eff X - X H_eff^+) = rho_n`` whenever
the no-jump propagator decays.  Dark states are the only obstruction: they
span a subspace on which ``H_eff`` is Hermitian, decoupled from its
complement, and killed by every ``L_j``.  The solve is done on the complement
and the divergent dark block is discarded, which is where the trace goes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm, solve_sylvester

from .config import Tolerances
from .darkstates import SpectralReport, find_dark_states
from .errors import DomainError, NumericalDegeneracyError, UnravelError
from .model import LindbladModel, effective_hamiltonian, effective_potential, require_state


@dataclass(frozen=True, eq=False)
class _Sector:
    """No-jump generator restricted to the orthogonal complement of the dark subspace."""

    basis: np.ndarray  # dim x k, orthonormal
    heff: np.ndarray  # k x k
    jump_ops: tuple[np.ndarray, ...]  # each dim x k (L_j restricted on the right)
    dark_dim: int


def _complement(dark_basis: np.ndarray, dim: int) -> np.ndarray:
    if dark_basis.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    q, _ = np.linalg.qr(dark_basis, mode="complete")
    return q[:, dark_basis.shape[1]:]


def _sector(model: LindbladModel, report: SpectralReport, tol: Tolerances) -> _Sector:
    heff = effective_hamiltonian(model)
    if report.dark_dim:
        pd = report.dark_basis
        leak = sum(np.linalg.norm(L @ pd) for L in model.jump_ops)
        if leak > tol.spectral:
            raise UnravelError(f"jump operators do not annihilate the dark subspace (leak {leak:.2e})")
    w = _complement(report.dark_basis, model.dim)
    hq = w.conj().T @ heff @ w
    if hq.shape[0]:
        z = np.linalg.eigvals(hq.conj().T)
        if z.imag.min() <= tol.spectral:
            raise NumericalDegeneracyError(
                f"H_eff^+ has an eigenvalue with Im z = {z.imag.min():.3e} "
                "outside the detected dark subspace"
            )
    return _Sector(w, hq, tuple(L @ w for L in model.jump_ops), report.dark_dim)


def _resolve(model: LindbladModel, report: SpectralReport | None, tol: Tolerances | None):
    tol = tol or model.tol
    report = report if report is not None else find_dark_states(model, tol)
    return _sector(model, report, tol), tol


def _no_jump_integral(sector: _Sector, rho: np.ndarray) -> np.ndarray:
    """X on the non-dark sector, in sector coordinates."""
    w = sector.basis
    rq = w.conj().T @ rho @ w
    hq = sector.heff
    # H X + X (-H^+) = -i rho
    return solve_sylvester(hq, -hq.conj().T, -1j * rq)


def _apply(sector: _Sector, gamma: float, rho: np.ndarray) -> np.ndarray:
    if sector.basis.shape[1] == 0:
        return np.zeros_like(rho)
    x = _no_jump_integral(sector, rho)
    out = sum(Lw @ x @ Lw.conj().T for Lw in sector.jump_ops)
    out = gamma * out
    return 0.5 * (out + out.conj().T)


def jump_map(model: LindbladModel, rho: np.ndarray, *, report: SpectralReport | None = None,
             tol: Tolerances | None = None) -> np.ndarray:
    """Single jumptime step ``rho_n -> rho_{n+1}``."""
    sector, tol = _resolve(model, report, tol)
    rho = require_state(rho, tol)
    return _apply(sector, model.gamma, rho)


@dataclass(frozen=True, eq=False)
class JumptimeSequence:
    states: list[np.ndarray]
    traces: np.ndarray
    halted_at: int | None = None  # first n with Tr rho_n below the halt threshold
    dark_dim: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.states)


def evolve_jumptime(model: LindbladModel, rho0: np.ndarray, n_max: int, *,
                    report: SpectralReport | None = None,
                    tol: Tolerances | None = None) -> JumptimeSequence:
    """Iterate the jump map ``n_max`` times.

    Once the trace falls below ``tol.halt`` the rest of the sequence is filled
    with zero matrices: the dark steady state has been reached.
    """
    if n_max < 0:
        raise DomainError("n_max must be >= 0")
    sector, tol = _resolve(model, report, tol)
    rho = require_state(rho0, tol)
    states = [rho]
    halted = None
    if float(np.trace(rho).real) < tol.halt:
        halted = 0
    for n in range(1, n_max + 1):
        if halted is not None:
            states.append(np.zeros_like(rho))
            continue
        try:
            rho = _apply(sector, model.gamma, rho)
        except UnravelError as exc:
            raise type(exc)(f"jump {n}: {exc}") from exc
        if float(np.trace(rho).real) < tol.halt:
            halted = n
            rho = np.zeros_like(rho)
        states.append(rho)
    traces = np.array([float(np.trace(s).real) for s in states])
    return JumptimeSequence(states, traces, halted, sector.dark_dim)


def completeness_matrix(model: LindbladModel, *, report: SpectralReport | None = None,
                        tol: Tolerances | None = None) -> np.ndarray:
    """``S = gamma int_0^inf exp(i H_eff^+ t) V exp(-i H_eff t) dt``.

    Solved from ``i (H_eff^+ S - S H_eff) = -gamma V`` on the non-dark sector.
    ``S = 1`` exactly when there are no dark states; otherwise ``1 - S`` is the
    projector onto the dark subspace.
    """
    sector, tol = _resolve(model, report, tol)
    w = sector.basis
    if w.shape[1] == 0:
        return np.zeros((model.dim, model.dim), dtype=complex)
    hq = sector.heff
    vq = w.conj().T @ effective_potential(model) @ w
    sq = solve_sylvester(hq.conj().T, -hq, 1j * model.gamma * vq)
    s = w @ sq @ w.conj().T
    return 0.5 * (s + s.conj().T)


@dataclass(frozen=True, eq=False)
class WaitingTimeCurve:
    taus: np.ndarray
    densities: np.ndarray
    from_jump: int = 0


def no_jump_propagators(model: LindbladModel, taus: Sequence[float]) -> np.ndarray:
    """Stack of ``exp(-i H_eff tau)`` for each tau (scaling-and-squaring)."""
    heff = effective_hamiltonian(model)
    return np.array([expm(-1j * heff * t) for t in taus])


def waiting_time(model: LindbladModel, rho: np.ndarray, taus: Sequence[float],
                 from_jump: int = 0) -> WaitingTimeCurve:
    """Density of the wait until the next jump, conditioned on ``rho``.

    ``w(tau) = gamma Tr[V U(tau) rho U(tau)^+] / Tr rho`` with
    ``U(tau) = exp(-i H_eff tau)``.
    """
    rho = require_state(rho, model.tol)
    tr = float(np.trace(rho).real)
    if tr <= model.tol.halt:
        raise DomainError("waiting time undefined for a zero-trace state")
    taus = np.asarray(taus, dtype=float)
    if taus.ndim != 1 or np.any(taus < 0) or np.any(np.diff(taus) <= 0):
        raise DomainError("tau grid must be non-negative and increasing")
    v = effective_potential(model)
    us = no_jump_propagators(model, taus)
    dens = np.array([np.trace(v @ u @ rho @ u.conj().T).real for u in us])
    dens = model.gamma * dens / tr
    return WaitingTimeCurve(taus, np.maximum(dens, 0.0), from_jump)
