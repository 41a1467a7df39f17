"""Dark-state detection and trace-preservation certificates.

A dark state is annihilated by every jump operator and is an eigenstate of the
Hamiltonian.  Detection works from that definition (kernel first); the
spectrum of ``H_eff^+`` is kept as independent evidence, since an ordinary
eigenvector of ``H_eff^+`` is dark exactly when its eigenvalue is real.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .config import Tolerances
from .errors import TheoremViolationError
from .model import LindbladModel, effective_hamiltonian


@dataclass(frozen=True, eq=False)
class SpectralReport:
    eigenvalues: np.ndarray  # of H_eff^+
    min_imag: float
    dark_dim: int
    dark_basis: np.ndarray  # dim x dark_dim, orthonormal columns

    @property
    def has_dark_states(self) -> bool:
        return self.dark_dim > 0

    def projector(self) -> np.ndarray:
        b = self.dark_basis
        return b @ b.conj().T


def _null_space(a: np.ndarray, thresh: float) -> np.ndarray:
    """Orthonormal right null space of ``a`` with an absolute singular-value cut."""
    n = a.shape[1]
    if a.shape[0] == 0:
        return np.eye(n, dtype=complex)
    _, s, vh = np.linalg.svd(a, full_matrices=True)
    rank = int(np.sum(s > thresh))
    return vh[rank:].conj().T


def joint_kernel(model: LindbladModel, thresh: float) -> np.ndarray:
    stacked = np.vstack(model.jump_ops)
    return _null_space(stacked, thresh)


def find_dark_states(model: LindbladModel, tol: Tolerances | None = None) -> SpectralReport:
    tol = tol or model.tol
    h = model.hamiltonian
    eigs = np.linalg.eigvals(effective_hamiltonian(model).conj().T)
    min_imag = float(eigs.imag.min())

    # largest H-invariant subspace inside ker(L): shrink K until (1 - P_K) H K = 0
    k = joint_kernel(model, tol.dark)
    while k.shape[1] > 0:
        leak = h @ k - k @ (k.conj().T @ h @ k)
        c = _null_space(leak, tol.dark)
        if c.shape[1] == k.shape[1]:
            break
        k = k @ c
        # re-orthonormalize against round-off accumulated over the shrink steps
        k, _ = np.linalg.qr(k)

    if k.shape[1] > 0:
        # eigenvectors of H within the invariant subspace
        hk = k.conj().T @ h @ k
        _, c = np.linalg.eigh(0.5 * (hk + hk.conj().T))
        k = k @ c
    basis = np.ascontiguousarray(k)
    _check_dark_basis(model, basis, tol)
    return SpectralReport(eigs, min_imag, basis.shape[1], basis)


def _check_dark_basis(model: LindbladModel, basis: np.ndarray, tol: Tolerances) -> None:
    h = model.hamiltonian
    for i in range(basis.shape[1]):
        psi = basis[:, i]
        for L in model.jump_ops:
            if np.linalg.norm(L @ psi) > tol.dark:
                raise TheoremViolationError(f"dark vector {i} not annihilated by jump operators")
        hpsi = h @ psi
        if np.linalg.norm(hpsi - np.vdot(psi, hpsi) * psi) > tol.dark:
            raise TheoremViolationError(f"dark vector {i} is not a Hamiltonian eigenvector")


def spectral_dichotomy(model: LindbladModel, report: SpectralReport | None = None,
                       tol: Tolerances | None = None) -> list[tuple[complex, bool, bool]]:
    """For each ordinary eigenvector of ``H_eff^+``: (z, real eigenvalue?, lies in dark subspace?).

    Uses the Schur form so defective generators are handled; the eigenvector
    for each distinct eigenvalue is obtained from the null space of
    ``H_eff^+ - z``.
    """
    tol = tol or model.tol
    report = report or find_dark_states(model, tol)
    hd = effective_hamiltonian(model).conj().T
    t, _ = sla.schur(hd, output="complex")
    zs = np.diag(t)
    p_dark = report.projector()
    out = []
    seen: list[complex] = []
    scale = max(1.0, float(np.abs(zs).max()))
    for z in zs:
        if any(abs(z - s) <= 1e-7 * scale for s in seen):
            continue
        seen.append(z)
        _, s, vh = np.linalg.svd(hd - z * np.eye(model.dim))
        vec = vh[-1].conj()
        in_dark = bool(np.linalg.norm(vec - p_dark @ vec) <= 1e-6)
        out.append((complex(z), bool(abs(z.imag) <= tol.spectral), in_dark))
    return out


@dataclass(frozen=True, eq=False)
class TPCertificate:
    is_tp: bool
    report: SpectralReport
    deficiency: float  # max |S - 1|
    completeness: np.ndarray

    def summary(self) -> str:
        return (
            f"dark_dim = {self.report.dark_dim}, "
            f"trace-preserving: {'yes' if self.is_tp else 'no'}, "
            f"max|S - 1| = {self.deficiency:.3e}, "
            f"min Im z = {self.report.min_imag:.3e}"
        )


def certify_trace_preservation(model: LindbladModel,
                               tol: Tolerances | None = None) -> TPCertificate:
    """Dark-state verdict cross-checked against the completeness matrix."""
    from .jumptime import completeness_matrix

    tol = tol or model.tol
    report = find_dark_states(model, tol)
    s = completeness_matrix(model, report=report, tol=tol)
    eye = np.eye(model.dim)
    deficiency = float(np.max(np.abs(s - eye)))
    is_tp = report.dark_dim == 0
    if is_tp and deficiency > tol.tp:
        raise TheoremViolationError(
            f"no dark states found but max|S - 1| = {deficiency:.3e} > {tol.tp:g}"
        )
    if not is_tp:
        p = report.projector()
        # deficiency must be exactly the dark projector: 1 - S = P_dark
        resid = float(np.max(np.abs((eye - s) - p)))
        if deficiency <= tol.tp or resid > tol.tp:
            raise TheoremViolationError(
                f"dark_dim = {report.dark_dim} but completeness deficiency "
                f"{deficiency:.3e} is not localized on the dark subspace (resid {resid:.3e})"
            )
    return TPCertificate(is_tp, report, deficiency, s)
