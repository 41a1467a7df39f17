"""Example models with closed-form jumptime propagators.

Qubit basis: ``|0>`` ground, ``|1>`` excited, ``sigma_minus = |0><1|``, so
``sigma_z = diag(1, -1)`` in the ordering (|0>, |1>).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError
from .model import LindbladModel

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
SM = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
SP = SM.conj().T

#: coherent amplitude and jump counts of the oscillator phase-space demo
DEMO_ALPHA = 2.0 * np.exp(1j * np.pi / 4)
DEMO_JUMP_COUNTS = (0, 2, 5, 10)
THERMAL_SWEEP = (0.1, 1.0, 10.0)


def bloch_hamiltonian(h) -> np.ndarray:
    hx, hy, hz = (float(c) for c in h)
    return hx * SX + hy * SY + hz * SZ


def make_amplitude_damping(h=(0.0, 0.0, 0.0), gamma: float = 1.0,
                           thermal_x: float | None = None) -> LindbladModel:
    ops = [SM]
    if thermal_x is not None:
        if thermal_x < 0:
            raise DomainError(f"thermal ratio x must be non-negative, got {thermal_x}")
        if thermal_x > 0:
            ops.append(np.sqrt(thermal_x) * SP)
    label = "amplitude-damping" if thermal_x is None else f"thermal(x={thermal_x:g})"
    return LindbladModel(bloch_hamiltonian(h), tuple(ops), gamma, label)


def make_exceptional_point(gamma: float = 1.0) -> LindbladModel:
    """Amplitude damping with ``H = (gamma/4) sigma_x``, where ``h_eff`` vanishes."""
    m = make_amplitude_damping((gamma / 4, 0.0, 0.0), gamma)
    return LindbladModel(m.hamiltonian, m.jump_ops, gamma, "exceptional-point")


def make_dephasing(h=(0.0, 0.0, 0.0), gamma: float = 1.0) -> LindbladModel:
    return LindbladModel(bloch_hamiltonian(h), (SZ,), gamma, "dephasing")


def dephasing_jumptime_oracle(h_z: float, gamma: float, rho: np.ndarray) -> np.ndarray:
    """Closed-form step for ``H = h_z sigma_z``, ``L = sigma_z``."""
    rho = np.asarray(rho, dtype=complex)
    flipped = SZ @ rho @ SZ
    den = 4 * h_z**2 + gamma**2
    return (
        flipped
        + (2 * h_z**2 / den) * (rho - flipped)
        + (gamma * h_z / den) * 1j * (SZ @ rho - rho @ SZ)
    )


def amplitude_damping_oracle(rho: np.ndarray) -> np.ndarray:
    """``H = 0``: rho -> <1|rho|1> |0><0|."""
    out = np.zeros((2, 2), dtype=complex)
    out[0, 0] = rho[1, 1]
    return out


def exceptional_point_oracle(rho: np.ndarray) -> np.ndarray:
    out = np.zeros((2, 2), dtype=complex)
    out[0, 0] = np.trace(rho)
    return out


def thermal_oracle(rho: np.ndarray) -> np.ndarray:
    """``H = 0`` thermal qubit; independent of the rate ratio."""
    return SM @ rho @ SP + SP @ rho @ SM


def exceptional_point_waiting_time(tau, gamma: float = 1.0):
    tau = np.asarray(tau, dtype=float)
    return gamma**3 * tau**2 / 16 * np.exp(-gamma * tau / 2)


def thermal_waiting_time(tau, rho, gamma: float, x: float):
    """Waiting-time density for the ``H = 0`` thermal qubit.

    The second channel fires at rate ``gamma x``, so its density carries the
    prefactor ``gamma x``.
    """
    tau = np.asarray(tau, dtype=float)
    p1 = float(np.real(rho[1, 1]))
    p0 = float(np.real(rho[0, 0]))
    return gamma * np.exp(-gamma * tau) * p1 + gamma * x * np.exp(-gamma * x * tau) * p0


def exponential_waiting_time(tau, gamma: float = 1.0):
    tau = np.asarray(tau, dtype=float)
    return gamma * np.exp(-gamma * tau)


# --- damped oscillator -------------------------------------------------------


@dataclass(frozen=True)
class OscillatorParams:
    omega: float = 1.0
    gamma: float = 1.0
    cutoff: int = 32

    def __post_init__(self) -> None:
        if self.cutoff < 2:
            raise DomainError("oscillator cutoff must be >= 2")
        if self.omega <= 0 or self.gamma <= 0:
            raise DomainError("omega and gamma must be positive")


def annihilation(d: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)


def make_damped_oscillator(params: OscillatorParams = OscillatorParams()) -> LindbladModel:
    d = params.cutoff
    a = annihilation(d)
    h = params.omega * np.diag(np.arange(d) + 0.5).astype(complex)
    return LindbladModel(h, (a,), params.gamma, f"damped-oscillator(D={d})")


def oscillator_propagator(params: OscillatorParams) -> np.ndarray:
    """``K(m, m')`` on the truncated Fock grid."""
    m = np.arange(params.cutoff)[:, None]
    mp = np.arange(params.cutoff)[None, :]
    g, w = params.gamma, params.omega
    return 2 * g * np.sqrt((m + 1) * (mp + 1)) / ((2 + m + mp) * g - 2j * w * (mp - m))


def oscillator_n_step_factor(params: OscillatorParams, n: int, size: int) -> np.ndarray:
    """``prod_{k<n} K(m+k, m'+k)`` for ``m, m' < size``, in closed form.

    With ``c = 1 + (m+m')/2 - i omega (m'-m)/gamma`` the product telescopes to
    ``sqrt((m+n)! (m'+n)! / (m! m'!)) * Gamma(c) / Gamma(c+n)``.
    """
    from scipy.special import gammaln, loggamma

    m = np.arange(size)[:, None].astype(float)
    mp = np.arange(size)[None, :].astype(float)
    c = 1 + 0.5 * (m + mp) - 1j * params.omega * (mp - m) / params.gamma
    log_f = (
        0.5 * (gammaln(m + n + 1) + gammaln(mp + n + 1) - gammaln(m + 1) - gammaln(mp + 1))
        + loggamma(c)
        - loggamma(c + n)
    )
    return np.exp(log_f)


def oscillator_jumptime_oracle(params: OscillatorParams, rho: np.ndarray, n: int) -> np.ndarray:
    """State after ``n`` jumps, ``<m|rho_n|m'> = F_n(m, m') <m+n|rho_0|m'+n>``.

    ``F_n`` is the n-step factor from :func:`oscillator_n_step_factor`; for
    ``n = 1`` it is ``K(m, m')``.  Indices past the cutoff contribute zero.
    """
    d = params.cutoff
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((d, d), dtype=complex)
    if n >= d:
        return out
    f = oscillator_n_step_factor(params, n, d - n)
    out[: d - n, : d - n] = f * rho[n:, n:]
    return out


def oscillator_power_form(params: OscillatorParams, rho: np.ndarray, n: int) -> np.ndarray:
    """``K(m, m')^n <m+n|rho_0|m'+n>``.

    Agrees with :func:`oscillator_jumptime_oracle` for ``n <= 1`` and on the
    diagonal (``K(m, m) = 1``), but not on off-diagonals for ``n >= 2``, where
    iterating the one-step map gives a product of distinct K factors.
    """
    d = params.cutoff
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros((d, d), dtype=complex)
    if n >= d:
        return out
    k = oscillator_propagator(params)
    out[: d - n, : d - n] = k[: d - n, : d - n] ** n * rho[n:, n:]
    return out


def coherent_state(alpha: complex, d: int) -> np.ndarray:
    """Fock amplitudes of ``|alpha>`` truncated to ``d`` levels (not renormalized)."""
    from scipy.special import gammaln

    m = np.arange(d)
    log_mag = -0.5 * abs(alpha) ** 2 - 0.5 * gammaln(m + 1)
    if alpha == 0:
        out = np.zeros(d, dtype=complex)
        out[0] = 1.0
        return out
    return np.exp(log_mag + m * np.log(abs(alpha))) * np.exp(1j * m * np.angle(alpha))


def fock_state(n: int, d: int) -> np.ndarray:
    v = np.zeros(d, dtype=complex)
    v[n] = 1.0
    return v


# --- collisional decoherence -------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentumGridModel:
    """Free particle with momentum kicks on a periodic uniform momentum grid.

    ``kicks`` are integer multiples of the grid spacing with probabilities ``g``
    (normalized to one, so ``gamma`` is the total collision rate).
    """

    p_min: float
    dp: float
    m_points: int
    kicks: np.ndarray  # integer shifts
    g: np.ndarray
    mass: float = 1.0
    gamma: float = 1.0

    def __post_init__(self) -> None:
        kicks = np.asarray(self.kicks)
        g = np.asarray(self.g, dtype=float)
        if not np.issubdtype(kicks.dtype, np.integer):
            raise DomainError("kick grid must be commensurate with the momentum grid")
        if kicks.shape != g.shape or np.any(g < 0) or abs(g.sum() - 1) > 1e-12:
            raise DomainError("G must be non-negative and sum to one")
        if np.max(np.abs(kicks)) >= self.m_points // 2:
            raise DomainError("kicks exceed half the momentum grid")
        if self.mass <= 0 or self.gamma <= 0 or self.dp <= 0:
            raise DomainError("mass, gamma and dp must be positive")
        object.__setattr__(self, "kicks", kicks.astype(np.int64))
        object.__setattr__(self, "g", g)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.m_points)

    @property
    def kick_variance(self) -> float:
        q = self.kicks * self.dp
        return float(np.sum(self.g * q**2) - np.sum(self.g * q) ** 2)

    def with_gamma(self, gamma: float) -> "MomentumGridModel":
        return MomentumGridModel(self.p_min, self.dp, self.m_points, self.kicks, self.g,
                                 self.mass, gamma)

    def metadata(self) -> dict:
        return {"p_min": self.p_min, "dp": self.dp, "M": self.m_points,
                "mass": self.mass, "gamma": self.gamma}


def gaussian_kicks(sigma_q: float, dp: float, width: float = 8.0) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric Gaussian ``G(q)`` sampled on the kick lattice ``q = l dp``."""
    lmax = int(np.ceil(width * sigma_q / dp))
    ell = np.arange(-lmax, lmax + 1)
    g = np.exp(-0.5 * (ell * dp / sigma_q) ** 2)
    return ell, g / g.sum()


def collisional_propagator(p: np.ndarray, pp: np.ndarray, mass: float, gamma: float) -> np.ndarray:
    return 1.0 / (1.0 + 1j * (p - pp) * (p + pp) / (2 * mass * gamma))


# fraction of probability allowed in the outer guard band before wrap-around is an error
GUARD_FRACTION = 1 / 16
GUARD_WEIGHT = 1e-12


def _guard_weight(model: MomentumGridModel, rho: np.ndarray) -> float:
    band = max(1, int(model.m_points * GUARD_FRACTION))
    diag = np.abs(np.diag(rho))
    return float(diag[:band].sum() + diag[-band:].sum())


def collisional_jumptime_map(model: MomentumGridModel, rho: np.ndarray, steps: int = 1,
                             check_guard: bool = True) -> np.ndarray:
    """Apply the kick-convolution step ``steps`` times.

    ``rho`` is the M x M momentum-grid matrix (trace one for a normalized
    state).  Kicks shift cyclically; a guard band at the grid edges must stay
    empty, otherwise a ``DomainError`` is raised.
    """
    rho = np.asarray(rho, dtype=complex)
    mpts = model.m_points
    if rho.shape != (mpts, mpts):
        raise DomainError(f"state shape {rho.shape} incompatible with grid of {mpts} points")
    p = model.p
    kmat = collisional_propagator(p[:, None], p[None, :], model.mass, model.gamma)
    # a kick shifts both indices equally, so in diagonal coordinates D[k, d] = rho[k, k - d]
    # the step is a cyclic convolution along k, done by FFT
    k = np.arange(mpts)
    cols = (k[:, None] - k[None, :]) % mpts
    kernel = np.zeros(mpts)
    np.add.at(kernel, model.kicks % mpts, model.g)
    kernel_f = np.fft.fft(kernel)[:, None]
    for _ in range(steps):
        diag = (kmat * rho)[k[:, None], cols]
        diag = np.fft.ifft(kernel_f * np.fft.fft(diag, axis=0), axis=0)
        out = np.empty_like(rho)
        out[k[:, None], cols] = diag
        rho = out
        if check_guard and _guard_weight(model, rho) > GUARD_WEIGHT:
            raise DomainError("momentum distribution reached the grid guard band")
    return rho


def momentum_moments(model: MomentumGridModel, rho: np.ndarray) -> tuple[float, float]:
    """Mean and variance of momentum for a trace-one grid matrix."""
    prob = np.real(np.diag(rho))
    tr = prob.sum()
    p = model.p
    mean = float(np.sum(p * prob) / tr)
    var = float(np.sum((p - mean) ** 2 * prob) / tr)
    return mean, var


def position_mean(model: MomentumGridModel, rho: np.ndarray, spacing: int = 1) -> float:
    """``<x>`` from ``x = i d/dp`` by central differences on an off-diagonal.

    ``<x> ~ -sum_k Im rho[k+s, k] / (s dp) / Tr rho``.  On the grid this equals
    ``<sin(s dp x)> / (s dp)`` exactly, so the error is
    ``-(s dp)^2 <x^3> / 6 + O(dp^4)``.
    """
    sub = np.diagonal(rho, offset=-spacing)
    return float(-np.sum(sub.imag) / (spacing * model.dp) / np.trace(rho).real)


def position_fd_error(model: MomentumGridModel, rho: np.ndarray) -> float:
    """Richardson estimate of ``position_mean(rho) - <x>`` (the dp^2 term)."""
    return -(position_mean(model, rho, 1) - position_mean(model, rho, 2)) / 3


def wavepacket(model: MomentumGridModel, p0: float, sigma_p: float, x0: float = 0.0) -> np.ndarray:
    """Gaussian momentum wavepacket centred at ``(x0, p0)``, as a trace-one grid matrix."""
    p = model.p
    psi = np.exp(-((p - p0) ** 2) / (4 * sigma_p**2) - 1j * p * x0)
    psi /= np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


@dataclass(frozen=True, eq=False)
class CollisionalMoments:
    """Moment series ``n = 0..steps`` of repeated collisional jump steps."""

    trace: np.ndarray
    p_mean: np.ndarray
    p_var: np.ndarray
    x_mean: np.ndarray  # finite-difference estimate
    x_fd_error: np.ndarray  # its Richardson error estimate

    @property
    def x_corrected(self) -> np.ndarray:
        return self.x_mean - self.x_fd_error

    def x_step_tolerance(self) -> np.ndarray:
        """Per-step allowance for ``<x>`` increments: twice the change in the dp^2 error."""
        return 2.0 * np.abs(np.diff(self.x_fd_error))


def collisional_moments(model: MomentumGridModel, rho: np.ndarray, steps: int) -> CollisionalMoments:
    cols: list[list[float]] = [[], [], [], [], []]
    for n in range(steps + 1):
        if n:
            rho = collisional_jumptime_map(model, rho)
        mean, var = momentum_moments(model, rho)
        for col, val in zip(cols, (np.trace(rho).real, mean, var, position_mean(model, rho),
                                   position_fd_error(model, rho))):
            col.append(float(val))
    return CollisionalMoments(*(np.array(c) for c in cols))


CATALOG: dict[str, Callable[..., LindbladModel]] = {}


def _register(name: str):
    def deco(fn):
        CATALOG[name] = fn
        return fn
    return deco


@_register("amplitude-damping")
def _cat_amplitude(hx=0.0, hy=0.0, hz=0.0, gamma=1.0):
    return make_amplitude_damping((hx, hy, hz), gamma)


@_register("exceptional-point")
def _cat_ep(gamma=1.0):
    return make_exceptional_point(gamma)


@_register("thermal")
def _cat_thermal(x=1.0, hx=0.0, hy=0.0, hz=0.0, gamma=1.0):
    return make_amplitude_damping((hx, hy, hz), gamma, thermal_x=x)


@_register("dephasing")
def _cat_dephasing(hx=0.0, hy=0.0, hz=0.0, gamma=1.0):
    return make_dephasing((hx, hy, hz), gamma)


@_register("oscillator")
def _cat_oscillator(omega=1.0, gamma=1.0, cutoff=32):
    return make_damped_oscillator(OscillatorParams(omega, gamma, int(cutoff)))


def catalog_model(name: str, **params) -> LindbladModel:
    try:
        ctor = CATALOG[name]
    except KeyError:
        raise KeyError(f"unknown catalog model '{name}'; choose from {sorted(CATALOG)}") from None
    return ctor(**params)


def catalog_suite(gamma: float = 1.0) -> dict[str, LindbladModel]:
    """Representative instances of every finite-dimensional catalog model."""
    return {
        "amplitude-damping": make_amplitude_damping((0, 0, 0), gamma),
        "amplitude-damping-hz": make_amplitude_damping((0, 0, 0.7), gamma),
        "amplitude-damping-hx": make_amplitude_damping((0.3, 0, 0), gamma),
        "exceptional-point": make_exceptional_point(gamma),
        "thermal-0.1": make_amplitude_damping((0, 0, 0), gamma, 0.1),
        "thermal-1": make_amplitude_damping((0, 0, 0), gamma, 1.0),
        "thermal-10": make_amplitude_damping((0, 0, 0), gamma, 10.0),
        "dephasing": make_dephasing((0, 0, 0), gamma),
        "dephasing-hz": make_dephasing((0, 0, 0.5 * gamma), gamma),
        "dephasing-h": make_dephasing((0.3, -0.2, 0.4), gamma),
        "oscillator-8": make_damped_oscillator(OscillatorParams(1.0, gamma, 8)),
    }
