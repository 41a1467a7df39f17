"""Quantum-jump trajectory sampler with walltime and jumptime averaging.

Between jumps a trajectory evolves as ``exp(-i H_eff tau) psi``; the next
jump fires when ``|psi(tau)|^2`` drops below a uniform threshold, and channel
``j`` is chosen with probability proportional to ``|L_j psi|^2``.

Random numbers: trajectory ``i`` of an ensemble with seed ``s`` draws from
``numpy.random.Philox(key=[s, i])`` (stream version 1).  Draw order: one
uniform to pick an eigenvector of a mixed initial state (only if mixed), then
pairs ``(threshold, channel)`` per jump, fetched in blocks of
``UNIFORM_BLOCK``.  Results are therefore a deterministic function of
``(inputs, seed)`` regardless of how trajectories are scheduled on threads.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm
from scipy import stats

from . import _kernels as K
from .config import default_threads
from .darkstates import find_dark_states
from .errors import DegenerateEstimateError, DomainError, IntegrationError
from .model import LindbladModel, effective_hamiltonian

RNG_STREAM_VERSION = 1
UNIFORM_BLOCK = 64
TAYLOR_ORDER = 18
REL_TIME_TOL = 1e-10
NO_LIMIT = np.iinfo(np.int64).max


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True, eq=False)
class Propagation:
    """Precomputed no-jump propagators for one model and time horizon."""

    gen: np.ndarray  # -i H_eff
    ladder: np.ndarray  # exp(-i H_eff 2^k dt), k = 0..K-1
    dt: float
    ops: np.ndarray  # (J, d, d)
    dark_proj: np.ndarray
    has_dark: bool

    @classmethod
    def build(cls, model: LindbladModel, max_time: float) -> "Propagation":
        heff = effective_hamiltonian(model)
        hnorm = float(np.linalg.norm(heff, 2))
        dt = 0.5 / hnorm if hnorm > 0 else max(max_time, 1.0)
        levels = max(1, int(np.ceil(np.log2(max_time / dt + 1.0))) + 1)
        base = expm(-1j * heff * dt)
        ladder = [base]
        for k in range(1, levels):
            # direct exponentials avoid compounding squaring error on long steps
            ladder.append(expm(-1j * heff * dt * 2.0**k))
        report = find_dark_states(model)
        return cls(
            np.ascontiguousarray(-1j * heff),
            np.ascontiguousarray(np.array(ladder)),
            dt,
            np.ascontiguousarray(np.array(model.jump_ops)),
            np.ascontiguousarray(report.projector().astype(complex)),
            report.has_dark_states,
        )


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    seed: int
    stream: int
    jump_times: np.ndarray
    jump_channels: np.ndarray
    terminated_at: float
    status: str
    time_snapshots: dict[float, np.ndarray] = field(default_factory=dict)
    jump_snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def n_jumps(self) -> int:
        return len(self.jump_times)

    def waits(self) -> np.ndarray:
        return np.diff(np.concatenate([[0.0], self.jump_times]))

    def to_json(self) -> str:
        """One log line: seed, stream, jump times, channels, termination."""
        return json.dumps({
            "seed": self.seed,
            "stream": self.stream,
            "jump_times": [float(x) for x in self.jump_times],
            "jump_channels": [int(c) for c in self.jump_channels],
            "terminated_at": self.terminated_at,
            "status": self.status,
        }, separators=(",", ":"))


_STATUS = {K.HIT_HORIZON: "horizon", K.HIT_MAX_JUMPS: "max_jumps", K.WENT_DARK: "dark"}


def _initial_sampler(state: np.ndarray):
    """Return (vectors, cumulative weights, trace) for pure or mixed input."""
    state = np.asarray(state, dtype=np.complex128)
    if state.ndim == 1:
        nrm = np.linalg.norm(state)
        if not np.isclose(nrm, 1.0, atol=1e-9):
            raise DomainError(f"initial state vector must be normalized (norm {nrm:.6g})")
        return state[None, :] / nrm, np.array([1.0]), 1.0
    rho = 0.5 * (state + state.conj().T)
    tr = float(np.trace(rho).real)
    if tr <= 0:
        raise DomainError("initial density matrix has zero trace")
    w, v = np.linalg.eigh(rho / tr)
    keep = w > 1e-14
    w, v = w[keep], v[:, keep]
    if len(w) == 1:
        return v.T.copy(), np.array([1.0]), tr
    return v.T.copy(), np.cumsum(w) / w.sum(), tr


def _run_one(prop: Propagation, vectors, cum_w, seed, index, max_time, max_jumps,
             cap_times, cap_jumps):
    rng = trajectory_rng(seed, index)
    if len(cum_w) > 1:
        k = int(np.searchsorted(cum_w, rng.random(), side="right"))
        psi = vectors[min(k, len(cum_w) - 1)].copy()
    else:
        psi = vectors[0].copy()
    d = psi.shape[0]
    t, n, cap_idx = 0.0, 0, 0
    cap_time_out = np.zeros((len(cap_times), d), dtype=np.complex128)
    cap_time_ok = np.zeros(len(cap_times), dtype=np.bool_)
    cap_jump_out = np.zeros((len(cap_jumps), d), dtype=np.complex128)
    cap_jump_time = np.full(len(cap_jumps), np.nan)
    times, chans = [], []
    # n_jumps = 0 "snapshot" is the initial state itself
    for q, nj in enumerate(cap_jumps):
        if nj == 0:
            cap_jump_out[q] = psi
            cap_jump_time[q] = 0.0
    while True:
        uniforms = rng.random(UNIFORM_BLOCK)
        jt = np.empty(UNIFORM_BLOCK // 2)
        jc = np.empty(UNIFORM_BLOCK // 2, dtype=np.int64)
        psi, t, n, n_rec, cap_idx, status = K.run_chunk(
            psi, t, n, uniforms, prop.gen, prop.ladder, prop.dt, TAYLOR_ORDER, prop.ops,
            prop.dark_proj, prop.has_dark, max_time, max_jumps, cap_times, cap_idx,
            cap_time_out, cap_time_ok, cap_jumps, cap_jump_out, cap_jump_time, jt, jc,
            REL_TIME_TOL)
        times.append(jt[:n_rec].copy())
        chans.append(jc[:n_rec].copy())
        if status == K.NON_FINITE:
            raise IntegrationError("non-finite trajectory state", float(t))
        if status != K.NEED_UNIFORMS:
            break
    return (np.concatenate(times), np.concatenate(chans), float(t), int(status),
            cap_time_out, cap_time_ok, cap_jump_out, cap_jump_time)


def _as_sorted(values: Iterable, dtype) -> np.ndarray:
    arr = np.array(sorted(set(values)), dtype=dtype)
    return np.ascontiguousarray(arr)


def sample_trajectory(model: LindbladModel, psi0, *, max_time: float, max_jumps: int = NO_LIMIT,
                      seed: int = 0, stream: int = 0, capture_times: Sequence[float] = (),
                      capture_jumps: Sequence[int] = (),
                      propagation: Propagation | None = None) -> TrajectoryRecord:
    """Sample one trajectory until ``max_time`` or ``max_jumps`` jumps."""
    if max_time <= 0 or max_jumps <= 0:
        raise DomainError("stop bounds must be positive")
    prop = propagation or Propagation.build(model, max_time)
    vectors, cum_w, _ = _initial_sampler(psi0)
    ct = _as_sorted(capture_times, float)
    cj = _as_sorted(capture_jumps, np.int64)
    jt, jc, t_end, status, ctout, ctok, cjout, cjt = _run_one(
        prop, vectors, cum_w, seed, stream, float(max_time), int(max_jumps), ct, cj)
    tsnap = {float(tc): ctout[i] for i, tc in enumerate(ct) if ctok[i]}
    jsnap = {int(nj): cjout[i] for i, nj in enumerate(cj) if not np.isnan(cjt[i])}
    return TrajectoryRecord(seed, stream, jt, jc, t_end, _STATUS[status], tsnap, jsnap)


@dataclass(frozen=True, eq=False)
class EnsembleRun:
    """Raw per-trajectory results of one ensemble, in trajectory order."""

    seed: int
    n_samples: int
    initial_trace: float
    capture_times: np.ndarray
    capture_jumps: np.ndarray
    time_states: np.ndarray  # (N, T, d)
    time_ok: np.ndarray  # (N, T)
    jump_states: np.ndarray  # (N, Q, d)
    jump_ok: np.ndarray  # (N, Q)
    records: list[TrajectoryRecord]

    def walltime_mean(self, t: float) -> np.ndarray:
        i = _index_of(self.capture_times, t)
        ok = self.time_ok[:, i]
        if not np.all(ok):
            raise DegenerateEstimateError(f"{np.sum(~ok)} trajectories stopped before t = {t}")
        v = self.time_states[:, i, :]
        return self.initial_trace * np.einsum("ni,nj->ij", v, v.conj()) / self.n_samples

    def jumptime_mean(self, n: int) -> tuple[np.ndarray, int]:
        i = _index_of(self.capture_jumps, n)
        ok = self.jump_ok[:, i]
        n_contrib = int(ok.sum())
        if n_contrib == 0:
            raise DegenerateEstimateError(f"no trajectory reached {n} jumps")
        v = self.jump_states[ok, i, :]
        rho = self.initial_trace * np.einsum("ni,nj->ij", v, v.conj()) / self.n_samples
        return rho, n_contrib


def _index_of(arr: np.ndarray, value) -> int:
    hits = np.nonzero(np.isclose(arr, value, rtol=0, atol=1e-12))[0]
    if len(hits) == 0:
        raise KeyError(f"{value} was not captured; captured: {list(arr)}")
    return int(hits[0])


def run_ensemble(model: LindbladModel, state, *, n_samples: int, seed: int,
                 max_time: float, max_jumps: int = NO_LIMIT,
                 capture_times: Sequence[float] = (), capture_jumps: Sequence[int] = (),
                 threads: int | None = None, keep_records: bool = True) -> EnsembleRun:
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if max_time <= 0 or max_jumps <= 0:
        raise DomainError("stop bounds must be positive")
    prop = Propagation.build(model, max_time)
    vectors, cum_w, trace0 = _initial_sampler(state)
    ct = _as_sorted(capture_times, float)
    cj = _as_sorted(capture_jumps, np.int64)
    if np.any(ct > max_time):
        raise DomainError("capture times beyond the horizon")
    d = model.dim
    ts = np.zeros((n_samples, len(ct), d), dtype=np.complex128)
    tok = np.zeros((n_samples, len(ct)), dtype=bool)
    js = np.zeros((n_samples, len(cj), d), dtype=np.complex128)
    jok = np.zeros((n_samples, len(cj)), dtype=bool)
    records: list[TrajectoryRecord | None] = [None] * n_samples

    def work(lo: int, hi: int) -> None:
        for i in range(lo, hi):
            jt, jc, t_end, status, ctout, ctok, cjout, cjt = _run_one(
                prop, vectors, cum_w, seed, i, float(max_time), int(max_jumps), ct, cj)
            ts[i], tok[i], js[i], jok[i] = ctout, ctok, cjout, ~np.isnan(cjt)
            if keep_records:
                records[i] = TrajectoryRecord(seed, i, jt, jc, t_end, _STATUS[status])

    threads = threads or default_threads()
    if threads <= 1:
        work(0, n_samples)
    else:
        bounds = np.linspace(0, n_samples, threads * 4 + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(lambda b: work(*b), zip(bounds[:-1], bounds[1:])))
    return EnsembleRun(seed, n_samples, trace0, ct, cj, ts, tok, js, jok,
                       [r for r in records if r is not None])


@dataclass(frozen=True, eq=False)
class EnsembleAverage:
    kind: str  # "walltime" or "jumptime"
    at: float
    mean_state: np.ndarray
    n_samples: int
    n_contributing: int

    @property
    def stderr_scale(self) -> float:
        return 1.0 / np.sqrt(self.n_samples)


def ensemble_average(model: LindbladModel, state, kind: str, at, *, n_samples: int,
                     seed: int, horizon: float | None = None,
                     threads: int | None = None) -> EnsembleAverage:
    """Average trajectories at a fixed time (walltime) or fixed jump count (jumptime).

    Jumptime averages are sub-normalized: each trajectory that reaches ``at``
    jumps before ``horizon`` (default ``60/gamma``) contributes its post-jump
    state with weight ``1/n_samples``.
    """
    if kind == "walltime":
        t = float(at)
        if t <= 0:
            raise DomainError("walltime average needs t > 0")
        run = run_ensemble(model, state, n_samples=n_samples, seed=seed, max_time=t,
                           capture_times=[t], threads=threads, keep_records=False)
        return EnsembleAverage(kind, t, run.walltime_mean(t), n_samples, n_samples)
    if kind == "jumptime":
        n = int(at)
        horizon = horizon if horizon is not None else 60.0 / model.gamma
        run = run_ensemble(model, state, n_samples=n_samples, seed=seed, max_time=horizon,
                           max_jumps=max(n, 1), capture_jumps=[n], threads=threads,
                           keep_records=False)
        rho, n_contrib = run.jumptime_mean(n)
        return EnsembleAverage(kind, n, rho, n_samples, n_contrib)
    raise DomainError(f"unknown ensemble kind '{kind}'")


@dataclass(frozen=True)
class WaitingHistogram:
    edges: np.ndarray
    counts: np.ndarray
    waits: np.ndarray
    from_jump: int
    n_contributing: int

    @property
    def density(self) -> np.ndarray:
        width = np.diff(self.edges)
        return self.counts / (self.counts.sum() * width)


def empirical_waiting_times(records: Sequence[TrajectoryRecord], n: int,
                            bins: int | np.ndarray = 50,
                            range_: tuple[float, float] | None = None) -> WaitingHistogram:
    """Histogram of ``t_{n+1} - t_n`` (``t_0 = 0``) over trajectories with n+1 jumps."""
    waits = np.array([r.waits()[n] for r in records if r.n_jumps > n])
    if waits.size == 0:
        raise DegenerateEstimateError(f"no trajectory recorded {n + 1} jumps")
    counts, edges = np.histogram(waits, bins=bins, range=range_)
    return WaitingHistogram(edges, counts, waits, n, int(waits.size))


def ks_test(waits: np.ndarray, cdf) -> float:
    """Kolmogorov-Smirnov p-value of ``waits`` against ``cdf``."""
    return float(stats.kstest(waits, cdf).pvalue)


def chi_square_test(waits: np.ndarray, cdf, n_bins: int = 20) -> float:
    """Chi-square p-value on equiprobable bins of the reference distribution."""
    qs = np.linspace(0, 1, n_bins + 1)
    # invert the cdf numerically on a fine grid
    hi = float(np.max(waits)) * 2 + 1.0
    grid = np.linspace(0, hi, 20001)
    cgrid = cdf(grid)
    edges = np.interp(qs[1:-1], cgrid, grid)
    idx = np.searchsorted(edges, waits, side="right")
    observed = np.bincount(idx, minlength=n_bins)
    probs = np.diff(np.concatenate([[0.0], cdf(edges), [1.0]]))
    expected = probs * waits.size
    return float(stats.chisquare(observed, expected * observed.sum() / expected.sum()).pvalue)


def bootstrap_trace_distance_sigma(states: np.ndarray, reference: np.ndarray, *,
                                   scale: float = 1.0, n_boot: int = 200,
                                   seed: int = 0) -> float:
    """Bootstrap std-dev of the trace distance between a resampled mean and ``reference``.

    ``states`` are per-trajectory vectors (rows); rows of zeros count as
    non-contributing.
    """
    from .walltime import trace_distance

    rng = np.random.default_rng(seed)
    n = states.shape[0]
    vals = []
    for _ in range(n_boot):
        idx = rng.integers(0, n, n)
        v = states[idx]
        rho = scale * np.einsum("ni,nj->ij", v, v.conj()) / n
        vals.append(trace_distance(rho, reference))
    return float(np.std(vals))
