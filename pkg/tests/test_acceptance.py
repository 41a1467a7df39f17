"""Acceptance criteria, each checked at its stated tolerance.

Every check prints one ``PASS``/``FAIL`` line (repeated in the session summary).
Two literal checks cannot hold for the exact model; they are kept verbatim
and marked as strict expected failures, next to the corrected checks.
"""

import time

import numpy as np
import pytest
from scipy import stats

from unravel.catalog import (
    DEMO_ALPHA,
    DEMO_JUMP_COUNTS,
    SM,
    SP,
    SZ,
    THERMAL_SWEEP,
    MomentumGridModel,
    OscillatorParams,
    catalog_suite,
    coherent_state,
    collisional_moments,
    dephasing_jumptime_oracle,
    exceptional_point_waiting_time,
    gaussian_kicks,
    make_amplitude_damping,
    make_damped_oscillator,
    make_dephasing,
    make_exceptional_point,
    oscillator_jumptime_oracle,
    oscillator_power_form,
    oscillator_propagator,
    wavepacket,
)
from unravel.cli import run as cli_run
from unravel.darkstates import certify_trace_preservation, find_dark_states
from unravel.jumptime import completeness_matrix, evolve_jumptime, jump_map, waiting_time
from unravel.phasespace import read_grid
from unravel.trajectories import chi_square_test, ks_test, run_ensemble
from unravel.walltime import evolve_walltime, trace_distance

from conftest import ACCEPTANCE_LINES, random_density

ALPHA = 0.01
PSI = np.array([np.cos(0.4), np.exp(0.7j) * np.sin(0.4)])


def report(label: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def random_states(seed: int, d: int, k: int = 100):
    rng = np.random.default_rng(seed)
    return [random_density(rng, d, rank=int(rng.integers(1, d + 1))) for _ in range(k)]


def demo_initial(d: int = 32) -> np.ndarray:
    c = coherent_state(DEMO_ALPHA, d)
    return np.outer(c, c.conj())


def test_criterion_1_amplitude_damping():
    t0 = time.perf_counter()
    m = make_amplitude_damping()
    err1 = tr2 = 0.0
    for rho in random_states(1, 2):
        seq = evolve_jumptime(m, rho, 2)
        expected = np.zeros((2, 2), complex)
        expected[0, 0] = rho[1, 1]
        err1 = max(err1, np.max(np.abs(seq.states[1] - expected)))
        tr2 = max(tr2, abs(np.trace(seq.states[2]).real))
    dt = time.perf_counter() - t0
    report("criterion 1 (amplitude damping rho1, rho2 = 0)", err1 <= 1e-10 and tr2 <= 1e-12
           and dt < 1.0, f"max|rho1 - oracle| = {err1:.2e}, max Tr rho2 = {tr2:.2e}, {dt:.2f} s")


def test_criterion_2_exceptional_point():
    t0 = time.perf_counter()
    gamma = 1.0
    m = make_exceptional_point(gamma)
    err = 0.0
    for rho in random_states(2, 2):
        out = jump_map(m, rho)
        expected = np.zeros((2, 2), complex)
        expected[0, 0] = np.trace(rho)
        err = max(err, np.max(np.abs(out - expected)))
    taus = np.linspace(0, 30 / gamma, 200)
    post = jump_map(m, random_states(22, 2, 1)[0])
    w = waiting_time(m, post, taus, from_jump=1)
    werr = float(np.max(np.abs(w.densities - exceptional_point_waiting_time(taus, gamma))))
    dt = time.perf_counter() - t0
    report("criterion 2 (exceptional point map and waiting time)",
           err <= 1e-9 and werr <= 1e-8 and dt < 1.0,
           f"map err {err:.2e}, waiting-time err {werr:.2e} on 200 points, {dt:.2f} s")


def test_criterion_3_thermal_universality():
    pair = orc = 0.0
    models = [make_amplitude_damping(gamma=1.0, thermal_x=x) for x in THERMAL_SWEEP]
    for rho in random_states(3, 2):
        outs = [jump_map(m, rho) for m in models]
        pair = max(pair, max(np.max(np.abs(a - b)) for a in outs for b in outs))
        orc = max(orc, max(np.max(np.abs(a - (SM @ rho @ SP + SP @ rho @ SM))) for a in outs))
    report("criterion 3 (thermal map independent of x)", pair <= 1e-9 and orc <= 1e-9,
           f"pairwise {pair:.2e}, vs sigma- rho sigma+ + sigma+ rho sigma- {orc:.2e}")


def test_criterion_4_dephasing():
    rng = np.random.default_rng(4)
    gamma = 1.0
    err = 0.0
    for rho in random_states(4, 2):
        hz = float(rng.uniform(-3, 3))
        out = jump_map(make_dephasing((0, 0, hz), gamma), rho)
        err = max(err, np.max(np.abs(out - dephasing_jumptime_oracle(hz, gamma, rho))))
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    v /= np.linalg.norm(v)
    rho0 = np.outer(v, v.conj())
    seq = evolve_jumptime(make_dephasing(), rho0, 50)
    purity = max(abs(np.trace(s @ s).real - 1.0) for s in seq.states)
    cycle = max(np.max(np.abs(seq.states[n] - (rho0 if n % 2 == 0 else SZ @ rho0 @ SZ)))
                for n in range(51))
    report("criterion 4 (dephasing closed form, purity, period 2)",
           err <= 1e-9 and purity <= 1e-9 and cycle <= 1e-12,
           f"closed form {err:.2e}, purity drift {purity:.2e}, period-2 residual {cycle:.2e}")


def test_criterion_5_damped_oscillator():
    t0 = time.perf_counter()
    p = OscillatorParams(1.0, 1.0, 32)
    m = make_damped_oscillator(p)
    k = oscillator_propagator(p)
    one = 0.0
    for rho in random_states(5, 32, 10):
        out = jump_map(m, rho)
        expected = np.zeros_like(rho)
        expected[:31, :31] = k[:31, :31] * rho[1:, 1:]
        one = max(one, np.max(np.abs(out - expected)))
    rho0 = demo_initial()
    seq = evolve_jumptime(m, rho0, max(DEMO_JUMP_COUNTS))
    pops = np.real(np.diag(rho0))
    tr_err = max(abs(seq.traces[n] - pops[n:].sum()) for n in DEMO_JUMP_COUNTS)
    iter_err = max(np.max(np.abs(seq.states[n] - oscillator_jumptime_oracle(p, rho0, n)))
                   for n in range(max(DEMO_JUMP_COUNTS) + 1))
    dt = time.perf_counter() - t0
    report("criterion 5 (oscillator one-step K, traces at n = 0,2,5,10)",
           one <= 1e-9 and tr_err <= 1e-8 and dt < 10.0,
           f"one-step err {one:.2e}, trace err {tr_err:.2e}, {dt:.2f} s")
    report("criterion 5 (iterated map vs product-of-K closed form)", iter_err <= 1e-9,
           f"max err {iter_err:.2e} for n <= 10")


@pytest.mark.xfail(strict=True, reason="K(m,m')^n is not the n-step solution off the diagonal; "
                                       "the n-step factor is prod_k K(m+k, m'+k)")
def test_criterion_5_literal_power_form():
    p = OscillatorParams(1.0, 1.0, 32)
    rho0 = demo_initial()
    seq = evolve_jumptime(make_damped_oscillator(p), rho0, 10)
    err = max(np.max(np.abs(seq.states[n] - oscillator_power_form(p, rho0, n)))
              for n in DEMO_JUMP_COUNTS)
    report("criterion 5 (iterated map vs literal K^n form)", err <= 1e-9,
           f"max err {err:.2e} over n = 0,2,5,10")


def test_criterion_6_trace_preservation_theorem():
    rows, ok = [], True
    for name, m in catalog_suite().items():
        cert = certify_trace_preservation(m)  # raises on any internal disagreement
        s = completeness_matrix(m)
        eye = np.eye(m.dim)
        if cert.report.has_dark_states:
            s_ok = np.max(np.abs((eye - s) - cert.report.projector())) <= 1e-8
        else:
            s_ok = np.max(np.abs(s - eye)) <= 1e-8
        rho = random_states(6, m.dim, 1)[0]
        tp_emp = abs(np.trace(jump_map(m, rho)).real - 1.0) <= 1e-8
        agree = s_ok and (tp_emp == cert.is_tp == (find_dark_states(m).dark_dim == 0))
        ok &= agree
        rows.append(f"{name}:{'tp' if cert.is_tp else 'dark'}")
    report("criterion 6 (dark states <=> S != 1 <=> trace loss)", ok, ", ".join(rows))


def test_criterion_7_monte_carlo():
    t0 = time.perf_counter()
    gamma = 1.0
    models = {
        "dephasing": make_dephasing((0.3, 0.0, 0.5), gamma),
        "exceptional-point": make_exceptional_point(gamma),
        "thermal": make_amplitude_damping(gamma=gamma, thermal_x=0.5),
    }
    rho0 = np.outer(PSI, PSI.conj())
    ts = [0.5 / gamma, 1.0 / gamma, 3.0 / gamma]
    ns = [1, 2, 5]
    worst = 0.0
    for name, m in models.items():
        run = run_ensemble(m, PSI, n_samples=10000, seed=101, max_time=max(ts),
                           capture_times=ts)
        ref = evolve_walltime(m, rho0, ts)
        wd = [trace_distance(run.walltime_mean(t), r) for t, r in zip(ts, ref)]
        run = run_ensemble(m, PSI, n_samples=10000, seed=202, max_time=400.0 / gamma,
                           max_jumps=max(ns), capture_jumps=ns)
        seq = evolve_jumptime(m, rho0, max(ns))
        jd = [trace_distance(run.jumptime_mean(n)[0], seq.states[n]) for n in ns]
        worst = max(worst, *wd, *jd)
        report(f"criterion 7 ({name} walltime/jumptime averages)", max(wd + jd) <= 0.05,
               f"walltime D = {', '.join(f'{x:.4f}' for x in wd)}; "
               f"jumptime D = {', '.join(f'{x:.4f}' for x in jd)}")
    p = OscillatorParams(1.0, gamma, 32)
    c = coherent_state(DEMO_ALPHA, 32)
    counts = list(DEMO_JUMP_COUNTS)
    run = run_ensemble(make_damped_oscillator(p), c, n_samples=10000, seed=303,
                       max_time=400.0 / gamma, max_jumps=max(counts), capture_jumps=counts)
    pops = np.abs(c) ** 2
    dev = [abs(run.jumptime_mean(n)[1] / 10000 - pops[n:].sum()) for n in counts]
    dt = time.perf_counter() - t0
    report("criterion 7 (oscillator contributing fraction)", max(dev) <= 0.02,
           f"|fraction - sum_{{m>=n}} p_m| = {', '.join(f'{x:.4f}' for x in dev)} "
           f"for n = {counts}")
    report("criterion 7 (runtime)", dt < 120.0, f"{dt:.1f} s")


def test_criterion_8_waiting_time_statistics():
    gamma = 1.0
    ep = run_ensemble(make_exceptional_point(gamma), PSI, n_samples=10000, seed=404,
                      max_time=400.0 / gamma, max_jumps=2)
    waits = np.array([r.waits()[1] for r in ep.records if r.n_jumps >= 2])
    cdf = stats.gamma(a=3, scale=2.0 / gamma).cdf
    p_ks, p_chi = ks_test(waits, cdf), chi_square_test(waits, cdf)
    report("criterion 8 (exceptional-point waits after jump 1 vs Gamma(3, 2/gamma))",
           len(waits) == 10000 and p_ks > ALPHA and p_chi > ALPHA,
           f"n = {len(waits)}, KS p = {p_ks:.3f}, chi-square p = {p_chi:.3f}")
    dep = run_ensemble(make_dephasing((0.3, 0.0, 0.5), gamma), PSI, n_samples=2500, seed=505,
                       max_time=400.0 / gamma, max_jumps=4)
    waits = np.concatenate([r.waits() for r in dep.records])
    cdf = stats.expon(scale=1.0 / gamma).cdf
    p_ks, p_chi = ks_test(waits, cdf), chi_square_test(waits, cdf)
    report("criterion 8 (dephasing waits vs Exp(gamma))",
           len(waits) == 10000 and p_ks > ALPHA and p_chi > ALPHA,
           f"n = {len(waits)}, KS p = {p_ks:.3f}, chi-square p = {p_chi:.3f}")


def _collisional(gamma: float) -> MomentumGridModel:
    points, half_width = 512, 4.0
    dp = 2 * half_width / points
    kicks, g = gaussian_kicks(0.1, dp)
    return MomentumGridModel(-half_width, dp, points, kicks, g, 1.0, gamma)


def test_criterion_9_collisional_moments():
    m = _collisional(1.0)
    rho0 = wavepacket(m, 0.5, 0.2, -2.5)
    mom = collisional_moments(m, rho0, 10)
    p_drift = float(np.ptp(mom.p_mean))
    var_err = float(np.max(np.abs(np.diff(mom.p_var) - m.kick_variance)))
    predicted = mom.p_mean[:-1] / (m.mass * m.gamma)
    x_err = np.abs(np.diff(mom.x_mean) - predicted)
    x_tol = mom.x_step_tolerance()
    report("criterion 9 (<p> constant, variance steps = Delta_G^2)",
           p_drift <= 1e-10 and var_err <= 1e-8,
           f"<p> drift {p_drift:.2e}, variance step err {var_err:.2e}")
    report("criterion 9 (<x> steps = <p>/(m gamma) within O(dp^2) tolerance)",
           bool(np.all(x_err <= x_tol)),
           f"max step err {x_err.max():.2e}, tolerance 2|Delta dp^2 term| >= {x_tol.min():.2e}")
    zeno = collisional_moments(m.with_gamma(100.0), rho0, 10)
    ratio = np.diff(zeno.x_corrected) / np.diff(mom.x_corrected) * 100.0
    dev = float(np.max(np.abs(ratio - 1.0)))
    report("criterion 9 (Zeno scaling: gamma x 100 => step / 100)", dev <= 0.01,
           f"max |100 step_100 / step_1 - 1| = {dev:.2e}")


def test_criterion_10_wigner_grids(tmp_path):
    t0 = time.perf_counter()
    code = cli_run(["wigner", "--model", "oscillator", "--state", "demo",
                    "--n-list", ",".join(map(str, DEMO_JUMP_COUNTS)), "--out", str(tmp_path)])
    files = sorted(tmp_path.glob("wigner_n*.txt"))
    pops = np.real(np.diag(demo_initial()))
    errs = []
    for n in DEMO_JUMP_COUNTS:
        g = read_grid(tmp_path / f"wigner_n{n}.txt")
        errs.append(abs(g.integral - pops[n:].sum()))
    dt = time.perf_counter() - t0
    report("criterion 10 (four Wigner grids integrate to predicted traces)",
           code == 0 and len(files) == 4 and max(errs) <= 1e-3 and dt < 30.0,
           f"{len(files)} grids, max |integral - trace| = {max(errs):.2e}, {dt:.2f} s")


@pytest.mark.xfail(strict=True, reason="<0|rho_10|0>/Tr rho_10 = P(10)/P(>=10) of Poisson(4) "
                                       "= 0.651 for the exact jumptime solution")
def test_criterion_10_vacuum_dominance():
    p = OscillatorParams(1.0, 1.0, 32)
    rho0 = demo_initial()
    rho10 = oscillator_jumptime_oracle(p, rho0, 10)
    frac = rho10[0, 0].real / np.trace(rho10).real
    solver = evolve_jumptime(make_damped_oscillator(p), rho0, 10)
    frac_solver = solver.states[10][0, 0].real / solver.traces[10]
    report("criterion 10 (vacuum dominance <0|rho_10|0>/Tr rho_10 >= 0.9)", frac >= 0.9,
           f"closed form {frac:.4f}, solver {frac_solver:.4f}")
