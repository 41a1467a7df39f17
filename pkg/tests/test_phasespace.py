import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import eval_hermite, gammaln

from unravel.catalog import (
    DEMO_ALPHA,
    DEMO_JUMP_COUNTS,
    OscillatorParams,
    coherent_state,
    fock_state,
    make_damped_oscillator,
    oscillator_jumptime_oracle,
)
from unravel.jumptime import evolve_jumptime
from unravel.model import pure_state
from unravel.phasespace import grid, read_grid, wigner, write_grid

from conftest import random_density


def hermite_function(n, x):
    log_norm = -0.5 * (n * np.log(2.0) + gammaln(n + 1) + 0.5 * np.log(np.pi))
    return np.exp(log_norm - 0.5 * x**2) * eval_hermite(n, x)


def direct_wigner(amps, x, p):
    """(1/pi) int psi*(x + y) psi(x - y) e^{2 i p y} dy for a real-coefficient Fock superposition."""
    def psi(z):
        return sum(c * hermite_function(n, z) for n, c in enumerate(amps))

    f = lambda y: psi(x + y) * psi(x - y) * np.cos(2 * p * y)
    val, _ = quad(f, -12, 12, epsabs=1e-13, limit=200)
    return val / np.pi


def test_vacuum_and_first_excited_state():
    w = wigner(pure_state(fock_state(0, 4)))
    assert w.max_value == pytest.approx(1 / np.pi, abs=1e-12)
    assert w.peak() == (0.0, 0.0)
    w1 = wigner(pure_state(fock_state(1, 4)), np.array([0.0]), np.array([0.0]))
    assert w1.values[0, 0] == pytest.approx(-1 / np.pi, abs=1e-12)


def test_coherent_state_centre():
    c = coherent_state(DEMO_ALPHA, 32)
    w = wigner(np.outer(c, c.conj()))
    assert w.peak() == pytest.approx((2.0, 2.0), abs=1e-12)
    assert w.max_value == pytest.approx(1 / np.pi, abs=1e-8)
    assert w.integral == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("n", [0, 1, 3, 7])
def test_x_marginal_is_hermite_density(n):
    x = np.linspace(-5, 5, 41)
    p = np.linspace(-9, 9, 721)
    w = wigner(pure_state(fock_state(n, 10)), x, p)
    assert np.max(np.abs(w.x_marginal() - hermite_function(n, x) ** 2)) <= 1e-8


def test_x_marginal_of_superposition():
    x = np.linspace(-4, 4, 33)
    p = np.linspace(-9, 9, 721)
    v = np.array([1, 0, 1j, 0.5], dtype=complex)
    v /= np.linalg.norm(v)
    w = wigner(np.outer(v, v.conj()), x, p)
    psi = sum(c * hermite_function(k, x) for k, c in enumerate(v))
    assert np.max(np.abs(w.x_marginal() - np.abs(psi) ** 2)) <= 1e-8


@pytest.mark.parametrize("point", [(0.0, 0.0), (0.7, -0.3), (-1.2, 1.5)])
def test_direct_integration_oracle(point):
    amps = np.array([0.6, 0.0, 0.8])
    got = wigner(np.outer(amps, amps).astype(complex), np.array([point[0]]), np.array([point[1]]))
    assert got.values[0, 0] == pytest.approx(direct_wigner(amps, *point), abs=1e-10)
    one = wigner(pure_state(fock_state(1, 3)), np.array([point[0]]), np.array([point[1]]))
    assert one.values[0, 0] == pytest.approx(direct_wigner([0, 1], *point), abs=1e-10)


def test_linearity(rng):
    x = grid(4, 31)
    a, b = random_density(rng, 6), random_density(rng, 6)
    wa, wb = wigner(a, x, x).values, wigner(b, x, x).values
    wab = wigner(0.3 * a + 0.7 * b, x, x).values
    assert np.max(np.abs(wab - (0.3 * wa + 0.7 * wb))) <= 1e-14


def test_demo_sequence():
    p = OscillatorParams()
    c = coherent_state(DEMO_ALPHA, p.cutoff)
    rho0 = np.outer(c, c.conj())
    seq = evolve_jumptime(make_damped_oscillator(p), rho0, max(DEMO_JUMP_COUNTS))
    radii = []
    for n in DEMO_JUMP_COUNTS:
        w = wigner(seq.states[n])
        assert w.integral == pytest.approx(seq.traces[n], abs=1e-3)
        radii.append(np.hypot(*w.peak()))
    assert all(a > b for a, b in zip(radii, radii[1:]))
    # vacuum share of rho_10 equals P(10) / P(>=10) of Poisson(|alpha|^2 = 4)
    rho10 = oscillator_jumptime_oracle(p, rho0, 10)
    frac = rho10[0, 0].real / np.trace(rho10).real
    assert seq.states[10][0, 0].real / seq.traces[10] == pytest.approx(frac, rel=1e-10)
    poisson = np.exp(-4) * 4.0**np.arange(40) / np.exp(gammaln(np.arange(40) + 1))
    assert frac == pytest.approx(poisson[10] / poisson[10:].sum(), rel=1e-8)


def test_grid_file_round_trip(tmp_path):
    w = wigner(random_density(np.random.default_rng(3), 4), grid(3, 11), grid(2, 9))
    path = tmp_path / "w.txt"
    write_grid(w, path, header={"n": 2})
    back = read_grid(path)
    np.testing.assert_array_equal(back.values, w.values)
    np.testing.assert_allclose(back.x, w.x, atol=1e-15)
    assert back.meta["n"] == "2" and back.meta["rows"] == "x"


def test_coarse_grid_warning():
    w = wigner(pure_state(fock_state(0, 2)), grid(5, 5), grid(5, 5))
    assert "warning" in w.meta
    assert "warning" not in wigner(pure_state(fock_state(0, 2))).meta
