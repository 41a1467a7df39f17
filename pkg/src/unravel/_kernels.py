"""Inner loops for trajectory sampling and Wigner kernels.

Every function here is written against a numba-compatible subset of numpy.
With numba enabled (the default) they are compiled with ``njit``; with
``UNRAVEL_DISABLE_NUMBA=1`` the same source runs as plain numpy.

No-jump propagation between jumps uses a ladder of exact propagators
``exp(-i H_eff 2^k dt)`` for coarse steps and a Taylor polynomial in the
elapsed time ``s < dt`` for the remainder.  ``|psi(s)|^2`` is then a real
polynomial in ``s`` and the jump threshold is located by bisection on it.
Since the norm is non-increasing, the coarse bracket is found by binary
lifting over the ladder.
"""

from __future__ import annotations

import numpy as np

from .config import USE_NUMBA

if USE_NUMBA:
    from numba import njit

    def kernel(fn):
        return njit(cache=True, nogil=True)(fn)
else:
    def kernel(fn):
        return fn


# trajectory status codes
NEED_UNIFORMS = 0
HIT_HORIZON = 1
HIT_MAX_JUMPS = 2
WENT_DARK = 3
NON_FINITE = -1


if USE_NUMBA:
    @kernel
    def matvec(a, v):
        n, m = a.shape
        out = np.zeros(n, dtype=np.complex128)
        for i in range(n):
            acc = 0j
            for k in range(m):
                acc += a[i, k] * v[k]
            out[i] = acc
        return out
else:
    def matvec(a, v):
        return a @ v


@kernel
def norm2(v):
    return np.sum(v.real**2 + v.imag**2)


@kernel
def taylor_vectors(gen, psi, order):
    """Rows ``u_k = gen^k psi / k!`` for ``k < order``."""
    d = psi.shape[0]
    u = np.empty((order, d), dtype=np.complex128)
    u[0] = psi
    for k in range(1, order):
        u[k] = matvec(gen, u[k - 1]) / k
    return u


@kernel
def norm2_poly(u):
    """Coefficients (ascending) of ``|sum_k s^k u_k|^2`` as a polynomial in s."""
    order, d = u.shape
    c = np.zeros(2 * order - 1)
    for k in range(order):
        for l in range(k, order):
            acc = 0.0
            for i in range(d):
                acc += u[k, i].real * u[l, i].real + u[k, i].imag * u[l, i].imag
            c[k + l] += acc if k == l else 2.0 * acc
    return c


@kernel
def polyval_asc(c, s):
    acc = 0.0
    for k in range(c.shape[0] - 1, -1, -1):
        acc = acc * s + c[k]
    return acc


@kernel
def taylor_eval(u, s):
    acc = u[u.shape[0] - 1].copy()
    for k in range(u.shape[0] - 2, -1, -1):
        acc = acc * s + u[k]
    return acc


@kernel
def propagate(psi, s, gen, ladder, dt, order):
    """``exp(-i H_eff s) psi`` for any ``s >= 0``."""
    steps = int(np.floor(s / dt))
    rem = s - steps * dt
    if rem < 0.0:
        rem = 0.0
    out = psi.copy()
    k = 0
    while steps > 0:
        if steps & 1:
            out = matvec(ladder[k], out)
        steps >>= 1
        k += 1
    if rem > 0.0:
        out = taylor_eval(taylor_vectors(gen, out, order), rem)
    return out


@kernel
def find_jump(psi, r, remaining, gen, ladder, dt, order, t0, rel_tol):
    """Wait until ``|psi(tau)|^2`` first drops to ``r``.

    Returns ``(tau, jumped)``.  When no crossing happens within ``remaining``,
    returns ``(remaining, False)``.
    """
    a = 0.0
    phi = psi.copy()
    for k in range(ladder.shape[0] - 1, -1, -1):
        step = dt * (2.0**k)
        if a + step <= remaining:
            cand = matvec(ladder[k], phi)
            if norm2(cand) > r:
                a += step
                phi = cand
    s_hi = min(dt, remaining - a)
    u = taylor_vectors(gen, phi, order)
    c = norm2_poly(u)
    if polyval_asc(c, s_hi) > r:
        return remaining, False
    lo = 0.0
    hi = s_hi
    scale = max(t0 + a, dt)
    while hi - lo > rel_tol * scale:
        mid = 0.5 * (lo + hi)
        if polyval_asc(c, mid) > r:
            lo = mid
        else:
            hi = mid
    return a + 0.5 * (lo + hi), True


@kernel
def run_chunk(psi, t, n, uniforms, gen, ladder, dt, order, ops, dark_proj, has_dark,
              max_time, max_jumps, cap_times, cap_idx, cap_time_out, cap_time_ok,
              cap_jumps, cap_jump_out, cap_jump_time, jump_times, jump_channels, rel_tol):
    """Advance one trajectory using at most ``len(uniforms) // 2`` jumps.

    Mutates the capture and jump output arrays in place and returns
    ``(psi, t, n, n_recorded, cap_idx, status)``.  ``psi`` is the normalized
    state right after the last jump (or the initial state).
    """
    n_rec = 0
    n_cap_t = cap_times.shape[0]
    pos = 0
    n_u = uniforms.shape[0] - 1
    while True:
        if n >= max_jumps:
            return psi, t, n, n_rec, cap_idx, HIT_MAX_JUMPS
        if t >= max_time:
            return psi, t, n, n_rec, cap_idx, HIT_HORIZON
        if pos >= n_u:
            return psi, t, n, n_rec, cap_idx, NEED_UNIFORMS
        r = uniforms[pos]
        u_ch = uniforms[pos + 1]
        pos += 2
        remaining = max_time - t
        dark = False
        if has_dark:
            # the norm plateaus at |P_dark psi|^2; below that the trajectory never jumps again
            lim = norm2(matvec(dark_proj, psi))
            if r <= lim:
                dark = True
        if dark:
            tau = remaining
            jumped = False
        else:
            tau, jumped = find_jump(psi, r, remaining, gen, ladder, dt, order, t, rel_tol)
        t_next = t + tau
        # walltime captures inside [t, t_next), or up to and including the horizon
        while cap_idx < n_cap_t and (cap_times[cap_idx] < t_next
                                     or (not jumped and cap_times[cap_idx] <= t_next)):
            phi = propagate(psi, cap_times[cap_idx] - t, gen, ladder, dt, order)
            nrm = norm2(phi)
            if not np.isfinite(nrm) or nrm <= 0.0:
                return psi, cap_times[cap_idx], n, n_rec, cap_idx, NON_FINITE
            cap_time_out[cap_idx] = phi / np.sqrt(nrm)
            cap_time_ok[cap_idx] = True
            cap_idx += 1
        if not jumped:
            return psi, max_time, n, n_rec, cap_idx, WENT_DARK if dark else HIT_HORIZON
        phi = propagate(psi, tau, gen, ladder, dt, order)
        n_ops = ops.shape[0]
        weights = np.empty(n_ops)
        total = 0.0
        for j in range(n_ops):
            weights[j] = norm2(matvec(ops[j], phi))
            total += weights[j]
        if not np.isfinite(total) or total <= 0.0:
            return psi, t_next, n, n_rec, cap_idx, NON_FINITE
        target = u_ch * total
        acc = 0.0
        chosen = n_ops - 1
        for j in range(n_ops):
            acc += weights[j]
            if target < acc:
                chosen = j
                break
        while weights[chosen] == 0.0:
            chosen -= 1
        new = matvec(ops[chosen], phi)
        psi = new / np.sqrt(norm2(new))
        t = t_next
        n += 1
        jump_times[n_rec] = t
        jump_channels[n_rec] = chosen
        n_rec += 1
        for q in range(cap_jumps.shape[0]):
            if cap_jumps[q] == n:
                cap_jump_out[q] = psi
                cap_jump_time[q] = t


# --- Wigner kernel -----------------------------------------------------------


def _wigner_fock_arrays(rho, xs, ps):
    """Wigner function of a Fock-basis density matrix on the grid ``xs x ps``.

    Convention ``a = (x + i p)/sqrt(2)`` with ``hbar = 1``.  The matrix
    elements ``W_{mn}`` (Laguerre functions of ``2|alpha|^2``) are generated by
    the three-term recurrence in ``m`` and ``n``, vectorized over the grid.
    """
    d = rho.shape[0]
    alpha = (xs[:, None] + 1j * ps[None, :]) / np.sqrt(2.0)
    # row[n] holds W_{m n} for the current m, n >= m
    row = np.empty((d,) + alpha.shape, dtype=np.complex128)
    row[0] = np.exp(-2.0 * np.abs(alpha) ** 2) / np.pi
    acc = np.real(rho[0, 0]) * np.real(row[0])
    for n in range(1, d):
        row[n] = 2.0 * alpha * row[n - 1] / np.sqrt(n)
        acc += 2.0 * np.real(rho[0, n] * row[n])
    for m in range(1, d):
        prev_diag = row[m].copy()
        row[m] = (2.0 * np.conj(alpha) * prev_diag - np.sqrt(m) * row[m - 1]) / np.sqrt(m)
        acc += np.real(rho[m, m]) * np.real(row[m])
        carry = prev_diag
        for n in range(m + 1, d):
            nxt = (2.0 * alpha * row[n - 1] - np.sqrt(m) * carry) / np.sqrt(n)
            carry = row[n].copy()
            row[n] = nxt
            acc += 2.0 * np.real(rho[m, n] * row[n])
    return acc


@kernel
def _wigner_fock_points(rho, xs, ps):
    """Same recurrence as the array version, run point by point in scalars."""
    d = rho.shape[0]
    out = np.empty((xs.shape[0], ps.shape[0]))
    row = np.empty(d, dtype=np.complex128)
    sq = np.sqrt(np.arange(d).astype(np.float64))
    inv = np.zeros(d)
    inv[1:] = 1.0 / sq[1:]
    for i in range(xs.shape[0]):
        for k in range(ps.shape[0]):
            alpha = (xs[i] + 1j * ps[k]) / np.sqrt(2.0)
            alpha_c = np.conj(alpha)
            row[0] = np.exp(-2.0 * (alpha.real**2 + alpha.imag**2)) / np.pi
            acc = rho[0, 0].real * row[0].real
            for n in range(1, d):
                row[n] = (2.0 * inv[n]) * alpha * row[n - 1]
                acc += 2.0 * (rho[0, n] * row[n]).real
            for m in range(1, d):
                prev_diag = row[m]
                row[m] = (2.0 * inv[m]) * alpha_c * prev_diag - row[m - 1]
                acc += rho[m, m].real * row[m].real
                carry = prev_diag
                for n in range(m + 1, d):
                    nxt = inv[n] * (2.0 * alpha * row[n - 1] - sq[m] * carry)
                    carry = row[n]
                    row[n] = nxt
                    acc += 2.0 * (rho[m, n] * row[n]).real
            out[i, k] = acc
    return out


wigner_fock = _wigner_fock_points if USE_NUMBA else _wigner_fock_arrays
