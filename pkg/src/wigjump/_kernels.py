"""Numba inner loops: classical MD chain and paired-branch integration.

The branch equations carry the 1/2 factors of the pair dynamics: for branch
sign sgn (+1 forward leg, -1 backward leg)

    dp/dtau = sgn * F(q) / 2,     dq/dtau = sgn * p / (2 m)

which one velocity-Verlet step of size h integrates as kick/drift/kick.
Note a half-rate step of size h is bitwise the full-rate step of size h/2.

No fastmath: results must be reproducible bit-for-bit across runs.
"""

import numpy as np
from numba import njit

# potential kind codes (mirror model.py)
_GAUSS = 0
_HARM = 1


@njit(cache=True)
def _force(kcode, famps, earr, mass, omega0, q):
    if kcode == _HARM:
        return -mass * omega0 * omega0 * q
    f = 0.0
    for i in range(famps.shape[0]):
        f += famps[i] * q * np.exp(-q * q * earr[i])
    return f


@njit(cache=True)
def _potential(kcode, amps, earr, mass, omega0, q):
    if kcode == _HARM:
        return 0.5 * mass * omega0 * omega0 * q * q
    v = 0.0
    for i in range(amps.shape[0]):
        v += amps[i] * np.exp(-q * q * earr[i])
    return v


@njit(cache=True)
def _branch_segment(kcode, famps, earr, mass, omega0, p, q, sgn, seg, dt):
    """Advance one branch by tau-span seg > 0 in uniform steps h <= dt."""
    nsteps = int(np.ceil(seg / dt))
    if nsteps < 1:
        return p, q
    h = seg / nsteps
    half = 0.5 * h * sgn * 0.5
    drift = h * sgn * 0.5 / mass
    for _ in range(nsteps):
        p += half * _force(kcode, famps, earr, mass, omega0, q)
        q += drift * p
        p += half * _force(kcode, famps, earr, mass, omega0, q)
    return p, q


@njit(cache=True)
def md_chain(kcode, amps, famps, earr, mass, omega0,
             p0, q0, dt, n_burn_steps, stride_steps, n_out):
    """Full-rate classical MD; record (p, q) every stride_steps after burn-in.

    Returns (P, Q, max_abs_drift) where drift is |H - H0| monitored at every
    recording instant (raw, before any shell projection by the caller).
    """
    p = p0
    q = q0
    e0 = p * p / (2.0 * mass) + _potential(kcode, amps, earr, mass, omega0, q)
    half = 0.5 * dt
    for _ in range(n_burn_steps):
        p += half * _force(kcode, famps, earr, mass, omega0, q)
        q += dt * p / mass
        p += half * _force(kcode, famps, earr, mass, omega0, q)
    out_p = np.empty(n_out)
    out_q = np.empty(n_out)
    drift = 0.0
    for k in range(n_out):
        for _ in range(stride_steps):
            p += half * _force(kcode, famps, earr, mass, omega0, q)
            q += dt * p / mass
            p += half * _force(kcode, famps, earr, mass, omega0, q)
        out_p[k] = p
        out_q[k] = q
        e = p * p / (2.0 * mass) + _potential(kcode, amps, earr, mass, omega0, q)
        d = abs(e - e0)
        if d > drift:
            drift = d
    return out_p, out_q, drift


@njit(cache=True)
def pair_ascend(kcode, amps, famps, earr, mass, omega0,
                p1, q1, p2, q2, jtau, jval, jbranch, jcount, t, dt):
    """Ascend every pair from tau=0 to tau=t applying its jump schedule.

    jtau[i, :jcount[i]] ascending in [0, t]; jbranch 0 for the forward leg
    (p1, q1), 1 for the backward leg (p2, q2); ascending through a jump adds
    jval to the receiving leg's momentum.  States are updated in place.
    Returns qjump[i, k]: receiving-leg position at jump k (kernel argument).
    """
    n = p1.shape[0]
    kmax = jtau.shape[1]
    qjump = np.zeros((n, kmax))
    for i in range(n):
        tau = 0.0
        a_p, a_q = p1[i], q1[i]
        b_p, b_q = p2[i], q2[i]
        for k in range(jcount[i]):
            seg = jtau[i, k] - tau
            if seg > 0.0:
                a_p, a_q = _branch_segment(kcode, famps, earr, mass, omega0,
                                           a_p, a_q, 1.0, seg, dt)
                b_p, b_q = _branch_segment(kcode, famps, earr, mass, omega0,
                                           b_p, b_q, -1.0, seg, dt)
            if jbranch[i, k] == 0:
                qjump[i, k] = a_q
                a_p += jval[i, k]
            else:
                qjump[i, k] = b_q
                b_p += jval[i, k]
            tau = jtau[i, k]
        seg = t - tau
        if seg > 0.0:
            a_p, a_q = _branch_segment(kcode, famps, earr, mass, omega0,
                                       a_p, a_q, 1.0, seg, dt)
            b_p, b_q = _branch_segment(kcode, famps, earr, mass, omega0,
                                       b_p, b_q, -1.0, seg, dt)
        p1[i], q1[i] = a_p, a_q
        p2[i], q2[i] = b_p, b_q
    return qjump


@njit(cache=True)
def pair_ascend_record(kcode, amps, famps, earr, mass, omega0,
                       p1, q1, p2, q2, t_grid, dt):
    """Jump-free ascent recording both legs at every grid time (t_grid ascending)."""
    n = p1.shape[0]
    nt = t_grid.shape[0]
    outs = np.empty((4, nt, n))
    for i in range(n):
        tau = 0.0
        a_p, a_q = p1[i], q1[i]
        b_p, b_q = p2[i], q2[i]
        for k in range(nt):
            seg = t_grid[k] - tau
            if seg > 0.0:
                a_p, a_q = _branch_segment(kcode, famps, earr, mass, omega0,
                                           a_p, a_q, 1.0, seg, dt)
                b_p, b_q = _branch_segment(kcode, famps, earr, mass, omega0,
                                           b_p, b_q, -1.0, seg, dt)
                tau = t_grid[k]
            outs[0, k, i] = a_p
            outs[1, k, i] = a_q
            outs[2, k, i] = b_p
            outs[3, k, i] = b_q
    return outs


def kernel_args(spec):
    """Pack a PotentialSpec into the positional args the kernels expect."""
    amps, widths = spec.term_arrays()
    if amps.size:
        earr = 1.0 / (widths * widths)
        famps = 2.0 * amps * earr
    else:
        earr = np.zeros(0)
        famps = np.zeros(0)
    return (spec.kind_code, amps, famps, earr, spec.mass, spec.omega0)
