"""Monte Carlo estimator of the momentum-jump iteration series.

Each Monte Carlo sample realizes one term of the iteration series for a
linear functional of the two-leg spectral density:

1.  a phase point y on the energy shell (left half below the barrier) is the
    common tau = 0 argument of the initial density, whose point-matching
    deltas pin both legs there; the shell sample's |grad H| enters the weight;
2.  the insertion count j is drawn from the configured order distribution and
    the insertion times uniformly on the ordered simplex, weight t^j/j!/P(j);
3.  ascending from tau = 0 to the anchor, each insertion picks a leg (equal
    probability, forward leg sign +, backward leg sign -) and a Gaussian
    momentum jump, weighted by omega_reg(s, q_leg)/proposal(s); the inverse
    of the downward piecewise recurrence adds s to the receiving leg;
4.  the functional phi is evaluated at the reconstructed anchor pair and
    accumulated with the signed product weight Omega.

At insertion orders >= 1 the point-matching deltas between the legs are
broadened to a box of half-width ``match_window`` per component: the backward
leg starts from a displaced point, which must still land in the (broadened)
support of the initial density or the sample contributes zero.  At order 0
the legs coincide identically and no broadening applies, so the order-0 path
reproduces plain classical ensemble averaging sample by sample.

Estimates are ratio-normalized by the accumulated weight itself, which
cancels the density-of-states normalization and maps the unit observable to
exactly one.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, model
from .microcanon import ShellEnsemble
from .series import TimeSeries


@dataclass
class SeriesConfig:
    """Truncation, sampling laws and budget of the series estimator."""

    max_order: int = 4
    order_ratio: float = 0.5          # geometric default distribution
    order_probs: tuple | None = None  # explicit override
    jump_scale: float | None = None   # None: hbar / (narrowest width)
    epsilon_damping: float = 0.07     # consumed by the spectrum stage
    budget: int = 20000
    seed: int = 1
    dt: float = 1e-3
    match_window: float = 0.05
    energy_window: float = 0.01
    chunk_size: int = 8192
    workers: int = 1

    def probs(self) -> np.ndarray:
        if self.order_probs is not None:
            p = np.asarray(self.order_probs, dtype=float)
            if len(p) != self.max_order + 1 or np.any(p <= 0):
                raise ValueError("order_probs must be strictly positive up to max_order")
            return p / p.sum()
        p = self.order_ratio ** np.arange(self.max_order + 1)
        return p / p.sum()

    def resolved_jump_scale(self, spec) -> float:
        if self.jump_scale is not None:
            return self.jump_scale
        if spec.widths:
            return 1.0 / min(spec.widths)
        return 1.0


@dataclass
class WeightedOutcome:
    """Audit record of one sample: value, signed weight and its factors."""

    value: float
    weight: float
    order: int
    shell_weight: float = 1.0
    simplex_weight: float = 1.0
    jump_factors: tuple = ()
    jump_log: tuple = ()  # (tau, jump, branch, q_at_jump) per insertion


def sample_order_and_times(cfg: SeriesConfig, t: float, rng):
    """One draw of (order, descending times, importance weight t^j/j!/P(j))."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    probs = cfg.probs()
    j = int(rng.choice(len(probs), p=probs))
    times = np.sort(rng.uniform(0.0, t, size=j))[::-1]
    weight = t ** j / math.factorial(j) / probs[j]
    return j, times, weight


def sample_jump_momentum(spec, q: float, jump_scale: float, rng):
    """One draw of (s, branch, signed weight factor omega_reg/proposal).

    The forward leg carries +1, the backward leg -1; the branch picker's
    factor 2 cancels the kernel's 1/2.
    """
    s = jump_scale * rng.standard_normal()
    branch = "bar" if rng.random() < 0.5 else "tilde"
    sign = 1.0 if branch == "bar" else -1.0
    pdf = np.exp(-0.5 * (s / jump_scale) ** 2) / (jump_scale * np.sqrt(2 * np.pi))
    factor = sign * float(model.omega_regular(spec, s, q)) / pdf
    return s, branch, factor


def _phi_average(a_fn):
    def phi(p1, q1, p2, q2):
        return 0.5 * (a_fn(p1, q1) + a_fn(p2, q2))
    return phi


def _run_chunk(spec, phis, energy, t, t_index, chunk_index, chunk_lo, chunk_hi,
               shell_p, shell_q, shell_w, cfg, confined, collect_outcomes=False):
    """All samples of one chunk at one time; returns raw accumulators.

    Accumulators: a_k = Omega*phi_k sums, b = Omega sums, plus the second
    moments needed for ratio-estimator errors, per-order numerators and the
    squared per-order numerators (variance decomposition diagnostic).
    """
    n = chunk_hi - chunk_lo
    k = len(phis)
    probs = cfg.probs()
    jscale = cfg.resolved_jump_scale(spec)
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=(cfg.seed, 0x6A756D70, t_index, chunk_index)))

    idx = (chunk_lo + np.arange(n)) % len(shell_p)
    p0 = shell_p[idx].copy()
    q0 = shell_q[idx].copy()
    w_shell = shell_w[idx]

    orders = rng.choice(len(probs), size=n, p=probs)
    kmax = int(orders.max()) if n else 0

    # insertion times (ascending per sample), legs and jump magnitudes
    jtau = np.zeros((n, max(kmax, 1)))
    jbranch = np.zeros((n, max(kmax, 1)), dtype=np.int64)
    jval = np.zeros((n, max(kmax, 1)))
    for j in range(1, kmax + 1):
        rows = np.nonzero(orders == j)[0]
        if len(rows) == 0:
            continue
        tt = np.sort(rng.uniform(0.0, t, size=(len(rows), j)), axis=1)
        jtau[rows, :j] = tt
        jbranch[rows, :j] = (rng.random((len(rows), j)) < 0.5).astype(np.int64)
        jval[rows, :j] = jscale * rng.standard_normal((len(rows), j))

    # broadened point-matching between the legs at orders >= 1
    u_p = np.zeros(n)
    u_q = np.zeros(n)
    hot = orders >= 1
    if np.any(hot):
        u_p[hot] = rng.uniform(-cfg.match_window, cfg.match_window, size=hot.sum())
        u_q[hot] = rng.uniform(-cfg.match_window, cfg.match_window, size=hot.sum())
    p2_0 = p0 + u_p
    q2_0 = q0 + u_q

    # the displaced backward-leg start must stay in the (broadened) support
    alive = np.ones(n, dtype=bool)
    if np.any(hot):
        h2 = model.hamiltonian(spec, p2_0, q2_0)
        alive[hot] &= np.abs(h2[hot] - energy) <= cfg.energy_window
        if confined:
            alive[hot] &= q2_0[hot] < 0.0
    # quadratic/free potentials have an identically zero regular kernel:
    # every insertion carries zero weight, skip their trajectories outright
    if not spec.has_regular_kernel:
        alive &= orders == 0

    act = np.nonzero(alive)[0]
    p1 = p0[act].copy()
    q1 = q0[act].copy()
    p2 = p2_0[act].copy()
    q2 = q2_0[act].copy()
    args = _kernels.kernel_args(spec)
    qjump = _kernels.pair_ascend(*args, p1, q1, p2, q2,
                                 jtau[act], jval[act], jbranch[act],
                                 orders[act].astype(np.int64), float(t),
                                 float(cfg.dt))
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(q1))
            and np.all(np.isfinite(p2)) and np.all(np.isfinite(q2))):
        from .errors import NonFiniteState
        raise NonFiniteState(f"pair ascent diverged at t={t}; decrease dt")

    # signed weights
    simplex = t ** orders / np.array([math.factorial(int(j)) for j in orders]) \
        / probs[orders]
    omega = np.ones(len(act))
    pdf_norm = 1.0 / (jscale * np.sqrt(2.0 * np.pi))
    factors_all = np.ones((len(act), max(kmax, 1)))
    for col in range(kmax):
        rows = np.nonzero(orders[act] > col)[0]
        if len(rows) == 0:
            continue
        s = jval[act][rows, col]
        qq = qjump[rows, col]
        w_reg = model.omega_regular(spec, s, qq)
        pdf = pdf_norm * np.exp(-0.5 * (s / jscale) ** 2)
        sgn = np.where(jbranch[act][rows, col] == 0, 1.0, -1.0)
        fac = sgn * w_reg / pdf
        factors_all[rows, col] = fac
        omega[rows] *= fac

    big_omega = np.zeros(n)
    big_omega[act] = w_shell[act] * simplex[act] * omega

    # functional values at the anchor pair
    phi_vals = np.zeros((k, n))
    for m_i, phi in enumerate(phis):
        phi_vals[m_i, act] = phi(p1, q1, p2, q2)

    a = phi_vals * big_omega  # (k, n)
    b = big_omega
    acc = {
        "sa": a.sum(axis=1),
        "sb": b.sum(),
        "saa": a @ a.T,
        "sab": a @ b,
        "sbb": float(b @ b),
        "s_absb": float(np.abs(b).sum()),
        "n": n,
    }
    per_order_a = np.zeros((cfg.max_order + 1, k))
    per_order_v = np.zeros((cfg.max_order + 1, k))
    for j in range(cfg.max_order + 1):
        sel = orders == j
        if np.any(sel):
            per_order_a[j] = a[:, sel].sum(axis=1)
            per_order_v[j] = (a[:, sel] ** 2).sum(axis=1)
    acc["per_order_a"] = per_order_a
    acc["per_order_v"] = per_order_v

    if collect_outcomes:
        outs = []
        inv = {int(g): loc for loc, g in enumerate(act)}
        for i in range(n):
            j = int(orders[i])
            if i in inv and j > 0:
                loc = inv[i]
                facs = tuple(float(f) for f in factors_all[loc, :j])
                log = tuple((float(jtau[i, c]), float(jval[i, c]),
                             "bar" if jbranch[i, c] == 0 else "tilde",
                             float(qjump[loc, c])) for c in range(j))
            else:
                facs = ()
                log = ()
            outs.append(WeightedOutcome(
                value=float(phi_vals[0, i]), weight=float(big_omega[i]),
                order=j, shell_weight=float(w_shell[i]),
                simplex_weight=float(simplex[i]) if alive[i] else 0.0,
                jump_factors=facs, jump_log=log))
        acc["outcomes"] = outs
    return acc


def _run_chunk_order0_grid(spec, phis, t_grid, chunk_lo, chunk_hi,
                           shell_p, shell_q, shell_w, cfg):
    """Order-0 fast path: one jump-free ascent records every grid time."""
    n = chunk_hi - chunk_lo
    k = len(phis)
    idx = (chunk_lo + np.arange(n)) % len(shell_p)
    p1 = shell_p[idx].copy()
    q1 = shell_q[idx].copy()
    p2 = p1.copy()
    q2 = q1.copy()
    w = shell_w[idx]
    args = _kernels.kernel_args(spec)
    states = _kernels.pair_ascend_record(*args, p1, q1, p2, q2,
                                         np.asarray(t_grid, dtype=float),
                                         float(cfg.dt))
    if not np.all(np.isfinite(states)):
        from .errors import NonFiniteState
        raise NonFiniteState("order-0 ascent diverged; decrease dt")
    nt = len(t_grid)
    out = []
    for ti in range(nt):
        pv = np.zeros((k, n))
        for m_i, phi in enumerate(phis):
            pv[m_i] = phi(states[0, ti], states[1, ti], states[2, ti],
                          states[3, ti])
        a = pv * w
        acc = {
            "sa": a.sum(axis=1), "sb": w.sum(), "saa": a @ a.T,
            "sab": a @ w, "sbb": float(w @ w), "s_absb": float(np.abs(w).sum()),
            "n": n,
            "per_order_a": a.sum(axis=1)[None, :] * np.ones((1, 1)),
            "per_order_v": (a ** 2).sum(axis=1)[None, :],
        }
        out.append(acc)
    return out


def _merge(accs):
    tot = None
    for acc in accs:
        if tot is None:
            tot = {key: (val.copy() if hasattr(val, "copy") else val)
                   for key, val in acc.items() if key != "outcomes"}
        else:
            for key in tot:
                tot[key] = tot[key] + acc[key]
    return tot


def _finalize(tot, k):
    n = tot["n"]
    sb = tot["sb"]
    if sb == 0.0 or n < 2:
        zeros = np.zeros(k)
        return zeros, np.full(k, np.inf), 0.0, np.zeros((k, k))
    r = tot["sa"] / sb
    mb = sb / n
    # delta-method covariance of the ratio estimates
    cov_num = (tot["saa"] - np.outer(r, tot["sab"]) - np.outer(tot["sab"], r)
               + np.outer(r, r) * tot["sbb"])
    cov = cov_num / ((n - 1) * n * mb * mb)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    neff = tot["s_absb"] ** 2 / tot["sbb"] if tot["sbb"] > 0 else 0.0
    return r, se, neff, cov


def estimate_many(spec, phis, energy, t_grid, shell: ShellEnsemble,
                  cfg: SeriesConfig):
    """Shared-trajectory estimates for several functionals at once.

    Returns (values (k, nt), stderr (k, nt), n_eff (nt,), per_order, cov
    (nt, k, k), status).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(np.diff(t_grid) < 0) or np.any(t_grid < 0):
        raise ValueError("t_grid must be nonnegative ascending")
    if len(shell) == 0:
        raise ValueError("empty shell ensemble")
    k = len(phis)
    nt = len(t_grid)
    confined = bool(shell.meta.get("confined", False))

    chunks = [(lo, min(lo + cfg.chunk_size, cfg.budget))
              for lo in range(0, cfg.budget, cfg.chunk_size)]

    values = np.zeros((k, nt))
    ses = np.zeros((k, nt))
    neffs = np.zeros(nt)
    covs = np.zeros((nt, k, k))
    per_order = np.zeros((cfg.max_order + 1, k, nt))
    per_order_var = np.zeros((cfg.max_order + 1, k, nt))

    if cfg.max_order == 0:
        tasks = [(ci, lo, hi) for ci, (lo, hi) in enumerate(chunks)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                futs = [ex.submit(_run_chunk_order0_grid, spec, phis, t_grid,
                                  lo, hi, shell.p, shell.q, shell.weight, cfg)
                        for _, lo, hi in tasks]
                results = [f.result() for f in futs]
        else:
            results = [_run_chunk_order0_grid(spec, phis, t_grid, lo, hi,
                                              shell.p, shell.q, shell.weight,
                                              cfg)
                       for _, lo, hi in tasks]
        for ti in range(nt):
            tot = _merge([res[ti] for res in results])
            values[:, ti], ses[:, ti], neffs[ti], covs[ti] = _finalize(tot, k)
            per_order[:1, :, ti] = tot["per_order_a"] / tot["sb"]
            per_order_var[:1, :, ti] = tot["per_order_v"]
    else:
        tasks = [(ti, ci, lo, hi) for ti in range(nt)
                 for ci, (lo, hi) in enumerate(chunks)]
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                futs = {(ti, ci): ex.submit(
                    _run_chunk, spec, phis, energy, float(t_grid[ti]), ti, ci,
                    lo, hi, shell.p, shell.q, shell.weight, cfg, confined)
                    for ti, ci, lo, hi in tasks}
                results = {key: f.result() for key, f in futs.items()}
        else:
            results = {(ti, ci): _run_chunk(
                spec, phis, energy, float(t_grid[ti]), ti, ci, lo, hi,
                shell.p, shell.q, shell.weight, cfg, confined)
                for ti, ci, lo, hi in tasks}
        for ti in range(nt):
            tot = _merge([results[(ti, ci)] for ci in range(len(chunks))])
            values[:, ti], ses[:, ti], neffs[ti], covs[ti] = _finalize(tot, k)
            per_order[:, :, ti] = tot["per_order_a"] / tot["sb"]
            per_order_var[:, :, ti] = tot["per_order_v"]

    status = "ok" if np.all(neffs >= 2) else "budget_exhausted"
    diag = {"per_order_value": per_order, "per_order_sumsq": per_order_var}
    return values, ses, neffs, diag, covs, status


def _series_meta(cfg, energy, status):
    return {"budget": cfg.budget, "seed": cfg.seed, "energy": energy,
            "max_order": cfg.max_order, "status": status}


def estimate_functional(spec, phi, energy, t_grid, shell, cfg: SeriesConfig,
                        extra_phis=()):
    """Monte Carlo series estimate of one linear functional on a time grid."""
    phis = [phi] + list(extra_phis)
    values, ses, neffs, diag, covs, status = estimate_many(
        spec, phis, energy, t_grid, shell, cfg)
    ts = TimeSeries(t=np.asarray(t_grid, float), value=values[0],
                    stderr=ses[0], n_effective=neffs,
                    meta=_series_meta(cfg, energy, status),
                    per_order={j: diag["per_order_value"][j, 0]
                               for j in range(cfg.max_order + 1)})
    ts.meta["per_order_sumsq"] = diag["per_order_sumsq"][:, 0, :].tolist()
    return ts


def estimate_average_operator(spec, a_fn, energy, t_grid, shell,
                              cfg: SeriesConfig):
    """Series estimate of a one-point operator average, symmetrized over legs."""
    return estimate_functional(spec, _phi_average(a_fn), energy, t_grid,
                               shell, cfg)


def collect_outcomes(spec, phi, energy, t, shell, cfg: SeriesConfig,
                     n_max: int = 512):
    """Audit helper: per-sample outcome records for the first chunk at one t."""
    hi = min(n_max, cfg.budget, cfg.chunk_size)
    confined = bool(shell.meta.get("confined", False))
    acc = _run_chunk(spec, [phi], energy, float(t), 0, 0, 0, hi,
                     shell.p, shell.q, shell.weight, cfg, confined,
                     collect_outcomes=True)
    return acc["outcomes"]
