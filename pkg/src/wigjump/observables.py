"""The paper-level observables: barrier flux/step correlation, damped Fourier
spectra with peak extraction, position/momentum dispersions, and the
quantized-action level estimator.

Conventions.  The flux symbol is (p/m) times a normalized Gaussian of width
delta_q standing in for the barrier-top delta; the step symbol projects onto
q > 0.  The pair estimator integrates its backward leg in reversed time, so
when the flux correlation pairs the two legs the backward leg's momentum is
reflected back into the forward-time convention (an even observable never
sees the difference; the odd flux does, and carries the whole signal).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from . import jumpseries, model, oracle
from .errors import InsufficientDamping, NoTurningPoints, ShellUnreachable
from .jumpseries import SeriesConfig, estimate_many
from .series import SpectrumSeries, TimeSeries, atomic_write_text


@dataclass
class ObservableSymbol:
    """Config-facing observable selector."""

    kind: str  # flux-at-barrier | step-right | position | position-sq |
               # momentum | momentum-sq | hamiltonian
    delta_q: float = 0.013

    def __post_init__(self):
        kinds = ("flux-at-barrier", "step-right", "position", "position-sq",
                 "momentum", "momentum-sq", "hamiltonian")
        if self.kind not in kinds:
            raise ValueError(f"unknown observable kind {self.kind!r}")
        if self.kind == "flux-at-barrier" and self.delta_q <= 0:
            raise ValueError("flux smearing width must be positive")


def smeared_delta(q, delta_q: float):
    return np.exp(-0.5 * (np.asarray(q) / delta_q) ** 2) / \
        (delta_q * np.sqrt(2.0 * np.pi))


def step_right(q):
    return (np.asarray(q) > 0.0).astype(float)


def flux_eta_phi(p1, q1, p2, q2, delta_q: float, mass: float = 1.0):
    """Symmetrized flux(1)*step(2) pairing; symmetric under leg swap."""
    f1 = (np.asarray(p1) / mass) * smeared_delta(q1, delta_q)
    f2 = (np.asarray(p2) / mass) * smeared_delta(q2, delta_q)
    return 0.5 * (f1 * step_right(q2) + f2 * step_right(q1))


def _phi_flux_reversed(p1, q1, p2, q2, delta_q, mass):
    # backward leg expressed in forward-time convention: momentum reflected
    return flux_eta_phi(p1, q1, -np.asarray(p2), q2, delta_q, mass)


def _a_position(p, q):
    return np.asarray(q)


def _a_position_sq(p, q):
    return np.asarray(q) ** 2


def _a_momentum(p, q):
    return np.asarray(p)


def _a_momentum_sq(p, q):
    return np.asarray(p) ** 2


def _phi_avg_of(a_fn, p1, q1, p2, q2):
    return 0.5 * (a_fn(p1, q1) + a_fn(p2, q2))


def _a_hamiltonian(spec, p, q):
    return model.hamiltonian(spec, p, q)


def _a_step_right(p, q):
    return step_right(q)


def symbol_phi(symbol: ObservableSymbol, spec, mass: float = 1.0):
    """Picklable functional for the estimator matching the symbol kind."""
    if symbol.kind == "flux-at-barrier":
        return partial(_phi_flux_reversed, delta_q=symbol.delta_q, mass=mass)
    table = {
        "position": _a_position,
        "position-sq": _a_position_sq,
        "momentum": _a_momentum,
        "momentum-sq": _a_momentum_sq,
        "step-right": _a_step_right,
        "hamiltonian": partial(_a_hamiltonian, spec),
    }
    return partial(_phi_avg_of, table[symbol.kind])


def corr_flux_eta(spec, energy, t_grid, shell, cfg: SeriesConfig,
                  delta_q: float = 0.013) -> TimeSeries:
    """Monte Carlo flux/step correlation on the time grid."""
    phi = partial(_phi_flux_reversed, delta_q=delta_q, mass=spec.mass)
    series = jumpseries.estimate_functional(spec, phi, energy, t_grid, shell,
                                            cfg)
    series.meta["observable"] = "flux-eta"
    series.meta["delta_q"] = delta_q
    return series


def spectrum_of(series: TimeSeries, eps: float, omega_grid) -> SpectrumSeries:
    """One-sided damped transform k(omega) of a real correlation series.

    Trapezoid rule on the series grid; requires the damping to have decayed
    to about 1e-3 by the end of the grid.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    t = series.t
    t_max = t[-1]
    if math.exp(-eps * t_max) >= 1e-3:
        raise InsufficientDamping(
            f"exp(-eps*t_max) = {math.exp(-eps * t_max):.2e} >= 1e-3; "
            f"extend the grid or increase eps")
    omega_grid = np.asarray(omega_grid, dtype=float)
    wts = np.gradient(t)  # trapezoid weights on a (possibly uneven) grid
    damped = series.value * np.exp(-eps * t) * wts
    phases = np.exp(-1j * np.outer(omega_grid, t))
    k = phases @ damped
    err = np.sqrt(np.sum((series.stderr * np.exp(-eps * t) * wts) ** 2))
    return SpectrumSeries(omega=omega_grid, k=k, k2=np.abs(k) ** 2,
                          stderr=np.full(len(omega_grid), err), eps=eps,
                          meta=dict(series.meta))


def detect_peaks(spectrum: SpectrumSeries, floor_factor: float = 5.0):
    """Local maxima of |k|^2 above floor_factor times the median."""
    y = spectrum.k2
    floor = floor_factor * np.median(y)
    idx = [i for i in range(1, len(y) - 1)
           if y[i] > y[i - 1] and y[i] >= y[i + 1] and y[i] > floor]
    return np.asarray(idx, dtype=int)


def peak_report(spectrum: SpectrumSeries, level_differences) -> list:
    """Annotate each detected peak with the nearest oracle level spacing."""
    diffs = np.sort(np.unique(np.abs(np.asarray(level_differences))))
    out = []
    for i in detect_peaks(spectrum):
        w = float(spectrum.omega[i])
        j = int(np.argmin(np.abs(diffs - abs(w))))
        out.append({"omega_peak": w,
                    "height": float(spectrum.k2[i]),
                    "nearest_level_difference": float(diffs[j]),
                    "deviation": float(abs(abs(w) - diffs[j]))})
    return out


def write_peak_report(path: str, peaks: list, meta: dict):
    atomic_write_text(path, json.dumps({"meta": meta, "peaks": peaks},
                                       indent=2) + "\n")


def dispersions(spec, energy, t_grid, shell, cfg: SeriesConfig):
    """Position and momentum dispersion series <x^2> - <x>^2 with errors."""
    phis = [partial(_phi_avg_of, _a_position),
            partial(_phi_avg_of, _a_position_sq),
            partial(_phi_avg_of, _a_momentum),
            partial(_phi_avg_of, _a_momentum_sq)]
    values, ses, neffs, diag, covs, status = estimate_many(
        spec, phis, energy, t_grid, shell, cfg)

    def combine(m1, m2, c11, c12, c22):
        disp = m2 - m1 * m1
        var = 4.0 * m1 * m1 * c11 - 4.0 * m1 * c12 + c22
        return disp, np.sqrt(np.maximum(var, 0.0))

    pos, pos_se = combine(values[0], values[1], covs[:, 0, 0],
                          covs[:, 0, 1], covs[:, 1, 1])
    mom, mom_se = combine(values[2], values[3], covs[:, 2, 2],
                          covs[:, 2, 3], covs[:, 3, 3])
    meta = {"budget": cfg.budget, "seed": cfg.seed, "energy": energy,
            "max_order": cfg.max_order, "status": status}
    t_arr = np.asarray(t_grid, dtype=float)
    return (TimeSeries(t=t_arr, value=pos, stderr=pos_se, n_effective=neffs,
                       meta=dict(meta, observable="position-dispersion")),
            TimeSeries(t=t_arr, value=mom, stderr=mom_se, n_effective=neffs,
                       meta=dict(meta, observable="momentum-dispersion")))


def action_integral(spec, energy: float) -> float:
    """Closed orbit action S(E) = 2 integral sqrt(2m(E-V)) dq over the well."""
    try:
        q_lo, q_hi = model.turning_points(spec, energy)
    except ShellUnreachable as exc:
        raise NoTurningPoints(str(exc)) from exc
    if q_hi <= q_lo:
        return 0.0
    c = 0.5 * (q_lo + q_hi)
    r = 0.5 * (q_hi - q_lo)
    nodes, wts = np.polynomial.legendre.leggauss(400)
    theta = 0.5 * np.pi * nodes
    qs = c + r * np.sin(theta)
    dv = np.maximum(energy - model.potential(spec, qs), 0.0)
    return 2.0 * float(np.sum(wts * 0.5 * np.pi * r * np.cos(theta)
                              * np.sqrt(2.0 * spec.mass * dv)))


def semiclassical_levels(spec, e_max: float, hbar: float = 1.0):
    """Quantized-action levels: S(E) = 2 pi hbar (n + 1/2).

    Below the barrier top the action is taken over the single left well (one
    entry per tunneling doublet); above it, over the full well.  Monotone
    bisection of S(E)/(2 pi hbar) - 1/2 on each branch.
    """
    from scipy.optimize import brentq

    if spec.kind_code == model.KIND_HARMONIC:
        v_min, v_top = 0.0, None
    else:
        _, v_min = model.well_minimum(spec)
        v_top = model.barrier_top(spec)
        dissociation = 0.0
        if e_max >= dissociation:
            e_max = -1e-9
    if e_max <= v_min:
        raise NoTurningPoints(f"E_max={e_max} at or below the well bottom {v_min}")

    def n_of(e):
        return action_integral(spec, e) / (2.0 * np.pi * hbar) - 0.5

    levels = []
    eps_lo = 1e-11 * max(1.0, abs(v_min))

    def scan(e_lo, e_hi):
        if e_hi <= e_lo:
            return
        n_lo = n_of(e_lo + eps_lo)
        n_hi = n_of(e_hi - eps_lo)
        n_first = max(0, int(np.ceil(n_lo - 1e-12)))
        for n in range(n_first, int(np.floor(n_hi)) + 1):
            e_n = brentq(lambda e: n_of(e) - n, e_lo + eps_lo, e_hi - eps_lo,
                         xtol=1e-13)
            levels.append(float(e_n))

    if v_top is None or v_top <= v_min:
        scan(v_min, e_max)
    else:
        scan(v_min, min(v_top, e_max))
        if e_max > v_top:
            scan(v_top, e_max)
    return sorted(levels)
