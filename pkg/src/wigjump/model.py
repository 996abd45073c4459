"""Potentials, forces, Hamiltonians and the closed-form momentum-transfer kernel.

Internal units: hbar = m = V0 = 1.  Times are reported as t*V0/hbar and
lengths in k^-1 units, which makes both conversions trivial at the defaults.

All potentials used at runtime are sums of Gaussians

    V(q) = sum_i a_i * exp(-q^2 / w_i^2)

(plus an analytic harmonic kind for validation work), so the nonlocal part
of the momentum-transfer kernel has a closed form per term; see
``omega_regular``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ShellUnreachable

KIND_GAUSSIAN = 0
KIND_HARMONIC = 1


@dataclass(frozen=True)
class PotentialSpec:
    """One-dimensional potential made of Gaussian terms, or a harmonic well.

    kind is one of "double-well", "custom-gaussian-sum", "free", "harmonic".
    For the Gaussian kinds ``amplitudes``/``widths`` hold the per-term a_i, w_i.
    """

    kind: str
    amplitudes: tuple = ()
    widths: tuple = ()
    mass: float = 1.0
    omega0: float = 1.0  # harmonic kind only

    def __post_init__(self):
        if self.kind not in ("double-well", "custom-gaussian-sum", "free", "harmonic"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if len(self.amplitudes) != len(self.widths):
            raise ValueError("amplitudes and widths must pair up")
        if any(w <= 0 for w in self.widths):
            raise ValueError("all widths must be strictly positive")
        if self.mass <= 0:
            raise ValueError("mass must be positive")

    @property
    def kind_code(self) -> int:
        return KIND_HARMONIC if self.kind == "harmonic" else KIND_GAUSSIAN

    @property
    def has_regular_kernel(self) -> bool:
        """Whether the nonlocal kernel is not identically zero.

        Quadratic (and free) potentials evolve by drift alone: every
        correction beyond the classical force term vanishes, so the regular
        kernel is exactly zero and jump insertions carry zero weight.
        """
        return self.kind_code == KIND_GAUSSIAN and len(self.amplitudes) > 0

    def term_arrays(self):
        return (np.asarray(self.amplitudes, dtype=float),
                np.asarray(self.widths, dtype=float))


def double_well(v0: float = 1.0, ratio: float = 0.12,
                sigma: float = 0.26, sigma_tilde: float = 2.23) -> PotentialSpec:
    """Deep symmetric double well: shallow wells of depth ratio*V0 inside a
    wide well of depth V0.

    V(q) = ratio*V0*exp(-q^2/sigma^2) - V0*exp(-q^2/sigma_tilde^2)
    """
    if sigma_tilde <= sigma:
        raise ValueError("sigma_tilde must exceed sigma")
    return PotentialSpec(kind="double-well",
                         amplitudes=(ratio * v0, -v0),
                         widths=(sigma, sigma_tilde))


def harmonic(omega0: float = 1.0, mass: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind="harmonic", omega0=omega0, mass=mass)


def free_particle(mass: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind="free", mass=mass)


def gaussian_sum(amplitudes, widths, mass: float = 1.0) -> PotentialSpec:
    return PotentialSpec(kind="custom-gaussian-sum",
                         amplitudes=tuple(float(a) for a in amplitudes),
                         widths=tuple(float(w) for w in widths), mass=mass)


@dataclass
class PhasePoint:
    """One point of nu-dimensional phase space with its signed weight."""

    p: np.ndarray
    q: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        self.p = np.atleast_1d(np.asarray(self.p, dtype=float))
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        if self.p.shape != self.q.shape:
            raise ValueError("p and q must have the same dimension")
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.q))):
            raise ValueError("phase-space components must be finite")
        if np.isnan(self.weight):
            raise ValueError("weight must not be NaN")


@dataclass(frozen=True)
class Units:
    """Internal nondimensionalization hbar = m = V0 = 1.

    Reported time is t*V0/hbar; reported length is in k^-1 units, in which
    the potential widths are quoted.
    """

    hbar: float = 1.0
    mass: float = 1.0
    v0: float = 1.0

    def time_to_reported(self, t):
        return t * self.v0 / self.hbar

    def time_from_reported(self, t_rep):
        return t_rep * self.hbar / self.v0

    def length_to_reported(self, q):
        return q

    def length_from_reported(self, q_rep):
        return q_rep


def potential(spec: PotentialSpec, q):
    """V(q); vectorized over q."""
    q = np.asarray(q, dtype=float)
    if spec.kind_code == KIND_HARMONIC:
        return 0.5 * spec.mass * spec.omega0 ** 2 * q * q
    out = np.zeros_like(q)
    for a, w in zip(spec.amplitudes, spec.widths):
        out = out + a * np.exp(-(q * q) / (w * w))
    return out


def force(spec: PotentialSpec, q):
    """F(q) = -dV/dq; analytic, vectorized over q."""
    q = np.asarray(q, dtype=float)
    if spec.kind_code == KIND_HARMONIC:
        return -spec.mass * spec.omega0 ** 2 * q
    out = np.zeros_like(q)
    for a, w in zip(spec.amplitudes, spec.widths):
        out = out + (2.0 * a / (w * w)) * q * np.exp(-(q * q) / (w * w))
    return out


def hamiltonian(spec: PotentialSpec, p, q=None):
    """H = p^2/2m + V(q), elementwise.  Accepts (p, q) arrays or a PhasePoint."""
    if isinstance(p, PhasePoint):
        point = p
        p, q = point.p, point.q
    p = np.asarray(p, dtype=float)
    return p * p / (2.0 * spec.mass) + potential(spec, q)


def grad_h_norm(spec: PotentialSpec, p, q=None):
    """Euclidean norm of (dH/dp, dH/dq) over all components."""
    if isinstance(p, PhasePoint):
        point = p
        p, q = point.p, point.q
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    return np.sqrt((p / spec.mass) ** 2 + force(spec, q) ** 2)


def omega_regular(spec: PotentialSpec, s, q, hbar: float = 1.0, nu: int = 1):
    """Regular (non-delta') part of the momentum-transfer kernel, odd in s.

    For each Gaussian term a*exp(-x^2/w^2) the position integral against
    sin(2 s q'/hbar) closes to a*sqrt(pi)*w*exp(-s^2 w^2/hbar^2)*sin(2 s q/hbar);
    the overall prefactor is 4/((2 pi hbar)^nu hbar).  Quadratic and free
    potentials contribute no regular part (drift only).
    """
    s = np.asarray(s, dtype=float)
    q = np.asarray(q, dtype=float)
    if not spec.has_regular_kernel:
        return np.zeros(np.broadcast(s, q).shape)
    pref = 4.0 / ((2.0 * np.pi * hbar) ** nu * hbar)
    amp = np.zeros(np.broadcast(s, q).shape)
    for a, w in zip(spec.amplitudes, spec.widths):
        amp = amp + a * np.sqrt(np.pi) * w * np.exp(-(s * s) * (w * w) / (hbar * hbar))
    return pref * amp * np.sin(2.0 * s * q / hbar)


def barrier_top(spec: PotentialSpec) -> float:
    """V at the symmetry point q = 0 (the barrier top for the double well)."""
    return float(potential(spec, 0.0))


@lru_cache(maxsize=32)
def _well_minimum_cached(spec: PotentialSpec):
    widest = max(spec.widths)
    res = minimize_scalar(lambda x: float(potential(spec, x)),
                          bounds=(-3.0 * widest, -1e-9), method="bounded",
                          options={"xatol": 1e-13})
    return float(res.x), float(res.fun)


def well_minimum(spec: PotentialSpec):
    """(q_min, V_min) of the left well (q < 0).  Derived, not tabulated."""
    if spec.kind_code == KIND_HARMONIC:
        return 0.0, 0.0
    if not spec.amplitudes:
        return 0.0, 0.0
    return _well_minimum_cached(spec)


def turning_points(spec: PotentialSpec, energy: float, left_well_only: bool = True):
    """Classical turning points V(q) = E bracketing the orbit through the
    left-well minimum (or the full well when E is above the barrier top).

    Raises ShellUnreachable when E is below the well bottom.
    """
    if spec.kind_code == KIND_HARMONIC:
        if energy < 0:
            raise ShellUnreachable(f"E={energy} below harmonic minimum 0")
        a = np.sqrt(2.0 * energy / spec.mass) / spec.omega0
        return -a, a
    q_min, v_min = well_minimum(spec)
    if energy < v_min:
        raise ShellUnreachable(f"E={energy} below well bottom {v_min}")
    if energy == v_min:
        return q_min, q_min
    widest = max(spec.widths) if spec.widths else 1.0
    confined = left_well_only and energy < barrier_top(spec)
    f = lambda x: float(potential(spec, x) - energy)
    # outer wall: march outward until V > E
    lo = q_min
    step = 0.25 * widest
    while f(lo) < 0:
        lo -= step
        if lo < -60.0 * widest:
            raise ShellUnreachable(f"no outer turning point at E={energy}")
    q_lo = brentq(f, lo, q_min, xtol=1e-14)
    if confined:
        q_hi = brentq(f, q_min, -1e-300, xtol=1e-14)
    else:
        # symmetric potential: the orbit spans the full well
        q_hi = -q_lo
    return float(q_lo), float(q_hi)
