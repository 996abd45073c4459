"""Paraxial beam propagation as a phase-space ray ensemble.

The propagation distance z plays the role of time; each ray carries the
transverse phase-space coordinates (P, Q) and evolves under
dP/dz = d(eps)/dQ, dQ/dz = P with eps the permittivity contrast profile, so
the ray Hamiltonian P^2/2 - eps(Q) is conserved in z-independent media.
Lengths are in 1/k units.  Quadratic profiles are pure drift; the
gaussian-index profile also owns the closed-form regular scattering kernel,
the transverse analogue of the potential kernel in model.py.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteState, UnsupportedProfile
from .series import atomic_write_text, fmt

HBAR = 1.0  # bookkeeping constant of the wave-Wigner transform


@dataclass(frozen=True)
class MediumProfile:
    kind: str          # free | parabolic-index | gaussian-index
    dims: int = 2      # transverse dimensions (1: planar guide, 2: 3D guide)
    eps0: float = 0.0  # gaussian-index contrast amplitude
    width: float = 1.0
    alpha: float = 0.1  # parabolic-index angular rate
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if self.kind not in ("free", "parabolic-index", "gaussian-index"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.dims not in (1, 2):
            raise ValueError("dims must be 1 or 2")
        if self.kind != "free" and self.width <= 0:
            raise ValueError("structured profiles need width > 0")
        if len(self.center) < self.dims:
            raise ValueError("center must have dims components")

    @property
    def center_arr(self):
        return np.asarray(self.center[:self.dims], dtype=float)


def permittivity(profile: MediumProfile, q: np.ndarray):
    """eps(Q) for rays; q shaped (n, dims)."""
    q = np.atleast_2d(q)
    if profile.kind == "free":
        return np.zeros(len(q))
    d2 = np.sum((q - profile.center_arr) ** 2, axis=1)
    if profile.kind == "parabolic-index":
        return -0.5 * profile.alpha ** 2 * d2
    return profile.eps0 * np.exp(-d2 / profile.width ** 2)


def ray_force(profile: MediumProfile, q: np.ndarray):
    """d(eps)/dQ, shaped like q."""
    q = np.atleast_2d(q)
    if profile.kind == "free":
        return np.zeros_like(q)
    dq = q - profile.center_arr
    if profile.kind == "parabolic-index":
        return -profile.alpha ** 2 * dq
    d2 = np.sum(dq ** 2, axis=1)
    return (-2.0 * profile.eps0 / profile.width ** 2) * dq * \
        np.exp(-d2 / profile.width ** 2)[:, None]


@dataclass
class BeamState:
    p: np.ndarray       # (n, dims)
    q: np.ndarray       # (n, dims)
    weight: np.ndarray  # (n,)
    z: float = 0.0
    omega_tag: float = 0.0

    def __post_init__(self):
        self.p = np.atleast_2d(np.asarray(self.p, dtype=float))
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.weight = np.asarray(self.weight, dtype=float)
        if self.p.shape != self.q.shape:
            raise ValueError("P and Q must have matching shapes")
        if self.weight.sum() <= 0:
            raise ValueError("total ensemble weight must be positive")


@dataclass
class BeamMoments:
    z: float
    centroid: np.ndarray
    centroid_err: np.ndarray
    beta: float
    beta_err: float


def gaussian_beam_wigner(waist: float, center, tilt, n_rays: int,
                         seed: int = 0, dims: int = 2) -> BeamState:
    """Ray ensemble sampling the (positive) Wigner function of a Gaussian beam.

    Per axis: Q ~ Normal(center, waist^2/2), P ~ Normal(tilt, 1/(2 waist^2)),
    independent; a minimum-uncertainty beam with Var(Q) Var(P) = 1/4.
    """
    if waist <= 0:
        raise ValueError("waist must be positive")
    rng = np.random.default_rng(seed)
    center = np.asarray(center, dtype=float)[:dims]
    tilt = np.asarray(tilt, dtype=float)[:dims]
    q = center + (waist / np.sqrt(2.0)) * rng.standard_normal((n_rays, dims))
    p = tilt + (1.0 / (waist * np.sqrt(2.0))) * rng.standard_normal((n_rays,
                                                                     dims))
    return BeamState(p=p, q=q, weight=np.ones(n_rays), z=0.0)


def propagate_rays(profile: MediumProfile, state: BeamState,
                   z_from: float, z_to: float, dz: float) -> BeamState:
    """Advance every ray from z_from to z_to with velocity-Verlet steps."""
    if dz <= 0:
        raise ValueError("dz must be positive")
    span = z_to - z_from
    nsteps = max(1, int(np.ceil(abs(span) / dz))) if span != 0.0 else 0
    h = span / nsteps if nsteps else 0.0
    p = state.p.copy()
    q = state.q.copy()
    for _ in range(nsteps):
        p += 0.5 * h * ray_force(profile, q)
        q += h * p
        p += 0.5 * h * ray_force(profile, q)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(q))):
        raise NonFiniteState("ray ensemble diverged; decrease dz")
    return BeamState(p=p, q=q, weight=state.weight.copy(), z=z_to,
                     omega_tag=state.omega_tag)


def scatter_kernel_regular(profile: MediumProfile, s, q):
    """Regular part of the ray scattering kernel; odd in S.

    Quadratic profiles scatter only through the drift already carried by the
    ray equations, so their regular part is identically zero.  For the
    gaussian-index profile the convolution closes term-wise like the
    potential kernel:  -4/((2 pi hbar)^d hbar) * eps0 (sqrt(pi) w)^d
    * exp(-|S|^2 w^2/hbar^2) * sin(2 S.(Q - R_c)/hbar).
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if profile.kind in ("free", "parabolic-index"):
        return np.zeros(len(s))
    if profile.kind != "gaussian-index":
        raise UnsupportedProfile(f"no closed-form kernel for {profile.kind!r}")
    d = profile.dims
    w = profile.width
    pref = -4.0 / ((2.0 * np.pi * HBAR) ** d * HBAR)
    s2 = np.sum(s * s, axis=1)
    phase = 2.0 * np.sum(s * (q - profile.center_arr), axis=1) / HBAR
    return pref * profile.eps0 * (np.sqrt(np.pi) * w) ** d * \
        np.exp(-s2 * w * w / HBAR ** 2) * np.sin(phase)


def beam_moments(state: BeamState) -> BeamMoments:
    """Weighted centroid and total transverse spread beta = <|R|^2> - |<R>|^2."""
    if len(state.weight) == 0:
        raise ValueError("empty ensemble")
    w = state.weight / state.weight.sum()
    n_eff = 1.0 / np.sum(w ** 2)
    centroid = w @ state.q
    dq = state.q - centroid
    var_axes = w @ (dq ** 2)
    beta = float(np.sum(var_axes))
    centroid_err = np.sqrt(var_axes / n_eff)
    r2c = np.sum(dq ** 2, axis=1)
    beta_err = float(np.sqrt(max(w @ (r2c - beta) ** 2, 0.0) / n_eff))
    return BeamMoments(z=state.z, centroid=centroid,
                       centroid_err=centroid_err, beta=beta,
                       beta_err=beta_err)


def scan(profile: MediumProfile, beam: BeamState, z_grid, dz: float):
    """Moments along z; propagates grid point to grid point."""
    z_grid = np.asarray(z_grid, dtype=float)
    out = []
    state = beam
    z_prev = beam.z
    for z in z_grid:
        state = propagate_rays(profile, state, z_prev, z, dz)
        out.append(beam_moments(state))
        z_prev = z
    return out


def find_foci(moments) -> list:
    """z positions of local minima of beta along the scan."""
    beta = np.asarray([m.beta for m in moments])
    z = np.asarray([m.z for m in moments])
    idx = [i for i in range(1, len(beta) - 1)
           if beta[i] < beta[i - 1] and beta[i] <= beta[i + 1]]
    return [float(z[i]) for i in idx]


def moments_to_csv(moments, path: str, meta: dict):
    dims = len(moments[0].centroid) if moments else 2
    cols = ["z", "x_bar", "y_bar", "beta", "x_err", "y_err", "beta_err"]
    if dims == 1:
        cols = ["z", "x_bar", "beta", "x_err", "beta_err"]
    lines = [f"# {k}: {v}" for k, v in sorted(meta.items())]
    lines.append(",".join(cols))
    for m in moments:
        row = [fmt(m.z)] + [fmt(c) for c in m.centroid] + [fmt(m.beta)] \
            + [fmt(e) for e in m.centroid_err] + [fmt(m.beta_err)]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")
