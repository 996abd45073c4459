"""Energy-shell sampling by ergodic time averaging along one MD trajectory.

One long classical trajectory at energy E is strided into samples; each
sample carries the correction weight |grad H| used by the estimators.  Below
the barrier top a trajectory seeded in the left well cannot cross, so the
left-half support of the initial density holds automatically; the sampler
asserts it rather than enforcing it.

Emitted momenta are projected back onto the exact shell (|p| recomputed from
E - V(q)), which removes the bounded velocity-Verlet energy oscillation from
the recorded samples.  The raw drift stays monitored and trips TolExceeded
when the step size is inadequate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels, model
from .errors import ShellUnreachable, TolExceeded
from .model import PhasePoint, PotentialSpec
from .series import atomic_write_text, fmt

DEFAULT_DT = 2e-3
DRIFT_GUARD = 1e-4
SEPARATRIX_MARGIN = 2e-3


@dataclass
class ShellSample:
    point: PhasePoint
    weight: float
    shell_energy: float


@dataclass
class ShellEnsemble:
    """Array-backed stream of shell samples (one row per sample)."""

    p: np.ndarray
    q: np.ndarray
    weight: np.ndarray
    energy: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.p)

    def __getitem__(self, i) -> ShellSample:
        return ShellSample(point=PhasePoint(self.p[i], self.q[i]),
                           weight=float(self.weight[i]),
                           shell_energy=self.energy)

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def seed_point_on_shell(spec: PotentialSpec, energy: float) -> PhasePoint:
    """One valid starting point: left-well minimum position, momentum from E."""
    q_min, v_min = model.well_minimum(spec)
    if energy < v_min:
        raise ShellUnreachable(f"E={energy} below well bottom {v_min}")
    p = np.sqrt(2.0 * spec.mass * (energy - v_min))
    return PhasePoint(p, q_min)


def orbit_period(spec: PotentialSpec, energy: float) -> float:
    """Oscillation period of the orbit through the well at this energy.

    Quadrature of 2*integral dq / v with the square-root turning-point
    singularity removed by q = c + r*sin(theta).
    """
    q_lo, q_hi = model.turning_points(spec, energy)
    if q_hi <= q_lo:
        return 0.0
    c = 0.5 * (q_lo + q_hi)
    r = 0.5 * (q_hi - q_lo)
    nodes, wts = np.polynomial.legendre.leggauss(256)
    theta = 0.5 * np.pi * nodes
    qs = c + r * np.sin(theta)
    dv = energy - model.potential(spec, qs)
    dv = np.maximum(dv, 1e-300)
    integ = np.sum(wts * (0.5 * np.pi) * r * np.cos(theta) /
                   np.sqrt(2.0 * dv / spec.mass))
    return 2.0 * float(integ)


def sample_shell(spec: PotentialSpec, energy: float, n_samples: int,
                 burn_in_time: float | None = None,
                 stride_time: float | None = None,
                 seed: int = 0, dt: float = DEFAULT_DT,
                 energy_tol: float = 1e-8) -> ShellEnsemble:
    """Record n_samples strided points of one MD chain at energy E."""
    meta = {"seed": seed, "energy": energy, "dt": dt}
    if n_samples == 0:
        return ShellEnsemble(p=np.zeros(0), q=np.zeros(0), weight=np.zeros(0),
                             energy=energy, meta=meta)

    confining = spec.kind_code == model.KIND_GAUSSIAN and len(spec.amplitudes) > 0
    if confining:
        vtop = model.barrier_top(spec)
        scale = max(abs(a) for a in spec.amplitudes)
        if abs(energy - vtop) < SEPARATRIX_MARGIN * scale:
            raise TolExceeded(
                f"E={energy} within {SEPARATRIX_MARGIN*scale} of the barrier top "
                f"{vtop}; the orbit period diverges there")
        confining = energy < vtop

    period = orbit_period(spec, energy)
    if burn_in_time is None:
        burn_in_time = 10.0 * period
    if stride_time is None:
        # quarter period scaled by sqrt(2): an exactly commensurate quarter
        # stride would lock the samples onto four orbit phases
        stride_time = 0.25 * period * np.sqrt(2.0)

    # tiny seed-dependent phase offset decouples chains with different seeds
    rng = np.random.default_rng(seed)
    burn_in_time = burn_in_time + float(rng.uniform(0.0, period))

    p0q0 = seed_point_on_shell(spec, energy)
    n_burn = max(1, int(np.ceil(burn_in_time / dt)))
    n_stride = max(1, int(round(stride_time / dt)))

    args = _kernels.kernel_args(spec)
    n_extra = n_samples + max(16, n_samples // 64)
    p_raw, q_raw, drift = _kernels.md_chain(*args, float(p0q0.p[0]),
                                            float(p0q0.q[0]), dt,
                                            n_burn, n_stride, n_extra)
    if drift > DRIFT_GUARD:
        raise TolExceeded(f"raw energy drift {drift:.3e} exceeds guard "
                          f"{DRIFT_GUARD:.1e}; decrease dt")

    # exact-shell momentum projection; points past a turning point (within one
    # step of it) cannot be projected and are dropped
    kin = energy - model.potential(spec, q_raw)
    ok = kin >= 0.0
    p_proj = np.where(ok, np.sign(p_raw) * np.sqrt(2.0 * spec.mass *
                                                   np.abs(kin)), 0.0)
    p_sel = p_proj[ok][:n_samples]
    q_sel = q_raw[ok][:n_samples]
    if len(p_sel) < n_samples:
        raise TolExceeded("too many samples landed outside the shell; "
                          "decrease dt")

    h_check = model.hamiltonian(spec, p_sel, q_sel)
    tol = energy_tol * max(abs(energy), 1.0)
    if np.max(np.abs(h_check - energy)) > tol:
        raise TolExceeded("projected samples violate the shell tolerance")
    if confining and not np.all(q_sel < 0.0):
        raise RuntimeError("below-barrier sample crossed the barrier: "
                           "integrator bug")

    weight = model.grad_h_norm(spec, p_sel, q_sel)
    meta.update({
        "period": period,
        "stride_time": n_stride * dt,
        "burn_in_time": n_burn * dt,
        "raw_drift": float(drift),
        "confined": bool(confining),
        "n_small_weight": int(np.sum(weight < 1e-14)),
    })
    return ShellEnsemble(p=p_sel, q=q_sel, weight=weight, energy=energy,
                         meta=meta)


def save_samples(path: str, ens: ShellEnsemble, spec: PotentialSpec | None = None,
                 extra_meta: dict | None = None):
    """Line-oriented text: p, q, weight, H per sample."""
    meta = dict(ens.meta)
    if spec is not None:
        meta["potential"] = spec.kind
    if extra_meta:
        meta.update(extra_meta)
    meta["n_samples"] = len(ens)
    lines = [f"# {k}: {v}" for k, v in sorted(meta.items())]
    lines.append("# columns: p q weight H")
    if len(ens):
        h = ens.energy * np.ones(len(ens))
        for i in range(len(ens)):
            lines.append(" ".join([fmt(ens.p[i]), fmt(ens.q[i]),
                                   fmt(ens.weight[i]), fmt(h[i])]))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_samples(path: str) -> ShellEnsemble:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = val.strip()
            else:
                rows.append([float(x) for x in line.split()])
    arr = np.asarray(rows, dtype=float)
    if arr.size == 0:
        arr = np.zeros((0, 4))
    energy = float(meta.get("energy", arr[0, 3] if len(arr) else 0.0))
    return ShellEnsemble(p=arr[:, 0], q=arr[:, 1], weight=arr[:, 2],
                         energy=energy, meta=meta)
