"""Paired forward/backward trajectory integration and piecewise rebuilds.

A pair anchors its initial condition at tau = t_anchor and is evolved toward
tau = 0.  The forward ("bar") leg obeys dp/dtau = F/2, dq/dtau = p/2m and the
backward ("tilde") leg the sign-reversed equations, so descending in tau the
bar leg runs against its own flow while the tilde leg runs with it.  Jumps
shift the receiving leg's momentum by -s when passed downward (and by +s when
a trajectory is reconstructed upward); positions are continuous.

Energy p^2/2m + V(q) is conserved separately on each leg: the 1/2 factors
cancel in dH/dtau, and the velocity-Verlet stepping keeps the usual bounded
symplectic drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .errors import NonFiniteState
from .model import PhasePoint, PotentialSpec

BAR = "bar"
TILDE = "tilde"

DEFAULT_DT = 5e-4


@dataclass
class JumpEvent:
    """A momentum jump at time tau on exactly one leg of the pair."""

    tau: float
    jump: float
    branch: str  # BAR or TILDE
    weight_factor: float = 1.0

    def __post_init__(self):
        if self.branch not in (BAR, TILDE):
            raise ValueError(f"branch must be {BAR!r} or {TILDE!r}")


@dataclass
class TrajectoryPair:
    bar: PhasePoint
    tilde: PhasePoint
    t_anchor: float
    jumps: list = field(default_factory=list)

    def __post_init__(self):
        taus = [ev.tau for ev in self.jumps]
        if any(t2 > t1 for t1, t2 in zip(taus, taus[1:])):
            # keep a canonical descending order (anchor-side first)
            self.jumps = sorted(self.jumps, key=lambda ev: -ev.tau)
        if any(not (0.0 <= ev.tau <= self.t_anchor) for ev in self.jumps):
            raise ValueError("jump times must lie in [0, t_anchor]")


def pair_from_point(p, q, t_anchor, weight=1.0) -> TrajectoryPair:
    """Anchor both legs at the same phase point."""
    return TrajectoryPair(bar=PhasePoint(p, q, weight),
                          tilde=PhasePoint(p, q, weight),
                          t_anchor=t_anchor)


def _descend_leg(spec, p, q, span, dt, leg_sign):
    """Move one leg downward in tau by span >= 0 (leg_sign +1 bar, -1 tilde).

    Descending against the leg ODE is the ascent with the sign negated.
    """
    kcode, _amps, famps, earr, mass, omega0 = _kernels.kernel_args(spec)
    return _kernels._branch_segment(kcode, famps, earr, mass, omega0,
                                    float(p), float(q), -float(leg_sign),
                                    float(span), float(dt))


def step_pair(spec: PotentialSpec, pair: TrajectoryPair,
              tau_from: float, tau_to: float, dt: float = DEFAULT_DT) -> TrajectoryPair:
    """Advance both legs from tau_from down to tau_to (tau_to <= tau_from)."""
    if not (tau_to <= tau_from <= pair.t_anchor + 1e-12):
        raise ValueError("evolution must run from the anchor toward tau=0")
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = tau_from - tau_to
    bp, bq = _descend_leg(spec, pair.bar.p[0], pair.bar.q[0], span, dt, +1.0)
    tp, tq = _descend_leg(spec, pair.tilde.p[0], pair.tilde.q[0], span, dt, -1.0)
    if not all(np.isfinite(v) for v in (bp, bq, tp, tq)):
        raise NonFiniteState(f"pair blew up over [{tau_from}, {tau_to}] at dt={dt}")
    return replace(pair,
                   bar=PhasePoint(bp, bq, pair.bar.weight),
                   tilde=PhasePoint(tp, tq, pair.tilde.weight))


def apply_jump(pair: TrajectoryPair, event: JumpEvent) -> TrajectoryPair:
    """Shift the receiving leg's momentum by -jump (downward convention)."""
    if event.branch == BAR:
        bar = PhasePoint(pair.bar.p - event.jump, pair.bar.q, pair.bar.weight)
        tilde = pair.tilde
    else:
        bar = pair.bar
        tilde = PhasePoint(pair.tilde.p - event.jump, pair.tilde.q,
                           pair.tilde.weight)
    return TrajectoryPair(bar=bar, tilde=tilde, t_anchor=pair.t_anchor,
                          jumps=pair.jumps + [event])


def rebuild_pieces(spec: PotentialSpec, anchor: TrajectoryPair,
                   dt: float = DEFAULT_DT):
    """Descend the full pair from its anchor, re-applying the recorded jumps.

    Returns the per-interval endpoint states [(tau_j, bar, tilde), ...,
    (0.0, bar, tilde)]; the final tau = 0 entry is the argument the initial
    density is evaluated at.  Pure function of (anchor, jumps, dt).
    """
    events = sorted(anchor.jumps, key=lambda ev: -ev.tau)
    pieces = []
    state = TrajectoryPair(bar=anchor.bar, tilde=anchor.tilde,
                           t_anchor=anchor.t_anchor)
    tau = anchor.t_anchor
    for ev in events:
        state = step_pair(spec, state, tau, ev.tau, dt)
        pieces.append((ev.tau, state.bar, state.tilde))
        state = apply_jump(state, ev)
        tau = ev.tau
    state = step_pair(spec, state, tau, 0.0, dt)
    pieces.append((0.0, state.bar, state.tilde))
    return pieces
