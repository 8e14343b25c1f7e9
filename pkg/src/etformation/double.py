"""Second-order (acceleration-controlled) event-triggered formation controller.

The feedback gains come from a 2x2 certificate matrix P solving

    P > 0,   (P C + C^T P) / 2  -  rate * P B B^T P  +  2 I  <= 0

for the double-integrator pair C = [[0,1],[0,0]], B = [0,1]^T. The structure
admits an exact closed-form solution at equality on all three independent
entries, so no LMI solver is involved. B^T P = [pos_gain, vel_gain] supplies
the feedback gains, and an extra continuous damping term -damping * q_i keeps
the absolute velocities bounded.

The applied control is u_i(t) = steering - damping * q_i(t) where the steering
part, frozen between the agent's own triggers, is

    steering = - pos_gain * S_x - vel_gain * S_q

with S_x, S_q the weighted relative position / velocity sums sensed at the
trigger. The combined measurement error E_i = pos_gain * e_i + vel_gain * e_qi
drives the trigger rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tension
from .errors import ValidationError
from .formation import FormationSpec
from .rootfind import first_crossing
from .triggering import AgentKnowledge, Threshold

_RICCATI_TOL = 1e-9


@dataclass(frozen=True)
class GainSet:
    """Certificate-derived feedback gains for the second-order controller."""

    rate: float  # exponential rate the certificate is designed for
    pos_gain: float  # relative-position feedback gain, P[0,1]
    vel_gain: float  # relative-velocity feedback gain, P[1,1]
    damping: float  # absolute-velocity damping gain

    @property
    def certificate(self) -> np.ndarray:
        """The 2x2 positive-definite matrix P realizing the design inequality."""
        corner = 2.0 * self.rate * self.pos_gain * self.vel_gain
        return np.array([[corner, self.pos_gain], [self.pos_gain, self.vel_gain]])

    @property
    def gain_norm(self) -> float:
        """Spectral radius of the symmetrized feedback outer product."""
        return 0.5 * (self.vel_gain + float(np.hypot(self.pos_gain, self.vel_gain)))

    @property
    def damping_load(self) -> float:
        """damping * gain_norm; the design requires this to stay below 2."""
        return self.damping * self.gain_norm

    @property
    def certificate_floor(self) -> float:
        """Smallest eigenvalue of the certificate matrix."""
        return float(np.linalg.eigvalsh(self.certificate)[0])

    @property
    def decay_limit(self) -> float:
        """Upper bound for the trigger threshold rate: (2 - damping_load) * floor."""
        return (2.0 - self.damping_load) * self.certificate_floor


def riccati_gap(gains: GainSet) -> np.ndarray:
    """(P C + C^T P)/2 - rate * P B B^T P + 2 I; negative semidefinite by design."""
    p = gains.certificate
    c = np.array([[0.0, 1.0], [0.0, 0.0]])
    b = np.array([[0.0], [1.0]])
    return 0.5 * (p @ c + c.T @ p) - gains.rate * (p @ b) @ (b.T @ p) + 2.0 * np.eye(2)


def solve_gains(rate: float, damping: float | None = None,
                rate_cap: float | None = None) -> GainSet:
    """Closed-form certificate gains for a given design rate.

    pos_gain = sqrt(2 / rate) zeroes the (1,1) entry of the design inequality,
    vel_gain = sqrt((pos_gain + 2) / rate) zeroes the (2,2) entry, and the
    remaining corner of P is fixed by the off-diagonal equality. The default
    damping is the midpoint of its admissible range, giving damping_load = 1.
    """
    if rate <= 0:
        raise ValidationError(f"design rate must be positive, got {rate}")
    if rate_cap is not None and rate > rate_cap + 1e-12:
        raise ValidationError(
            f"design rate {rate} exceeds the admissible cap {rate_cap}"
        )
    pos_gain = float(np.sqrt(2.0 / rate))
    vel_gain = float(np.sqrt((pos_gain + 2.0) / rate))
    damping_cap = 4.0 / (vel_gain + float(np.hypot(pos_gain, vel_gain)))
    if damping is None:
        damping = 0.5 * damping_cap
    if not 0 < damping < damping_cap:
        raise ValidationError(
            f"damping={damping} violates 0 < damping < {damping_cap:.6g}"
        )
    gains = GainSet(rate=rate, pos_gain=pos_gain, vel_gain=vel_gain, damping=damping)

    gap = riccati_gap(gains)
    if gap[0, 0] > _RICCATI_TOL or gap[1, 1] > _RICCATI_TOL or abs(gap[0, 1]) > _RICCATI_TOL:
        raise ValidationError(f"certificate inequality violated: gap={gap}")
    if gains.certificate_floor <= 0:
        raise ValidationError("certificate matrix is not positive definite")
    return gains


def frozen_sums(spec: FormationSpec, agent: int, rel_x_map: dict[int, np.ndarray],
                rel_q_map: dict[int, np.ndarray]):
    """Weighted offset and relative-velocity sums sensed at a trigger."""
    sum_x = np.zeros(spec.p)
    sum_q = np.zeros(spec.p)
    for j, rel in rel_x_map.items():
        off = np.asarray(rel, dtype=float) - spec.displacement(agent, j)
        rho = spec.margin(agent, j)
        w = tension.edge_weight(rho, float(np.linalg.norm(off)), (agent, j))
        sum_x += w * off
        sum_q += w * np.asarray(rel_q_map[j], dtype=float)
    return sum_x, sum_q


def steering_input(gains: GainSet, sum_x: np.ndarray, sum_q: np.ndarray) -> np.ndarray:
    """Piecewise-constant part of the control, updated only at own triggers."""
    return -gains.pos_gain * sum_x - gains.vel_gain * sum_q


def control_input(gains: GainSet, knowledge: AgentKnowledge,
                  q_i: np.ndarray) -> np.ndarray:
    """Applied control: frozen steering plus the continuous damping term."""
    return knowledge.control - gains.damping * np.asarray(q_i, dtype=float)


def predict_relative(knowledge: AgentKnowledge, gains: GainSet, neighbor: int,
                     t: float):
    """Relative position and velocity at time t from the stored anchor.

    With both steering inputs constant from the anchor onward, the relative
    velocity relaxes exponentially at the damping rate toward the steering
    difference over damping, and the relative position is its time integral
    from the anchored relative position.
    """
    view = knowledge.neighbors[neighbor]
    view.check_time(t)
    k3 = gains.damping
    dt = t - view.anchor_time
    du = (knowledge.control - view.control) / k3
    growth = -np.expm1(-k3 * dt)  # 1 - exp(-k3 dt)
    rel_q = (1.0 - growth) * view.rel_q + growth * du
    rel_x = view.rel_x + (growth / k3) * view.rel_q + (dt - growth / k3) * du
    return rel_x, rel_q


def error_at(spec: FormationSpec, gains: GainSet, knowledge: AgentKnowledge,
             t: float) -> np.ndarray:
    """Combined measurement error E_i(t); zero at the agent's own trigger time."""
    fresh_x = np.zeros(spec.p)
    fresh_q = np.zeros(spec.p)
    for j in knowledge.neighbors:
        rel_x, rel_q = predict_relative(knowledge, gains, j, t)
        off = rel_x - spec.displacement(knowledge.agent, j)
        rho = spec.margin(knowledge.agent, j)
        w = tension.edge_weight(rho, float(np.linalg.norm(off)), (knowledge.agent, j))
        fresh_x += w * off
        fresh_q += w * rel_q
    return (gains.pos_gain * (fresh_x - knowledge.frozen_x)
            + gains.vel_gain * (fresh_q - knowledge.frozen_q))


def error_norms(spec: FormationSpec, gains: GainSet, knowledge: AgentKnowledge,
                times: np.ndarray) -> np.ndarray:
    """||E_i|| on an array of times; +inf where the extrapolation overshoots a pole."""
    times = np.asarray(times, dtype=float)
    acc_x = np.zeros((times.size, spec.p))
    acc_q = np.zeros((times.size, spec.p))
    bad = np.zeros(times.size, dtype=bool)
    k3 = gains.damping
    for j, view in knowledge.neighbors.items():
        view.check_time(times)
        dt = times - view.anchor_time
        du = (knowledge.control - view.control)[None, :] / k3
        growth = -np.expm1(-k3 * dt)[:, None]
        rel_q = (1.0 - growth) * view.rel_q[None, :] + growth * du
        rel_x = (view.rel_x[None, :] + (growth / k3) * view.rel_q[None, :]
                 + (dt[:, None] - growth / k3) * du)
        off = rel_x - spec.displacement(knowledge.agent, j)[None, :]
        lengths = np.linalg.norm(off, axis=1)
        rho = spec.margin(knowledge.agent, j)
        unsafe = lengths >= rho * (1.0 - tension.GUARD_SCALE)
        bad |= unsafe
        w = np.zeros_like(lengths)
        safe = ~unsafe
        if np.any(safe):
            w[safe] = tension.edge_weight(rho, lengths[safe])
        acc_x += w[:, None] * off
        acc_q += w[:, None] * rel_q
    err = (gains.pos_gain * (acc_x - knowledge.frozen_x[None, :])
           + gains.vel_gain * (acc_q - knowledge.frozen_q[None, :]))
    norms = np.linalg.norm(err, axis=1)
    norms[bad] = np.inf
    return norms


def next_trigger_time(threshold: Threshold, spec: FormationSpec, gains: GainSet,
                      knowledge: AgentKnowledge, start: float, horizon: float,
                      h_scan: float = 1e-3, tol_root: float = 1e-9):
    """First time in [start, horizon] where ||E_i|| reaches the threshold."""

    def phi(ts):
        return error_norms(spec, gains, knowledge, ts) - threshold.value(ts)

    return first_crossing(phi, start, horizon, h_scan, tol_root)
