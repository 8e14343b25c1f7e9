"""First-order (velocity-controlled) event-triggered formation controller.

Between its own triggers an agent applies the frozen control

    u_i = - sum_j edge_weight(l_ij) * (x_i - x_j - d_ij)   sensed at the trigger,

and monitors the measurement error e_i(t), the gap between the freshly
evaluated weighted offset sum (on predicted relative positions) and the frozen
sum. The next trigger is the first time ||e_i(t)|| reaches the threshold.
"""

from __future__ import annotations

import numpy as np

from . import tension
from .formation import FormationSpec
from .rootfind import first_crossing
from .triggering import AgentKnowledge, Threshold


def weighted_offset_sum(spec: FormationSpec, agent: int,
                        rel_map: dict[int, np.ndarray]) -> np.ndarray:
    """sum_j edge_weight(||rel - d_ij||) * (rel - d_ij) over the sensed neighbors."""
    total = np.zeros(spec.p)
    for j, rel in rel_map.items():
        off = np.asarray(rel, dtype=float) - spec.displacement(agent, j)
        rho = spec.margin(agent, j)
        w = tension.edge_weight(rho, float(np.linalg.norm(off)), (agent, j))
        total += w * off
    return total


def control_input(spec: FormationSpec, agent: int,
                  rel_map: dict[int, np.ndarray]) -> np.ndarray:
    """Frozen control applied from a trigger onward: the negated offset sum."""
    return -weighted_offset_sum(spec, agent, rel_map)


def predict_relative(knowledge: AgentKnowledge, neighbor: int, t: float) -> np.ndarray:
    """Relative position x_i - x_j at time t from the stored anchor.

    Both controls are constant from the anchor time until either agent
    triggers again, so the relative position moves linearly.
    """
    view = knowledge.neighbors[neighbor]
    view.check_time(t)
    return view.rel_x + (t - view.anchor_time) * (knowledge.control - view.control)


def error_at(spec: FormationSpec, knowledge: AgentKnowledge, t: float) -> np.ndarray:
    """Measurement error e_i(t); exactly zero at the agent's own trigger time."""
    rel_map = {j: predict_relative(knowledge, j, t) for j in knowledge.neighbors}
    return weighted_offset_sum(spec, knowledge.agent, rel_map) - knowledge.frozen_x


def error_norms(spec: FormationSpec, knowledge: AgentKnowledge,
                times: np.ndarray) -> np.ndarray:
    """||e_i|| on an array of times, vectorized for the trigger scan.

    Entries where a predicted offset reaches the barrier pole come back as
    +inf: the extrapolation has overshot a crossing, which the scan treats as
    "already triggered" rather than a fault.
    """
    times = np.asarray(times, dtype=float)
    acc = np.zeros((times.size, spec.p))
    bad = np.zeros(times.size, dtype=bool)
    for j, view in knowledge.neighbors.items():
        view.check_time(times)
        du = knowledge.control - view.control
        rel = view.rel_x[None, :] + (times - view.anchor_time)[:, None] * du[None, :]
        off = rel - spec.displacement(knowledge.agent, j)[None, :]
        lengths = np.linalg.norm(off, axis=1)
        rho = spec.margin(knowledge.agent, j)
        unsafe = lengths >= rho * (1.0 - tension.GUARD_SCALE)
        bad |= unsafe
        w = np.zeros_like(lengths)
        safe = ~unsafe
        if np.any(safe):
            w[safe] = tension.edge_weight(rho, lengths[safe])
        acc += w[:, None] * off
    norms = np.linalg.norm(acc - knowledge.frozen_x[None, :], axis=1)
    norms[bad] = np.inf
    return norms


def next_trigger_time(threshold: Threshold, spec: FormationSpec,
                      knowledge: AgentKnowledge, start: float, horizon: float,
                      h_scan: float = 1e-3, tol_root: float = 1e-9):
    """First time in [start, horizon] where ||e_i|| reaches the threshold.

    Returns None when no crossing occurs before the horizon.
    """

    def phi(ts):
        return error_norms(spec, knowledge, ts) - threshold.value(ts)

    return first_crossing(phi, start, horizon, h_scan, tol_root)
