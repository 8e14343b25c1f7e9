"""Edge-tension barrier potential and its scalar shape functions.

For one edge with pole rho = delta - ||d_ij||, the potential of the offset
length l = ||x_i - x_j - d_ij|| is

    edge_tension(l)  = l^2 / (rho - l)                blows up as l -> rho
    edge_weight(l)   = (2 rho - l) / (rho - l)^2      gradient coefficient
    weight_slope(l)  = (3 rho - l) / (rho - l)^3      d/dl edge_weight
    force_rate_bound(l) = 2 rho^2 / (rho - l)^3       = edge_weight + l * weight_slope

All four are strictly increasing on [0, rho). Evaluations with l at or beyond
rho * (1 - GUARD_SCALE) raise MarginError: the closed-loop theory keeps every
offset strictly below the pole, so a blow-up indicates a simulation bug.
"""

from __future__ import annotations

import numpy as np

from .errors import MarginError
from .formation import FormationSpec, edge_offsets

GUARD_SCALE = 1e-9


def _checked(rho: float, l, edge=None):
    if rho <= 0:
        raise MarginError(0.0, rho, edge)
    l = np.asarray(l, dtype=float)
    guard = rho * (1.0 - GUARD_SCALE)
    if np.any(l < 0):
        raise ValueError("offset length must be nonnegative")
    if np.any(l >= guard):
        bad = float(np.max(l))
        raise MarginError(bad, rho, edge)
    return l


def edge_tension(rho: float, l, edge=None):
    l = _checked(rho, l, edge)
    return l * l / (rho - l)


def edge_weight(rho: float, l, edge=None):
    l = _checked(rho, l, edge)
    return (2.0 * rho - l) / (rho - l) ** 2


def weight_slope(rho: float, l, edge=None):
    l = _checked(rho, l, edge)
    return (3.0 * rho - l) / (rho - l) ** 3


def force_rate_bound(rho: float, l, edge=None):
    l = _checked(rho, l, edge)
    return 2.0 * rho * rho / (rho - l) ** 3


def total_tension(spec: FormationSpec, y: np.ndarray) -> float:
    """Sum of per-edge tensions for node offsets y (shape (n, p)).

    The per-node double sum counts each edge twice and is halved, so this is
    exactly one tension term per edge.
    """
    lengths = np.linalg.norm(
        y[[i for i, _ in spec.graph.edges]] - y[[j for _, j in spec.graph.edges]],
        axis=1,
    )
    margins = spec.margins()
    return float(sum(edge_tension(margins[k], lengths[k], spec.graph.edges[k])
                     for k in range(spec.graph.m)))


def total_tension_double(spec: FormationSpec, y: np.ndarray, q: np.ndarray,
                         pos_gain: float) -> float:
    """Position tension scaled by the position gain plus the kinetic energy."""
    return pos_gain * total_tension(spec, y) + 0.5 * float(np.sum(q * q))


def offset_tension(spec: FormationSpec, x: np.ndarray) -> float:
    """Total tension evaluated directly on positions x via the edge offsets."""
    lengths = np.linalg.norm(edge_offsets(spec, x), axis=1)
    margins = spec.margins()
    return float(sum(edge_tension(margins[k], lengths[k], spec.graph.edges[k])
                     for k in range(spec.graph.m)))
