"""Shared event-triggering data: thresholds, per-agent knowledge, trigger records."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StaleKnowledgeError, ValidationError


@dataclass(frozen=True)
class Threshold:
    """Exponentially decaying trigger threshold alpha * exp(-beta * t)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if self.beta <= 0:
            raise ValidationError(f"beta must be positive, got {self.beta}")

    def value(self, t):
        return self.alpha * np.exp(-self.beta * np.asarray(t, dtype=float))


@dataclass
class NeighborView:
    """Latest information an agent holds about one neighbor.

    rel_x (and rel_q for second-order dynamics) are relative states from the
    viewer's perspective at anchor_time; control is the neighbor's currently
    applied broadcast control, constant until the neighbor's next trigger.
    """

    anchor_time: float
    rel_x: np.ndarray
    control: np.ndarray
    rel_q: np.ndarray | None = None

    def check_time(self, t) -> None:
        if np.min(np.asarray(t, dtype=float)) < self.anchor_time - 1e-12:
            raise StaleKnowledgeError(
                f"prediction requested at t={np.min(t):.9g} before anchor "
                f"time {self.anchor_time:.9g}"
            )


@dataclass
class AgentKnowledge:
    """Everything one agent knows between its own triggers.

    control is the agent's own frozen broadcast control; frozen_x (and
    frozen_q) are the weighted relative-state sums sensed at the last own
    trigger, which the measurement error is taken against.
    """

    agent: int
    trigger_time: float
    control: np.ndarray
    frozen_x: np.ndarray
    neighbors: dict[int, NeighborView] = field(default_factory=dict)
    frozen_q: np.ndarray | None = None


@dataclass(frozen=True)
class TriggerRecord:
    """One agent's triggering event.

    error_norm is the measurement-error norm immediately before the update
    (zero for the mandatory initial trigger). rel_payload carries the sensed
    relative positions broadcast to each neighbor; second-order runs add the
    agent's velocity and the sensed relative velocities.
    """

    agent: int
    time: float
    control: np.ndarray
    error_norm: float
    rel_payload: dict[int, np.ndarray]
    velocity: np.ndarray | None = None
    rel_q_payload: dict[int, np.ndarray] | None = None
