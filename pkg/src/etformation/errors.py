"""Exception types shared across the package."""


class FormationError(Exception):
    """Base class for all errors raised by this package."""


class GraphError(FormationError):
    """Invalid graph construction (self loop, duplicate edge, disconnected, ...)."""


class MarginError(FormationError):
    """An edge length reached the communication-radius margin (barrier pole)."""

    def __init__(self, length: float, pole: float, edge=None):
        self.length = float(length)
        self.pole = float(pole)
        self.edge = edge
        where = f" on edge {edge}" if edge is not None else ""
        super().__init__(
            f"edge offset length {self.length:.9g} reached the barrier pole "
            f"{self.pole:.9g}{where}"
        )


class StaleKnowledgeError(FormationError):
    """A prediction was requested before the anchor time of the stored data."""


class ValidationError(FormationError):
    """A scenario or parameter constraint is violated."""


class SimulationFault(FormationError):
    """Internal failure while executing a run; carries the failing time and agent."""

    def __init__(self, message: str, time: float | None = None, agent: int | None = None):
        self.time = time
        self.agent = agent
        ctx = []
        if time is not None:
            ctx.append(f"t={time:.9g}")
        if agent is not None:
            ctx.append(f"agent={agent + 1}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)
