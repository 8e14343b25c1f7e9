"""Event-triggered formation control with connectivity preservation.

A simulation library and CLI for multi-agent formation control where agents
sense and broadcast only at self-determined triggering times. Supports
first-order (velocity-controlled) and second-order (acceleration-controlled)
agent dynamics, computes the closed-form constants certifying exponential
convergence, connectivity preservation, and a positive minimum inter-event
gap, and re-verifies all of them on exported traces.
"""

from .bounds import (BoundSet, CertificationReport, CheckResult, RateCaps,
                     certify_trace, compute_bounds_double,
                     compute_bounds_single, compute_rate_caps)
from .double import GainSet, riccati_gap, solve_gains
from .engine import (ScenarioConfig, SimResult, Trace, replay_check, run,
                     validate_config)
from .errors import (FormationError, GraphError, MarginError, SimulationFault,
                     StaleKnowledgeError, ValidationError)
from .formation import (FormationSpec, InitialState, check_feasible,
                        check_initial, check_margins, edge_offsets)
from .graphs import (Graph, centering_matrix, centering_psd_check, rho2,
                     weighted_laplacian)
from .scenario import load_scenario
from .triggering import AgentKnowledge, NeighborView, Threshold, TriggerRecord

__version__ = "0.1.0"

__all__ = [
    "AgentKnowledge",
    "BoundSet",
    "CertificationReport",
    "CheckResult",
    "FormationError",
    "FormationSpec",
    "GainSet",
    "Graph",
    "GraphError",
    "InitialState",
    "MarginError",
    "NeighborView",
    "RateCaps",
    "ScenarioConfig",
    "SimResult",
    "SimulationFault",
    "StaleKnowledgeError",
    "Threshold",
    "Trace",
    "TriggerRecord",
    "ValidationError",
    "centering_matrix",
    "centering_psd_check",
    "certify_trace",
    "check_feasible",
    "check_initial",
    "check_margins",
    "compute_bounds_double",
    "compute_bounds_single",
    "compute_rate_caps",
    "edge_offsets",
    "load_scenario",
    "replay_check",
    "rho2",
    "riccati_gap",
    "run",
    "solve_gains",
    "validate_config",
    "weighted_laplacian",
    "__version__",
]
