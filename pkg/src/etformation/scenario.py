"""Scenario file ingestion: strict YAML key-value files describing one run.

The file carries nested sections (formation, initial, controller, simulation,
analysis). Unknown keys are rejected and every mode-specific constraint is
reported with an actionable message. Node indices in the file are 1-based.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .double import solve_gains
from .engine import ScenarioConfig, validate_config
from .errors import FormationError, ValidationError
from .formation import FormationSpec, InitialState
from .graphs import Graph
from .triggering import Threshold

FORMAT_VERSION = 1

_SCHEMA = {
    "format_version": None,
    "mode": None,
    "formation": {"p", "delta", "edges", "d"},
    "initial": {"x0", "q0"},
    "controller": {"alpha", "beta", "alpha_d", "beta_d", "beta1", "k3",
                   "use_conservative_rate_cap"},
    "simulation": {"horizon", "sample_dt", "h_scan", "tol_root"},
    "analysis": {"split", "terminal_speed_tol"},
}


def _reject_unknown(data: dict, path: str = "") -> None:
    for key, value in data.items():
        if key not in _SCHEMA:
            raise ValidationError(f"unknown key '{path}{key}' in scenario file")
        allowed = _SCHEMA[key]
        if allowed is not None:
            if not isinstance(value, dict):
                raise ValidationError(f"section '{key}' must be a mapping")
            for sub in value:
                if sub not in allowed:
                    raise ValidationError(f"unknown key '{key}.{sub}' in scenario file")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ValidationError(f"missing required key '{where}.{key}'")
    return section[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"'{where}' must be a number, got {value!r}")
    return float(value)


def _vector_list(value, length: int, dim: int, where: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"'{where}' must be a list of {dim}-vectors") from None
    if arr.shape != (length, dim):
        raise ValidationError(
            f"'{where}' must have shape ({length}, {dim}), got {arr.shape}"
        )
    return arr


def load_scenario(path) -> ScenarioConfig:
    """Parse and fully validate a scenario file into a runnable configuration."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"cannot parse scenario file: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("scenario file must contain a mapping at the top level")
    _reject_unknown(data)

    version = _require(data, "format_version", "")
    if version != FORMAT_VERSION:
        raise ValidationError(
            f"unsupported format_version={version}, expected {FORMAT_VERSION}"
        )
    mode = _require(data, "mode", "")
    if mode not in ("single", "double"):
        raise ValidationError(f"mode must be 'single' or 'double', got {mode!r}")

    form = _require(data, "formation", "")
    p = int(_number(_require(form, "p", "formation"), "formation.p"))
    delta = _number(_require(form, "delta", "formation"), "formation.delta")
    raw_edges = _require(form, "edges", "formation")
    if (not isinstance(raw_edges, list) or not raw_edges
            or any(not isinstance(e, list) or len(e) != 2 for e in raw_edges)):
        raise ValidationError("'formation.edges' must be a non-empty list of [i, j] pairs")
    n = max(max(e) for e in raw_edges)
    edges = tuple((int(i) - 1, int(j) - 1) for i, j in raw_edges)
    if any(i < 0 or j < 0 for i, j in edges):
        raise ValidationError("node indices in 'formation.edges' are 1-based")
    try:
        graph = Graph(n=n, edges=edges)
    except FormationError as exc:
        raise ValidationError(f"invalid graph: {exc}") from exc

    # displacement rows follow the file's edge order; realign to canonical order
    d_raw = _vector_list(_require(form, "d", "formation"), len(raw_edges), p,
                         "formation.d")
    displacements = np.zeros((graph.m, p))
    for row, (i, j) in enumerate(edges):
        k = graph.edge_index(i, j)
        displacements[k] = d_raw[row] if i < j else -d_raw[row]
    spec = FormationSpec(graph=graph, p=p, displacements=displacements, delta=delta)

    init = _require(data, "initial", "")
    x0 = _vector_list(_require(init, "x0", "initial"), n, p, "initial.x0")
    q0 = None
    if "q0" in init and init["q0"] is not None:
        q0 = _vector_list(init["q0"], n, p, "initial.q0")
    if mode == "single" and q0 is not None:
        raise ValidationError("'initial.q0' is only meaningful in double mode")
    if mode == "double" and q0 is None:
        raise ValidationError("double mode requires 'initial.q0'")
    initial = InitialState(x0=x0, q0=q0)

    ctrl = _require(data, "controller", "")
    conservative = bool(ctrl.get("use_conservative_rate_cap", False))
    gains = None
    if mode == "single":
        for key in ("alpha_d", "beta_d", "beta1", "k3"):
            if key in ctrl:
                raise ValidationError(f"'controller.{key}' is only used in double mode")
        threshold = Threshold(
            alpha=_number(_require(ctrl, "alpha", "controller"), "controller.alpha"),
            beta=_number(_require(ctrl, "beta", "controller"), "controller.beta"),
        )
    else:
        for key in ("alpha", "beta"):
            if key in ctrl:
                raise ValidationError(
                    f"'controller.{key}' is only used in single mode; "
                    f"double mode uses alpha_d/beta_d"
                )
        threshold = Threshold(
            alpha=_number(_require(ctrl, "alpha_d", "controller"), "controller.alpha_d"),
            beta=_number(_require(ctrl, "beta_d", "controller"), "controller.beta_d"),
        )
        damping = None
        if "k3" in ctrl:
            damping = _number(ctrl["k3"], "controller.k3")
        gains = solve_gains(
            _number(_require(ctrl, "beta1", "controller"), "controller.beta1"),
            damping=damping,
        )

    sim = _require(data, "simulation", "")
    analysis = data.get("analysis", {}) or {}
    split = None
    if "split" in analysis:
        split = _number(analysis["split"], "analysis.split")

    config = ScenarioConfig(
        formation=spec,
        initial=initial,
        mode=mode,
        threshold=threshold,
        horizon=_number(_require(sim, "horizon", "simulation"), "simulation.horizon"),
        gains=gains,
        sample_dt=_number(sim.get("sample_dt", 0.01), "simulation.sample_dt"),
        h_scan=_number(sim.get("h_scan", 1e-3), "simulation.h_scan"),
        tol_root=_number(sim.get("tol_root", 1e-9), "simulation.tol_root"),
        split=split,
        use_conservative_rate_cap=conservative,
        terminal_speed_tol=_number(
            analysis.get("terminal_speed_tol", 1e-2), "analysis.terminal_speed_tol"),
    )
    validate_config(config)
    return config
