"""Deterministic event-driven execution of the triggered formation controllers.

The loop keeps the true multi-agent state in closed form: positions move
linearly between events in first-order mode, and via the exact exponential
response of the damped velocity dynamics in second-order mode. Events are
agent triggers; firing an agent re-senses its relative states, refreshes its
frozen control, and delivers the broadcast payload to its neighbors
instantaneously, after which only the firing agent and its neighbors recompute
their candidate trigger times.

Runs are bit-reproducible: no randomness, simultaneous candidates fire in
ascending agent order, and the trace is sampled from the same closed forms
that drive the events.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import bounds as bounds_mod
from . import double as dbl
from . import single as sgl
from .bounds import BoundSet, CertificationReport, compute_rate_caps
from .double import GainSet
from .errors import (FormationError, MarginError, SimulationFault,
                     ValidationError)
from .formation import (FormationSpec, InitialState, check_feasible,
                        check_initial, check_margins)
from .triggering import AgentKnowledge, NeighborView, Threshold, TriggerRecord


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to execute and certify one run."""

    formation: FormationSpec
    initial: InitialState
    mode: str  # "single" | "double"
    threshold: Threshold
    horizon: float
    gains: GainSet | None = None
    sample_dt: float = 0.01
    h_scan: float = 1e-3
    tol_root: float = 1e-9
    split: float | None = None  # free constant of the energy estimate
    use_conservative_rate_cap: bool = False
    terminal_speed_tol: float = 1e-2


@dataclass(frozen=True)
class Segment:
    """Closed-form state description between two consecutive event times."""

    t0: float
    t1: float
    x0: np.ndarray  # (n, p) positions at t0
    q0: np.ndarray | None  # (n, p) velocities at t0 (second-order only)
    controls: np.ndarray  # (n, p) applied controls (steering part in 2nd order)
    frozen_x: np.ndarray  # (n, p) per-agent frozen weighted offset sums
    frozen_q: np.ndarray | None  # (n, p) per-agent frozen relative-velocity sums


@dataclass
class Trace:
    """Sampled run output: the configured grid merged with all trigger times."""

    times: np.ndarray  # (s,)
    x: np.ndarray  # (s, n, p)
    q: np.ndarray | None  # (s, n, p) second-order only
    edge_dist: np.ndarray  # (s, m) ||x_i - x_j||
    edge_offset: np.ndarray  # (s, m) ||x_i - x_j - d_ij||
    error_norms: np.ndarray  # (s, n)
    thresholds: np.ndarray  # (s,)


@dataclass
class SimResult:
    trace: Trace
    triggers: list[TriggerRecord]
    bounds: BoundSet
    segments: list[Segment] = field(default_factory=list)


def validate_config(config: ScenarioConfig) -> None:
    """Check every constraint of the requested mode; raise with an actionable message."""
    spec = config.formation
    margins = check_margins(spec)
    if not margins.ok:
        k = int(np.argmin(margins.margins))
        i, j = spec.graph.edges[k]
        raise ValidationError(
            f"displacement on edge ({i + 1},{j + 1}) has length "
            f"{spec.delta - margins.margins[k]:.6g} which is not strictly below "
            f"the radius delta={spec.delta:.6g}"
        )
    feas = check_feasible(spec)
    if not feas.feasible:
        i, j = feas.worst_edge
        raise ValidationError(
            f"formation is infeasible: residual {feas.worst_residual:.6g} on edge "
            f"({i + 1},{j + 1})"
        )
    init = check_initial(spec, config.initial)
    if not init.ok:
        k = int(np.argmin(init.slacks))
        i, j = spec.graph.edges[k]
        raise ValidationError(
            f"initial offset {init.offsets[k]:.6g} on edge ({i + 1},{j + 1}) is not "
            f"strictly below the margin {margins.margins[k]:.6g}"
        )

    if config.mode not in ("single", "double"):
        raise ValidationError(f"mode must be 'single' or 'double', got {config.mode!r}")
    caps = compute_rate_caps(spec)
    cap = caps.cap(config.use_conservative_rate_cap)
    cap_name = "conservative_beta_max" if config.use_conservative_rate_cap else "beta_max"
    if config.mode == "single":
        if config.threshold.beta >= cap:
            raise ValidationError(
                f"beta={config.threshold.beta:.6g} violates beta < {cap_name}={cap:.6g}"
            )
        if config.gains is not None:
            raise ValidationError("gains are only meaningful in double mode")
    else:
        if config.gains is None:
            raise ValidationError("double mode requires a GainSet")
        if config.initial.q0 is None:
            raise ValidationError("double mode requires initial velocities q0")
        if config.initial.q0.shape != config.initial.x0.shape:
            raise ValidationError("q0 must match the shape of x0")
        if config.gains.rate > cap + 1e-12:
            raise ValidationError(
                f"beta1={config.gains.rate:.6g} violates beta1 <= {cap_name}={cap:.6g}"
            )
        if config.threshold.beta >= config.gains.decay_limit:
            raise ValidationError(
                f"beta_d={config.threshold.beta:.6g} violates "
                f"beta_d < decay_limit={config.gains.decay_limit:.6g}"
            )
        if config.split is not None and not 0 < config.split < config.gains.damping:
            raise ValidationError(
                f"split={config.split} must lie in (0, damping={config.gains.damping:.6g})"
            )
    if config.mode == "single" and config.split is not None and not 0 < config.split < 1:
        raise ValidationError(f"split={config.split} must lie in (0, 1)")
    if config.horizon <= 0:
        raise ValidationError(f"horizon must be positive, got {config.horizon}")
    if config.sample_dt <= 0 or config.sample_dt > config.horizon:
        raise ValidationError(f"sample_dt={config.sample_dt} must lie in (0, horizon]")
    if config.h_scan <= 0 or config.tol_root <= 0:
        raise ValidationError("h_scan and tol_root must be positive")


def compute_bounds(config: ScenarioConfig) -> BoundSet:
    try:
        if config.mode == "single":
            split = 0.5 if config.split is None else config.split
            return bounds_mod.compute_bounds_single(
                config.formation, config.initial, config.threshold, split
            )
        return bounds_mod.compute_bounds_double(
            config.formation, config.initial, config.gains, config.threshold,
            config.split
        )
    except MarginError as exc:
        # an initial offset inside the numerical guard band of its margin
        raise ValidationError(
            f"initial state is inside the evaluation guard band: {exc}"
        ) from exc


class _Engine:
    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.spec = config.formation
        self.n = self.spec.graph.n
        self.p = self.spec.p
        self.mode = config.mode
        self.gains = config.gains
        self.t = 0.0
        self.x = config.initial.x0.copy()
        self.q = config.initial.q0.copy() if self.mode == "double" else None
        self.controls = np.zeros((self.n, self.p))
        self.frozen_x = np.zeros((self.n, self.p))
        self.frozen_q = np.zeros((self.n, self.p)) if self.mode == "double" else None
        self.knowledge: list[AgentKnowledge] = []
        self.triggers: list[TriggerRecord] = []
        self.segments: list[Segment] = []
        self.neighbor_lists = self.spec.graph.neighbor_lists()

    # -- state propagation -------------------------------------------------

    def _advance(self, t_new: float) -> None:
        dt = t_new - self.t
        if dt < 0:
            raise SimulationFault("event queue moved backwards", time=t_new)
        if dt == 0:
            return
        if self.mode == "single":
            self.x = self.x + dt * self.controls
        else:
            k3 = self.gains.damping
            growth = -np.expm1(-k3 * dt)  # 1 - exp(-k3 dt)
            decay = np.exp(-k3 * dt)
            steer = self.controls / k3
            self.x = self.x + (growth / k3) * self.q + (dt - growth / k3) * steer
            self.q = decay * self.q + growth * steer
        self.t = t_new

    def _emit_segment(self, t1: float) -> None:
        self.segments.append(Segment(
            t0=self.t,
            t1=t1,
            x0=self.x.copy(),
            q0=self.q.copy() if self.q is not None else None,
            controls=self.controls.copy(),
            frozen_x=self.frozen_x.copy(),
            frozen_q=self.frozen_q.copy() if self.frozen_q is not None else None,
        ))

    # -- event handling ----------------------------------------------------

    def _sense(self, agent: int):
        rel_x = {j: self.x[agent] - self.x[j] for j in self.neighbor_lists[agent]}
        rel_q = None
        if self.mode == "double":
            rel_q = {j: self.q[agent] - self.q[j] for j in self.neighbor_lists[agent]}
        return rel_x, rel_q

    def _fire(self, agent: int, record_error: bool = True) -> None:
        know = self.knowledge[agent]
        try:
            if record_error:
                if self.mode == "single":
                    err = float(np.linalg.norm(sgl.error_at(self.spec, know, self.t)))
                else:
                    err = float(np.linalg.norm(
                        dbl.error_at(self.spec, self.gains, know, self.t)))
            else:
                err = 0.0
            rel_x, rel_q = self._sense(agent)
            if self.mode == "single":
                sum_x = sgl.weighted_offset_sum(self.spec, agent, rel_x)
                control = -sum_x
                sum_q = None
            else:
                sum_x, sum_q = dbl.frozen_sums(self.spec, agent, rel_x, rel_q)
                control = dbl.steering_input(self.gains, sum_x, sum_q)
        except FormationError as exc:
            raise SimulationFault(str(exc), time=self.t, agent=agent) from exc

        know.trigger_time = self.t
        know.control = control
        know.frozen_x = sum_x
        if self.mode == "double":
            know.frozen_q = sum_q
        for j in self.neighbor_lists[agent]:
            know.neighbors[j] = NeighborView(
                anchor_time=self.t,
                rel_x=rel_x[j].copy(),
                control=self.knowledge[j].control,
                rel_q=rel_q[j].copy() if rel_q is not None else None,
            )
        self.controls[agent] = control
        self.frozen_x[agent] = sum_x
        if self.mode == "double":
            self.frozen_q[agent] = sum_q

        # instantaneous lossless broadcast to every neighbor
        for j in self.neighbor_lists[agent]:
            self.knowledge[j].neighbors[agent] = NeighborView(
                anchor_time=self.t,
                rel_x=-rel_x[j],
                control=control,
                rel_q=-rel_q[j] if rel_q is not None else None,
            )
        self.triggers.append(TriggerRecord(
            agent=agent,
            time=self.t,
            control=control.copy(),
            error_norm=err,
            rel_payload=rel_x,
            velocity=self.q[agent].copy() if self.q is not None else None,
            rel_q_payload=rel_q,
        ))

    def _candidate(self, agent: int):
        know = self.knowledge[agent]
        try:
            if self.mode == "single":
                t = sgl.next_trigger_time(
                    self.config.threshold, self.spec, know, self.t,
                    self.config.horizon, self.config.h_scan, self.config.tol_root)
            else:
                t = dbl.next_trigger_time(
                    self.config.threshold, self.spec, self.gains, know, self.t,
                    self.config.horizon, self.config.h_scan, self.config.tol_root)
        except FormationError as exc:
            raise SimulationFault(str(exc), time=self.t, agent=agent) from exc
        return np.inf if t is None else t

    # -- main loop ----------------------------------------------------------

    def run(self) -> tuple[list[Segment], list[TriggerRecord]]:
        for i in range(self.n):
            self.knowledge.append(AgentKnowledge(
                agent=i,
                trigger_time=0.0,
                control=np.zeros(self.p),
                frozen_x=np.zeros(self.p),
                frozen_q=np.zeros(self.p) if self.mode == "double" else None,
            ))
        # the schedule starts with a mandatory trigger of every agent
        for i in range(self.n):
            self._fire(i, record_error=False)
        candidates = np.array([self._candidate(i) for i in range(self.n)])

        event_cap = self._event_cap()
        while True:
            t_next = float(np.min(candidates))
            if not np.isfinite(t_next) or t_next > self.config.horizon:
                break
            batch = [i for i in range(self.n) if candidates[i] == t_next]
            if t_next > self.t:
                self._emit_segment(t_next)
                self._advance(t_next)
            for i in batch:
                self._fire(i)
            if len(self.triggers) > event_cap:
                raise SimulationFault(
                    f"event count exceeded the certified cap {event_cap}", time=self.t)
            dirty = set(batch)
            for i in batch:
                dirty.update(self.neighbor_lists[i])
            for i in sorted(dirty):
                candidates[i] = self._candidate(i)
        self._emit_segment(self.config.horizon)
        return self.segments, self.triggers

    def _event_cap(self) -> int:
        gaps = compute_bounds(self.config).min_gaps
        return int(min(np.sum(self.config.horizon / gaps) + self.n, 1e16))


def _sample_segments(config: ScenarioConfig, segments: list[Segment],
                     triggers: list[TriggerRecord]) -> Trace:
    spec = config.formation
    g = spec.graph
    steps = max(1, int(round(config.horizon / config.sample_dt)))
    grid = np.linspace(0.0, config.horizon, steps + 1)
    times = np.unique(np.concatenate([
        grid, [rec.time for rec in triggers]]))
    times = times[(times >= 0) & (times <= config.horizon + 1e-12)]

    n, p = g.n, spec.p
    x = np.empty((times.size, n, p))
    q = np.empty((times.size, n, p)) if config.mode == "double" else None
    err = np.empty((times.size, n))
    idx = np.array(g.edges)

    for s_i, seg in enumerate(segments):
        last = s_i == len(segments) - 1
        if last:
            mask = (times >= seg.t0) & (times <= seg.t1 + 1e-12)
        else:
            mask = (times >= seg.t0) & (times < seg.t1)
        if not np.any(mask):
            continue
        dt = (times[mask] - seg.t0)[:, None, None]
        if config.mode == "single":
            xs = seg.x0[None] + dt * seg.controls[None]
            qs = None
        else:
            k3 = config.gains.damping
            growth = -np.expm1(-k3 * dt)
            steer = seg.controls[None] / k3
            xs = seg.x0[None] + (growth / k3) * seg.q0[None] + (dt - growth / k3) * steer
            qs = np.exp(-k3 * dt) * seg.q0[None] + growth * steer
        x[mask] = xs
        if q is not None:
            q[mask] = qs
        fx, fq = bounds_mod.fresh_weighted_sums(spec, xs, qs)
        e_x = fx - seg.frozen_x[None]
        if config.mode == "single":
            err[mask] = np.linalg.norm(e_x, axis=2)
        else:
            e_q = fq - seg.frozen_q[None]
            err[mask] = np.linalg.norm(
                config.gains.pos_gain * e_x + config.gains.vel_gain * e_q, axis=2)

    evec = x[:, idx[:, 0], :] - x[:, idx[:, 1], :]
    return Trace(
        times=times,
        x=x,
        q=q,
        edge_dist=np.linalg.norm(evec, axis=2),
        edge_offset=np.linalg.norm(evec - spec.displacements[None], axis=2),
        error_norms=err,
        thresholds=np.asarray(config.threshold.value(times)),
    )


def run(config: ScenarioConfig) -> SimResult:
    """Validate, execute, and sample one scenario; deterministic end to end."""
    validate_config(config)
    bound_set = compute_bounds(config)
    engine = _Engine(config)
    segments, triggers = engine.run()
    trace = _sample_segments(config, segments, triggers)
    return SimResult(trace=trace, triggers=triggers, bounds=bound_set,
                     segments=segments)


def replay_check(trace: Trace, triggers: list[TriggerRecord],
                 config: ScenarioConfig) -> CertificationReport:
    """Recompute the bounds and re-verify every certified invariant on a trace."""
    bound_set = compute_bounds(config)
    report = CertificationReport()

    covered = (trace.times.size > 0 and abs(trace.times[0]) <= 1e-12
               and trace.times[-1] >= config.horizon - 1e-9)
    report.add(
        "horizon_complete",
        0.0 if covered else -1.0,
        f"trace covers [{trace.times[0]:.6g}, {trace.times[-1]:.6g}] of "
        f"[0, {config.horizon:.6g}]" if trace.times.size else "empty trace",
    )
    trig_times = np.array(sorted(rec.time for rec in triggers))
    present = np.isin(np.round(trig_times, 12), np.round(trace.times, 12))
    report.add(
        "triggers_in_trace",
        0.0 if bool(np.all(present)) else -1.0,
        f"{int(np.sum(present))}/{len(trig_times)} trigger times present in the grid",
    )
    if not report.passed:
        return report

    main = bounds_mod.certify_trace(
        trace, triggers, bound_set, config.formation, config.threshold,
        config.mode, config.gains,
        terminal_speed_tol=config.terminal_speed_tol,
    )
    report.checks.extend(main.checks)

    # recorded error norms must agree with the independent recomputation
    recomputed = bounds_mod.recompute_error_norms(
        config.formation, trace.times, trace.x, trace.q, triggers,
        config.mode, config.gains)
    finite = np.isfinite(recomputed) & np.isfinite(trace.error_norms)
    dev = float(np.max(np.abs(recomputed[finite] - trace.error_norms[finite]))) \
        if np.any(finite) else np.inf
    report.add(
        "recorded_errors_consistent",
        bounds_mod.DEFAULT_SLACK - dev,
        f"max deviation {dev:.3g} between recorded and recomputed error norms",
    )
    return report


def with_horizon(config: ScenarioConfig, horizon: float) -> ScenarioConfig:
    return replace(config, horizon=horizon)
