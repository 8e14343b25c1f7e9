"""Closed-form stability constants and post-hoc trace certification.

Every constant here is the explicit Lyapunov bookkeeping behind the two
convergence guarantees: a cap on the total tension energy implies per-edge
offset caps strictly inside the barrier poles (connectivity), a cap on the
centered quadratic energy yields the exponential envelope on relative offsets,
and a cap on the error growth rate yields a strictly positive minimum
inter-trigger gap (no accumulation of events in finite time).

certify_trace re-derives every inequality directly from raw trace states and
the trigger schedule, independently of the simulator's own bookkeeping, and
reports one pass/fail entry per invariant instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tension
from .double import GainSet
from .errors import ValidationError
from .formation import FormationSpec, InitialState, check_feasible, check_margins
from .graphs import rho2
from .triggering import Threshold, TriggerRecord

DEFAULT_SLACK = 1e-6
DEFAULT_CAP_SLACK = 1e-9
DEFAULT_TERMINAL_SPEED_TOL = 1e-2


@dataclass(frozen=True)
class RateCaps:
    """Admissible threshold decay rates derived from the topology."""

    beta_max: float  # rho2(laplacian) / largest edge margin
    margin_max: float  # largest per-edge margin
    conservative: float  # distributed-friendly lower bound 4 / (n (n-1) delta)

    def cap(self, use_conservative: bool) -> float:
        return self.conservative if use_conservative else self.beta_max


@dataclass(frozen=True)
class BoundSet:
    """All closed-form constants certifying one run configuration."""

    mode: str
    beta_max: float
    margin_max: float
    tension_cap: float  # upper bound on the total tension energy for all time
    offset_caps: np.ndarray  # (m,) per-edge cap on the relative offset length
    envelope_gain: float  # ||offset|| <= 2 sqrt(envelope_gain) e^{-beta t}
    error_rate_caps: np.ndarray  # (n,) cap on d||error||/dt / e^{-beta t}
    min_gaps: np.ndarray  # (n,) guaranteed minimum inter-trigger gap
    split: float  # free constant of the energy estimate
    rel_accel_caps: np.ndarray | None = None  # (m,) second-order only

    def to_dict(self, graph) -> dict:
        edges = [f"{i + 1}-{j + 1}" for i, j in graph.edges]
        agents = [str(i + 1) for i in range(graph.n)]
        out = {
            "mode": self.mode,
            "beta_max": self.beta_max,
            "margin_max": self.margin_max,
            "tension_cap": self.tension_cap,
            "envelope_gain": self.envelope_gain,
            "split": self.split,
            "offset_caps": dict(zip(edges, map(float, self.offset_caps))),
            "error_rate_caps": dict(zip(agents, map(float, self.error_rate_caps))),
            "min_gaps": dict(zip(agents, map(float, self.min_gaps))),
        }
        if self.rel_accel_caps is not None:
            out["rel_accel_caps"] = dict(zip(edges, map(float, self.rel_accel_caps)))
        return out


def compute_rate_caps(spec: FormationSpec) -> RateCaps:
    margins = check_margins(spec)
    if not margins.ok:
        raise ValidationError("some displacement length reaches the radius")
    lam = rho2(spec.graph.laplacian())
    n = spec.graph.n
    conservative = 4.0 / (n * (n - 1) * spec.delta) if n > 1 else lam / margins.margin_max
    return RateCaps(
        beta_max=lam / margins.margin_max,
        margin_max=margins.margin_max,
        conservative=conservative,
    )


def _offset_cap(tension_cap: float, margin: float) -> float:
    # root of l^2 / (margin - l) = 2 * tension_cap, written in a
    # cancellation-free form; always strictly below margin
    if tension_cap <= 0:
        return 0.0
    return 2.0 * margin / (np.sqrt(1.0 + 2.0 * margin / tension_cap) + 1.0)


def _centered(values: np.ndarray) -> np.ndarray:
    return values - values.mean(axis=0, keepdims=True)


def _initial_offsets(spec: FormationSpec, state: InitialState) -> np.ndarray:
    feas = check_feasible(spec)
    if not feas.feasible:
        raise ValidationError(
            f"formation is infeasible: residual {feas.worst_residual:.6g} on edge "
            f"({feas.worst_edge[0] + 1},{feas.worst_edge[1] + 1})"
        )
    return state.x0 - feas.anchors


def compute_bounds_single(spec: FormationSpec, state: InitialState,
                          threshold: Threshold, split: float = 0.5) -> BoundSet:
    """Constants for the first-order controller; split is the free constant in (0,1)."""
    if not 0 < split < 1:
        raise ValidationError(f"split must lie in (0,1), got {split}")
    caps = compute_rate_caps(spec)
    if threshold.beta >= caps.beta_max:
        raise ValidationError(
            f"beta={threshold.beta} violates beta < beta_max={caps.beta_max}"
        )
    g = spec.graph
    n = g.n
    margins = spec.margins()
    alpha, beta = threshold.alpha, threshold.beta

    y0 = _initial_offsets(spec, state)
    tension_cap = tension.total_tension(spec, y0) + n * alpha**2 / (8.0 * split * beta)
    offset_caps = np.array([_offset_cap(tension_cap, rho) for rho in margins])

    v0 = 0.5 * float(np.sum(_centered(y0) ** 2))
    envelope_gain = v0 + n * alpha**2 / (8.0 * caps.beta_max * (caps.beta_max - beta))

    weight_caps = np.array([
        tension.edge_weight(margins[k], offset_caps[k], g.edges[k])
        for k in range(g.m)
    ])
    rate_terms = np.zeros(n)  # per-agent sum of 2 * weight_cap * sqrt(envelope_gain)
    for k, (a, b) in enumerate(g.edges):
        term = 2.0 * weight_caps[k] * np.sqrt(envelope_gain)
        rate_terms[a] += term
        rate_terms[b] += term

    error_rate_caps = np.zeros(n)
    for k, (a, b) in enumerate(g.edges):
        grad_cap = tension.force_rate_bound(margins[k], offset_caps[k], g.edges[k])
        speed_sum = 2.0 * alpha + rate_terms[a] + rate_terms[b]
        error_rate_caps[a] += grad_cap * speed_sum
        error_rate_caps[b] += grad_cap * speed_sum

    min_gaps = alpha / (error_rate_caps + alpha * beta)
    return BoundSet(
        mode="single",
        beta_max=caps.beta_max,
        margin_max=caps.margin_max,
        tension_cap=tension_cap,
        offset_caps=offset_caps,
        envelope_gain=envelope_gain,
        error_rate_caps=error_rate_caps,
        min_gaps=min_gaps,
        split=split,
    )


def compute_bounds_double(spec: FormationSpec, state: InitialState, gains: GainSet,
                          threshold: Threshold, split: float | None = None) -> BoundSet:
    """Constants for the second-order controller; split is free in (0, damping)."""
    if state.q0 is None:
        raise ValidationError("second-order bounds require initial velocities")
    if split is None:
        split = 0.5 * gains.damping
    if not 0 < split < gains.damping:
        raise ValidationError(
            f"split must lie in (0, damping={gains.damping:.6g}), got {split}"
        )
    caps = compute_rate_caps(spec)
    if threshold.beta >= gains.decay_limit:
        raise ValidationError(
            f"beta={threshold.beta} violates beta < decay_limit={gains.decay_limit:.6g}"
        )
    g = spec.graph
    n = g.n
    margins = spec.margins()
    alpha, beta = threshold.alpha, threshold.beta
    k1, k2, k3 = gains.pos_gain, gains.vel_gain, gains.damping

    y0 = _initial_offsets(spec, state)
    tension_cap = (tension.total_tension_double(spec, y0, state.q0, k1)
                   + n * alpha**2 / (8.0 * split * beta))
    offset_caps = np.array([_offset_cap(tension_cap / k1, rho) for rho in margins])

    yc, qc = _centered(y0), _centered(state.q0)
    corner = float(gains.certificate[0, 0])
    v0 = 0.5 * float(np.sum(corner * yc * yc + 2.0 * k1 * yc * qc + k2 * qc * qc))
    envelope_gain = v0 + n * alpha**2 / (
        8.0 * gains.rate * (gains.decay_limit - beta)
    )
    root_gain = np.sqrt(envelope_gain)

    weight_caps = np.array([
        tension.edge_weight(margins[k], offset_caps[k], g.edges[k])
        for k in range(g.m)
    ])
    weight_cap_sums = np.zeros(n)  # per-agent sum of weight caps over incident edges
    for k, (a, b) in enumerate(g.edges):
        weight_cap_sums[a] += weight_caps[k]
        weight_cap_sums[b] += weight_caps[k]

    rel_accel_caps = np.zeros(g.m)
    for k, (a, b) in enumerate(g.edges):
        rel_accel_caps[k] = 2.0 * alpha + 2.0 * (
            (k1 + k2) * (weight_cap_sums[a] + weight_cap_sums[b]) + k3
        ) * root_gain

    error_rate_caps = np.zeros(n)
    for k, (a, b) in enumerate(g.edges):
        grad_cap = tension.force_rate_bound(margins[k], offset_caps[k], g.edges[k])
        slope_cap = tension.weight_slope(margins[k], offset_caps[k], g.edges[k])
        term = (2.0 * k1 * grad_cap * root_gain
                + 4.0 * k2 * slope_cap * envelope_gain
                + k2 * weight_caps[k] * rel_accel_caps[k])
        error_rate_caps[a] += term
        error_rate_caps[b] += term

    min_gaps = alpha / (error_rate_caps + alpha * beta)
    return BoundSet(
        mode="double",
        beta_max=caps.beta_max,
        margin_max=caps.margin_max,
        tension_cap=tension_cap,
        offset_caps=offset_caps,
        envelope_gain=envelope_gain,
        error_rate_caps=error_rate_caps,
        min_gaps=min_gaps,
        split=split,
        rel_accel_caps=rel_accel_caps,
    )


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_margin: float  # remaining slack; negative means violated
    detail: str

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "detail": self.detail,
        }


@dataclass
class CertificationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_names(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def add(self, name: str, margin: float, detail: str, strict: bool = False) -> None:
        ok = margin > 0 if strict else margin >= 0
        if np.isnan(margin):
            ok = False
        self.checks.append(CheckResult(name, bool(ok), float(margin), detail))

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def fresh_weighted_sums(spec: FormationSpec, x: np.ndarray, q: np.ndarray | None):
    """Per-sample weighted offset (and relative-velocity) sums for every agent.

    x has shape (samples, n, p). Samples where an edge offset reaches its
    barrier pole get +inf entries so that downstream checks fail rather than
    raise; a certifier reports, it does not abort.
    """
    s, n, p = x.shape
    fx = np.zeros((s, n, p))
    fq = np.zeros((s, n, p)) if q is not None else None
    margins = spec.margins()
    for k, (a, b) in enumerate(spec.graph.edges):
        off = x[:, a, :] - x[:, b, :] - spec.displacements[k]
        lengths = np.linalg.norm(off, axis=1)
        w = np.full(s, np.inf)
        safe = lengths < margins[k] * (1.0 - tension.GUARD_SCALE)
        if np.any(safe):
            w[safe] = tension.edge_weight(margins[k], lengths[safe])
        contrib = w[:, None] * off
        fx[:, a, :] += contrib
        fx[:, b, :] -= contrib
        if fq is not None:
            rel_q = q[:, a, :] - q[:, b, :]
            with np.errstate(invalid="ignore"):
                contrib_q = w[:, None] * rel_q
            fq[:, a, :] += contrib_q
            fq[:, b, :] -= contrib_q
    return fx, fq


def _trigger_rows(times: np.ndarray, trigger_times: np.ndarray) -> np.ndarray:
    rows = np.searchsorted(times, trigger_times)
    rows = np.clip(rows, 0, len(times) - 1)
    if np.any(np.abs(times[rows] - trigger_times) > 1e-9):
        raise ValidationError("trigger times are missing from the trace sample grid")
    return rows


def recompute_error_norms(spec: FormationSpec, times: np.ndarray, x: np.ndarray,
                          q: np.ndarray | None, triggers: list[TriggerRecord],
                          mode: str, gains: GainSet | None = None) -> np.ndarray:
    """Measurement-error norms rebuilt from raw states and the trigger schedule.

    The frozen sums of each agent are read off the trace rows at its trigger
    times, so this path is independent of the simulator's knowledge objects.
    """
    n = spec.graph.n
    fx, fq = fresh_weighted_sums(spec, x, q if mode == "double" else None)
    err = np.zeros((len(times), n))
    for i in range(n):
        t_i = np.array(sorted(rec.time for rec in triggers if rec.agent == i))
        if t_i.size == 0 or t_i[0] > times[0] + 1e-12:
            raise ValidationError(f"agent {i + 1} has no trigger at the first sample")
        rows_i = _trigger_rows(times, t_i)
        anchor = rows_i[np.searchsorted(t_i, times, side="right") - 1]
        e_x = fx[:, i, :] - fx[anchor, i, :]
        if mode == "single":
            err[:, i] = np.linalg.norm(e_x, axis=1)
        else:
            e_q = fq[:, i, :] - fq[anchor, i, :]
            err[:, i] = np.linalg.norm(
                gains.pos_gain * e_x + gains.vel_gain * e_q, axis=1
            )
    return err


def certify_trace(trace, triggers: list[TriggerRecord], bounds: BoundSet,
                  spec: FormationSpec, threshold: Threshold, mode: str,
                  gains: GainSet | None = None, slack: float = DEFAULT_SLACK,
                  cap_slack: float = DEFAULT_CAP_SLACK,
                  terminal_speed_tol: float = DEFAULT_TERMINAL_SPEED_TOL,
                  ) -> CertificationReport:
    """Check every certified inequality against a finished trace.

    Failures become report entries, never exceptions. All state-dependent
    quantities are recomputed from the raw positions/velocities in the trace.
    """
    times, x, q = trace.times, trace.x, trace.q
    g = spec.graph
    report = CertificationReport()
    edge_names = [f"({i + 1},{j + 1})" for i, j in g.edges]
    idx = np.array(g.edges)
    evec = x[:, idx[:, 0], :] - x[:, idx[:, 1], :]
    dist = np.linalg.norm(evec, axis=2)
    offn = np.linalg.norm(evec - spec.displacements[None, :, :], axis=2)

    # Edges must stay strictly inside the communication radius.
    k_worst = np.unravel_index(np.argmax(dist), dist.shape)
    report.add(
        "connectivity",
        spec.delta - float(dist[k_worst]),
        f"max edge length {dist[k_worst]:.6g} on edge {edge_names[k_worst[1]]} "
        f"at t={times[k_worst[0]]:.6g} vs radius {spec.delta:.6g}",
        strict=True,
    )

    # Exponential envelope on relative offsets (positions, plus velocities in
    # the second-order mode).
    env = 2.0 * np.sqrt(bounds.envelope_gain) * np.exp(-threshold.beta * times)
    if mode == "double":
        rel_speed = np.linalg.norm(q[:, idx[:, 0], :] - q[:, idx[:, 1], :], axis=2)
        value = np.sqrt(offn**2 + rel_speed**2)
    else:
        value = offn
    gap = env[:, None] + slack - value
    k_worst = np.unravel_index(np.argmin(gap), gap.shape)
    report.add(
        "envelope",
        float(gap[k_worst]),
        f"tightest at t={times[k_worst[0]]:.6g} on edge {edge_names[k_worst[1]]}: "
        f"value {value[k_worst]:.6g} vs bound {env[k_worst[0]] + slack:.6g}",
    )

    # Trigger rule: recomputed error norms stay under the threshold.
    err = recompute_error_norms(spec, times, x, q, triggers, mode, gains)
    thr = threshold.value(times)
    gap = thr[:, None] + slack - err
    k_worst = np.unravel_index(np.argmin(gap), gap.shape)
    report.add(
        "trigger_rule",
        float(gap[k_worst]),
        f"tightest for agent {k_worst[1] + 1} at t={times[k_worst[0]]:.6g}: "
        f"error {err[k_worst]:.6g} vs threshold {thr[k_worst[0]] + slack:.6g}",
    )

    # Per-edge offset caps and the induced weight caps.
    gap = bounds.offset_caps[None, :] + cap_slack - offn
    k_worst = np.unravel_index(np.argmin(gap), gap.shape)
    report.add(
        "offset_cap",
        float(gap[k_worst]),
        f"tightest on edge {edge_names[k_worst[1]]} at t={times[k_worst[0]]:.6g}",
    )

    margins = spec.margins()
    weight_gap = np.full(offn.shape, np.inf)
    for k in range(g.m):
        cap = tension.edge_weight(margins[k], bounds.offset_caps[k], g.edges[k])
        w = np.full(len(times), np.inf)
        safe = offn[:, k] < margins[k] * (1.0 - tension.GUARD_SCALE)
        if np.any(safe):
            w[safe] = tension.edge_weight(margins[k], offn[safe, k])
        weight_gap[:, k] = cap - w
    k_worst = np.unravel_index(np.argmin(weight_gap), weight_gap.shape)
    report.add(
        "weight_cap",
        float(weight_gap[k_worst]),
        f"tightest on edge {edge_names[k_worst[1]]} at t={times[k_worst[0]]:.6g}",
        strict=True,
    )

    # Minimum inter-trigger gaps and total event count (no event accumulation).
    gap_margin = np.inf
    gap_detail = "fewer than two triggers per agent"
    for i in range(g.n):
        t_i = np.array(sorted(rec.time for rec in triggers if rec.agent == i))
        if t_i.size >= 2:
            gaps = np.diff(t_i)
            k = int(np.argmin(gaps))
            m = float(gaps[k] - bounds.min_gaps[i])
            if m < gap_margin:
                gap_margin = m
                gap_detail = (
                    f"agent {i + 1}: measured min gap {gaps[k]:.6g} vs "
                    f"guaranteed {bounds.min_gaps[i]:.6g}"
                )
    report.add("min_gap", gap_margin, gap_detail, strict=True)

    span = float(times[-1] - times[0])
    count_cap = float(np.sum(span / bounds.min_gaps) + g.n)
    report.add(
        "event_count",
        count_cap - len(triggers),
        f"{len(triggers)} triggers over [{times[0]:.6g}, {times[-1]:.6g}] "
        f"vs cap {count_cap:.6g}",
        strict=True,
    )

    if mode == "double":
        terminal_cap = float(env[-1]) + terminal_speed_tol
        speeds = np.linalg.norm(q[-1], axis=1)
        i_worst = int(np.argmax(speeds))
        report.add(
            "terminal_speed",
            terminal_cap - float(speeds[i_worst]),
            f"agent {i_worst + 1} terminal speed {speeds[i_worst]:.6g} vs "
            f"envelope-derived cap {terminal_cap:.6g}",
        )
    return report
