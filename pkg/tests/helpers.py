"""Shared test utilities: random graph/spec generators and the RK4 oracle."""

from __future__ import annotations

import numpy as np

from etformation import (FormationSpec, Graph, InitialState, ScenarioConfig,
                         Threshold, solve_gains)


def random_connected_graph(rng, n_max=6) -> Graph:
    n = int(rng.integers(2, n_max + 1))
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    candidates = [(i, j) for i in range(n) for j in range(i + 1, n)
                  if (i, j) not in edges]
    if candidates:
        extra = int(rng.integers(0, len(candidates) + 1))
        order = rng.permutation(len(candidates))
        edges.update(candidates[k] for k in order[:extra])
    return Graph(n=n, edges=tuple(sorted(edges)))


def random_feasible_spec(rng, p=2, delta=5.0):
    """A spec whose displacements come from actual anchor positions."""
    g = random_connected_graph(rng)
    anchors = rng.uniform(-1.0, 1.0, size=(g.n, p))
    d = np.array([anchors[i] - anchors[j] for i, j in g.edges])
    return FormationSpec(graph=g, p=p, displacements=d, delta=delta), anchors


def one_edge_config(mode: str, horizon: float = 5.0) -> ScenarioConfig:
    """Minimal two-agent scenario used by the oracle-equivalence checks."""
    graph = Graph(n=2, edges=((0, 1),))
    spec = FormationSpec(graph=graph, p=1,
                         displacements=np.array([[0.5]]), delta=2.0)
    if mode == "single":
        return ScenarioConfig(
            formation=spec,
            initial=InitialState(x0=np.array([[0.0], [-0.4]])),
            mode="single",
            threshold=Threshold(alpha=1.0, beta=0.5),
            horizon=horizon,
        )
    return ScenarioConfig(
        formation=spec,
        initial=InitialState(x0=np.array([[0.0], [-0.4]]),
                             q0=np.array([[0.3], [-0.2]])),
        mode="double",
        threshold=Threshold(alpha=1.0, beta=0.5),
        horizon=horizon,
        gains=solve_gains(1.0),
    )


def rk4_replay(config: ScenarioConfig, triggers, sample_times, h=1e-4):
    """Fixed-step RK4 integration of the switched dynamics.

    Controls switch at the given trigger times (taken as data); integration
    steps are split exactly at events and sample times, so this is an
    independent quadrature check of the closed-form propagation.
    """
    spec = config.formation
    n, p = spec.graph.n, spec.p
    x = np.array(config.initial.x0, dtype=float)
    q = np.array(config.initial.q0, dtype=float) if config.mode == "double" else None
    controls = np.zeros((n, p))
    damping = config.gains.damping if config.mode == "double" else None

    sample_times = np.asarray(sample_times, dtype=float)
    out_x = np.empty((sample_times.size, n, p))
    out_q = np.empty((sample_times.size, n, p)) if q is not None else None
    events = sorted(triggers, key=lambda r: (r.time, r.agent))

    def deriv(xs, qs):
        if config.mode == "single":
            return controls, None
        return qs, controls - damping * qs

    def step(xs, qs, dt):
        k1x, k1q = deriv(xs, qs)
        if config.mode == "single":
            return xs + dt * k1x, None
        k2x, k2q = deriv(xs + 0.5 * dt * k1x, qs + 0.5 * dt * k1q)
        k3x, k3q = deriv(xs + 0.5 * dt * k2x, qs + 0.5 * dt * k2q)
        k4x, k4q = deriv(xs + dt * k3x, qs + dt * k3q)
        return (xs + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x),
                qs + (dt / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q))

    t = 0.0
    si = ei = 0
    while si < sample_times.size or ei < len(events):
        next_s = sample_times[si] if si < sample_times.size else np.inf
        next_e = events[ei].time if ei < len(events) else np.inf
        tc = min(next_s, next_e)
        while t < tc - 1e-15:
            dt = min(h, tc - t)
            x, q = step(x, q, dt)
            t += dt
        t = tc
        while ei < len(events) and events[ei].time == tc:
            controls[events[ei].agent] = events[ei].control
            ei += 1
        while si < sample_times.size and sample_times[si] == tc:
            out_x[si] = x
            if out_q is not None:
                out_q[si] = q
            si += 1
    return out_x, out_q
