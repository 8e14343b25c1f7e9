import numpy as np
import pytest

import etformation as et
from etformation import (FormationSpec, Graph, InitialState, Threshold,
                         ValidationError)
from etformation.bounds import recompute_error_norms

TRIANGLE = FormationSpec(
    graph=Graph(3, ((0, 1), (0, 2), (1, 2))), p=2,
    displacements=np.array([[0.0, -2.0], [-2.0, 0.0], [-2.0, 2.0]]), delta=4.0)
ANCHORS = np.array([[0.0, 0.0], [0.0, 2.0], [2.0, 0.0]])
X0 = np.array([[2.0, 4.0], [3.5, 7.0], [4.5, 5.5]])
Q0 = np.array([[1.0, 2.0], [-1.0, -2.0], [-1.0, -1.0]])


def test_rate_caps_reference_values():
    caps = et.compute_rate_caps(TRIANGLE)
    assert abs(caps.beta_max - 1.5) <= 1e-12
    assert abs(caps.margin_max - 2.0) <= 1e-12
    assert caps.conservative == pytest.approx(1.0 / 6.0, rel=1e-12)


def test_rate_caps_single_edge():
    spec = FormationSpec(graph=Graph(2, ((0, 1),)), p=1,
                         displacements=np.array([[0.5]]), delta=1.5)
    caps = et.compute_rate_caps(spec)
    assert caps.margin_max == pytest.approx(1.0)
    assert caps.beta_max == pytest.approx(2.0)


def test_offset_caps_shrink_with_threshold_scale():
    # tension cap -> 0 forces the offset caps -> 0
    state = InitialState(x0=ANCHORS + 1.0)
    previous = None
    for alpha in (1.0, 1e-2, 1e-4):
        bs = et.compute_bounds_single(TRIANGLE, state, Threshold(alpha, 1.0))
        assert np.all(bs.offset_caps < TRIANGLE.margins())
        if previous is not None:
            assert np.all(bs.offset_caps < previous)
        previous = bs.offset_caps
    assert np.all(previous < 1e-3)


def test_single_bounds_reference_scenario():
    bs = et.compute_bounds_single(TRIANGLE, InitialState(x0=X0),
                                  Threshold(10.0, 1.0), split=0.5)
    assert bs.mode == "single"
    assert np.all(bs.offset_caps < TRIANGLE.margins())
    assert np.all(bs.offset_caps > 0)
    assert np.all(bs.min_gaps > 0)
    assert np.all(bs.error_rate_caps > 0)
    assert bs.envelope_gain > 0
    # tension cap: hand evaluation of initial tension plus the threshold term
    l12, l13, l23 = np.sqrt(3.25), np.sqrt(2.5), np.sqrt(1.25)
    nu0 = (3.25 / (2 - l12) + 2.5 / (2 - l13)
           + 1.25 / ((4 - 2 * np.sqrt(2)) - l23))
    assert bs.tension_cap == pytest.approx(nu0 + 3 * 100 / (8 * 0.5 * 1.0),
                                           rel=1e-12)


def test_offset_cap_solves_defining_equation():
    bs = et.compute_bounds_single(TRIANGLE, InitialState(x0=X0),
                                  Threshold(10.0, 1.0))
    margins = TRIANGLE.margins()
    for k in range(3):
        cap = bs.offset_caps[k]
        assert cap**2 / (margins[k] - cap) == pytest.approx(
            2 * bs.tension_cap, rel=1e-9)


def test_min_gap_decreases_in_rate_cap():
    # smaller split inflates the tension cap, hence the rate caps, hence
    # shrinks the guaranteed gaps
    state = InitialState(x0=X0)
    splits = [0.9, 0.5, 0.1, 0.01]
    gaps = [et.compute_bounds_single(TRIANGLE, state, Threshold(10.0, 1.0),
                                     split=s).min_gaps for s in splits]
    for a, b in zip(gaps, gaps[1:]):
        assert np.all(b < a)


def test_single_bounds_validation():
    state = InitialState(x0=X0)
    with pytest.raises(ValidationError):
        et.compute_bounds_single(TRIANGLE, state, Threshold(10.0, 1.0), split=1.5)
    with pytest.raises(ValidationError):
        et.compute_bounds_single(TRIANGLE, state, Threshold(10.0, 2.0))  # beta >= cap
    bad = FormationSpec(graph=TRIANGLE.graph, p=2,
                        displacements=np.array([[0.0, -2.0], [-2.0, 0.0],
                                                [0.0, 0.0]]), delta=4.0)
    with pytest.raises(ValidationError):
        et.compute_bounds_single(bad, state, Threshold(10.0, 1.0))


def test_double_bounds_rest_tension_cap():
    gains = et.solve_gains(1.5)
    state = InitialState(x0=ANCHORS - 3.0, q0=np.zeros((3, 2)))
    threshold = Threshold(10.0, 1.0)
    split = gains.damping / 2
    bs = et.compute_bounds_double(TRIANGLE, state, gains, threshold)
    assert bs.tension_cap == pytest.approx(
        3 * 100 / (8 * split * 1.0), rel=1e-12)


def test_double_bounds_reference_scenario():
    gains = et.solve_gains(1.5)
    bs = et.compute_bounds_double(TRIANGLE, InitialState(x0=X0, q0=Q0), gains,
                                  Threshold(10.0, 1.0))
    assert bs.mode == "double"
    assert np.all(bs.offset_caps < TRIANGLE.margins())
    assert np.all(bs.min_gaps > 0)
    assert bs.rel_accel_caps is not None and np.all(bs.rel_accel_caps > 0)
    # quadratic energy at t=0, evaluated independently
    yc = (X0 - ANCHORS) - (X0 - ANCHORS).mean(axis=0)
    qc = Q0 - Q0.mean(axis=0)
    p_mat = gains.certificate
    v0 = 0.0
    for i in range(3):
        z = np.concatenate([yc[i], qc[i]])
        big = np.kron(p_mat, np.eye(2))
        v0 += 0.5 * z @ big @ z
    expected = v0 + 3 * 100 / (8 * 1.5 * (gains.decay_limit - 1.0))
    assert bs.envelope_gain == pytest.approx(expected, rel=1e-12)


def test_double_bounds_validation():
    gains = et.solve_gains(1.5)
    state = InitialState(x0=X0, q0=Q0)
    with pytest.raises(ValidationError):
        et.compute_bounds_double(TRIANGLE, state, gains, Threshold(10.0, 1.2))
    with pytest.raises(ValidationError):
        et.compute_bounds_double(TRIANGLE, state, gains, Threshold(10.0, 1.0),
                                 split=gains.damping)
    with pytest.raises(ValidationError):
        et.compute_bounds_double(TRIANGLE, InitialState(x0=X0), gains,
                                 Threshold(10.0, 1.0))


def test_certify_passes_on_reference_runs(single_run, double_run,
                                          single_config, double_config):
    for result, config in ((single_run, single_config),
                           (double_run, double_config)):
        report = et.certify_trace(result.trace, result.triggers, result.bounds,
                                  config.formation, config.threshold,
                                  config.mode, config.gains)
        assert report.passed, report.failed_names()


def test_certify_detects_injected_fault(single_run, single_config):
    import copy
    trace = copy.deepcopy(single_run.trace)
    k = int(np.searchsorted(trace.times, 5.0))
    trace.x[k, 0, 0] += 0.5
    report = et.certify_trace(trace, single_run.triggers, single_run.bounds,
                              single_config.formation, single_config.threshold,
                              "single")
    assert not report.passed
    assert "envelope" in report.failed_names()
    envelope = next(c for c in report.checks if c.name == "envelope")
    assert f"{trace.times[k]:.6g}" in envelope.detail


def test_replay_check_flags_truncated_trace(single_run, single_config):
    import copy
    trace = copy.deepcopy(single_run.trace)
    cut = trace.times.size // 2
    trace.times = trace.times[:cut]
    trace.x = trace.x[:cut]
    trace.error_norms = trace.error_norms[:cut]
    trace.thresholds = trace.thresholds[:cut]
    trace.edge_dist = trace.edge_dist[:cut]
    trace.edge_offset = trace.edge_offset[:cut]
    triggers = [r for r in single_run.triggers if r.time <= trace.times[-1]]
    report = et.replay_check(trace, triggers, single_config)
    assert not report.passed
    assert "horizon_complete" in report.failed_names()


def test_recomputed_errors_match_engine_records(single_run, single_config,
                                                double_run, double_config):
    for result, config in ((single_run, single_config),
                           (double_run, double_config)):
        err = recompute_error_norms(
            config.formation, result.trace.times, result.trace.x,
            result.trace.q, result.triggers, config.mode, config.gains)
        np.testing.assert_allclose(err, result.trace.error_norms, atol=1e-9)


def test_bounds_serialization(single_run):
    payload = single_run.bounds.to_dict(TRIANGLE.graph)
    assert payload["mode"] == "single"
    assert set(payload["offset_caps"]) == {"1-2", "1-3", "2-3"}
    assert set(payload["min_gaps"]) == {"1", "2", "3"}
