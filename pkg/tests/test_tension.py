import numpy as np
import pytest

from etformation import FormationSpec, Graph, MarginError
from etformation.tension import (edge_tension, edge_weight, force_rate_bound,
                                 total_tension, total_tension_double,
                                 weight_slope)

RHO23 = 4.0 - 2.0 * np.sqrt(2.0)


def triangle_spec():
    return FormationSpec(
        graph=Graph(3, ((0, 1), (0, 2), (1, 2))), p=2,
        displacements=np.array([[0.0, -2.0], [-2.0, 0.0], [-2.0, 2.0]]),
        delta=4.0)


def test_edge_tension_values():
    assert edge_tension(2.0, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert edge_tension(3.7, 0.0) == 0.0
    assert edge_tension(2.0, 1.9) == pytest.approx(3.61 / 0.1, rel=1e-9)


def test_edge_weight_values():
    assert edge_weight(2.0, 0.0) == pytest.approx(1.0, rel=1e-12)
    assert edge_weight(2.0, 1.0) == pytest.approx(3.0, rel=1e-12)
    assert edge_weight(RHO23, 0.0) == pytest.approx(2.0 / RHO23, rel=1e-12)
    assert 2.0 / RHO23 == pytest.approx(1.70711, abs=1e-5)


def test_rate_bound_values():
    assert force_rate_bound(2.0, 0.0) == pytest.approx(1.0, rel=1e-12)
    assert weight_slope(2.0, 0.0) == pytest.approx(0.75, rel=1e-12)
    assert force_rate_bound(1.0, 0.0) == pytest.approx(2.0, rel=1e-12)
    assert weight_slope(1.0, 0.0) == pytest.approx(3.0, rel=1e-12)
    assert force_rate_bound(2.0, 0.5) > force_rate_bound(2.0, 0.0)


def test_margin_guard():
    with pytest.raises(MarginError):
        edge_tension(2.0, 2.0)
    with pytest.raises(MarginError):
        edge_weight(2.0, 2.0 - 1e-12)
    with pytest.raises(MarginError):
        weight_slope(2.0, 2.5)
    with pytest.raises(ValueError):
        edge_tension(2.0, -0.1)


@pytest.mark.parametrize("rho", [0.5, 1.0, 2.0, 3.5])
def test_monotone_on_grid(rho):
    grid = np.linspace(0.0, 0.95 * rho, 200)
    for fn in (edge_tension, edge_weight, weight_slope, force_rate_bound):
        vals = fn(rho, grid)
        assert np.all(np.diff(vals) > 0)


def test_weight_slope_is_weight_derivative():
    rng = np.random.default_rng(2)
    for _ in range(50):
        rho = rng.uniform(0.5, 3.0)
        l = rng.uniform(0.05, 0.9) * rho
        h = 1e-6 * rho
        numeric = (edge_weight(rho, l + h) - edge_weight(rho, l - h)) / (2 * h)
        assert numeric == pytest.approx(weight_slope(rho, l), rel=1e-6)


def test_rate_bound_identity():
    # force_rate_bound = edge_weight + l * weight_slope, exactly
    rho = 1.7
    grid = np.linspace(0.0, 0.9 * rho, 100)
    np.testing.assert_allclose(
        force_rate_bound(rho, grid),
        edge_weight(rho, grid) + grid * weight_slope(rho, grid), rtol=1e-12)


def test_total_tension_aligned_is_zero():
    spec = triangle_spec()
    y = np.tile([3.0, -1.0], (3, 1))
    assert total_tension(spec, y) == 0.0


def test_total_tension_single_edge():
    spec = FormationSpec(graph=Graph(2, ((0, 1),)), p=2,
                         displacements=np.array([[0.0, 0.0]]), delta=2.0)
    y = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert total_tension(spec, y) == pytest.approx(1.0, rel=1e-12)


def test_total_tension_initial_state():
    spec = triangle_spec()
    # offsets of the shipped initial positions, evaluated by hand per edge
    x0 = np.array([[2.0, 4.0], [3.5, 7.0], [4.5, 5.5]])
    anchors = np.array([[0.0, 0.0], [0.0, 2.0], [2.0, 0.0]])
    y0 = x0 - anchors
    l12, l13, l23 = np.sqrt(3.25), np.sqrt(2.5), np.sqrt(1.25)
    expected = (3.25 / (2.0 - l12) + 2.5 / (2.0 - l13) + 1.25 / (RHO23 - l23))
    assert total_tension(spec, y0) == pytest.approx(expected, rel=1e-12)


def test_total_tension_gradient_matches_weighted_sum():
    rng = np.random.default_rng(8)
    spec = triangle_spec()
    for _ in range(20):
        y = rng.normal(scale=0.2, size=(3, 2))
        i = int(rng.integers(0, 3))
        analytic = np.zeros(2)
        for j in range(3):
            if j == i:
                continue
            rho = spec.margin(i, j)
            diff = y[i] - y[j]
            analytic += edge_weight(rho, np.linalg.norm(diff)) * diff
        h = 1e-7
        numeric = np.zeros(2)
        for c in range(2):
            yp, ym = y.copy(), y.copy()
            yp[i, c] += h
            ym[i, c] -= h
            numeric[c] = (total_tension(spec, yp) - total_tension(spec, ym)) / (2 * h)
        scale = max(1.0, float(np.abs(analytic).max()))
        np.testing.assert_allclose(numeric, analytic, rtol=1e-6, atol=1e-6 * scale)


def test_edge_tension_below_twice_total():
    rng = np.random.default_rng(12)
    spec = triangle_spec()
    margins = spec.margins()
    for _ in range(30):
        y = rng.normal(scale=0.15, size=(3, 2))
        total = total_tension(spec, y)
        for k, (i, j) in enumerate(spec.graph.edges):
            nu = edge_tension(margins[k], np.linalg.norm(y[i] - y[j]))
            assert nu <= 2 * total + 1e-12


def test_total_tension_double_cases():
    spec = triangle_spec()
    anchors = np.array([[0.0, 0.0], [0.0, 2.0], [2.0, 0.0]])
    x0 = np.array([[2.0, 4.0], [3.5, 7.0], [4.5, 5.5]])
    y0 = x0 - anchors
    k1 = 1.1547005383792515

    assert total_tension_double(spec, y0, np.zeros((3, 2)), k1) == pytest.approx(
        k1 * total_tension(spec, y0), rel=1e-12)

    aligned = np.tile([1.0, 1.0], (3, 1))
    q = np.zeros((3, 2))
    q[0] = [1.0, 0.0]
    assert total_tension_double(spec, aligned, q, k1) == pytest.approx(0.5)

    q0 = np.array([[1.0, 2.0], [-1.0, -2.0], [-1.0, -1.0]])
    expected = k1 * total_tension(spec, y0) + 0.5 * (5.0 + 5.0 + 2.0)
    assert total_tension_double(spec, y0, q0, k1) == pytest.approx(expected, rel=1e-12)
