import numpy as np
import pytest
from hypothesis import given, strategies as st

from geldg.errors import MeshTanglingError
from geldg.mesh import Grid1D, SpeedRule, build_slab, cell_width, dynamic_edge, velocity_rule


def const(c):
    return lambda x, t: np.full_like(np.asarray(x, dtype=float), c)


def test_grid_invariants():
    g = Grid1D.uniform(0.0, 2 * np.pi, 10)
    assert g.n == 10
    assert g.x_edges[0] == 0.0 and g.x_edges[-1] == 2 * np.pi
    assert np.all(g.dx > 0)
    with pytest.raises(ValueError):
        Grid1D(np.array([0.0, 1.0, 0.5]))


def test_translation_upstream_edges():
    g = Grid1D.uniform(0.0, 1.0, 8)
    slab = build_slab(g, velocity_rule(const(1.0)), 0.0, 0.1)
    np.testing.assert_allclose(slab.x_star, g.x_edges - 0.1, atol=1e-15)


def test_sin_velocity_speeds():
    g = Grid1D.uniform(0.0, 2 * np.pi, 12)
    slab = build_slab(g, velocity_rule(lambda x, t: np.sin(x)), 0.0, 0.05)
    np.testing.assert_allclose(slab.nu, np.sin(g.x_edges), atol=1e-15)
    np.testing.assert_allclose(slab.alpha, np.sin(g.centers), atol=1e-15)


def test_extension_interval_with_faster_adjoint():
    g = Grid1D.uniform(0.0, 1.0, 5, "inflow")
    dt = 0.02
    slab = build_slab(g, SpeedRule(const(1.0), const(1.5)), 0.0, dt)
    left, right = slab.ext
    # plug-in: x** right = max(x_e, x_e - dt + 1.5 dt) = x_e + 0.5 dt
    np.testing.assert_allclose(right, g.x_edges[1:] + 0.5 * dt, atol=1e-15)
    np.testing.assert_allclose(left, g.x_edges[:-1], atol=1e-15)


def test_dynamic_edge_examples():
    g = Grid1D.uniform(0.0, 3.0, 3, "inflow")
    slab = build_slab(g, velocity_rule(const(2.0)), 0.0, 0.3)
    assert dynamic_edge(slab, 1, 0.3) == pytest.approx(g.x_edges[1])
    assert dynamic_edge(slab, 1, 0.0) == pytest.approx(slab.x_star[1])
    assert dynamic_edge(slab, 1, 0.1) == pytest.approx(g.x_edges[1] - 0.4)
    with pytest.raises(ValueError):
        dynamic_edge(slab, 1, 0.5)


def test_cell_width_examples():
    g = Grid1D.uniform(0.0, 1.0, 4, "inflow")
    slab = build_slab(g, velocity_rule(const(0.7)), 0.0, 0.2)
    assert cell_width(slab, 2, 0.05) == pytest.approx(0.25)
    assert cell_width(slab, 2, 0.2) == pytest.approx(0.25)
    # edge speeds 0 left and 1 right of cell 1
    slab = build_slab(g, SpeedRule(lambda x, t: (x > 0.3).astype(float), const(0.0)), 0.0, 0.2)
    assert cell_width(slab, 1, 0.0) == pytest.approx(0.25 - 0.2)


def test_tangling_is_an_error_naming_the_cell():
    g = Grid1D.uniform(0.0, 1.0, 4, "inflow")
    rule = SpeedRule(lambda x, t: np.where(np.isclose(x, 0.5), -5.0, 0.0), const(0.0))
    with pytest.raises(MeshTanglingError) as info:
        build_slab(g, rule, 0.0, 0.1)
    assert info.value.cell == 2


def test_negative_step_allowed():
    g = Grid1D.uniform(0.0, 1.0, 4)
    slab = build_slab(g, velocity_rule(const(1.0)), 1.0, -0.1)
    np.testing.assert_allclose(slab.x_star, g.x_edges + 0.1)


@given(st.integers(4, 40), st.floats(0.01, 0.9), st.floats(0.0, 3.0))
def test_partition_and_inclusion(n, cfl, t0):
    g = Grid1D.uniform(0.0, 2 * np.pi, n)
    dt = cfl * g.dx[0]
    a = lambda x, t: 1.0 + 0.5 * np.sin(x + t)  # noqa: E731
    slab = build_slab(g, velocity_rule(a), t0, dt)
    assert abs(np.sum(slab.upstream_widths) - 2 * np.pi) <= 1e-12
    left, right = slab.ext
    assert np.all(left <= g.x_edges[:-1]) and np.all(right >= g.x_edges[1:])
    feet_l = slab.x_star[:-1] + slab.alpha * dt
    feet_r = slab.x_star[1:] + slab.alpha * dt
    assert np.all((feet_l >= left - 1e-14) & (feet_r <= right + 1e-14))


@given(st.floats(-3, 3), st.floats(1e-3, 0.5))
def test_constant_speed_consistency(c, dt):
    g = Grid1D.uniform(-1.0, 1.0, 10)
    slab = build_slab(g, velocity_rule(const(c)), 0.0, dt)
    assert np.array_equal(slab.x_star, g.x_edges - c * dt)
