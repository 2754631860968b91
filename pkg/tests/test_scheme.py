import numpy as np
import pytest
from hypothesis import given, strategies as st

from geldg.errors import ConditioningError, MeshTanglingError
from geldg.field import DGField, error_norms, project, total_mass
from geldg.limiters import Bounds
from geldg.mesh import Grid1D, SpeedRule, build_slab, velocity_rule
from geldg.quadrature import basis_eval
from geldg.scheme import (
    TABLEAUS,
    RKTableau,
    SchemeConfig,
    _solve,
    advance,
    assemble_mass,
    init_upstream,
    numerical_flux,
    rhs,
    step,
    step_coeffs,
    time_steps,
)

from conftest import composite_gauss

TWO_PI = 2 * np.pi


def const(c):
    return lambda x, t: np.full_like(np.asarray(x, dtype=float), c)


# ---------------------------------------------------------------- tableaus


def test_printed_tableaus():
    rk2, rk3 = TABLEAUS[2], TABLEAUS[3]
    assert rk2.alpha == ((1.0,), (0.5, 0.5)) and rk2.beta == ((1.0,), (0.0, 0.5)) and rk2.d == (0.0, 1.0)
    assert rk3.alpha == ((1.0,), (0.75, 0.25), (1 / 3, 0.0, 2 / 3))
    assert rk3.beta == ((1.0,), (0.0, 0.25), (0.0, 0.0, 2 / 3))
    assert rk3.d == (0.0, 1.0, 0.5)


@pytest.mark.parametrize("order", sorted(TABLEAUS))
def test_tableau_invariants(order):
    tab = TABLEAUS[order]
    assert tab.d[0] == 0.0
    for row in tab.alpha:
        assert sum(row) == pytest.approx(1.0, abs=1e-15)
    assert sum(tab.flux_weights()) == pytest.approx(1.0, abs=1e-14)


def test_flux_weights():
    np.testing.assert_allclose(TABLEAUS[3].flux_weights(), [1 / 6, 1 / 6, 2 / 3], atol=1e-15)
    np.testing.assert_allclose(TABLEAUS[4].flux_weights(), [1 / 6, 1 / 3, 1 / 3, 1 / 6], atol=1e-15)


def test_bad_tableau_rejected():
    with pytest.raises(ValueError):
        RKTableau("bad", ((0.9,),), ((1.0,),), (0.0,))


# ---------------------------------------------------------------- mass matrix


@pytest.mark.parametrize("k", range(4))
def test_mass_at_new_time_is_scaled_identity(k):
    g = Grid1D.uniform(0, TWO_PI, 9)
    slab = build_slab(g, SpeedRule(lambda x, t: 1 + 0.3 * np.sin(x), lambda x, t: 0.8 + np.cos(x)), 0.0, 0.2)
    A = assemble_mass(slab, None, slab.t_np1, k)
    np.testing.assert_allclose(A, g.dx[0] * np.broadcast_to(np.eye(k + 1), A.shape), atol=1e-13)


def test_mass_under_rigid_translation():
    g = Grid1D.uniform(0, 1, 5, "inflow")
    slab = build_slab(g, velocity_rule(const(0.7)), 0.0, 0.1)
    np.testing.assert_allclose(assemble_mass(slab, 2, 0.0, 2), 0.2 * np.eye(3), atol=1e-15)


def _mass_oracle(slab, j, t, k):
    """A[m, l] = int psi~_l psi_m over the dynamic cell by 64-node Gauss."""
    g = slab.grid
    s = t - slab.t_np1
    lo = g.x_edges[j] + s * slab.nu[j]
    hi = g.x_edges[j + 1] + s * slab.nu[j + 1]
    out = np.zeros((k + 1, k + 1))
    for m in range(k + 1):
        for l in range(k + 1):
            f = lambda x: basis_eval(k, l, (x - lo) / (hi - lo) - 0.5) * basis_eval(  # noqa: E731
                k, m, (x - slab.alpha[j] * s - g.centers[j]) / g.dx[j]
            )
            out[m, l] = composite_gauss(f, lo, hi, pieces=1, nodes=64)
    return out


def test_mass_with_faster_adjoint_closed_form():
    dx, dt = 0.2, 0.1
    g = Grid1D.uniform(0, 1.0, 5, "inflow")
    slab = build_slab(g, SpeedRule(const(1.0), const(1.5)), 0.0, dt)
    A = assemble_mass(slab, 2, 0.0, 1)
    # test translate sits (alpha - nu) dt = 0.05 to the right: r_test = r + 0.25
    assert A[1, 0] == pytest.approx(dx * np.sqrt(3) * 2 * (0.5 * dt) / dx, abs=1e-13)
    np.testing.assert_allclose(A, _mass_oracle(slab, 2, 0.0, 1), atol=1e-13)


@given(st.floats(0.0, 1.0), st.integers(0, 3))
def test_mass_matches_quadrature_oracle(frac, k):
    g = Grid1D.uniform(0, TWO_PI, 8)
    slab = build_slab(g, SpeedRule(lambda x, t: 1 + 0.4 * np.sin(x), lambda x, t: 1.2 + 0.3 * np.cos(x)), 0.0, 0.3)
    t = frac * 0.3
    np.testing.assert_allclose(assemble_mass(slab, 3, t, k), _mass_oracle(slab, 3, t, k), atol=1e-13)


def test_conditioning_error():
    A = np.array([[[1.0, 0.0], [0.0, 1e-14]]])
    with pytest.raises(ConditioningError):
        _solve(A, np.ones((1, 2)))


# ---------------------------------------------------------------- upstream init


def test_init_upstream_constant_translation():
    g = Grid1D.uniform(0, TWO_PI, 10)
    slab = build_slab(g, velocity_rule(const(1.3)), 0.0, 0.4)
    U, _ = init_upstream(np.tile([1.0, 0, 0], (10, 1)), slab, 2)
    np.testing.assert_allclose(U, np.tile([1.0, 0, 0], (10, 1)), atol=1e-14)


def test_init_upstream_k0_is_upstream_average():
    g = Grid1D.uniform(0, TWO_PI, 16)
    f = project(np.sin, g, 0)
    slab = build_slab(g, SpeedRule(lambda x, t: 1 + 0.5 * np.sin(x), const(1.0)), 0.0, 0.2)
    U, b = init_upstream(f.coeffs, slab, 0)
    np.testing.assert_allclose(U[:, 0], b[:, 0] / slab.upstream_widths, atol=1e-15)


def _translated_projection(f, shift):
    """Exact L2 projection of x -> f(x - shift), split at the shifted breakpoints."""
    g, k = f.grid, f.k
    out = np.zeros_like(f.coeffs)
    for j in range(g.n):
        lo, hi = g.x_edges[j], g.x_edges[j + 1]
        cuts = np.sort(np.mod(g.x_edges[:-1] + shift - lo, g.length))
        pts = [lo] + [lo + c for c in cuts if 0 < c < hi - lo] + [hi]
        for m in range(k + 1):
            def fm(x, m=m):
                return f.eval(np.mod(x - shift - g.xa, g.length) + g.xa) * basis_eval(k, m, (x - g.centers[j]) / g.dx[j])

            out[j, m] = sum(composite_gauss(fm, a, b, pieces=1, nodes=32) for a, b in zip(pts[:-1], pts[1:])) / g.dx[j]
    return out


def test_init_upstream_equals_projection_of_translate():
    g = Grid1D.uniform(0, TWO_PI, 20)
    f = project(np.sin, g, 2)
    slab = build_slab(g, velocity_rule(const(1.0)), 0.0, 0.3)
    U, _ = init_upstream(f.coeffs, slab, 2)
    np.testing.assert_allclose(U, _translated_projection(f, 0.3), atol=1e-13)


# ---------------------------------------------------------------- flux and rhs


def test_numerical_flux_examples():
    assert numerical_flux(3.0, 3.0, 2.0, 0.5, 1.5) == pytest.approx(1.5 * 3.0)
    assert numerical_flux(1.0, -2.0, 1.0, 1.0, 0.0) == 0.0
    assert numerical_flux(2.0, 0.0, 1.0, 0.0, 1.0) == pytest.approx(2.0)


def test_rhs_vanishes_for_pure_translation():
    g = Grid1D.uniform(0, TWO_PI, 12)
    cfg = SchemeConfig(const(0.8), k=3)
    slab = build_slab(g, cfg.rule, 0.0, 0.2)
    U = project(np.sin, g, 3).coeffs
    for t in (0.0, 0.1, 0.2):
        np.testing.assert_allclose(rhs(U, slab, t, cfg), 0.0, atol=1e-15)


def test_rhs_mean_mode_vanishes_for_constant_state():
    g = Grid1D.uniform(0, TWO_PI, 12)
    cfg = SchemeConfig(const(1.0), k=2, rule=SpeedRule(const(1.0), const(1.5)))
    slab = build_slab(g, cfg.rule, 0.0, 0.1)
    L = rhs(np.tile([1.0, 0, 0], (12, 1)), slab, 0.05, cfg)
    np.testing.assert_allclose(L[:, 0], 0.0, atol=1e-15)


@pytest.mark.parametrize("varying_edges", [False, True])
def test_forward_euler_constant_defect_closed_form(varying_edges):
    """Moment of the quadratic mode after one forward-Euler step of u = 1.

    Per unit of the monomial r^2 - 1/12 (= Psi_2 / 6 sqrt 5) the defect is
    -(dt^2/2dx)[(nu+ - a)^2 + (nu- - a)^2] + (2dt^3/3dx^2)[(nu+ - a)^3 - (nu- - a)^3].
    """
    g = Grid1D.uniform(0, 1, 10)
    dx, dt = 0.1, 0.013
    nu = (lambda x, t: 1 + 0.3 * np.sin(TWO_PI * x)) if varying_edges else const(1.0)
    cfg = SchemeConfig(const(1.0), k=2, rk=1, rule=SpeedRule(nu, const(1.5)))
    slab = build_slab(g, cfg.rule, 0.0, dt)
    U0, b = init_upstream(np.tile([1.0, 0, 0], (10, 1)), slab, 2)
    got = (b + dt * rhs(U0, slab, 0.0, cfg))[:, 2] / (6 * np.sqrt(5))
    p, m, a = slab.nu[1:] - slab.alpha, slab.nu[:-1] - slab.alpha, slab.alpha
    expected = -(dt**2 / (2 * dx)) * (p**2 + m**2) + (2 * dt**3 / (3 * dx**2)) * (p**3 - m**3)
    np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-17)
    assert np.all(np.abs(got) > 0)


# ---------------------------------------------------------------- stepping


@pytest.mark.parametrize("rk", [2, 3, 4])
def test_one_step_is_projection_of_translate(rk):
    g = Grid1D.uniform(0, TWO_PI, 40)
    f = project(np.sin, g, 2)
    out = step(f, SchemeConfig(const(1.0), k=2, rk=rk), 0.2)
    np.testing.assert_allclose(out.coeffs, _translated_projection(f, 0.2), atol=1e-13)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_constant_preserved_when_geometry_matches(k):
    g = Grid1D.uniform(0, TWO_PI, 20)
    f = project(lambda x: np.ones_like(x), g, k)
    out = step(f, SchemeConfig(const(1.0), k=k, rk=4), 0.3)
    assert np.max(np.abs(out.coeffs - f.coeffs)) <= 1e-14


def test_variable_coefficient_reference_value():
    # a = sin x, k=1, RK2, CFL 0.3, N=80, T=1: tabulated L1 3.57e-4
    g = Grid1D.uniform(0, TWO_PI, 80)
    from geldg.problems import varcoef_exact

    out = advance(project(lambda x: np.ones_like(x), g, 1), SchemeConfig(lambda x, t: np.sin(x), k=1, rk=2, max_speed=1.0), 1.0, 0.3)
    l1 = error_norms(out, lambda x: varcoef_exact(x, 1.0), 16)[0]
    assert l1 == pytest.approx(3.57e-4, rel=0.25)


def test_advance_single_step_equals_step():
    g = Grid1D.uniform(0, TWO_PI, 20)
    f = project(np.sin, g, 2)
    cfg = SchemeConfig(lambda x, t: 1 + 0.5 * np.sin(x), k=2, rk=3, max_speed=1.5)
    dt = 0.5 * g.dx[0] / 1.5
    a = advance(f, cfg, dt, 0.5)
    b = step(f, cfg, dt)
    assert np.array_equal(a.coeffs, b.coeffs)


def test_time_steps_clip_last():
    steps = time_steps(1.0, 0.3)
    assert steps[:3] == [0.3, 0.3, 0.3] and sum(steps) == pytest.approx(1.0, abs=1e-15)
    assert len(time_steps(0.9, 0.3)) == 3
    with pytest.raises(ValueError):
        time_steps(0.0, 0.1)


def test_tangling_propagates():
    g = Grid1D.uniform(0, TWO_PI, 20)
    cfg = SchemeConfig(lambda x, t: 4 * np.sin(x), k=1, rk=2)
    with pytest.raises(MeshTanglingError):
        step_coeffs(project(np.sin, g, 1).coeffs, g, cfg, 1.0)


def test_backward_step_inverts_translation():
    g = Grid1D.uniform(0, TWO_PI, 30)
    f = project(np.cos, g, 2)
    cfg = SchemeConfig(const(1.0), k=2, rk=3)
    shift = 2 * g.dx[0]  # whole cells: the remap is lossless
    fwd, _ = step_coeffs(f.coeffs, g, cfg, shift, 0.0)
    back, info = step_coeffs(fwd, g, cfg, -shift, shift)
    assert info.dt == -shift
    np.testing.assert_allclose(back, f.coeffs, atol=1e-12)


def test_backward_step_matches_reversed_velocity():
    g = Grid1D.uniform(0, TWO_PI, 30)
    f = project(np.cos, g, 2)
    a = lambda x, t: 1 + 0.4 * np.sin(x) * np.cos(t)  # noqa: E731
    back, _ = step_coeffs(f.coeffs, g, SchemeConfig(a, k=2, rk=3), -0.1, 0.5)
    fwd, _ = step_coeffs(f.coeffs, g, SchemeConfig(lambda x, s: -a(x, 1.0 - s), k=2, rk=3), 0.1, 0.5)
    np.testing.assert_allclose(back, fwd, atol=1e-14)


LIMITS = ["none", "gel_mpp", "zhang", "pp", "tvb"]


@given(
    st.sampled_from(LIMITS),
    st.integers(1, 3),
    st.sampled_from([2, 3, 4]),
    st.floats(0.1, 0.9),
    st.integers(0, 2**31),
)
def test_mass_conserved_every_step(limiter, k, rk, cfl, seed):
    rng = np.random.default_rng(seed)
    g = Grid1D.uniform(0, TWO_PI, 24)
    amp = rng.uniform(0.1, 0.5, 3)
    u0 = lambda x: 1.1 + amp[0] * np.sin(x) + amp[1] * np.cos(2 * x)  # noqa: E731
    cfg = SchemeConfig(
        lambda x, t: 1 + amp[2] * np.sin(x - t), k=k, rk=rk, limiter=limiter, bounds=Bounds(0.0, 3.0), max_speed=1.5
    )
    drifts = []
    advance(project(u0, g, k), cfg, 0.5, cfl, callback=lambda t, c, info: drifts.append(info.mass_drift))
    mass = abs(total_mass(project(u0, g, k)))
    assert max(drifts) <= 1e-12 * (1 + mass)
