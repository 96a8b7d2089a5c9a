import numpy as np
import pytest
from hypothesis import given, strategies as st

from swgalerkin import (DryStateError, InvalidArgumentError, ProblemConfig, build_scheme,
                        l2_project, make_perturbed_mesh, make_uniform_mesh, mass_matrix,
                        weak_load)
from swgalerkin.problems import (bathy_flat, bathy_gaussian, bathy_periodic, lake_at_rest,
                                 manufactured_periodic, manufactured_subcritical,
                                 manufactured_supercritical)
from swgalerkin.semidiscrete import (BalanceLawScheme, rhs_balance_law, rhs_dirichlet,
                                     rhs_subcritical, rhs_supercritical)
from swgalerkin.time_integration import run


def bumpy(amp=0.2):
    return bathy_gaussian(1.0, amp, 100.0, 0.5)


@pytest.mark.parametrize("r", [2, 3, 4])
@pytest.mark.parametrize("bathy", [bathy_flat(1.0), bumpy()], ids=["flat", "gauss"])
@given(alpha=st.floats(-0.5, 2.0))
def test_still_water_fixed_point(r, bathy, alpha):
    cfg = ProblemConfig("dirichlet_velocity", bathy, eta0=alpha, u0=0.0)
    sc = build_scheme(cfg, make_perturbed_mesh(16, 0, 1, 0.3, 1), r)
    # B-spline coefficients all equal to alpha give eta_h == alpha
    state = sc.state(0.0, np.full(sc.sizes[0], alpha), np.zeros(sc.sizes[1]))
    dy = sc.rhs(0.0, state.y)
    assert np.max(np.abs(dy)) <= 1e-13
    de, du = rhs_dirichlet(sc, state)
    assert np.max(np.abs(de.coefficients)) <= 1e-13


def test_supercritical_rest_deviation():
    flat = ProblemConfig("supercritical", bathy_flat(1.0), eta0=1.0, u0=3.0)
    sc = build_scheme(flat, make_uniform_mesh(20), 2)
    np.testing.assert_array_equal(sc.rhs(0.0, np.zeros(sc.dim)), 0.0)

    cfg = ProblemConfig("supercritical", bumpy(), eta0=1.0, u0=3.0)
    sc = build_scheme(cfg, make_uniform_mesh(20), 2)
    de, du = rhs_supercritical(sc, sc.state(0.0, np.zeros(sc.sizes[0]), np.zeros(sc.sizes[1])))
    V = sc.spaces[0]
    expect = -mass_matrix(V, sc.rule).solve(
        weak_load(V, lambda x: 3.0 * cfg.bathymetry.dbeta(x), sc.rule))
    np.testing.assert_allclose(de.coefficients, expect, atol=1e-13)
    assert np.max(np.abs(expect)) > 1e-3
    np.testing.assert_array_equal(du.coefficients, 0.0)


def test_subcritical_rest():
    cfg = ProblemConfig("subcritical", bathy_flat(1.0), eta0=1.0, u0=0.5)
    sc = build_scheme(cfg, make_uniform_mesh(20), 2)
    state = sc.initial_state()
    np.testing.assert_allclose(state.y, 0.0, atol=1e-15)
    dv, dw = rhs_subcritical(sc, state)
    assert np.max(np.abs(dv.coefficients)) == 0.0 and np.max(np.abs(dw.coefficients)) == 0.0
    H, u, eta = sc.recover_physical(state.y)
    x = np.linspace(0, 1, 9)
    np.testing.assert_allclose(H(x), cfg.H0, rtol=1e-15)
    np.testing.assert_allclose(u(x), cfg.u0, rtol=1e-15)
    np.testing.assert_allclose(eta(x), cfg.eta0, rtol=1e-15)


@given(H=st.floats(0.05, 10.0), u=st.floats(-2.0, 2.0), g=st.sampled_from([1.0, 9.812]))
def test_riemann_roundtrip(H, u, g):
    cfg = ProblemConfig("subcritical", bathy_flat(1.0), eta0=1.0, u0=0.3, g=g)
    sc = build_scheme(cfg, make_uniform_mesh(4), 2)
    v, w = sc.to_riemann(np.array([H]), np.array([u]))
    H2, u2 = sc.from_riemann(v, w)
    assert H2[0] == pytest.approx(H, rel=1e-12)
    assert u2[0] == pytest.approx(u, abs=1e-12 * (1 + abs(u)))


def test_characteristic_boundaries_homogeneous():
    rng = np.random.default_rng(4)
    sup = build_scheme(manufactured_supercritical(), make_uniform_mesh(12), 3)
    y = rng.normal(size=sup.dim)
    for field in sup.state(0.0, *sup.split(y)).fields:
        assert field(0.0) == 0.0
    sub = build_scheme(manufactured_subcritical(), make_uniform_mesh(12), 3)
    y = rng.normal(size=sub.dim)
    v, w = sub.state(0.0, *sub.split(y)).fields
    assert v(0.0) == 0.0 and w(1.0) == 0.0
    # recovered velocity carries the sum of both characteristic fields
    H, u, _ = sub.recover_physical(y)
    x = np.linspace(0, 1, 13)
    np.testing.assert_allclose(u(x), v(x) + w(x) + sub.cfg.u0, atol=1e-13)


def test_mirror_symmetry():
    cfg = ProblemConfig("dirichlet_velocity", bumpy(0.1), eta0=1.0, u0=0.0,
                        eta_init=lambda x: 1.0 + 0.1 * np.cos(2 * np.pi * (x - 0.5)),
                        u_init=lambda x: 0.2 * np.sin(2 * np.pi * (x - 0.5)))
    sc = build_scheme(cfg, make_uniform_mesh(32), 4)
    de, du = sc.state(0.0, *sc.split(sc.rhs(0.0, sc.initial_state().y))).fields
    x = np.linspace(0.0, 0.5, 41)
    np.testing.assert_allclose(de(x), de(1 - x), atol=1e-11)
    np.testing.assert_allclose(du(x), -du(1 - x), atol=1e-11)


@pytest.mark.parametrize("r,s", [(2, 2), (3, 3), (4, 5), (5, 6), (6, 8)])
def test_discrete_lake_at_rest(r, s):
    cfg = lake_at_rest()
    sc = build_scheme(cfg, make_uniform_mesh(50), r, s=s, source_mode="projected")
    state = sc.initial_state()
    np.testing.assert_allclose(sc.split(state.y)[0], sc.beta_h.coefficients, atol=1e-15)
    dd, dq = rhs_balance_law(sc, state)
    assert np.max(np.abs(dd.coefficients)) <= 1e-12
    assert np.max(np.abs(dq.coefficients)) <= 1e-12


def test_lake_at_rest_underintegrated_is_not_balanced():
    cfg = lake_at_rest()
    sc = build_scheme(cfg, make_uniform_mesh(50), 4, s=3)
    assert np.max(np.abs(sc.rhs(0.0, sc.initial_state().y))) > 1e-8
    analytic = build_scheme(cfg, make_uniform_mesh(50), 4, s=5, source_mode="analytic")
    assert np.max(np.abs(analytic.rhs(0.0, analytic.initial_state().y))) > 1e-6


@pytest.mark.parametrize("flux_form", ["weak", "pointwise"])
@given(seed=st.integers(0, 10**4))
def test_periodic_mass_conservation(flux_form, seed):
    rng = np.random.default_rng(seed)
    a, k = rng.uniform(0.02, 0.1), int(rng.integers(1, 4))
    cfg = ProblemConfig("periodic", bathy_periodic(1.0, 0.05),
                        eta_init=lambda x: a * np.sin(2 * np.pi * k * x),
                        u_init=lambda x: 0.1 + a * np.cos(2 * np.pi * x))
    mesh = make_perturbed_mesh(24, 0, 1, 0.3, seed)
    res = run(cfg, mesh, r=4, ratio=0.1, T=0.2, flux_form=flux_form)
    sc = res.scheme
    m0, m1 = sc.total_mass(res.initial.y), sc.total_mass(res.final.y)
    assert abs(m1 - m0) <= 1e-11 * m0


def test_balance_law_options_validated():
    cfg = lake_at_rest()
    mesh = make_uniform_mesh(10)
    for bad in (dict(source_mode="exact"), dict(approx="spline"), dict(flux_form="strong")):
        with pytest.raises(InvalidArgumentError):
            BalanceLawScheme(cfg, mesh, 4, **bad)


def test_dry_state_raises():
    sc = build_scheme(lake_at_rest(), make_uniform_mesh(10), 2)
    y = sc.initial_state().y.copy()
    y[: sc.sizes[0]] = -1.0
    with pytest.raises(DryStateError):
        sc.rhs(0.0, y)


def test_scheme_rejects_mismatch():
    with pytest.raises(InvalidArgumentError):
        BalanceLawScheme(manufactured_supercritical(), make_uniform_mesh(4))
    with pytest.raises(InvalidArgumentError):
        build_scheme(lake_at_rest(), make_uniform_mesh(4, 0, 2))
    sc = build_scheme(lake_at_rest(), make_uniform_mesh(4))
    with pytest.raises(InvalidArgumentError):
        rhs_supercritical(sc, sc.initial_state())
    with pytest.raises(InvalidArgumentError):
        sc.errors(sc.initial_state().y, 0.0)


@pytest.mark.parametrize("factory,r", [(manufactured_supercritical, 2),
                                       (manufactured_subcritical, 2),
                                       (manufactured_periodic, 4)])
def test_manufactured_semidiscrete_residual_shrinks(factory, r):
    """rhs(P u(t)) - P u_t(t) is O(h^r) for the projected exact solution."""
    cfg = factory()
    t = 0.4
    out = []
    for N in (20, 40):
        sc = build_scheme(cfg, make_uniform_mesh(N), r)
        step = 1e-6
        shifted = cfg.with_(eta_init=lambda x: cfg.manufactured.eta(x, t),
                            u_init=lambda x: cfg.manufactured.u(x, t))
        y = build_scheme(shifted, sc.mesh, r).initial_state().y
        fwd = cfg.with_(eta_init=lambda x: cfg.manufactured.eta(x, t + step),
                        u_init=lambda x: cfg.manufactured.u(x, t + step))
        bwd = cfg.with_(eta_init=lambda x: cfg.manufactured.eta(x, t - step),
                        u_init=lambda x: cfg.manufactured.u(x, t - step))
        yt = (build_scheme(fwd, sc.mesh, r).initial_state().y
              - build_scheme(bwd, sc.mesh, r).initial_state().y) / (2 * step)
        diff = sc.rhs(t, y) - yt
        sq = sc.sq
        parts = sc.split(diff)
        out.append(np.sqrt(sum(c @ q.mass.matvec(c) for c, q in zip(parts, sq))))
    assert out[1] < out[0] / 2 ** (r - 1.5)


def test_errors_vanish_for_exact_data():
    cfg = manufactured_periodic()
    sc = build_scheme(cfg, make_uniform_mesh(40), 4)
    err = sc.errors(sc.initial_state().y, 0.0)
    assert err["eta"] < 1e-5 and err["u"] < 1e-5
    nodal = sc.errors(sc.initial_state().y, 0.0, norm="nodal")
    assert nodal["eta"] < 1e-5
    with pytest.raises(InvalidArgumentError):
        sc.errors(sc.initial_state().y, 0.0, norm="max")
    y = sc.initial_state().y
    np.testing.assert_array_equal(sc.physical_difference(y, y), 0.0)


def test_nodal_weights_uniform():
    sc = build_scheme(lake_at_rest(), make_uniform_mesh(10), 2)
    np.testing.assert_allclose(sc.nodal_weights(), 0.1, rtol=1e-14)


def test_interpolated_initial_state():
    cfg = lake_at_rest()
    mesh = make_uniform_mesh(30)
    sc = build_scheme(cfg, mesh, 4, approx="interpolation")
    d = sc.state(0.0, *sc.split(sc.initial_state().y)).fields[0]
    nodes = mesh.nodes[:-1]
    np.testing.assert_allclose(d(nodes), cfg.bathymetry.beta(nodes), atol=1e-13)
    proj = l2_project(sc.spaces[0], cfg.bathymetry.beta)
    assert np.max(np.abs(proj.coefficients - sc.beta_h.coefficients)) > 1e-8
