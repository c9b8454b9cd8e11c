"""Atom approximations, zooms, distances and grid densities."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sceneryflow.measure import (
    AtomicMeasure,
    DepthError,
    ZeroMassError,
    approx_measure,
    build_reference_nu,
    measure_distance,
    push_forward,
    render_grid,
    sample_measure,
    save_measure,
    load_measure,
    tv_grid,
    weighted_frame_measure,
    zeta_density,
    zoom,
)
from sceneryflow.neighbourhood import (
    explore_automaton,
    maximal_system,
)


def test_approx_depth1_dyadic(dyadic):
    m = approx_measure(dyadic, 1)
    assert m.size == 2
    assert np.allclose(sorted(m.weights), [0.5, 0.5])
    assert np.allclose(m.points[:, 0], [0.0, 0.375])


@pytest.mark.parametrize("depth", [1, 4, 9])
def test_approx_mass_one(golden_bc, depth):
    assert approx_measure(golden_bc, depth).total_mass == pytest.approx(1.0, abs=1e-12)


def test_approx_cap_error(dyadic):
    with pytest.raises(DepthError):
        approx_measure(dyadic, 40)


def test_sample_measure_deterministic(golden_bc):
    a = sample_measure(golden_bc, 100, 12, seed=3)
    b = sample_measure(golden_bc, 100, 12, seed=3)
    assert np.array_equal(a.points, b.points)


def test_depth_refinement_w1_bound(dyadic):
    # coupling: refining one level moves mass at most rho_max^n * diam
    diam = 2 * float(dyadic.cover_root.radius)
    for n in (3, 5, 7):
        m1 = approx_measure(dyadic, n)
        m2 = approx_measure(dyadic, n + 1)
        d = measure_distance("w1", m1, m2)
        assert d <= dyadic.rho_max ** n * diam + 1e-12


def test_push_forward_identity_and_mass(golden_bc):
    m = approx_measure(golden_bc, 6)
    ident = push_forward((1.0, np.zeros(1)), m)
    assert np.allclose(ident.points, m.points)
    moved = push_forward(golden_bc.maps[1], m)
    assert moved.total_mass == pytest.approx(m.total_mass)


def test_push_forward_branch_identity(dyadic):
    # phi_1-image of mu_n equals the phi_1 branch of mu_{n+1} reweighted:
    # branch atoms occupy [0, 3/8), the phi_2 branch [3/8, 3/4], so the
    # sorted lower half of the finer cloud is exactly the branch
    n = 5
    branch = push_forward(dyadic.maps[0], approx_measure(dyadic, n))
    finer = approx_measure(dyadic, n + 1)
    half_pts = finer.points[: 2 ** n, 0]
    half_w = finer.weights[: 2 ** n]
    assert np.allclose(np.sort(half_pts), np.sort(branch.points[:, 0]))
    assert np.allclose(half_w, branch.weights * 0.5)


def test_reference_nu_mass_and_domination(dyadic):
    report = explore_automaton(dyadic, 1000, 50)
    _, n0 = maximal_system(dyadic, report)
    nu = build_reference_nu(dyadic, n0.maps, depth=8)
    assert nu.total_mass == pytest.approx(len(n0), abs=1e-9)
    # nu restricted to B(0,1) dominates mu atom-by-atom
    mu = approx_measure(dyadic, 8)
    inside = mu.restrict_ball([0.0], 1.0)
    nu_pts = {round(x, 12) for x in nu.points[:, 0]}
    assert all(round(x, 12) in nu_pts for x in inside.points[:, 0])


def test_zoom_identity_at_origin(dyadic):
    m = approx_measure(dyadic, 10)
    z = zoom(m, [0.0], 0.0)
    assert z.is_normalized()
    assert np.all(np.abs(z.points) <= 1.0 + 1e-12)


def test_zoom_semigroup(dyadic):
    m = approx_measure(dyadic, 16)
    s, t = 0.7, 0.9
    inner = zoom(m, [0.1], s)
    twice = zoom(inner, [0.0], t)
    once = zoom(m, [0.1], s + t)
    assert measure_distance("w1", twice, once) <= 1e-9


def test_zoom_self_similar_fixed_point(dyadic):
    # at the left fixed point the scenery is log(2)-periodic once the
    # window sits inside the first cylinder (e^-t <= 3/8)
    m = approx_measure(dyadic, 20)
    t = 1.1
    base = zoom(m, [0.0], t)
    shifted = zoom(m, [0.0], t + math.log(2.0))
    assert measure_distance("w1", base, shifted) <= 2e-5


def test_zoom_depth_policy(dyadic):
    m = approx_measure(dyadic, 6)
    with pytest.raises(DepthError):
        zoom(m, [0.0], 8.0)


def test_zoom_zero_mass(dyadic):
    m = approx_measure(dyadic, 12)
    with pytest.raises(ZeroMassError):
        zoom(m, [50.0], 2.0)


def test_w1_point_masses():
    d0 = AtomicMeasure(np.array([[0.0]]), np.array([1.0]))
    d1 = AtomicMeasure(np.array([[0.5]]), np.array([1.0]))
    assert measure_distance("w1", d0, d1) == pytest.approx(0.5)
    assert measure_distance("w1", d0, d0) == 0.0


def test_w1_requires_normalized(dyadic):
    m = approx_measure(dyadic, 4)
    with pytest.raises(ValueError):
        measure_distance("w1", m, m.scaled(2.0))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=1, max_size=8),
       st.lists(st.floats(-1, 1), min_size=1, max_size=8),
       st.lists(st.floats(-1, 1), min_size=1, max_size=8))
def test_w1_metric_axioms(xs, ys, zs):
    def uniform(points):
        return AtomicMeasure(np.array(points)[:, None],
                             np.full(len(points), 1.0 / len(points)))
    a, b, c = uniform(xs), uniform(ys), uniform(zs)
    dab = measure_distance("w1", a, b)
    dba = measure_distance("w1", b, a)
    dac = measure_distance("w1", a, c)
    dcb = measure_distance("w1", c, b)
    assert dab == pytest.approx(dba, abs=1e-12)
    assert dab <= dac + dcb + 1e-9
    assert measure_distance("w1", a, a) <= 1e-12


def test_tv_grid_identical_and_disjoint(dyadic):
    m = approx_measure(dyadic, 8)
    z = zoom(m, [0.0], 0.0)
    assert tv_grid(z, z, 32) == 0.0
    left = AtomicMeasure(np.array([[-0.5]]), np.array([1.0]))
    right = AtomicMeasure(np.array([[0.5]]), np.array([1.0]))
    assert tv_grid(left, right, 32) == pytest.approx(2.0)


def test_render_grid_conserves_mass(golden_bc):
    m = approx_measure(golden_bc, 10)
    g = render_grid(zoom(m, [0.2], 1.0), 32)
    assert g.total == pytest.approx(1.0, abs=1e-9)


def test_zeta_density_strong_separation(strong_separation):
    # single branch: the ratio is identically its coefficient on spt mu
    g = zeta_density(strong_separation,
                     [__import__("sceneryflow.ifs", fromlist=["Similarity"]).Similarity.identity(
                         strong_separation.field, 1)],
                     [0.7], depth=8, resolution=16)
    vals = g.values[~np.isnan(g.values)]
    assert np.allclose(vals, 0.7)


def test_zeta_density_lower_bound(golden_bc):
    from sceneryflow.neighbourhood import (compute_zeta_coefficients, construct_b0,
                                           map_key)
    report = explore_automaton(golden_bc, 1000, 50)
    a0, n0 = maximal_system(golden_bc, report)
    cert = construct_b0(golden_bc, a0, n0)
    zc = compute_zeta_coefficients(golden_bc, cert, n0)
    h = cert.F[0]
    coeffs = [float(c) for c in zc.coefficients[map_key(h)]]
    g = zeta_density(golden_bc, list(n0.maps), coeffs, depth=12, resolution=8)
    c_h = float(zc.lower_bounds[map_key(h)])
    vals = g.values[~np.isnan(g.values)]
    assert vals.size > 0
    assert np.all(vals >= c_h - 0.05)


def test_weighted_frame_consistency(golden_bc):
    report = explore_automaton(golden_bc, 1000, 50)
    _, n0 = maximal_system(golden_bc, report)
    lam = np.linspace(0.1, 0.5, len(n0)).tolist()
    wf = weighted_frame_measure(golden_bc, list(n0.maps), lam, depth=10)
    # total mass = sum over branches of lambda_f * (f mu)(B(0,1))
    mu = approx_measure(golden_bc, 10)
    expected = sum(
        l * push_forward(f, mu).restrict_ball([0.0], 1.0).total_mass
        for f, l in zip(n0.maps, lam))
    assert wf.total_mass == pytest.approx(expected, abs=1e-9)


def test_save_load_roundtrip(tmp_path, dyadic):
    m = approx_measure(dyadic, 6)
    path = tmp_path / "measure.txt"
    save_measure(m, path)
    back = load_measure(path)
    assert np.allclose(back.points, m.points)
    assert np.allclose(back.weights, m.weights)
    assert back.resolution == pytest.approx(m.resolution)


def test_grid_save_load_roundtrip(tmp_path, dyadic):
    from sceneryflow.measure import load_grid, save_grid
    g = render_grid(zoom(approx_measure(dyadic, 10), [0.0], 0.5), 16)
    path = tmp_path / "grid.npz"
    save_grid(g, path)
    back = load_grid(path)
    assert back.resolution == g.resolution
    assert np.array_equal(back.values, g.values)
