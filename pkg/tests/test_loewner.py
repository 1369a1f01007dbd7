"""Loewner engine: exact chordal steps, traces, zipper, radial flow."""

import math

import numpy as np
import pytest

from restrictionlab.conformal import (
    DiscHull,
    LoewnerHull,
    PolylineHull,
    SlitHull,
    boundary_derivative,
)
from restrictionlab.loewner import (
    DrivingFunction,
    chordal_flow,
    chordal_step,
    chordal_step_inverse,
    chordal_trace,
    hcap,
    phi_from_hull,
    radial_derivative_at_origin,
    radial_flow,
    radial_trace,
    zipper_chain,
    zipper_driving,
)


def zero_driving(T=1.0, n=11):
    t = np.linspace(0.0, T, n)
    return DrivingFunction(t, np.zeros(n), "chordal")


def disc_polyline(x=1.0, eps=0.5, n=400):
    th = np.linspace(math.pi, 0.0, n) if x > 0 else np.linspace(0.0, math.pi, n)
    pts = x + eps * np.exp(1j * th)
    pts[0] = pts[0].real
    pts[-1] = pts[-1].real
    return pts


# ---------------------------------------------------------------------------
# chordal flow
# ---------------------------------------------------------------------------

def test_flow_zero_driving_closed_form():
    drv = zero_driving()
    res = chordal_flow(drv, 1.0, 1.0)
    assert not res.swallowed
    assert res.value == pytest.approx(math.sqrt(5.0), abs=1e-12)
    # general point: g_t(z) = sqrt(z^2 + 4t)
    z = 0.7 + 1.3j
    res2 = chordal_flow(drv, z, 0.6)
    assert res2.value == pytest.approx(np.sqrt(z * z + 2.4 + 0j), abs=1e-10)


def test_flow_swallows_slit_tip():
    drv = zero_driving(T=1.5, n=301)
    res = chordal_flow(drv, 2.0j, 1.5, swallow_tol=1e-4)
    assert res.swallowed
    # slit capacity y^2/4 puts the tip 2i at t = 1
    assert res.swallow_time == pytest.approx(1.0, abs=0.02)


def test_flow_identity_at_t0():
    drv = zero_driving()
    z = 0.3 + 0.4j
    res = chordal_flow(drv, z, 0.0)
    assert res.value == pytest.approx(z)
    assert not res.swallowed


def test_flow_errors():
    drv = zero_driving(T=1.0)
    with pytest.raises(ValueError):
        chordal_flow(drv, 1.0j, 2.0)
    with pytest.raises(ValueError):
        chordal_flow(drv, complex(np.inf), 0.5)


def test_swallow_monotone():
    drv = zero_driving(T=2.0, n=501)
    first = chordal_flow(drv, 1.0j, 0.5, swallow_tol=1e-3)
    later = chordal_flow(drv, 1.0j, 2.0, swallow_tol=1e-3)
    assert later.swallowed
    if first.swallowed:
        assert later.swallow_time <= 0.5 + 1e-9


def test_step_inverse_round_trip():
    rng = np.random.default_rng(2)
    z = rng.uniform(-2, 2, 64) + 1j * rng.uniform(0.05, 3, 64)
    w, dt = 0.37, 0.11
    back = chordal_step_inverse(chordal_step(z, w, dt), w, dt)
    np.testing.assert_allclose(back, z, atol=1e-10)


def test_capacity_additivity_across_concat():
    rng = np.random.default_rng(4)
    t1 = np.linspace(0, 0.5, 6)
    d1 = DrivingFunction(t1, rng.normal(0, 0.3, 6))
    t2 = np.linspace(0, 0.7, 8)
    d2 = DrivingFunction(t2, rng.normal(0, 0.3, 8))
    cat = d1.concat(d2)
    assert cat.horizon == pytest.approx(1.2)
    z = 0.4 + 1.1j
    g1 = chordal_flow(d1, z, 0.5).value
    g2 = chordal_flow(d2, g1, 0.7).value
    # careful: the concatenated driving continues from d2's own values
    gc = chordal_flow(cat, z, 1.2).value
    assert gc == pytest.approx(g2, abs=1e-9)


def test_chordal_scaling_relation():
    """g^lam_t(z) = g_{lam^2 t}(lam z) / lam for W^lam_t = W_{lam^2 t} / lam."""
    lam = 2.0
    n = 257
    t = np.linspace(0.0, 1.0, n)
    W = 0.8 * np.sin(3.0 * t)  # deterministic driving
    drv = DrivingFunction(t, W)
    t_s = t / lam**2
    drv_s = DrivingFunction(t_s, W / lam)
    z = 0.3 + 0.9j
    lhs = chordal_flow(drv_s, z, 1.0 / lam**2).value
    rhs = chordal_flow(drv, lam * z, 1.0).value / lam
    assert lhs == pytest.approx(rhs, abs=1e-9)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def test_trace_zero_driving_endpoint():
    drv = zero_driving(T=1.0, n=101)
    path = chordal_trace(drv, [1.0])
    assert path.points[-1] == pytest.approx(2.0j, abs=1e-9)


def test_trace_starts_at_origin():
    drv = zero_driving()
    path = chordal_trace(drv, [0.0])
    assert abs(path.points[0]) < 1e-12


def test_trace_empty():
    drv = zero_driving()
    path = chordal_trace(drv, [])
    assert path.points.size == 0


def test_trace_mirror_symmetry():
    n = 101
    t = np.linspace(0, 1, n)
    W = 0.7 * np.sin(5 * t) + 0.2 * t
    ts = np.linspace(0.05, 1.0, 20)
    a = chordal_trace(DrivingFunction(t, W), ts).points
    b = chordal_trace(DrivingFunction(t, -W), ts).points
    np.testing.assert_allclose(b, -np.conj(a), atol=1e-10)


# ---------------------------------------------------------------------------
# hcap and zipper
# ---------------------------------------------------------------------------

def test_hcap_closed_forms():
    assert hcap(SlitHull(0.0, 1.0)) == pytest.approx(0.25, abs=1e-15)
    assert hcap(DiscHull(1.0, 0.5)) == pytest.approx(0.125, abs=1e-15)
    assert hcap(PolylineHull((0.0 + 0j, 1.0 + 0j))) == 0.0


def test_hcap_loewner_hull_is_horizon():
    drv = zero_driving(T=0.7)
    assert hcap(LoewnerHull(drv)) == pytest.approx(0.7)


def test_hcap_polyline_scaling_law():
    rng = np.random.default_rng(7)
    base = np.concatenate(
        [[0.5 + 0j], 0.5 + 0.4j * np.linspace(0.1, 1, 30) + 0.2 * np.sin(np.linspace(0, 3, 30))]
    )
    a = hcap(PolylineHull(tuple(base)))
    for lam in (0.5, 2.0, 3.7):
        a_s = hcap(PolylineHull(tuple(lam * base)))
        assert a_s == pytest.approx(lam**2 * a, abs=1e-8 * max(1, lam**2))


def test_zipper_vertical_segment():
    pts = 2j * np.linspace(0.0, 1.0, 100)
    drv = zipper_driving(pts)
    assert np.max(np.abs(drv.values)) < 1e-12
    assert drv.horizon == pytest.approx(1.0, abs=1e-12)  # telescoping is exact


def test_zipper_degenerate_two_points():
    drv = zipper_driving(np.array([0.3 + 0j, 0.8 + 0j]))
    assert drv.horizon == 0.0


def test_zipper_disc_phi_accuracy():
    chain = zipper_chain(disc_polyline(1.0, 0.5, 400))
    phi0 = float(np.real(chain.deriv(0.0)))
    assert phi0 == pytest.approx(0.75, abs=1e-3)
    assert chain.hcap == pytest.approx(0.125, abs=1e-3)


def test_zipper_round_trip_vertices_exact():
    """trace(zipper(P)) reproduces the vertices of P to float precision."""
    t = np.linspace(0, 1, 60)
    pts = (0.2 * t) + 1j * (1.5 * t + 0.3 * np.sin(4 * t) * t)
    pts[0] = 0.0
    drv = zipper_driving(pts)
    path = chordal_trace(drv, drv.times)
    np.testing.assert_allclose(path.points[1:], pts[1:], atol=1e-9)


def test_zipper_round_trip_hausdorff():
    # three test hulls; error bounded by a grid constant (max vertex spacing)
    hulls = []
    t = np.linspace(0, 1, 120)
    hulls.append((0.3 * t) + 1j * 1.2 * t)
    hulls.append(1.0 + 0.5 * np.exp(1j * np.linspace(np.pi, 0.2, 120)))
    hulls.append((-0.5 - 0.4 * t) + 1j * (t + 0.25 * np.sin(6 * t)))
    for pts in hulls:
        pts = pts.copy()
        pts[0] = complex(pts[0].real, 0.0)
        spacing = np.max(np.abs(np.diff(pts)))
        drv = zipper_driving(pts)
        mid = 0.5 * (drv.times[1:] + drv.times[:-1])
        path = chordal_trace(drv, np.sort(np.concatenate([drv.times, mid])))
        d = np.abs(path.points[:, None] - pts[None, :])
        hausdorff = max(d.min(axis=0).max(), d.min(axis=1).max())
        assert hausdorff <= 3.0 * spacing


def test_zipper_rejects_self_intersection():
    pts = np.array([0.0 + 0j, 0.0 + 1j, 1.0 + 1j, 0.5 + 0.5j, -1.0 + 0.5j])
    pts = pts + 1e-3j * np.arange(5)  # keep interior points off the axis
    pts[0] = 0.0
    with pytest.raises(ValueError):
        zipper_driving(pts)


def test_zipper_rejects_detached_polyline():
    with pytest.raises(ValueError):
        zipper_driving(np.array([0.5j, 1.0 + 0.5j]))


# ---------------------------------------------------------------------------
# phi_from_hull
# ---------------------------------------------------------------------------

def test_phi_from_hull_disc_closed_form():
    phi = phi_from_hull(DiscHull(1.0, 0.5))
    assert boundary_derivative(phi, 0.0) == pytest.approx(0.75, abs=1e-12)


def test_phi_from_hull_polyline_matches_closed_form():
    phi = phi_from_hull(PolylineHull(tuple(disc_polyline(1.0, 0.5, 400))))
    assert boundary_derivative(phi, 0.0) == pytest.approx(0.75, abs=1e-3)
    phi_s = phi_from_hull(SlitHull(1.0, 1.0))
    assert boundary_derivative(phi_s, 0.0) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_phi_from_hull_trivial():
    phi = phi_from_hull(PolylineHull((0.5 + 0j, 1.5 + 0j)))
    z = 0.3 + 0.8j
    assert phi.apply(z) == pytest.approx(z, abs=1e-12)


def test_phi_from_loewner_hull_matches_flow():
    t = np.linspace(0, 0.4, 101)
    drv = DrivingFunction(t, 0.5 * np.sin(3 * t))
    phi = phi_from_hull(LoewnerHull(drv), "chordal-hydrodynamic")
    z = -0.8 + 1.1j
    assert phi.apply(z) == pytest.approx(chordal_flow(drv, z, 0.4).value, abs=1e-12)


# ---------------------------------------------------------------------------
# radial
# ---------------------------------------------------------------------------

def radial_test_driving(T=0.35, n=201, base=0.9 * math.pi):
    t = np.linspace(0.0, T, n)
    return DrivingFunction(t, base + 0.8 * np.sin(2 * t), "radial")


def test_radial_identity_at_t0():
    drv = radial_test_driving()
    z = 0.3 - 0.2j
    assert radial_flow(drv, z, 0.0).value == pytest.approx(z)


def test_radial_derivative_at_origin_exact():
    drv = radial_test_driving(T=1.0)
    assert radial_derivative_at_origin(drv, 1.0) == pytest.approx(math.e, abs=1e-15)
    # numerical cross-check: |g_t(delta)|/delta -> e^t as delta -> 0
    delta = 1e-6
    g = radial_flow(drv, delta + 0j, 1.0).value
    assert abs(g) / delta == pytest.approx(math.e, rel=1e-4)


def test_radial_koebe_sandwich():
    drv = radial_test_driving(T=0.5, n=301)
    for a in (0.2, 0.35, 0.5):
        ts = np.linspace(0.02, a, 40)
        pts = radial_trace(drv, ts).points
        d = np.min(np.abs(pts))
        assert math.exp(-a) / 4.0 - 1e-6 <= d <= math.exp(-a) + 1e-6


def test_radial_trace_self_consistent_with_flow():
    drv = radial_test_driving()
    ts = [0.1, 0.25]
    pts = radial_trace(drv, ts).points
    for z, s in zip(pts, ts):
        res = radial_flow(drv, z, s, swallow_tol=2e-3)
        assert res.swallowed


def test_radial_phi_capacity_consistency():
    drv = radial_test_driving()
    phi = phi_from_hull(LoewnerHull(drv), "radial-fix-0-1", n_vertices=400)
    d0 = complex(phi.deriv(0.0))
    d1 = complex(phi.deriv(1.0))
    assert abs(phi.apply(0.0)) < 1e-12
    assert abs(phi.apply(1.0) - 1.0) < 1e-12
    # |Phi'(0)| = e^{horizon} for a radial Loewner hull
    assert abs(d0) == pytest.approx(math.exp(drv.horizon), rel=2e-4)
    assert abs(d1.imag) < 1e-6
    assert 0.0 < d1.real <= 1.0
    assert abs(d0) >= 1.0
    assert abs(d0) * d1.real**2 <= 1.0 + 1e-12


def test_radial_flow_rejects_outside_points():
    drv = radial_test_driving()
    with pytest.raises(ValueError):
        radial_flow(drv, 1.5 + 0j, 0.1)
