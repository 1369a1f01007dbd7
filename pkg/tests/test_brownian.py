"""Kernels, excursion machinery, the excursion measure, PPPs, and loops."""

import math

import numpy as np
import pytest

from restrictionlab.brownian import (
    RadialCapHull,
    boundary_poisson,
    disc_exit_angles,
    excursion_avoidance,
    excursion_hit_measure,
    excursion_hit_measure_negative_axis,
    green_function,
    heat_kernel,
    kernel_value,
    poisson_kernel,
    ppp_avoidance,
    sample_excursion,
    sample_excursion_ppp,
    sample_loop,
    two_point_avoidance_exact,
    winding_number,
)
from restrictionlab.conformal import DiscHull, SlitHull, boundary_derivative
from restrictionlab.loewner import radial_log_capacity_from_polyline

SLOW = pytest.mark.slow


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def test_kernel_pinned_values():
    assert heat_kernel(0, 0, 1.0) == pytest.approx(1 / (2 * math.pi), abs=1e-15)
    assert green_function("disc", 0.0, 0.5) == pytest.approx(math.log(2), abs=1e-14)
    assert poisson_kernel("disc", 0.0, 1.0 + 0j) == pytest.approx(
        1 / (2 * math.pi), abs=1e-15
    )
    assert boundary_poisson("half", 0.0, 2.0) == pytest.approx(
        1 / (4 * math.pi), abs=1e-15
    )
    kv = kernel_value("green", "disc", 0.0, 0.5)
    assert kv.kind == "green" and kv.value == pytest.approx(math.log(2))


def test_green_conformal_invariance_under_moebius():
    # disc automorphism m(z) = (z - a)/(1 - a z), a real
    a = 0.3

    def m(z):
        return (z - a) / (1 - a * z)

    rng = np.random.default_rng(1)
    for _ in range(20):
        z, w = rng.uniform(-0.6, 0.6, 2) + 1j * rng.uniform(-0.6, 0.6, 2)
        assert green_function("disc", m(z), m(w)) == pytest.approx(
            green_function("disc", z, w), rel=1e-10
        )


def test_poisson_kernel_covariance():
    # |m'(w)| H_disc(m z, m w) = H_disc(z, w) for a disc automorphism
    a = 0.25

    def m(z):
        return (z - a) / (1 - a * z)

    def md(z):
        return (1 - a * a) / (1 - a * z) ** 2

    z = 0.2 + 0.3j
    w = complex(np.exp(1j * 1.1))
    lhs = abs(md(w)) * poisson_kernel("disc", m(z), m(w))
    assert lhs == pytest.approx(poisson_kernel("disc", z, w), rel=1e-10)


def test_half_disc_kernel_consistency_via_cayley():
    # H_H(i, 0) = 1/pi matches H_disc(0, 1)/|C'(1)| transported
    assert poisson_kernel("half", 1j, 0.0) == pytest.approx(1 / math.pi, abs=1e-14)


# ---------------------------------------------------------------------------
# excursions
# ---------------------------------------------------------------------------

def test_excursion_sampler_basic_shape():
    exc = sample_excursion(seed=1)
    pts = exc.path.points
    assert abs(pts[0]) < 1e-6
    assert np.all(pts.imag[1:] > 0)
    assert pts.imag[-1] >= 50.0


def test_excursion_two_point_endpoints():
    exc = sample_excursion((-1.0, 1.0), seed=2)
    pts = exc.path.points
    assert abs(pts[0] - (-1.0)) < 1e-6
    assert np.all(pts.imag[1:-1] > 0)
    # ends near the second endpoint as the transported path climbs
    assert abs(pts[-1] - 1.0) < 0.2


def test_excursion_rejects_equal_endpoints():
    with pytest.raises(ValueError):
        sample_excursion((1.0, 1.0), seed=0)


def test_excursion_avoidance_disc_quick():
    mean, se, _ = excursion_avoidance(DiscHull(1.0, 0.5), n=20_000, seed=5)
    assert abs(mean - 0.75) <= 4 * se


def test_excursion_avoidance_conformal_consistency():
    """Avoidance of a disc equals that of its Moebius-image configuration."""
    m1, s1, _ = excursion_avoidance(DiscHull(3.0, 1.0), n=15_000, seed=6, endpoints=(-1.0, 1.0))
    ref = two_point_avoidance_exact(DiscHull(3.0, 1.0).phi(), -1.0, 1.0)
    assert abs(m1 - ref) <= 3.5 * s1


# ---------------------------------------------------------------------------
# excursion measure quadrature
# ---------------------------------------------------------------------------

QUAD_CASES = [
    ((-2.0, -1.0), DiscHull(1.0, 0.3)),
    ((-2.0, -1.0), SlitHull(1.0, 1.0)),
    ((-5.0, -0.5), DiscHull(2.0, 0.7)),
    ((-1.0, -0.2), SlitHull(0.5, 0.4)),
    ((-3.0, -2.0), DiscHull(-1.0, 0.4)),
]


@pytest.mark.parametrize("interval,hull", QUAD_CASES)
def test_quadrature_identity_five_cases(interval, hull):
    quad = excursion_hit_measure(interval, hull)
    oracle = -math.log(two_point_avoidance_exact(hull.phi(), *interval)) / math.pi
    assert quad == pytest.approx(oracle, abs=1e-6)


def test_quadrature_example_value():
    # I=[-2,-1], A=Disc(1,0.3): frozen from the closed-form oracle
    quad = excursion_hit_measure((-2.0, -1.0), DiscHull(1.0, 0.3))
    assert quad == pytest.approx(8.2125464e-4, abs=1e-9)


def test_quadrature_far_hull_vanishes():
    assert excursion_hit_measure((-2.0, -1.0), DiscHull(100.0, 0.1)) < 1e-6


def test_quadrature_rejects_overlap():
    with pytest.raises(ValueError):
        excursion_hit_measure((-1.0, 2.0), DiscHull(1.0, 0.3))


def test_negative_axis_measure_matches_phi0():
    for hull in (DiscHull(1.0, 0.5), SlitHull(1.0, 1.0)):
        m = excursion_hit_measure_negative_axis(hull)
        ref = -math.log(boundary_derivative(hull.phi(), 0.0)) / math.pi
        assert m == pytest.approx(ref, abs=1e-9)


def test_eps2_ratio_tall_slit_matches_stated_constant():
    """value/eps^2 converges to a2^2/(pi a1^2) when the third Taylor
    coefficient is negligible (tall slit)."""
    hull = SlitHull(1.0, 20.0)
    ch = hull.phi()
    _, d1, d2, _ = ch.derivs123(0.0)
    stated = (d2.real / 2) ** 2 / (math.pi * d1.real**2)
    eps = [1e-2, 5e-3, 2.5e-3]
    vals = [excursion_hit_measure((-e, 0.0), hull, n_nodes=60) / e**2 for e in eps]
    r1 = [2 * vals[i + 1] - vals[i] for i in range(2)]
    rich = (4 * r1[1] - r1[0]) / 3
    assert rich == pytest.approx(stated, rel=0.02)


def test_eps2_ratio_disc_matches_corrected_constant():
    """For a compact hull the limit carries the third-coefficient term:
    value/eps^2 -> (a2^2/a1^2 - a3/a1)/pi."""
    hull = DiscHull(1.0, 0.3)
    ch = hull.phi()
    _, d1, d2, d3 = ch.derivs123(0.0)
    a1, a2, a3 = d1.real, d2.real / 2, d3.real / 6
    corrected = (a2 * a2 / (a1 * a1) - a3 / a1) / math.pi
    eps = [1e-2, 5e-3, 2.5e-3]
    vals = [excursion_hit_measure((-e, 0.0), hull, n_nodes=60) / e**2 for e in eps]
    r1 = [2 * vals[i + 1] - vals[i] for i in range(2)]
    rich = (4 * r1[1] - r1[0]) / 3
    assert rich == pytest.approx(corrected, rel=1e-3)
    # exact small-eps expansion of the two-point avoidance for the disc:
    # ln Pi(-e, 0) = -delta^2 e^2/(x^2-delta^2)^2 + O(e^3)
    exact = 0.3**2 / (1 - 0.09) ** 2 / math.pi
    assert rich == pytest.approx(exact, rel=5e-3)


# ---------------------------------------------------------------------------
# Poisson point processes
# ---------------------------------------------------------------------------

def test_ppp_avoidance_matches_phi_power():
    hull = DiscHull(1.0, 0.5)
    p, se, exact = ppp_avoidance(1.0, hull, n=200_000, seed=7)
    assert exact == pytest.approx(0.75, abs=1e-9)  # quadrature chain
    assert abs(p - exact) <= 3.5 * se


def test_ppp_doubling_beta_squares_avoidance():
    hull = DiscHull(1.0, 0.5)
    _, _, e1 = ppp_avoidance(1.0, hull, n=10, seed=1)
    _, _, e2 = ppp_avoidance(2.0, hull, n=10, seed=1)
    assert e2 == pytest.approx(e1**2, rel=1e-12)


def test_ppp_realization_counts():
    hull = DiscHull(1.0, 0.5)
    real = sample_excursion_ppp(4.0, hull, seed=9)
    assert real.count >= 0
    assert len(real.excursions) == min(real.count, 32)
    assert real.intensity_mass == pytest.approx(
        -4.0 * math.log(0.75), rel=1e-6
    )  # pi*beta*m = -beta*log phi'(0)


def test_ppp_rejects_bad_args():
    with pytest.raises(ValueError):
        ppp_avoidance(0.0, DiscHull(1.0, 0.5), n=10, seed=1)
    with pytest.raises(ValueError):
        ppp_avoidance(1.0, DiscHull(1.0, 0.5), n=0, seed=1)


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------

def test_loop_closure_and_winding():
    loop = sample_loop(0.3 + 0.1j, 1.0, seed=3)
    pts = loop.path.points
    assert abs(pts[0] - pts[-1]) < 1e-12
    w = winding_number(pts, about=0.3 + 0.1j)
    assert isinstance(w, int)


def test_winding_number_exact_circle():
    th = np.linspace(0, 2 * math.pi, 101)
    circle = 0.5 * np.exp(1j * th)
    assert winding_number(circle, 0.0) == 1
    assert winding_number(circle[::-1], 0.0) == -1
    assert winding_number(circle + 2.0, 0.0) == 0


def test_loop_rejects_bad_duration():
    with pytest.raises(ValueError):
        sample_loop(0.0, -1.0, seed=0)


def test_cap_hull_membership():
    cap = RadialCapHull(2.0, 0.4, 0.5)
    assert bool(cap.contains(np.array([0.9 * np.exp(2.0j)]))[0])
    assert not bool(cap.contains(np.array([0.3 * np.exp(2.0j)]))[0])
    assert not bool(cap.contains(np.array([0.9 + 0j]))[0])
    pts = cap.polyline(65)
    assert np.all(np.isfinite(pts))
    assert abs(abs(pts[0]) - 1.0) < 1e-9


@SLOW
def test_loop_soup_rotation_invariance():
    from restrictionlab.brownian import loop_hit_measure

    a, sa = loop_hit_measure(RadialCapHull(2.0, 0.4, 0.5), 60_000, seed=4)
    b, sb = loop_hit_measure(RadialCapHull(4.0, 0.4, 0.5), 60_000, seed=5)
    assert abs(a - b) <= 3 * math.hypot(sa, sb)


@SLOW
def test_harmonic_measure_uniform_exit():
    """Chi-square uniformity over 36 arcs at the 1% level."""
    n = 100_000
    ang = disc_exit_angles(n, seed=11)
    counts, _ = np.histogram(ang, bins=36, range=(-math.pi, math.pi))
    chi2 = float(np.sum((counts - n / 36) ** 2 / (n / 36)))
    # chi-square(35) 1% critical value
    assert chi2 < 57.342
