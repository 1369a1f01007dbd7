"""Map primitives: closed forms vs complex-step / finite-eps oracles."""

import math

import numpy as np
import pytest

from restrictionlab.conformal import (
    DiscHull,
    F_kernel,
    G_kernel,
    MapChain,
    Moebius,
    SlitHull,
    VerticalSlit,
    alpha_beta_from_c0_c2,
    boundary_derivative,
    cayley_disc_to_half,
    cayley_half_to_disc,
    commutation_residual,
    complex_step_derivative,
    compose,
    disc_phi_chordal,
    disc_phi_fix_0_i,
    identity_chain,
    lambda_family,
    lambda_family_deriv,
    slit_phi,
)


def test_slit_phi_fixes_zero_and_has_pinned_derivative():
    phi = slit_phi(1.0, 1.0)
    assert abs(phi.apply(0.0)) < 1e-14
    # Phi'(0) = 1/sqrt(2); oracle: complex-step derivative at the boundary
    d_oracle = complex_step_derivative(lambda z: phi.apply(z).item(), 0.0)
    assert boundary_derivative(phi, 0.0) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-12)
    assert boundary_derivative(phi, 0.0) == pytest.approx(d_oracle, abs=1e-12)


def test_slit_capacity():
    assert VerticalSlit(0.0, 1.0).capacity == pytest.approx(0.25, abs=1e-15)


def test_slit_phi_degenerate_height_is_identity():
    phi = slit_phi(1.0, 0.0)
    for z in (0.3 + 0.7j, -2.0 + 0.1j, 5.0j):
        assert phi.apply(z) == pytest.approx(z, abs=1e-12)


def test_slit_phi_asymptotic_identity():
    phi = slit_phi(1.0, 1.0)
    for R in (1e3, 1e5):
        z = R + R * 1j
        assert abs(phi.apply(z) / z - 1.0) < 5.0 / R


def test_disc_phi_chordal_pinned():
    phi = disc_phi_chordal(1.0, 0.5)
    assert abs(phi.apply(0.0)) < 1e-14
    assert boundary_derivative(phi, 0.0) == pytest.approx(0.75, abs=1e-13)
    # capacity of the excised hull
    assert phi.hcap == pytest.approx(0.5**2 / 2.0, abs=1e-15)


def test_disc_phi_chordal_degenerate_eps_is_identity():
    phi = disc_phi_chordal(1.0, 0.0)
    for z in (0.3 + 0.7j, -2.0 + 0.1j):
        assert phi.apply(z) == pytest.approx(z, abs=1e-13)


def test_disc_phi_chordal_maps_circle_to_real_interval():
    phi = disc_phi_chordal(1.0, 0.5)
    arc = DiscHull(1.0, 0.5).boundary_polyline(257)
    img = phi.apply(arc)
    assert np.max(np.abs(img.imag)) < 1e-9


def test_disc_phi_rejects_bad_params():
    with pytest.raises(ValueError):
        disc_phi_chordal(0.0, 0.1)
    with pytest.raises(ValueError):
        disc_phi_chordal(1.0, 1.0)
    with pytest.raises(ValueError):
        slit_phi(0.0, 1.0)


def test_disc_phi_fix_0_i_fixed_points():
    f = disc_phi_fix_0_i(1.0, 0.5)
    assert abs(f.apply(0.0)) < 1e-12
    assert abs(f.apply(1j) - 1j) < 1e-12


@pytest.mark.parametrize("x,y,expected_F,expected_G", [(1.0, 2.0, 5.0, 1.5)])
def test_kernels_match_finite_eps_limits(x, y, expected_F, expected_G):
    assert F_kernel(x, y) == pytest.approx(expected_F, abs=1e-13)
    assert G_kernel(x, y) == pytest.approx(expected_G, abs=1e-13)
    eps = 1e-4
    f = disc_phi_fix_0_i(x, eps)
    val = float(np.real(f.apply(y)))
    der = boundary_derivative(f, y)
    assert (val - y) / eps**2 == pytest.approx(expected_F, abs=1e-4)
    assert (der - 1.0) / eps**2 == pytest.approx(expected_G, abs=1e-4)


def test_F_kernel_pole_isolation():
    # F(x,y) - 1/(y-x) stays finite as y -> x
    x = 1.0
    vals = [F_kernel(x, x + h) - 1.0 / h for h in (1e-2, 1e-4, 1e-6)]
    assert abs(vals[-1] - vals[-2]) < 1e-3


def test_kernel_pole_rejection():
    with pytest.raises(ValueError):
        F_kernel(0.0, 1.0)
    with pytest.raises(ValueError):
        G_kernel(1.0, 1.0)
    with pytest.raises(ValueError):
        lambda_family(0.0, 1.0, 1.0)


def test_lambda_deriv_matches_numeric():
    for x in (-2.0, 0.7, 1.3):
        h = 1e-6
        num = (lambda_family(x + h, 1.0, 2.0) - lambda_family(x - h, 1.0, 2.0)) / (2 * h)
        assert lambda_family_deriv(x, 1.0, 2.0) == pytest.approx(num, rel=1e-6)


@pytest.mark.parametrize(
    "x,y,c0,c2",
    [(1.0, 2.0, 1.0, 0.0), (-1.0, 3.0, 0.0, 1.0), (0.5, -1.7, 2.0, 3.0)],
)
def test_commutation_residual_vanishes(x, y, c0, c2):
    assert abs(commutation_residual(x, y, c0, c2)) < 1e-9


def test_commutation_residual_grid():
    rng = np.random.default_rng(3)
    for _ in range(200):
        x, y = rng.uniform(-3, 3, size=2)
        if abs(x) < 0.1 or abs(y) < 0.1 or abs(x - y) < 0.1:
            continue
        c0, c2 = rng.uniform(0, 4, size=2)
        scale = max(1.0, abs(lambda_family_deriv(y, c0, c2)))
        assert abs(commutation_residual(x, y, c0, c2)) < 1e-9 * scale


def test_alpha_beta_from_coefficients():
    assert alpha_beta_from_c0_c2(2.0, 0.0) == pytest.approx((0.5, 1.0), abs=1e-15)


def test_identity_chain_derivative():
    chain = identity_chain()
    for z in (0.0, 1.0 + 2.0j, -3.0j + 0.5):
        assert chain.deriv(z) == pytest.approx(1.0)


def test_compose_semantics_and_chain_rule():
    f = disc_phi_chordal(1.0, 0.3)
    g = disc_phi_chordal(2.0, 0.3)
    fg = compose(f, g)
    for z in (0.5j, -1.0 + 0.2j, 3.0 + 3.0j):
        assert fg.apply(z) == pytest.approx(f.apply(g.apply(z)).item(), abs=1e-12)
    # chain rule at 0 vs complex-step oracle of the composite
    d = boundary_derivative(fg, 0.0)
    oracle = complex_step_derivative(lambda z: fg.apply(z).item(), 0.0)
    assert d == pytest.approx(oracle, rel=1e-12)
    assert d == pytest.approx(
        float(np.real(f.deriv(g.apply(0.0)) * g.deriv(0.0))), rel=1e-12
    )


def test_composition_associativity():
    a = disc_phi_chordal(1.0, 0.3)
    b = slit_phi(-2.0, 0.5)
    c = disc_phi_chordal(3.0, 0.4)
    rng = np.random.default_rng(5)
    pts = rng.uniform(-2, 2, 16) + 1j * rng.uniform(0.5, 3, 16)
    left = compose(compose(a, b), c).apply(pts)
    right = compose(a, compose(b, c)).apply(pts)
    np.testing.assert_allclose(left, right, atol=1e-12)


def test_derivs123_match_finite_differences():
    chain = compose(disc_phi_chordal(1.0, 0.3), slit_phi(2.0, 0.7))
    x = -0.8
    f0, f1, f2, f3 = chain.derivs123(x)
    h = 2e-3  # large enough that the h^-3 roundoff in d3 stays below truncation
    vals = [float(np.real(chain.apply(x + k * h))) for k in (-2, -1, 0, 1, 2)]
    d1 = (vals[3] - vals[1]) / (2 * h)
    d2 = (vals[3] - 2 * vals[2] + vals[1]) / h**2
    d3 = (vals[4] - 2 * vals[3] + 2 * vals[1] - vals[0]) / (2 * h**3)
    assert float(np.real(f0)) == pytest.approx(vals[2], rel=1e-12)
    assert float(np.real(f1)) == pytest.approx(d1, rel=1e-5)
    assert float(np.real(f2)) == pytest.approx(d2, rel=1e-4)
    assert float(np.real(f3)) == pytest.approx(d3, rel=1e-3)


def test_cayley_round_trip():
    C = cayley_disc_to_half()
    Ci = cayley_half_to_disc()
    assert C.apply(1.0) == pytest.approx(0.0, abs=1e-15)
    assert C.apply(0.0) == pytest.approx(1j, abs=1e-15)
    rng = np.random.default_rng(9)
    r = rng.uniform(0, 0.95, 32)
    th = rng.uniform(0, 2 * np.pi, 32)
    z = r * np.exp(1j * th)
    np.testing.assert_allclose(Ci.apply(C.apply(z)), z, atol=1e-12)
    assert np.all(C.apply(z).imag > 0)


def test_chordal_phi_derivative_bounds():
    # For chordal-normalized Phi_A, Phi'(0) lies in (0, 1]
    rng = np.random.default_rng(13)
    for _ in range(50):
        x = rng.uniform(0.3, 3.0) * rng.choice([-1.0, 1.0])
        eps = rng.uniform(0.05, 0.9) * abs(x)
        d = boundary_derivative(disc_phi_chordal(x, eps), 0.0)
        assert 0.0 < d <= 1.0
        y = rng.uniform(0.1, 3.0)
        d2 = boundary_derivative(slit_phi(x, y), 0.0)
        assert 0.0 < d2 <= 1.0


def test_hull_distance_helpers():
    disc = DiscHull(1.0, 0.5)
    assert disc.distance(1.0 + 0.2j) < 0
    assert disc.distance(1.0 + 1.0j) == pytest.approx(0.5, abs=1e-12)
    assert disc.footprint() == pytest.approx((0.5, 1.5))
    slit = SlitHull(1.0, 1.0)
    assert slit.distance(1.0 + 0.5j) == pytest.approx(0.0, abs=1e-12)
    assert slit.distance(2.0 + 0.0j) == pytest.approx(1.0, abs=1e-12)


def test_moebius_rejects_degenerate():
    with pytest.raises(ValueError):
        Moebius(1, 2, 2, 4)
