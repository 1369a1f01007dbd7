"""Exact checks of the exponent algebra against pinned values and relations."""

import math

import numpy as np
import pytest

from restrictionlab.exponents import (
    PacketExponents,
    RhoBetaPair,
    beta_of_rho,
    eta,
    q_of_rho,
    radial_alpha_of_rho,
    rho_bar,
    rho_of_beta,
    u_func,
    xi,
    xi_hat,
    xi_tilde,
)


def test_xi_tilde_pinned_values():
    assert xi_tilde([1.0]) == pytest.approx(1.0, abs=1e-14)
    assert xi_tilde([0.0]) == pytest.approx(0.0, abs=1e-14)
    assert xi_tilde([1.0, 1.0]) == pytest.approx(10.0 / 3.0, abs=1e-13)


def test_xi_pinned_values():
    assert xi([5.0 / 8.0]) == pytest.approx(5.0 / 48.0, abs=1e-14)
    assert xi([1.0]) == pytest.approx(0.25, abs=1e-14)
    assert xi([1.0, 1.0]) == pytest.approx(1.25, abs=1e-13)


def test_u_pinned_values():
    assert u_func(1.0) == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-14)
    assert u_func(0.0) == 0.0


def test_eta_composition_example():
    assert eta(xi_tilde([1.0, 1.0])) == pytest.approx(xi([1.0, 1.0]), abs=1e-13)


def test_xi_hat_pinned_values():
    for beta in (0.3, 5.0 / 8.0, 1.0, 2.7):
        assert xi_hat([beta]) == pytest.approx(0.0, abs=1e-12)
    assert xi_hat([1.0, 1.0]) == pytest.approx(4.0 / 3.0, abs=1e-13)
    assert xi_hat([5.0 / 8.0, 5.0 / 8.0]) == pytest.approx(0.75, abs=1e-13)


def test_rho_beta_pinned_values():
    assert rho_of_beta(5.0 / 8.0) == pytest.approx(0.0, abs=1e-14)
    assert rho_of_beta(1.0) == pytest.approx(2.0 / 3.0, abs=1e-14)
    assert beta_of_rho(2.0) == pytest.approx(2.0, abs=1e-14)
    assert beta_of_rho(2.0 / 3.0) == pytest.approx(1.0, abs=1e-14)


def test_radial_alpha_pinned_values():
    assert radial_alpha_of_rho(0.0) == pytest.approx(5.0 / 48.0, abs=1e-15)
    assert radial_alpha_of_rho(2.0 / 3.0) == pytest.approx(0.25, abs=1e-14)
    # boundary of the domain, accepted as a limit
    assert radial_alpha_of_rho(-2.0) == pytest.approx(5.0 / 48.0 - 3.0 / 16.0, abs=1e-15)


def test_domain_errors():
    with pytest.raises(ValueError):
        xi_tilde([])
    with pytest.raises(ValueError):
        xi_tilde([1.0, -0.1])
    with pytest.raises(ValueError):
        u_func(-1e-9)
    with pytest.raises(ValueError):
        eta(-1.0)
    with pytest.raises(ValueError):
        rho_of_beta(0.0)
    with pytest.raises(ValueError):
        beta_of_rho(-2.0)
    with pytest.raises(ValueError):
        radial_alpha_of_rho(-2.0 - 1e-12)
    with pytest.raises(ValueError):
        PacketExponents(())


def _random_packets(rng, kmax=5, lo=0.1, hi=5.0):
    k = int(rng.integers(1, kmax + 1))
    return list(rng.uniform(lo, hi, size=k))


def test_cascade_relation_random_packets():
    rng = np.random.default_rng(20260810)
    for _ in range(300):
        vals = _random_packets(rng, kmax=6)
        if len(vals) < 2:
            continue
        j = int(rng.integers(1, len(vals)))
        collapsed = vals[:j] + [xi_tilde(vals[j:])]
        assert xi_tilde(collapsed) == pytest.approx(xi_tilde(vals), abs=1e-10)
        collapsed_whole = vals[:j] + [xi_tilde(vals[j:])]
        assert xi(collapsed_whole) == pytest.approx(xi(vals), abs=1e-10)


def test_commutation_relation_random_packets():
    rng = np.random.default_rng(7)
    for _ in range(200):
        vals = _random_packets(rng, kmax=5)
        perm = list(rng.permutation(vals))
        assert xi_tilde(perm) == pytest.approx(xi_tilde(vals), abs=1e-11)
        assert xi(perm) == pytest.approx(xi(vals), abs=1e-11)


def test_u_additivity_random_packets():
    rng = np.random.default_rng(11)
    for _ in range(300):
        vals = _random_packets(rng)
        assert u_func(xi_tilde(vals)) == pytest.approx(
            sum(u_func(v) for v in vals), abs=1e-10
        )


def test_eta_composition_random_packets():
    rng = np.random.default_rng(13)
    for _ in range(300):
        vals = _random_packets(rng)
        assert xi(vals) == pytest.approx(eta(xi_tilde(vals)), abs=1e-10)


@pytest.mark.parametrize("n", range(1, 9))
def test_n_packet_closed_forms(n):
    assert xi_tilde([1.0] * n) == pytest.approx(n * (2 * n + 1) / 3.0, abs=1e-12)
    assert xi([1.0] * n) == pytest.approx((4 * n * n - 1) / 12.0, abs=1e-12)


def test_rho_beta_round_trip():
    rng = np.random.default_rng(17)
    rhos = rng.uniform(-2.0 + 1e-6, 10.0, size=500)
    for rho in rhos:
        assert rho_of_beta(beta_of_rho(rho)) == pytest.approx(rho, abs=1e-12)
    betas = rng.uniform(1e-4, 20.0, size=500)
    for beta in betas:
        assert beta_of_rho(rho_of_beta(beta)) == pytest.approx(beta, abs=1e-12)


def test_alpha_equals_xi_of_beta():
    rng = np.random.default_rng(19)
    for rho in rng.uniform(-2.0 + 1e-6, 8.0, size=400):
        assert radial_alpha_of_rho(rho) == pytest.approx(
            xi([beta_of_rho(rho)]), abs=1e-12
        )


def test_consistency_triple():
    """Cross-relations tying rho_bar, q, and the packet exponents together."""
    rng = np.random.default_rng(23)
    for _ in range(300):
        beta1 = float(rng.uniform(0.1, 5.0))
        rho = float(rng.uniform(-1.9, 6.0))
        beta2 = beta_of_rho(rho)
        rb = rho_bar(beta1)
        # half-plane form
        assert (3.0 / 16.0) * rb * (rho + 2.0) == pytest.approx(
            xi_hat([beta1, beta2]), abs=1e-10
        )
        # whole-plane form
        q = q_of_rho(rho)
        q_bar = 3.0 * (rb + rho) * (rb + rho + 4.0) / 64.0
        alpha = xi([beta1])
        assert q_bar - q - alpha == pytest.approx(
            xi([beta1, beta2]) - xi([beta1]) - xi([beta2]), abs=1e-10
        )


def test_rho_bar_inverts_packet_form():
    rng = np.random.default_rng(29)
    for beta in rng.uniform(0.05, 8.0, size=200):
        rb = rho_bar(beta)
        assert rb * (3.0 * rb + 4.0) / 32.0 == pytest.approx(beta, abs=1e-12)


def test_pair_constructors_consistent():
    p = RhoBetaPair.from_beta(1.0)
    assert p.rho == pytest.approx(2.0 / 3.0, abs=1e-14)
    assert p.alpha == pytest.approx(0.25, abs=1e-14)
    q = RhoBetaPair.from_rho(0.0)
    assert q.beta == pytest.approx(5.0 / 8.0, abs=1e-14)
    assert q.alpha == pytest.approx(5.0 / 48.0, abs=1e-15)
