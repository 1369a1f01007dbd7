"""Intersection-exponent algebra and parameter conversions.

Closed forms for the half-plane and whole-plane Brownian intersection
exponents of packets, the encoding function U, the disconnection function
eta, and the conversions between the restriction exponent beta, the SLE
force parameter rho, and the radial exponent alpha.

All functions are pure and operate in double precision (the values involve
square roots, so exact rational arithmetic buys nothing).

Note on eta: the displayed disconnection function in the source material,
eta(x) = ((24x+1)^2 - 4)/48, is inconsistent both with the composition
identity xi = eta o xi_tilde and with the single-packet whole-plane
exponent.  We implement eta(x) = ((sqrt(24x+1) - 1)^2 - 4)/48, which makes
all three agree; see the package README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "PacketExponents",
    "RhoBetaPair",
    "xi_tilde",
    "xi",
    "xi_hat",
    "u_func",
    "eta",
    "rho_of_beta",
    "beta_of_rho",
    "rho_bar",
    "q_of_rho",
    "radial_alpha_of_rho",
]


@dataclass(frozen=True)
class PacketExponents:
    """Ordered packet exponents (lambda_1..lambda_k or beta_1..beta_p)."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ValueError("packet list must be nonempty")
        for v in self.values:
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"packet exponents must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class RhoBetaPair:
    """A consistent (rho, beta, alpha) triple for SLE_{8/3}(rho)."""

    rho: float
    beta: float
    alpha: float

    @classmethod
    def from_rho(cls, rho: float) -> "RhoBetaPair":
        return cls(rho=rho, beta=beta_of_rho(rho), alpha=radial_alpha_of_rho(rho))

    @classmethod
    def from_beta(cls, beta: float) -> "RhoBetaPair":
        rho = rho_of_beta(beta)
        return cls(rho=rho, beta=beta, alpha=radial_alpha_of_rho(rho))


def _as_values(packets: PacketExponents | Sequence[float]) -> tuple[float, ...]:
    if isinstance(packets, PacketExponents):
        return packets.values
    return PacketExponents(tuple(float(v) for v in packets)).values


def xi_tilde(packets: PacketExponents | Sequence[float]) -> float:
    """Half-plane intersection exponent of k packets.

    xi_tilde(l_1..l_k) = ((sum_i sqrt(24 l_i + 1) - (k-1))^2 - 1) / 24
    """
    vals = _as_values(packets)
    s = sum(math.sqrt(24.0 * v + 1.0) for v in vals)
    k = len(vals)
    return ((s - (k - 1)) ** 2 - 1.0) / 24.0


def xi(packets: PacketExponents | Sequence[float]) -> float:
    """Whole-plane intersection exponent of k packets.

    xi(m_1..m_k) = ((sum_i sqrt(24 m_i + 1) - k)^2 - 4) / 48
    """
    vals = _as_values(packets)
    s = sum(math.sqrt(24.0 * v + 1.0) for v in vals)
    k = len(vals)
    return ((s - k) ** 2 - 4.0) / 48.0


def xi_hat(packets: PacketExponents | Sequence[float]) -> float:
    """Non-intersection exponent: xi_tilde minus the sum of the packets."""
    vals = _as_values(packets)
    return xi_tilde(vals) - sum(vals)


def u_func(lam: float) -> float:
    """Encoding function U(l) = (sqrt(24 l + 1) - 1) / sqrt(24); additive over packets."""
    if not math.isfinite(lam) or lam < 0:
        raise ValueError(f"u_func requires a finite argument >= 0, got {lam}")
    return (math.sqrt(24.0 * lam + 1.0) - 1.0) / math.sqrt(24.0)


def eta(x: float) -> float:
    """Disconnection function with xi = eta o xi_tilde (see module docstring)."""
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"eta requires a finite argument >= 0, got {x}")
    return ((math.sqrt(24.0 * x + 1.0) - 1.0) ** 2 - 4.0) / 48.0


def rho_of_beta(beta: float) -> float:
    """Force parameter of the SLE_{8/3}(rho) with right-sided exponent beta.

    rho(beta) = (-8 + 2 sqrt(24 beta + 1)) / 3, the inverse of beta_of_rho.
    """
    if not math.isfinite(beta) or beta <= 0:
        raise ValueError(f"rho_of_beta requires beta > 0, got {beta}")
    return (-8.0 + 2.0 * math.sqrt(24.0 * beta + 1.0)) / 3.0


def beta_of_rho(rho: float) -> float:
    """Right-sided restriction exponent of SLE_{8/3}(rho).

    beta(rho) = (3 rho^2 + 16 rho + 20) / 32, spanning (0, inf) for rho > -2.
    """
    if not math.isfinite(rho) or rho <= -2:
        raise ValueError(f"beta_of_rho requires rho > -2, got {rho}")
    return (3.0 * rho * rho + 16.0 * rho + 20.0) / 32.0


def rho_bar(beta: float) -> float:
    """Conjugate parameter rho_bar(beta) = (2/3)(sqrt(24 beta + 1) - 1).

    Satisfies beta = rho_bar (3 rho_bar + 4) / 32.
    """
    if not math.isfinite(beta) or beta <= 0:
        raise ValueError(f"rho_bar requires beta > 0, got {beta}")
    return (2.0 / 3.0) * (math.sqrt(24.0 * beta + 1.0) - 1.0)


def q_of_rho(rho: float) -> float:
    """q(rho) = (3/64) rho (rho + 4), the radial capacity-drift exponent."""
    if not math.isfinite(rho) or rho <= -2:
        raise ValueError(f"q_of_rho requires rho > -2, got {rho}")
    return (3.0 / 64.0) * rho * (rho + 4.0)


def radial_alpha_of_rho(rho: float) -> float:
    """Radial origin exponent alpha(rho) = 5/48 + (3/64) rho (rho + 4).

    Equals xi([beta_of_rho(rho)]); the boundary value rho = -2 is accepted
    as the limit.
    """
    if not math.isfinite(rho) or rho < -2:
        raise ValueError(f"radial_alpha_of_rho requires rho >= -2, got {rho}")
    return 5.0 / 48.0 + (3.0 / 64.0) * rho * (rho + 4.0)
