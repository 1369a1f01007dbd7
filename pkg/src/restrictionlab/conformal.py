"""Closed-form conformal map primitives and composable map chains.

The elementary maps are the building blocks of every uniformizer used in
the package: vertical-slit removal, disc excision, Moebius transforms
(including the Cayley map between the disc and the half-plane), and
rotations.  A MapChain composes them with exact derivative tracking via
the chain rule, including second and third derivatives at boundary points
(needed by the excursion-measure quadrature near its diagonal).

Conventions
-----------
* All maps are stored in the "removal" direction: a chain for a hull A
  evaluates the uniformizer from the slit domain onto the reference
  domain (upper half-plane H or unit disc U).
* Square-root branches are chosen so slit maps are asymptotic to the
  identity at infinity, with the branch cut along the removed slit.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

__all__ = [
    "VerticalSlit",
    "DiscExcision",
    "Moebius",
    "Rotation",
    "MapChain",
    "compose",
    "identity_chain",
    "slit_phi",
    "disc_phi_chordal",
    "disc_phi_fix_0_i",
    "moebius_fix_0_i",
    "cayley_disc_to_half",
    "cayley_half_to_disc",
    "F_kernel",
    "G_kernel",
    "lambda_family",
    "lambda_family_deriv",
    "commutation_residual",
    "alpha_beta_from_c0_c2",
    "HullSpec",
    "DiscHull",
    "SlitHull",
    "PolylineHull",
    "LoewnerHull",
    "complex_step_derivative",
]

ArrayLike = Union[complex, float, np.ndarray]


def _sqrt_upper(u: ArrayLike, side: ArrayLike) -> np.ndarray:
    """Square root with image in the closed upper half-plane.

    Real results (boundary points) take the sign of ``side`` so the map is
    asymptotic to the identity on both sides of the slit base.
    """
    u = np.asarray(u, dtype=complex)
    w = np.sqrt(u)
    w = np.where(w.imag < 0.0, -w, w)
    real = np.abs(w.imag) == 0.0
    if np.any(real):
        s = np.where(np.asarray(side).real >= 0.0, 1.0, -1.0)
        w = np.where(real, s * np.abs(w.real), w)
    return w


@dataclass(frozen=True)
class VerticalSlit:
    """Removal map for the vertical slit [x, x+iy]: z -> x + sqrt((z-x)^2 + y^2).

    Hydrodynamically normalized; half-plane capacity y^2/4.
    """

    x: float
    y: float

    def __post_init__(self) -> None:
        if self.y < 0:
            raise ValueError("slit height must be >= 0")

    @property
    def capacity(self) -> float:
        return self.y * self.y / 4.0

    def apply(self, z: ArrayLike) -> np.ndarray:
        d = np.asarray(z, dtype=complex) - self.x
        return self.x + _sqrt_upper(d * d + self.y * self.y, d)

    def deriv(self, z: ArrayLike) -> np.ndarray:
        d = np.asarray(z, dtype=complex) - self.x
        s = _sqrt_upper(d * d + self.y * self.y, d)
        return np.where(s == 0.0, np.inf, d / s)

    def derivs123(self, z: complex) -> tuple[complex, complex, complex, complex]:
        d = complex(z) - self.x
        s = complex(_sqrt_upper(d * d + self.y * self.y, d))
        y2 = self.y * self.y
        return (self.x + s, d / s, y2 / s**3, -3.0 * y2 * d / s**5)


@dataclass(frozen=True)
class DiscExcision:
    """Removal map for U(x, eps) in the closed half-plane: z -> z + eps^2/(z - x).

    Requires eps < |x| so that the origin stays outside the hull.
    Hydrodynamically normalized; half-plane capacity eps^2/2.
    """

    x: float
    eps: float

    def __post_init__(self) -> None:
        if self.x == 0.0:
            raise ValueError("disc excision must not contain the origin (x != 0)")
        if not (0.0 <= self.eps < abs(self.x)):
            raise ValueError("need 0 <= eps < |x|")

    @property
    def capacity(self) -> float:
        return self.eps * self.eps / 2.0

    def apply(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return z + self.eps**2 / (z - self.x)

    def deriv(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return 1.0 - self.eps**2 / (z - self.x) ** 2

    def derivs123(self, z: complex) -> tuple[complex, complex, complex, complex]:
        d = complex(z) - self.x
        e2 = self.eps**2
        return (z + e2 / d, 1.0 - e2 / d**2, 2.0 * e2 / d**3, -6.0 * e2 / d**4)


@dataclass(frozen=True)
class Moebius:
    """z -> (a z + b) / (c z + d); complex coefficients allowed (Cayley maps)."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self) -> None:
        if self.a * self.d - self.b * self.c == 0:
            raise ValueError("degenerate Moebius map (ad - bc = 0)")

    @property
    def capacity(self) -> float:
        return 0.0

    def apply(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = (self.a * z + self.b) / (self.c * z + self.d)
        if self.c != 0:
            out = np.where(np.isinf(z), self.a / self.c, out)
        return out

    def deriv(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        det = self.a * self.d - self.b * self.c
        return det / (self.c * z + self.d) ** 2

    def derivs123(self, z: complex) -> tuple[complex, complex, complex, complex]:
        det = self.a * self.d - self.b * self.c
        den = self.c * z + self.d
        return (
            (self.a * z + self.b) / den,
            det / den**2,
            -2.0 * self.c * det / den**3,
            6.0 * self.c**2 * det / den**4,
        )


@dataclass(frozen=True)
class Rotation:
    """Disc rotation z -> e^{i theta} z."""

    theta: float

    @property
    def capacity(self) -> float:
        return 0.0

    def apply(self, z: ArrayLike) -> np.ndarray:
        return np.asarray(z, dtype=complex) * cmath.exp(1j * self.theta)

    def deriv(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.full_like(z, cmath.exp(1j * self.theta))

    def derivs123(self, z: complex) -> tuple[complex, complex, complex, complex]:
        r = cmath.exp(1j * self.theta)
        return (r * z, r, 0.0, 0.0)


ElementaryMap = Union[VerticalSlit, DiscExcision, Moebius, Rotation]


@dataclass(frozen=True)
class MapChain:
    """Composition of elementary maps, applied left to right.

    ``apply`` evaluates the composite, ``deriv`` the product of elementary
    derivatives along the orbit (the chain rule, tracked analytically).
    """

    maps: tuple[ElementaryMap, ...] = ()
    normalization: str = "chordal-hydrodynamic"

    def apply(self, z: ArrayLike) -> np.ndarray:
        w = np.asarray(z, dtype=complex)
        for m in self.maps:
            w = m.apply(w)
        return w

    def __call__(self, z: ArrayLike) -> np.ndarray:
        return self.apply(z)

    def deriv(self, z: ArrayLike) -> np.ndarray:
        w = np.asarray(z, dtype=complex)
        d = np.ones_like(w)
        for m in self.maps:
            d = d * m.deriv(w)
            w = m.apply(w)
        return d

    def derivs123(self, z: complex) -> tuple[complex, complex, complex, complex]:
        """(f, f', f'', f''') of the composite at a single point (Faa di Bruno)."""
        g0, g1, g2, g3 = complex(z), 1.0 + 0j, 0.0 + 0j, 0.0 + 0j
        for m in self.maps:
            f0, f1, f2, f3 = m.derivs123(g0)
            g0, g1, g2, g3 = (
                f0,
                f1 * g1,
                f2 * g1**2 + f1 * g2,
                f3 * g1**3 + 3.0 * f2 * g1 * g2 + f1 * g3,
            )
        return g0, g1, g2, g3

    @property
    def hcap(self) -> float:
        """Half-plane capacity of a hydrodynamic chain (sum of step capacities)."""
        return sum(m.capacity for m in self.maps)

    def then(self, other: "MapChain") -> "MapChain":
        """Chain applying self first, then other."""
        return MapChain(self.maps + other.maps, other.normalization)


def compose(f: MapChain, g: MapChain) -> MapChain:
    """Chain with apply(compose(f, g), z) == f(g(z))."""
    return MapChain(g.maps + f.maps, f.normalization)


def _map_pair_diff(m: ElementaryMap, gx: np.ndarray, gy: np.ndarray, diff: np.ndarray):
    """Cancellation-free update of f(gx) - f(gy) given gx - gy = diff."""
    if isinstance(m, VerticalSlit):
        dx = gx - m.x
        dy = gy - m.x
        sx = _sqrt_upper(dx * dx + m.y * m.y, dx)
        sy = _sqrt_upper(dy * dy + m.y * m.y, dy)
        return diff * (dx + dy) / (sx + sy)
    if isinstance(m, DiscExcision):
        return diff * (1.0 - m.eps**2 / ((gx - m.x) * (gy - m.x)))
    if isinstance(m, Moebius):
        det = m.a * m.d - m.b * m.c
        return diff * det / ((m.c * gx + m.d) * (m.c * gy + m.d))
    if isinstance(m, Rotation):
        return diff * cmath.exp(1j * m.theta)
    raise TypeError(f"unsupported map {m!r}")


def boundary_pair(chain: MapChain, x: np.ndarray, y: np.ndarray):
    """(f(x), f(y), f(x) - f(y), f'(x), f'(y)) with a stable difference.

    The difference is propagated through each elementary map by an exact
    algebraic identity, avoiding the catastrophic cancellation of
    subtracting nearly equal composite values for close boundary points.
    """
    gx = np.asarray(x, dtype=complex)
    gy = np.asarray(y, dtype=complex)
    diff = gx - gy
    dgx = np.ones_like(gx)
    dgy = np.ones_like(gy)
    for m in chain.maps:
        diff = _map_pair_diff(m, gx, gy, diff)
        dgx = dgx * m.deriv(gx)
        dgy = dgy * m.deriv(gy)
        gx = m.apply(gx)
        gy = m.apply(gy)
    return gx, gy, diff, dgx, dgy


def identity_chain(normalization: str = "chordal-hydrodynamic") -> MapChain:
    return MapChain((), normalization)


def derivative_at(chain: MapChain, z: ArrayLike) -> np.ndarray:
    return chain.deriv(z)


def boundary_derivative(chain: MapChain, x: ArrayLike) -> float:
    """Positive real derivative at a real boundary point of a chordal chain."""
    d = np.asarray(chain.deriv(x))
    if np.any(np.abs(d.imag) > 1e-9 * (1.0 + np.abs(d.real))):
        raise ValueError("boundary derivative is not real; wrong normalization?")
    out = d.real
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Named uniformizers
# ---------------------------------------------------------------------------

def slit_phi(x: float, y: float) -> MapChain:
    """Phi_A for the vertical slit A = [x, x+iy], fixing 0 with slope 1 at infinity."""
    if x == 0.0:
        raise ValueError("slit based at the origin is not an admissible hull")
    slit = VerticalSlit(x, y)
    shift = -complex(slit.apply(0.0))
    return MapChain((slit, Moebius(1, shift, 0, 1)))


def disc_phi_chordal(x: float, eps: float) -> MapChain:
    """Phi_A for A = U(x, eps) in the closed half-plane, fixing 0 and infinity.

    Equals z + eps^2/(z-x) + eps^2/x, with Phi'(0) = 1 - eps^2/x^2.
    """
    exc = DiscExcision(x, eps)
    return MapChain((exc, Moebius(1, eps**2 / x, 0, 1)))


def moebius_fix_0_i(p: complex, q: float) -> Moebius:
    """Moebius self-map of H sending the real point q to 0 and p (interior) to i.

    With a = Re p, b = Im p, c = q this is w -> b (w - c) / (b^2 + (c - a)(w - a)).
    """
    a, b, c = float(np.real(p)), float(np.imag(p)), float(q)
    if b <= 0:
        raise ValueError("interior point must lie in the upper half-plane")
    # numerator b*w - b*c ; denominator (c-a)*w + b^2 - a*(c-a)
    return Moebius(b, -b * c, c - a, b * b - a * (c - a))


def disc_phi_fix_0_i(x: float, eps: float) -> MapChain:
    """Conformal map H \\ U(x, eps) -> H fixing 0 and i."""
    exc = DiscExcision(x, eps)
    p = complex(exc.apply(1j))
    q = float(np.real(exc.apply(0.0)))
    return MapChain((exc, moebius_fix_0_i(p, q)), normalization="fix-0-and-i")


def cayley_disc_to_half() -> Moebius:
    """C: U -> H with C(1) = 0, C(0) = i, C(-1) = infinity; C(z) = i(1-z)/(1+z)."""
    return Moebius(-1j, 1j, 1, 1)


def cayley_half_to_disc() -> Moebius:
    """Inverse Cayley map H -> U, w -> (i - w)/(i + w)."""
    return Moebius(-1, 1j, 1, 1j)


# ---------------------------------------------------------------------------
# Kernels of the radial two-point characterization
# ---------------------------------------------------------------------------

def F_kernel(x: float, y: float) -> float:
    """First-order displacement kernel of the disc-excision map fixing 0 and i.

    F(x, y) = lim (f_{x,eps}(y) - y)/eps^2
            = (1 + x^2 + y^2 + x y) / (x (1 + x^2)) + 1/(y - x).
    """
    if x == 0.0 or y == x:
        raise ValueError("F_kernel pole: need x != 0 and y != x")
    return (1.0 + x * x + y * y + x * y) / (x * (1.0 + x * x)) + 1.0 / (y - x)


def G_kernel(x: float, y: float) -> float:
    """First-order stretch kernel: G(x, y) = (x + 2y)/(x(1+x^2)) - 1/(y-x)^2."""
    if x == 0.0 or y == x:
        raise ValueError("G_kernel pole: need x != 0 and y != x")
    return (x + 2.0 * y) / (x * (1.0 + x * x)) - 1.0 / (y - x) ** 2


def lambda_family(x: float, c0: float, c2: float) -> float:
    """Two-parameter boundary intensity lambda(x) = (c0 + c2 x^2) / (x^2 (1+x^2)^2)."""
    if x == 0.0:
        raise ValueError("lambda_family pole at x = 0")
    if c0 < 0 or c2 < 0:
        raise ValueError("need c0 >= 0 and c2 >= 0")
    return (c0 + c2 * x * x) / (x * x * (1.0 + x * x) ** 2)


def lambda_family_deriv(x: float, c0: float, c2: float) -> float:
    """d/dx of lambda_family, in closed form."""
    if x == 0.0:
        raise ValueError("lambda_family pole at x = 0")
    x2 = x * x
    num = c0 + c2 * x2
    den = x2 * (1.0 + x2) ** 2
    dnum = 2.0 * c2 * x
    dden = 2.0 * x * (1.0 + x2) ** 2 + x2 * 2.0 * (1.0 + x2) * 2.0 * x
    return (dnum * den - num * dden) / den**2


def commutation_residual(x: float, y: float, c0: float, c2: float) -> float:
    """Residual of the commutation relation for the two-parameter lambda family.

    lambda'(y) F(x,y) + 2 lambda(y) G(x,y) - lambda'(x) F(y,x) - 2 lambda(x) G(y,x);
    identically zero for every (c0, c2) in the family.
    """
    lhs = lambda_family_deriv(y, c0, c2) * F_kernel(x, y) + 2.0 * lambda_family(
        y, c0, c2
    ) * G_kernel(x, y)
    rhs = lambda_family_deriv(x, c0, c2) * F_kernel(y, x) + 2.0 * lambda_family(
        x, c0, c2
    ) * G_kernel(y, x)
    return lhs - rhs


def alpha_beta_from_c0_c2(c0: float, c2: float) -> tuple[float, float]:
    """Radial restriction exponents from the lambda-family coefficients."""
    return (c0 - c2) / 4.0, c0 / 2.0


# ---------------------------------------------------------------------------
# Hull specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscHull:
    """A = closure of U(x, eps) intersected with the closed half-plane."""

    x: float
    eps: float
    geometry: str = field(default="chordal", init=False)

    def __post_init__(self) -> None:
        DiscExcision(self.x, self.eps)  # validates 0 < eps < |x|

    def footprint(self) -> tuple[float, float]:
        lo, hi = self.x - self.eps, self.x + self.eps
        return (lo, hi)

    def boundary_polyline(self, n: int = 128) -> np.ndarray:
        th = np.linspace(0.0, math.pi, n)
        if self.x < 0:
            th = th[::-1]
        return self.x + self.eps * np.exp(1j * th)

    def distance(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.abs(z - self.x) - self.eps

    def contains(self, z: ArrayLike) -> np.ndarray:
        return self.distance(z) <= 0.0

    def phi(self) -> MapChain:
        return disc_phi_chordal(self.x, self.eps)

    def phi_deriv0(self) -> float:
        return 1.0 - self.eps**2 / self.x**2


@dataclass(frozen=True)
class SlitHull:
    """A = vertical slit [x, x + iy]."""

    x: float
    y: float
    geometry: str = field(default="chordal", init=False)

    def footprint(self) -> tuple[float, float]:
        return (self.x, self.x)

    def boundary_polyline(self, n: int = 128) -> np.ndarray:
        t = np.linspace(0.0, 1.0, n)
        return self.x + 1j * self.y * t

    def distance(self, z: ArrayLike) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        dy = np.clip(z.imag, 0.0, self.y)
        return np.abs(z - (self.x + 1j * dy))

    def contains(self, z: ArrayLike) -> np.ndarray:
        return self.distance(z) <= 0.0

    def phi(self) -> MapChain:
        return slit_phi(self.x, self.y)

    def phi_deriv0(self) -> float:
        return abs(self.x) / math.hypot(self.x, self.y)


def _segment_distance(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points z (m,) to each segment [a_j, b_j] (n,), min over j."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))[:, None]
    a = np.asarray(a, dtype=complex)[None, :]
    b = np.asarray(b, dtype=complex)[None, :]
    d = b - a
    L2 = np.abs(d) ** 2
    t = np.where(L2 > 0, ((z - a) * np.conj(d)).real / np.where(L2 > 0, L2, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t * d
    return np.abs(z - proj).min(axis=1)


@dataclass(frozen=True)
class PolylineHull:
    """Hull given by a boundary polyline (curve hull or traced region boundary)."""

    points: tuple[complex, ...]
    geometry: str = "chordal"

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("polyline needs at least two points")

    def footprint(self) -> tuple[float, float]:
        xs = [p.real for p in self.points if abs(p.imag) < 1e-12]
        if not xs:
            raise ValueError("polyline is not attached to the real axis")
        return (min(xs), max(xs))

    def boundary_polyline(self, n: int = 0) -> np.ndarray:
        return np.asarray(self.points, dtype=complex)

    def distance(self, z: ArrayLike) -> np.ndarray:
        pts = np.asarray(self.points, dtype=complex)
        out = _segment_distance(z, pts[:-1], pts[1:])
        return out if np.ndim(z) else out[0]

    def contains(self, z: ArrayLike) -> np.ndarray:
        return self.distance(z) <= 0.0


@dataclass(frozen=True)
class LoewnerHull:
    """Hull generated by a Loewner driving function (chordal or radial)."""

    driving: object  # loewner.DrivingFunction; stored without importing loewner

    @property
    def geometry(self) -> str:
        return self.driving.geometry

    def horizon(self) -> float:
        return float(self.driving.times[-1])


HullSpec = Union[DiscHull, SlitHull, PolylineHull, LoewnerHull]


def complex_step_derivative(func, z: complex, h: float = 1e-25) -> complex:
    """Derivative oracle for tests.

    For real-analytic maps evaluated at real points the classic imaginary
    perturbation is exact to machine precision; for interior points we fall
    back to a small central difference in two directions.
    """
    z = complex(z)
    if z.imag == 0.0:
        return complex(func(z + 1j * h)).imag / h
    hh = 1e-6
    d1 = (complex(func(z + hh)) - complex(func(z - hh))) / (2 * hh)
    d2 = (complex(func(z + 1j * hh)) - complex(func(z - 1j * hh))) / (2j * hh)
    return (d1 + d2) / 2.0
