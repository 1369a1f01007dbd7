"""Brownian kernels, excursions, the boundary excursion measure, and loops.

Excursion sampler
-----------------
The excursion from 0 to infinity in the upper half-plane is realized as
X + iY with X a Brownian motion and Y an independent Bessel(3) process
started at 0 (the Doob h-transform of vertical Brownian motion by Im z),
run on an adaptive grid whose steps scale like the squared distance to
the forbidden hull.  Two refinements keep the hit/avoid verdict sharp:

* a reflection ("Brownian bridge") correction samples within-step
  crossings with probability exp(-2 d d'/dt), removing the leading
  resolution bias of the discrete path;
* instead of truncating at a cap height, the estimator closes each
  surviving path with its exact remaining avoidance probability
  Im(Phi_A(z))/Im(z), which removes truncation bias entirely.

Excursion measure quadrature
----------------------------
mu^exc_{H,I}[hit A] is evaluated by Gauss-Legendre quadrature of
H(x,y) (1 - Pi(x,y)) over I x I, where Pi(x,y) is the two-point
avoidance probability Phi'(x) Phi'(y) ((x-y)/(Phi(x)-Phi(y)))^2.
The integrand extends analytically to the diagonal, where it equals
(A2^2/A1^2 - A3/A1)/pi in terms of the local Taylor coefficients of
Phi; the same expression stabilizes near-diagonal evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .conformal import (
    DiscHull,
    HullSpec,
    MapChain,
    PolylineHull,
    SlitHull,
    boundary_pair,
)
from .loewner import PathSample
from .rng import stream_generator
from .sle import AvoidanceStats

__all__ = [
    "KernelValue",
    "heat_kernel",
    "green_function",
    "poisson_kernel",
    "boundary_poisson",
    "kernel_value",
    "ExcursionSample",
    "sample_excursion",
    "excursion_avoidance",
    "two_point_avoidance_exact",
    "excursion_hit_measure",
    "excursion_hit_measure_negative_axis",
    "PppRealization",
    "sample_excursion_ppp",
    "ppp_avoidance",
    "LoopSample",
    "sample_loop",
    "winding_number",
    "RadialCapHull",
    "loop_hit_measure",
    "disc_exit_angles",
]


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KernelValue:
    kind: str
    value: float

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ValueError("kernel values are nonnegative")


def heat_kernel(z: complex, w: complex, t: float) -> float:
    """Total mass of the Brownian bridge measure mu(z, w; t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    return math.exp(-abs(z - w) ** 2 / (2.0 * t)) / (2.0 * math.pi * t)


def green_function(domain: str, z: complex, w: complex) -> float:
    """Green's function of the disc or half-plane (pi times the mass of mu_D)."""
    if domain == "disc":
        if abs(z) >= 1 or abs(w) >= 1:
            raise ValueError("interior points of the unit disc required")
        return -math.log(abs(z - w) / abs(1.0 - z * np.conj(w)))
    if domain == "half":
        if z.imag <= 0 or w.imag <= 0:
            raise ValueError("interior points of the half-plane required")
        return math.log(abs(z - np.conj(w)) / abs(z - w))
    raise ValueError(f"unsupported domain {domain!r}")


def poisson_kernel(domain: str, z: complex, w: complex) -> float:
    """Density of harmonic measure seen from z, against boundary length."""
    if domain == "disc":
        return (1.0 - abs(z) ** 2) / (2.0 * math.pi * abs(z - w) ** 2)
    if domain == "half":
        return z.imag / (math.pi * abs(z - w) ** 2)
    raise ValueError(f"unsupported domain {domain!r}")


def boundary_poisson(domain: str, x: complex, y: complex) -> float:
    """Boundary excursion kernel H_D(x, y) against boundary length at both ends."""
    if domain == "half":
        return 1.0 / (math.pi * abs(x - y) ** 2)
    if domain == "disc":
        return 1.0 / (math.pi * abs(x - y) ** 2)  # chordal distance form
    raise ValueError(f"unsupported domain {domain!r}")


def kernel_value(kind: str, domain: str, *points, t: float = 1.0) -> KernelValue:
    if kind == "heat":
        return KernelValue(kind, heat_kernel(points[0], points[1], t))
    if kind == "green":
        return KernelValue(kind, green_function(domain, points[0], points[1]))
    if kind == "poisson":
        return KernelValue(kind, poisson_kernel(domain, points[0], points[1]))
    if kind == "boundary-poisson":
        return KernelValue(kind, boundary_poisson(domain, points[0], points[1]))
    raise ValueError(f"unsupported kernel kind {kind!r}")


# ---------------------------------------------------------------------------
# excursions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExcursionSample:
    path: PathSample
    endpoints: tuple[complex, Optional[complex]]  # None marks infinity


def _moebius_two_point(x: float, y: float):
    """Moebius H -> H with 0 -> x, infinity -> y, and its inverse data."""
    # m(z) = (x + y z)/(1 + z); inverse m^{-1}(w) = (w - x)/(y - w)
    def fwd(z):
        z = np.asarray(z, dtype=complex)
        return (x + y * z) / (1.0 + z)

    def inv(w):
        w = np.asarray(w, dtype=complex)
        return (w - x) / (y - w)

    return fwd, inv


def _transport_hull_two_point(hull: HullSpec, x: float, y: float) -> DiscHull:
    """Pull a disc hull back through the 0->x, inf->y Moebius map."""
    if not isinstance(hull, DiscHull):
        raise TypeError("two-point excursion avoidance supports disc hulls")
    _, inv = _moebius_two_point(x, y)
    a, b = hull.footprint()
    ia = float(np.real(inv(a)))
    ib = float(np.real(inv(b)))
    lo, hi = min(ia, ib), max(ia, ib)
    c = 0.5 * (lo + hi)
    r = 0.5 * (hi - lo)
    top = complex(inv(hull.x + 1j * hull.eps))
    if abs(abs(top - c) - r) > 1e-9 * max(1.0, r):
        raise ValueError("Moebius image of the disc is not a disc; bad endpoints")
    return DiscHull(c, r)


def sample_excursion(
    endpoints: tuple[float, Optional[float]] = (0.0, None),
    seed: int = 0,
    stream: int = 0,
    height_cap: float = 50.0,
    dt0: float = 1e-3,
) -> ExcursionSample:
    """One excursion path; endpoint None stands for infinity.

    The path is truncated at the cap height (0 -> infinity coordinates);
    finite-endpoint excursions are Moebius transports of the capped path.
    """
    x0, y0 = endpoints
    if y0 is not None and x0 == y0:
        raise ValueError("excursion endpoints must be distinct")
    rng = stream_generator(seed, stream, "excursion-path")
    xs = [0.0]
    ys = [0.0]
    y = 1e-9
    x = 0.0
    while y < height_cap:
        dt = max(dt0, (y / 6.0) ** 2)
        y = math.sqrt(float(dt * rng.noncentral_chisquare(3.0, y * y / dt)))
        x += math.sqrt(dt) * rng.standard_normal()
        xs.append(x)
        ys.append(y)
    pts = np.asarray(xs) + 1j * np.asarray(ys)
    times = np.arange(len(pts), dtype=float)  # pseudo-times; sets only
    if y0 is None and x0 == 0.0:
        return ExcursionSample(PathSample(pts, times), (0.0, None))
    if y0 is None:
        return ExcursionSample(PathSample(pts + x0, times), (x0, None))
    fwd, _ = _moebius_two_point(x0, y0)
    return ExcursionSample(PathSample(fwd(pts), times), (x0, y0))


def excursion_avoidance(
    hull: HullSpec,
    n: int,
    seed: int,
    stream: int = 0,
    endpoints: tuple[float, Optional[float]] = (0.0, None),
    height_cap: float = 60.0,
    step_factor: float = 12.0,
) -> tuple[float, float, AvoidanceStats]:
    """(mean, stderr, stats) for P[excursion avoids hull].

    Estimator per path: 0 on a detected hit, else the exact conditional
    avoidance Im Phi_A(z_cap)/Im z_cap at the cap height, which closes the
    truncation exactly and shrinks the variance.
    """
    x0, y0 = endpoints
    if y0 is not None:
        hull = _transport_hull_two_point(hull, x0, y0)
    phi = hull.phi() if isinstance(hull, (DiscHull, SlitHull)) else None
    if phi is None:
        raise TypeError("excursion avoidance needs a closed-form hull")
    rng = stream_generator(seed, stream, "excursion-avoidance")

    X = np.zeros(n)
    Y = np.full(n, 1e-9)
    vals = np.zeros(n)
    idx = np.arange(n)
    hits = 0
    while len(idx) > 0:
        z = X + 1j * Y
        d = np.maximum(np.asarray(hull.distance(z), dtype=float), 0.0)
        inside = d <= 0.0
        dt = np.maximum((d / step_factor) ** 2, 1e-6)
        Y2 = dt * rng.noncentral_chisquare(3.0, (Y * Y) / dt)
        Ynew = np.sqrt(Y2)
        Xnew = X + np.sqrt(dt) * rng.standard_normal(len(idx))
        znew = Xnew + 1j * Ynew
        dnew = np.maximum(np.asarray(hull.distance(znew), dtype=float), 0.0)
        cross_p = np.exp(-2.0 * d * dnew / dt)
        crossed = rng.random(len(idx)) < cross_p
        hit = inside | (dnew <= 0.0) | crossed
        survived_cap = (~hit) & (Ynew >= height_cap)
        if survived_cap.any():
            zc = znew[survived_cap]
            vals[idx[survived_cap]] = np.real(
                np.imag(phi.apply(zc)) / np.imag(zc)
            )
        hits += int(hit.sum())
        keep = ~(hit | survived_cap)
        X, Y, idx = Xnew[keep], Ynew[keep], idx[keep]
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, stderr, AvoidanceStats(hits, n, 0.0)


def two_point_avoidance_exact(chain: MapChain, x: float, y: float) -> float:
    """Pi(x, y) = Phi'(x) Phi'(y) ((x-y)/(Phi(x)-Phi(y)))^2.

    The avoidance probability of the excursion between boundary points x
    and y; independent of the normalization of the uniformizer chain.
    """
    fx = complex(chain.apply(x))
    fy = complex(chain.apply(y))
    dx = float(np.real(chain.deriv(x)))
    dy = float(np.real(chain.deriv(y)))
    return dx * dy * ((x - y) / (fx - fy).real) ** 2


# ---------------------------------------------------------------------------
# excursion measure quadrature
# ---------------------------------------------------------------------------

def _hull_chain(hull: Union[HullSpec, MapChain]) -> MapChain:
    if isinstance(hull, MapChain):
        return hull
    if isinstance(hull, (DiscHull, SlitHull)):
        return hull.phi()
    raise TypeError("need a closed-form hull or an explicit map chain")


def _diagonal_integrand(chain: MapChain, x: float) -> float:
    """Limit of H(x,y)(1 - Pi(x,y)) as y -> x."""
    _, d1, d2, d3 = chain.derivs123(x)
    a1 = d1.real
    a2 = d2.real / 2.0
    a3 = d3.real / 6.0
    return (a2 * a2 / (a1 * a1) - a3 / a1) / math.pi


def _offdiag_integrand(chain: MapChain, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    _, _, diff, dgx, dgy = boundary_pair(chain, x, y)
    pi_xy = np.real(dgx) * np.real(dgy) * ((x - y) / np.real(diff)) ** 2
    return (1.0 - pi_xy) / (math.pi * (x - y) ** 2)


def excursion_hit_measure(
    interval: tuple[float, float],
    hull: Union[HullSpec, MapChain],
    n_nodes: int = 80,
) -> float:
    """mu^exc_{H,I}[e hits A] for I = [a, b] disjoint from the hull footprint.

    Tensor Gauss-Legendre quadrature; the integrand is analytic across the
    diagonal, where the closed-form limit is substituted.
    """
    a, b = interval
    if not (a < b):
        raise ValueError("need a < b")
    chain = _hull_chain(hull)
    if isinstance(hull, (DiscHull, SlitHull)):
        lo, hi = hull.footprint()
        if not (b <= lo or a >= hi):
            raise ValueError("interval overlaps the hull footprint")
    nodes, weights = leggauss(n_nodes)
    x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    w = 0.5 * (b - a) * weights
    X, Y = np.meshgrid(x, x, indexing="ij")
    WW = np.outer(w, w)
    out = np.empty_like(X)
    near = np.abs(X - Y) < 1e-7 * max(1.0, abs(a), abs(b))
    out[~near] = _offdiag_integrand(chain, X[~near], Y[~near])
    if near.any():
        mids = 0.5 * (X[near] + Y[near])
        out[near] = [_diagonal_integrand(chain, float(m)) for m in mids]
    return float(np.sum(out * WW))


def excursion_hit_measure_negative_axis(
    hull: Union[HullSpec, MapChain], n_nodes: int = 120
) -> float:
    """mu^exc_{H, R_-}[e hits A] via the substitution x = -(1-u)/u, u in (0,1]."""
    chain = _hull_chain(hull)
    nodes, weights = leggauss(n_nodes)
    u = 0.5 * nodes + 0.5
    w = 0.5 * weights
    x = -(1.0 - u) / u
    jac = 1.0 / (u * u)
    X, Y = np.meshgrid(x, x, indexing="ij")
    J = np.outer(jac * w, jac * w)
    out = np.empty_like(X)
    near = np.abs(X - Y) < 1e-7 * np.maximum(1.0, np.abs(X))
    out[~near] = _offdiag_integrand(chain, X[~near], Y[~near])
    if near.any():
        mids = 0.5 * (X[near] + Y[near])
        out[near] = [_diagonal_integrand(chain, float(m)) for m in mids]
    return float(np.sum(out * J))


# ---------------------------------------------------------------------------
# Poisson point process of excursions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PppRealization:
    """A-hitting-thinned realization of the excursion point process."""

    excursions: tuple[ExcursionSample, ...]
    count: int
    intensity_mass: float  # pi * beta * mu^exc[hit A]
    beta: float


def ppp_avoidance(
    beta: float,
    hull: Union[HullSpec, MapChain],
    n: int,
    seed: int,
    stream: int = 0,
) -> tuple[float, float, float]:
    """(mc_mean, mc_stderr, exact) for P[excursion PPP misses the hull].

    The PPP has intensity pi*beta*mu^exc_{H, R_-}; avoidance is the event
    that the Poisson count of A-hitting excursions vanishes.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if n <= 0:
        raise ValueError("n must be positive")
    lam = math.pi * beta * excursion_hit_measure_negative_axis(hull)
    rng = stream_generator(seed, stream, "excursion-ppp")
    zero = rng.poisson(lam, size=n) == 0
    p = float(np.mean(zero))
    se = math.sqrt(max(p * (1 - p), 1e-12) / n)
    return p, se, math.exp(-lam)


def sample_excursion_ppp(
    beta: float,
    hull: DiscHull,
    seed: int,
    stream: int = 0,
    max_paths: int = 32,
) -> PppRealization:
    """Sample the hitting excursions of the PPP (count + conditioned paths).

    Endpoint pairs are drawn by rejection from the hitting density
    H(x,y)(1 - Pi(x,y)) on R_- x R_-, and each path by resampling the
    two-point excursion until it hits the hull.
    """
    lam = math.pi * beta * excursion_hit_measure_negative_axis(hull)
    rng = stream_generator(seed, stream, "excursion-ppp-paths")
    count = int(rng.poisson(lam))
    chain = _hull_chain(hull)

    def hit_density(u, v):
        x = -(1.0 - u) / u
        y = -(1.0 - v) / v
        val = _offdiag_integrand(chain, x, y) / (u * u * v * v)
        return val

    # crude envelope from a coarse grid
    g = np.linspace(0.02, 0.98, 40)
    U, V = np.meshgrid(g, g)
    mask = np.abs(U - V) > 1e-3
    env = 1.5 * float(np.max(hit_density(U[mask], V[mask])))

    paths = []
    for k in range(min(count, max_paths)):
        for _ in range(10_000):
            u, v = rng.random(2) * 0.999 + 5e-4
            if abs(u - v) < 1e-5:
                continue
            if rng.random() * env < hit_density(u, v):
                break
        x = float(-(1.0 - u) / u)
        y = float(-(1.0 - v) / v)
        for attempt in range(200):
            exc = sample_excursion((x, y), seed, stream=10_000 + 997 * k + attempt)
            d = np.min(np.abs(hull.distance(exc.path.points)))
            if bool(np.any(hull.distance(exc.path.points) <= 0.0)):
                paths.append(exc)
                break
        else:
            paths.append(exc)  # keep the last try; conditioning is approximate
    return PppRealization(tuple(paths), count, lam, beta)


# ---------------------------------------------------------------------------
# loops
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LoopSample:
    path: PathSample
    root: complex
    duration: float


def sample_loop(
    z: complex, t: float, seed: int, stream: int = 0, n_points: int = 512
) -> LoopSample:
    """Closed Brownian bridge from z to z in time t on a uniform grid."""
    if t <= 0:
        raise ValueError("duration must be positive")
    rng = stream_generator(seed, stream, "loop-bridge")
    steps = rng.standard_normal((2, n_points)) * math.sqrt(t / n_points)
    walk = np.cumsum(steps, axis=1)
    frac = np.arange(1, n_points + 1) / n_points
    bx = walk[0] - frac * walk[0, -1]
    by = walk[1] - frac * walk[1, -1]
    pts = np.concatenate([[z], z + bx + 1j * by])
    pts[-1] = z
    times = np.linspace(0.0, t, n_points + 1)
    return LoopSample(PathSample(pts, times), z, t)


def winding_number(points: np.ndarray, about: complex = 0.0) -> int:
    """Winding number of a closed polyline about a point."""
    d = np.asarray(points, dtype=complex) - about
    ang = np.angle(d[1:] / d[:-1])
    return int(round(float(np.sum(ang)) / (2.0 * math.pi)))


@dataclass(frozen=True)
class RingHull:
    """A = closed annulus between radius r and the unit circle.

    The complement in the disc is r U (simply connected, origin inside),
    and the 0-fixing uniformizer is z/r, so log Phi'(0) = log(1/r) exactly:
    the one radial hull whose loop-hitting mass is known in closed form.
    """

    r: float

    def __post_init__(self) -> None:
        if not (0 < self.r < 1):
            raise ValueError("need 0 < r < 1")

    def log_phi0(self) -> float:
        return math.log(1.0 / self.r)

    def contains(self, z: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(z)) >= self.r

    def inner_distance_to_origin(self) -> float:
        return self.r


@dataclass(frozen=True)
class RadialCapHull:
    """Boundary-attached cap in the unit disc: {r e^{i th}: r >= shape(th)}.

    shape(th) = 1 - depth * cos(pi (th - center) / (2 half_width)) on the
    attachment arc; star-shaped in the radius, so membership is exact.
    """

    center: float = 2.0
    depth: float = 0.28
    half_width: float = 0.35

    def __post_init__(self) -> None:
        if not (0 < self.depth < 1) or not (0 < self.half_width < math.pi / 2):
            raise ValueError("need 0 < depth < 1 and 0 < half_width < pi/2")

    def radius_at(self, theta: np.ndarray) -> np.ndarray:
        rel = (np.asarray(theta) - self.center + math.pi) % (2 * math.pi) - math.pi
        arg = np.clip(math.pi * rel / (2.0 * self.half_width), -math.pi / 2, math.pi / 2)
        r = 1.0 - self.depth * np.cos(arg)
        return np.where(np.abs(rel) <= self.half_width * (1 + 1e-12), r, np.inf)

    def contains(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        return np.abs(z) >= self.radius_at(np.angle(z))

    def polyline(self, n: int = 129) -> np.ndarray:
        th = np.linspace(self.center - self.half_width, self.center + self.half_width, n)
        return self.radius_at(th) * np.exp(1j * th)

    def inner_distance_to_origin(self) -> float:
        return 1.0 - self.depth


# The loop measure is normalized so that origin-surrounding loops in the
# unit disc that escape the r-disc carry mass log(1/r) (the mass that the
# restriction identities require).  The bare bridge decomposition
# integral(dA dt / (2 pi t^2)) mu#(z,z;t) carries exactly 1/6 of that: on
# the cylinder log(U \ {0}) the winding-k heat kernel contributes
# 2 sum_k 1/(2 pi^2 k^2) = 1/6 per unit modulus.
LOOP_SURROUND_NORMALIZATION = 6.0


def _refine_winding(pts: np.ndarray, tau: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Insert exact bridge midpoints near the origin until winding resolves.

    A polyline segment can hide a sub-segment winding around 0 only while
    the origin sits within the bridge wander scale of it; midpoint
    insertion (normal, variance tau/4 per coordinate) is the exact
    conditional refinement of the Brownian bridge.
    """
    taus = np.full(len(pts) - 1, tau)
    for _ in range(48):
        a = pts[:-1]
        b = pts[1:]
        d = b - a
        L2 = np.abs(d) ** 2
        tpar = np.clip(((0.0 - a) * np.conj(d)).real / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
        dist = np.abs(a + tpar * d)
        need = dist < 3.0 * np.sqrt(taus)
        if not need.any():
            break
        idx = np.nonzero(need)[0]
        mid = 0.5 * (a[idx] + b[idx]) + np.sqrt(taus[idx] / 4.0) * (
            rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
        )
        new_pts = []
        new_taus = []
        prev = 0
        for k, m in zip(idx, mid):
            new_pts.append(pts[prev : k + 1])
            new_pts.append(np.array([m]))
            new_taus.append(taus[prev:k])
            new_taus.append(np.array([taus[k] / 2.0, taus[k] / 2.0]))
            prev = k + 1
        new_pts.append(pts[prev:])
        new_taus.append(taus[prev:])
        pts = np.concatenate(new_pts)
        taus = np.concatenate(new_taus)
    return pts, taus


def _crossing_logsurvival(d1: np.ndarray, d2: np.ndarray, tau) -> float:
    """log prod_j (1 - exp(-2 d1 d2 / tau)), the reflection crossings bound."""
    with np.errstate(over="ignore"):
        p = np.exp(-2.0 * np.maximum(d1, 0.0) * np.maximum(d2, 0.0) / tau)
    p = np.clip(p, 0.0, 1.0 - 1e-15)
    return float(np.sum(np.log1p(-p)))


def loop_hit_measure(
    hull: Union[RadialCapHull, RingHull],
    n: int,
    seed: int,
    stream: int = 0,
    n_bridge: int = 512,
    t_max: float = 4.0,
    block: int = 8192,
) -> tuple[float, float]:
    """(mean, stderr) importance-sampling estimate of the mass of loops in
    the unit disc that surround the origin and hit the hull.

    Proposal: root uniform on the unit disc, duration log-uniform on
    [t_lo, t_max] (so the weight is proportional to 1/t and the useful
    duration range is not starved).  Three refinements keep the discretized
    bridge faithful: reflection-sampled crossings of the unit circle
    (containment), bridge midpoint refinement of the winding test near the
    origin, and reflection-sampled crossings of the hull boundary (hits
    missed between vertices).
    """
    rng = stream_generator(seed, stream, "loop-measure")
    D = hull.inner_distance_to_origin()
    t_lo = D * D / 24.0
    logratio = math.log(t_max / t_lo)
    hits_w = 0.0
    hits_w2 = 0.0
    done = 0
    while done < n:
        m = min(block, n - done)
        done += m
        r = np.sqrt(rng.random(m))
        phi = rng.random(m) * 2.0 * math.pi
        z = r * np.exp(1j * phi)
        t = t_lo * np.exp(rng.random(m) * logratio)
        w = LOOP_SURROUND_NORMALIZATION * logratio / (2.0 * t)
        steps = rng.standard_normal((m, 2, n_bridge)) * np.sqrt(t / n_bridge)[:, None, None]
        walk = np.cumsum(steps, axis=2)
        frac = np.arange(1, n_bridge + 1) / n_bridge
        bx = walk[:, 0, :] - frac[None, :] * walk[:, 0, -1][:, None]
        by = walk[:, 1, :] - frac[None, :] * walk[:, 1, -1][:, None]
        pts = np.concatenate([z[:, None], z[:, None] + bx + 1j * by], axis=1)
        radii = np.abs(pts)
        inside = np.max(radii, axis=1) <= 1.0
        if not inside.any():
            continue
        # containment correction: kill loops whose true path exits the disc
        cand_idx = np.nonzero(inside)[0]
        taus = t[cand_idx] / n_bridge
        gap = 1.0 - radii[cand_idx]
        logsurv = np.sum(
            np.log1p(
                -np.clip(
                    np.exp(-2.0 * gap[:, :-1] * gap[:, 1:] / taus[:, None]),
                    0.0,
                    1.0 - 1e-15,
                )
            ),
            axis=1,
        )
        survive = np.log(rng.random(len(cand_idx))) < logsurv
        cand_idx = cand_idx[survive]
        for i in cand_idx:
            tau_i = t[i] / n_bridge
            loop_pts = pts[i]
            near0 = float(np.min(np.abs(loop_pts)))
            ang = np.angle(loop_pts[1:] / loop_pts[:-1])
            coarse_wind = abs(round(float(np.sum(ang)) / (2 * math.pi))) >= 1
            if coarse_wind or near0 < 4.0 * math.sqrt(tau_i):
                rpts, rtaus = _refine_winding(loop_pts, tau_i, rng)
                angr = np.angle(rpts[1:] / rpts[:-1])
                if abs(round(float(np.sum(angr)) / (2 * math.pi))) < 1:
                    continue
            else:
                continue
            hit = bool(np.any(hull.contains(rpts)))
            if not hit:
                if isinstance(hull, RingHull):
                    dists = hull.r - np.abs(rpts)
                else:
                    dists = _cap_distance(hull, rpts)
                ls = _crossing_logsurvival(dists[:-1], dists[1:], rtaus)
                hit = math.log(max(rng.random(), 1e-300)) >= ls
            if hit:
                hits_w += float(w[i])
                hits_w2 += float(w[i]) ** 2
    mean = hits_w / n
    var = max(hits_w2 / n - mean * mean, 0.0)
    return mean, math.sqrt(var / n)


def _cap_distance(hull: RadialCapHull, z: np.ndarray) -> np.ndarray:
    """Euclidean distance from points to the cap hull (0 inside)."""
    pts = hull.polyline(129)
    a, b = pts[:-1], pts[1:]
    zz = z[:, None]
    d = (b - a)[None, :]
    aa = a[None, :]
    L2 = np.abs(d) ** 2
    tpar = np.clip(((zz - aa) * np.conj(d)).real / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    dist = np.abs(zz - (aa + tpar * d)).min(axis=1)
    dist[hull.contains(z)] = 0.0
    return dist


def disc_exit_angles(n: int, seed: int, stream: int = 0) -> np.ndarray:
    """Exit angles of Brownian motion from the unit disc started at 0."""
    rng = stream_generator(seed, stream, "disc-exit")
    z = np.zeros(n, dtype=complex)
    out = np.empty(n)
    idx = np.arange(n)
    while len(idx) > 0:
        d = 1.0 - np.abs(z)
        finished = d < 1e-6
        if finished.any():
            out[idx[finished]] = np.angle(z[finished])
            keep = ~finished
            z, idx = z[keep], idx[keep]
            if len(idx) == 0:
                break
            d = d[keep]
        dt = (d / 3.0) ** 2
        z = z + np.sqrt(dt) * (
            rng.standard_normal(len(idx)) + 1j * rng.standard_normal(len(idx))
        )
    return out
