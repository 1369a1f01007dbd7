"""SLE driving samplers, traces, and hull-avoidance ensembles.

Driving processes
-----------------
* chordal SLE_kappa: W_t = sqrt(kappa) B_t, exact Gaussian increments.
* chordal SLE_kappa(rho): Z = W - O sampled through exact squared-Bessel
  transitions (noncentral chi-square), O by trapezoidal integration of
  -2/Z; Euler discretization of Z near 0 would be biased for dimensions
  below 2.
* radial SLE_kappa and SLE_kappa(rho): Euler-Maruyama on the angle gap
  with cotangent drift and substepping near the boundary.

Avoidance engine
----------------
Hitting of a hull A is decided in map coordinates: the boundary of A is
transported by the exact per-step slit maps, and the curve hits A exactly
when the transported boundary collides with the driving value.  Steps
adapt per path as dt ~ (D/step_factor)^2 where D is the (parabolically
interpolated) minimal distance between the tip image and the hull image,
so a hit always walks through the swallow threshold before any crossing.
Paths stop once the remaining hit probability, bounded through a disc
enclosing the hull image, falls below ``stop_residual``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .conformal import DiscHull, HullSpec, LoewnerHull, PolylineHull, SlitHull
from .loewner import (
    DrivingFunction,
    PathSample,
    chordal_trace,
    radial_trace,
)
from .rng import stream_generator

__all__ = [
    "SleParams",
    "sample_chordal_driving",
    "sample_kappa_rho_driving",
    "sample_radial_driving",
    "trace",
    "intersects",
    "chordal_hull_avoidance",
    "radial_hull_avoidance",
    "radial_chordal_weight",
    "radial_weight_ensemble",
    "AvoidanceStats",
]

RADIAL_FORCE_OFFSET = 0.03  # angular surrogate for the x0 -> 0+/2pi- limits


@dataclass(frozen=True)
class SleParams:
    """Parameters of an SLE sampler run."""

    kappa: float
    rho: Optional[float] = None
    side: str = "left"
    geometry: str = "chordal"
    horizon: float = 1.0
    dt: float = 1e-3
    seed: int = 0
    stream: int = 0

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.rho is not None and self.rho <= -2:
            raise ValueError("rho must exceed -2")
        if self.side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        if self.geometry not in ("chordal", "radial"):
            raise ValueError("geometry must be 'chordal' or 'radial'")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")


# ---------------------------------------------------------------------------
# driving samplers
# ---------------------------------------------------------------------------

def _besq_transition(y: np.ndarray, dim: float, dt, rng) -> np.ndarray:
    """Exact squared-Bessel step: Y' ~ dt * chi'^2_dim(Y/dt)."""
    dt = np.asarray(dt, dtype=float)
    return dt * rng.noncentral_chisquare(dim, np.maximum(y, 0.0) / dt)


def _inv_z(z: np.ndarray, floor: np.ndarray) -> np.ndarray:
    """1/Z with a floor tied to the step scale; regularizes rare zero dips."""
    return 1.0 / np.maximum(z, floor)


def chordal_brownian_ensemble(
    n: int, kappa: float, horizon: float, dt: float, seed: int, stream: int = 0
) -> np.ndarray:
    """W on a shared uniform grid, shape (n, K+1)."""
    rng = stream_generator(seed, stream, "chordal-brownian")
    k = int(round(horizon / dt))
    inc = rng.standard_normal((n, k)) * math.sqrt(kappa * dt)
    w = np.zeros((n, k + 1))
    np.cumsum(inc, axis=1, out=w[:, 1:])
    return w


def kappa_rho_ensemble(
    n: int,
    kappa: float,
    rho: float,
    horizon: float,
    dt: float,
    seed: int,
    stream: int = 0,
    side: str = "left",
) -> tuple[np.ndarray, np.ndarray]:
    """(W, O) for chordal SLE_kappa(rho) on a shared uniform grid, (n, K+1).

    Left convention: O <= W with Z = W - O = sqrt(kappa) x BES(d),
    d = 1 + 2(rho+2)/kappa; right side is the mirror image.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive for SLE_kappa(rho)")
    rng = stream_generator(seed, stream, "chordal-kappa-rho")
    d = 1.0 + 2.0 * (rho + 2.0) / kappa
    k = int(round(horizon / dt))
    y = np.zeros(n)  # Y = Z^2 / kappa, a BESQ(d)
    z_old = np.zeros(n)
    o = np.zeros(n)
    W = np.zeros((n, k + 1))
    O = np.zeros((n, k + 1))
    floor = 0.05 * math.sqrt(kappa * dt)
    for j in range(k):
        y = _besq_transition(y, d, dt, rng)
        z_new = np.sqrt(kappa * y)
        o = o - dt * (_inv_z(z_old, floor) + _inv_z(z_new, floor))
        W[:, j + 1] = z_new + o
        O[:, j + 1] = o
        z_old = z_new
    if side == "right":
        W, O = -W, -O
    return W, O


def sample_chordal_driving(params: SleParams) -> DrivingFunction:
    """Chordal driving (plain or with a force point), deterministic in the seed."""
    if params.geometry != "chordal":
        raise ValueError("chordal sampler requires chordal geometry")
    if params.rho is not None:
        return sample_kappa_rho_driving(params)
    k = int(round(params.horizon / params.dt))
    t = np.linspace(0.0, k * params.dt, k + 1)
    w = chordal_brownian_ensemble(
        1, params.kappa, params.horizon, params.dt, params.seed, params.stream
    )[0]
    return DrivingFunction(t, w, "chordal")


def sample_kappa_rho_driving(params: SleParams) -> DrivingFunction:
    """Chordal SLE_kappa(rho) driving with its force-point track O_t."""
    if params.geometry != "chordal":
        raise ValueError("kappa-rho sampler requires chordal geometry")
    rho = 0.0 if params.rho is None else params.rho
    k = int(round(params.horizon / params.dt))
    t = np.linspace(0.0, k * params.dt, k + 1)
    W, O = kappa_rho_ensemble(
        1,
        params.kappa,
        rho,
        params.horizon,
        params.dt,
        params.seed,
        params.stream,
        params.side,
    )
    return DrivingFunction(t, W[0], "chordal", force_track=O[0])


def _radial_substeps(dt: float, gap: np.ndarray, kappa: float, rho: float) -> int:
    scale = float(np.min(np.minimum(gap, 2.0 * math.pi - gap))) if gap.size else 1.0
    scale = max(scale, 1e-4)
    h_req = 0.02 * scale * scale / max(kappa, abs(rho) + 2.0, 1.0)
    return int(min(512, max(1, math.ceil(dt / h_req))))


def radial_rho_ensemble_step(
    W: np.ndarray,
    O: np.ndarray,
    dt: float,
    kappa: float,
    rho: float,
    rng,
) -> tuple[np.ndarray, np.ndarray]:
    """One Euler-Maruyama step (with substeps) of the radial SLE_kappa(rho) SDE.

    dW = sqrt(kappa) dB + (rho/2) cot((W-O)/2) dt,  dO = -cot((W-O)/2) dt.
    """
    gap = np.abs(W - O)
    m = _radial_substeps(dt, gap, kappa, rho)
    h = dt / m
    sq = math.sqrt(kappa * h)
    for _ in range(m):
        cot = 1.0 / np.tan((W - O) / 2.0)
        dB = rng.standard_normal(W.shape)
        W = W + sq * dB + 0.5 * rho * cot * h
        O = O - cot * h
    return W, O


def sample_radial_driving(params: SleParams) -> DrivingFunction:
    """Radial driving; the rho variant starts its force point at the
    documented angular offset from the tip (limit surrogate)."""
    if params.geometry != "radial":
        raise ValueError("radial sampler requires radial geometry")
    rng = stream_generator(params.seed, params.stream, "radial-driving")
    k = int(round(params.horizon / params.dt))
    t = np.linspace(0.0, k * params.dt, k + 1)
    if params.rho is None or params.rho == 0.0:
        inc = rng.standard_normal(k) * math.sqrt(params.kappa * params.dt)
        w = np.concatenate([[0.0], np.cumsum(inc)])
        return DrivingFunction(t, w, "radial")
    x0 = (
        2.0 * math.pi - RADIAL_FORCE_OFFSET
        if params.side == "left"
        else RADIAL_FORCE_OFFSET
    )
    W = np.zeros(1)
    O = np.full(1, x0)
    Ws, Os = [0.0], [x0]
    for _ in range(k):
        W, O = radial_rho_ensemble_step(
            W, O, params.dt, params.kappa, params.rho, rng
        )
        Ws.append(float(W[0]))
        Os.append(float(O[0]))
    return DrivingFunction(t, np.array(Ws), "radial", force_track=np.array(Os))


def trace(
    source: Union[SleParams, DrivingFunction],
    sample_times: Optional[Sequence[float]] = None,
) -> PathSample:
    """Trace of an SLE run or an explicit driving function."""
    if isinstance(source, SleParams):
        if source.geometry == "chordal":
            driving = sample_chordal_driving(source)
        else:
            driving = sample_radial_driving(source)
    else:
        driving = source
    if sample_times is None:
        sample_times = driving.times
    if driving.geometry == "chordal":
        return chordal_trace(driving, sample_times)
    return radial_trace(driving, sample_times)


# ---------------------------------------------------------------------------
# geometric intersection (polyline vs hull)
# ---------------------------------------------------------------------------

def _seg_seg_min_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Minimum distance between two polylines (0 if any segments cross)."""
    pa, pb = p[:-1], p[1:]
    qa, qb = q[:-1], q[1:]
    # quick reject via bounding boxes, then dense pairwise check in blocks
    best = np.inf
    block = 512
    for i0 in range(0, len(pa), block):
        a = pa[i0 : i0 + block][:, None]
        b = pb[i0 : i0 + block][:, None]
        c = qa[None, :]
        d = qb[None, :]
        if _segments_cross_grid(a, b, c, d):
            return 0.0
        for u, v in ((a, b), (b, a)):
            best = min(best, _points_to_segments(u[:, 0], c[0], d[0]))
        for u, v in ((c, d), (d, c)):
            best = min(best, _points_to_segments(u[0], pa, pb))
    return best


def _segments_cross_grid(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q.real - p.real) * (r.imag - p.imag) - (q.imag - p.imag) * (
            r.real - p.real
        )

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return bool(np.any((o1 * o2 < 0) & (o3 * o4 < 0)))


def _points_to_segments(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    z = z[:, None]
    d = (b - a)[None, :]
    a = a[None, :]
    L2 = np.abs(d) ** 2
    t = np.clip(((z - a) * np.conj(d)).real / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    return float(np.abs(z - (a + t * d)).min())


def intersects(path: PathSample, hull: HullSpec, tol: float = 0.0) -> bool:
    """True when the path polyline comes within tol of the hull."""
    pts = path.points
    if isinstance(hull, DiscHull):
        d = _points_to_segments(np.array([hull.x + 0j]), pts[:-1], pts[1:])
        return d <= hull.eps + tol
    if isinstance(hull, SlitHull):
        seg = np.array([hull.x + 0j, hull.x + 1j * hull.y])
        return _seg_seg_min_distance(pts, seg) <= tol
    if isinstance(hull, PolylineHull):
        if getattr(path, "geometry", "chordal") != hull.geometry:
            raise ValueError("geometry mismatch between path and hull")
        return _seg_seg_min_distance(pts, np.asarray(hull.points)) <= tol
    raise TypeError(f"unsupported hull {hull!r}")


# ---------------------------------------------------------------------------
# chordal hull-avoidance ensemble
# ---------------------------------------------------------------------------

@dataclass
class AvoidanceStats:
    hits: int
    n: int
    mean_residual: float
    unresolved: int = 0

    @property
    def avoid_fraction(self) -> float:
        return 1.0 - self.hits / self.n


def _hull_transport_points(hull: HullSpec, n_points: int) -> np.ndarray:
    if isinstance(hull, (DiscHull, SlitHull)):
        return hull.boundary_polyline(n_points)
    if isinstance(hull, PolylineHull):
        return np.asarray(hull.points, dtype=complex)
    raise TypeError(f"unsupported hull for transport {hull!r}")


def _sqrt_flow_arr(u: np.ndarray, side: np.ndarray) -> np.ndarray:
    w = np.sqrt(u)
    np.copyto(w, -w, where=w.imag < 0.0)
    real = w.imag == 0.0
    if real.any():
        flip = real & (side.real < 0.0)
        np.copyto(w, -w, where=flip)
    return w


def _interp_min_sq(A2: np.ndarray) -> np.ndarray:
    """Per-row minimum of |.|^2 with parabolic interpolation across the argmin."""
    m, P = A2.shape
    jm = np.argmin(A2, axis=1)
    rows = np.arange(m)
    y0 = A2[rows, jm]
    interior = (jm > 0) & (jm < P - 1)
    out = y0.copy()
    if interior.any():
        r = rows[interior]
        j = jm[interior]
        ym = A2[r, j - 1]
        yp = A2[r, j + 1]
        den = ym + yp - 2.0 * A2[r, j]
        good = den > 0
        corr = np.zeros_like(ym)
        corr[good] = ((yp - ym)[good]) ** 2 / (8.0 * den[good])
        out[interior] = np.maximum(A2[r, j] - corr, 0.0)
    return out


class _BrownianDriver:
    """Plain SLE_kappa driving increments."""

    def __init__(self, n: int, kappa: float, rng):
        self.kappa = kappa
        self.rng = rng

    def dt_cap(self, alive_idx) -> float | np.ndarray:
        return np.inf

    def step(self, dt: np.ndarray, alive_idx) -> np.ndarray:
        return self.rng.standard_normal(dt.shape) * np.sqrt(self.kappa * dt)

    def compact(self, keep) -> None:
        pass


class _BesselDriver:
    """Chordal SLE_kappa(rho) increments (left: O <= W, W = Z + O; right mirror).

    For Bessel dimension d >= 2 (no boundary visits) Z^2/kappa is advanced
    by exact squared-Bessel transitions and O by the trapezoid of -2/Z.
    For d < 2, Z touches 0 and any quadrature of 1/Z across excursions is
    floor-dependent, so the implicit Bessel step is used instead:
        Z' = (S + sqrt(S^2 + 4(rho+2) dt))/2,  S = Z + sqrt(kappa) dB,
    whose summed recursion gives the exact discrete identity
        O = -2 (Z_t - sqrt(kappa) B_t)/(rho+2)
    with no regularization (Z' >= sqrt((rho+2) dt) automatically).
    """

    def __init__(self, n: int, kappa: float, rho: float, side: str, rng):
        self.kappa = kappa
        self.rho = rho
        self.sign = 1.0 if side == "left" else -1.0
        self.dim = 1.0 + 2.0 * (rho + 2.0) / kappa
        self.exact = self.dim >= 2.0
        self.rng = rng
        self.y = np.zeros(n)  # Z^2/kappa when exact
        self.z = np.zeros(n)  # Z when implicit
        self.b = np.zeros(n)  # sqrt(kappa) B accumulation when implicit
        self.o = np.zeros(n)
        self.w = np.zeros(n)

    def dt_cap(self, alive_idx) -> np.ndarray:
        if self.exact:
            z = np.sqrt(self.kappa * self.y)
            return np.maximum(0.02 * z * z / self.kappa, 1e-7)
        # the implicit step is stable through Z = 0; the cap only bounds the
        # weak error of the force-track quadrature near the boundary
        return np.maximum(0.02 * self.z**2 / self.kappa, 1e-5)

    def step(self, dt: np.ndarray, alive_idx) -> np.ndarray:
        if self.exact:
            z_old = np.sqrt(self.kappa * self.y)
            self.y = _besq_transition(self.y, self.dim, dt, self.rng)
            z_new = np.sqrt(self.kappa * self.y)
            floor = 0.05 * np.sqrt(self.kappa * dt)
            self.o = self.o - dt * (_inv_z(z_old, floor) + _inv_z(z_new, floor))
        else:
            db = np.sqrt(self.kappa * dt) * self.rng.standard_normal(dt.shape)
            s = self.z + db
            z_new = 0.5 * (s + np.sqrt(s * s + 4.0 * (self.rho + 2.0) * dt))
            self.b = self.b + db
            self.z = z_new
            self.o = -2.0 * (z_new - self.b) / (self.rho + 2.0)
        w_new = z_new + self.o
        dw = self.sign * (w_new - self.w)
        self.w = w_new
        return dw

    def compact(self, keep) -> None:
        self.y = self.y[keep]
        self.z = self.z[keep]
        self.b = self.b[keep]
        self.o = self.o[keep]
        self.w = self.w[keep]


def chordal_hull_avoidance(
    hull: HullSpec,
    n: int,
    seed: int,
    stream: int = 0,
    kappa: float = 8.0 / 3.0,
    rho: Optional[float] = None,
    side: str = "left",
    n_points: int = 96,
    step_factor: float = 18.0,
    swallow_rel: float = 1e-3,
    stop_residual: float = 2e-4,
    stop_exponent: float = 5.0 / 8.0,
    max_iter: int = 200_000,
    hull_points: Optional[np.ndarray] = None,
) -> AvoidanceStats:
    """Monte Carlo hit/avoid counts of chordal SLE against a hull.

    The returned mean_residual bounds the probability mass left undecided
    by the finite-horizon stopping rule.
    """
    rng = stream_generator(seed, stream, "chordal-avoidance")
    if hull_points is not None:
        pts0 = np.asarray(hull_points, dtype=complex)
        Z = pts0.copy() if pts0.ndim == 2 else np.tile(pts0, (n, 1))
        if Z.shape[0] != n:
            raise ValueError("per-path hull_points must have n rows")
    else:
        Z = np.tile(_hull_transport_points(hull, n_points), (n, 1))
    W = np.zeros(n)
    if rho is None:
        driver = _BrownianDriver(n, kappa, rng)
    else:
        driver = _BesselDriver(n, kappa, rho, side, rng)

    hits = 0
    resolved = 0
    residual_sum = 0.0
    m = n
    it = 0
    while m > 0 and it < max_iter:
        it += 1
        D2 = _interp_min_sq(np.abs(Z - W[:, None]) ** 2)
        lo = Z.real.min(axis=1)
        hi = Z.real.max(axis=1)
        mc = 0.5 * (lo + hi)
        r = np.abs(Z - mc[:, None]).max(axis=1)
        swallowed = D2 < (swallow_rel * r) ** 2
        dc = np.abs(mc - W)
        far = dc > r
        ratio2 = np.where(far, (r / np.where(far, dc, 1.0)) ** 2, 1.0)
        resid = np.where(
            far, 1.0 - np.power(np.maximum(1.0 - ratio2, 0.0), stop_exponent), 1.0
        )
        escaped = (~swallowed) & (resid < stop_residual) & (r < 0.1 * dc)

        n_sw = int(swallowed.sum())
        n_esc = int(escaped.sum())
        if n_sw or n_esc:
            hits += n_sw
            resolved += n_sw + n_esc
            residual_sum += float(resid[escaped].sum())
            keep = ~(swallowed | escaped)
            Z = Z[keep]
            W = W[keep]
            driver.compact(keep)
            m = len(W)
            if m == 0:
                break
            D2 = D2[keep]

        dt = np.minimum(D2 / step_factor**2, driver.dt_cap(None))
        dt = np.maximum(dt, 1e-12)
        d = Z - W[:, None]
        Z = W[:, None] + _sqrt_flow_arr(d * d + 4.0 * dt[:, None], d)
        W = W + driver.step(dt, None)

    unresolved = n - resolved
    hits += unresolved  # count stragglers as hits (conservative, reported)
    return AvoidanceStats(hits, n, residual_sum / max(n, 1), unresolved)


# ---------------------------------------------------------------------------
# radial hull-avoidance ensemble
# ---------------------------------------------------------------------------

def _radial_rhs_many(z: np.ndarray, eiw: np.ndarray) -> np.ndarray:
    return z * (eiw + z) / (eiw - z)


def _radial_rk4_many(z: np.ndarray, eiw: np.ndarray, dt: np.ndarray, substeps: int = 2):
    h = (dt / substeps)[:, None]
    for _ in range(substeps):
        k1 = _radial_rhs_many(z, eiw)
        k2 = _radial_rhs_many(z + 0.5 * h * k1, eiw)
        k3 = _radial_rhs_many(z + 0.5 * h * k2, eiw)
        k4 = _radial_rhs_many(z + h * k3, eiw)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return z


class _RadialBrownianDriver:
    def __init__(self, n: int, kappa: float, rng):
        self.kappa = kappa
        self.rng = rng

    def dt_cap(self) -> float:
        return np.inf

    def step(self, dt: np.ndarray) -> np.ndarray:
        return self.rng.standard_normal(dt.shape) * np.sqrt(self.kappa * dt)

    def compact(self, keep) -> None:
        pass


class _RadialRhoDriver:
    """Radial SLE_kappa(rho) angle dynamics, Euler with gap-scaled caps."""

    def __init__(self, n: int, kappa: float, rho: float, side: str, rng):
        self.kappa = kappa
        self.rho = rho
        self.rng = rng
        x0 = (
            2.0 * math.pi - RADIAL_FORCE_OFFSET
            if side == "left"
            else RADIAL_FORCE_OFFSET
        )
        self.w = np.zeros(n)
        self.o = np.full(n, x0)

    def _gap_scale(self) -> np.ndarray:
        gap = np.abs(self.w - self.o) % (2.0 * math.pi)
        return np.minimum(gap, 2.0 * math.pi - gap)

    def dt_cap(self) -> np.ndarray:
        s = np.maximum(self._gap_scale(), 1e-4)
        return np.maximum(0.02 * s * s / max(self.kappa, abs(self.rho) + 2.0), 1e-8)

    def step(self, dt: np.ndarray) -> np.ndarray:
        w_old = self.w.copy()
        cot = 1.0 / np.tan((self.w - self.o) / 2.0)
        dB = self.rng.standard_normal(dt.shape)
        self.w = self.w + np.sqrt(self.kappa * dt) * dB + 0.5 * self.rho * cot * dt
        self.o = self.o - cot * dt
        return self.w - w_old

    def compact(self, keep) -> None:
        self.w = self.w[keep]
        self.o = self.o[keep]


def radial_hull_avoidance(
    hull_points: np.ndarray,
    n: int,
    seed: int,
    stream: int = 0,
    kappa: float = 8.0 / 3.0,
    rho: Optional[float] = None,
    side: str = "left",
    step_factor: float = 18.0,
    swallow_rel: float = 1e-3,
    stop_residual: float = 2e-4,
    stop_exponent: float = 5.0 / 8.0,
    t_min: float = 1.0,
    t_max: float = 14.0,
    max_iter: int = 200_000,
) -> AvoidanceStats:
    """Monte Carlo hit/avoid counts of radial SLE from 1 to 0 against a hull.

    ``hull_points`` is the boundary polyline of A in the closed unit disc,
    attached to the unit circle (first and last points on the circle when
    the hull is a region; a curve hull just starts on the circle).
    """
    rng = stream_generator(seed, stream, "radial-avoidance")
    pts0 = np.asarray(hull_points, dtype=complex)
    Z = np.tile(pts0, (n, 1))
    W = np.zeros(n)
    t = np.zeros(n)
    if rho is None or rho == 0.0:
        driver = _RadialBrownianDriver(n, kappa, rng)
    else:
        driver = _RadialRhoDriver(n, kappa, rho, side, rng)

    hits = 0
    resolved = 0
    residual_sum = 0.0
    it = 0
    m = n
    while m > 0 and it < max_iter:
        it += 1
        eiw = np.exp(1j * W)
        D2 = _interp_min_sq(np.abs(Z - eiw[:, None]) ** 2)
        # enclosing disc of the hull image, centered at its circle attachment
        # (the transported point of largest modulus stays on the circle)
        mc = Z[np.arange(m), np.argmax(np.abs(Z), axis=1)]
        mc = mc / np.maximum(np.abs(mc), 1e-300)
        r = np.abs(Z - mc[:, None]).max(axis=1)
        dc = np.abs(mc - eiw)
        swallowed = D2 < (swallow_rel * np.maximum(r, 1e-12)) ** 2
        far = dc > r
        ratio2 = np.where(far, (r / np.where(far, dc, 1.0)) ** 2, 1.0)
        resid = np.where(
            far, 1.0 - np.power(np.maximum(1.0 - ratio2, 0.0), stop_exponent), 1.0
        )
        escaped = (~swallowed) & (
            ((resid < stop_residual) & (r < 0.1 * dc) & (t > t_min)) | (t > t_max)
        )
        residual_contrib = np.where(t[escaped] > t_max, np.minimum(resid[escaped], 1.0), resid[escaped])

        n_sw = int(swallowed.sum())
        n_esc = int(escaped.sum())
        if n_sw or n_esc:
            hits += n_sw
            resolved += n_sw + n_esc
            residual_sum += float(residual_contrib.sum())
            keep = ~(swallowed | escaped)
            Z = Z[keep]
            W = W[keep]
            t = t[keep]
            driver.compact(keep)
            m = len(W)
            if m == 0:
                break
            D2 = D2[keep]
            eiw = eiw[keep]

        dt = np.minimum(D2 / step_factor**2, driver.dt_cap())
        dt = np.clip(dt, 1e-10, 0.02)
        Z = _radial_rk4_many(Z, eiw[:, None], dt)
        W = W + driver.step(dt)
        t = t + dt

    unresolved = n - resolved
    hits += unresolved
    return AvoidanceStats(hits, n, residual_sum / max(n, 1), unresolved)


# ---------------------------------------------------------------------------
# radial -> chordal Radon-Nikodym weight
# ---------------------------------------------------------------------------

def radial_chordal_weight(
    driving: DrivingFunction,
    y: float,
    kappa: float,
    stop_radius: float,
    n_arc: int = 128,
) -> float:
    """M_{tau_R}(iy) / M_0(iy) along one chordal trace.

    tau_R is the first time the trace leaves U(0, R), detected as the
    swallow time of the semicircle of radius R under the flow.  Raises if
    iy is swallowed first or the trace never exits within the horizon.
    """
    rho = 6.0 - kappa
    th = np.linspace(0.0, math.pi, n_arc)
    arc = stop_radius * np.exp(1j * th)
    state = np.concatenate([arc, [1j * y]])
    deriv = 1.0 + 0j
    dts, ws = driving.segments_to(driving.horizon)
    for dt, w in zip(dts, ws):
        d = state - w
        D2 = float(np.min(np.abs(d[:-1]) ** 2))
        # one step's slit reaches height 2 sqrt(dt); detect the crossing at
        # that scale (the weight is continuous in the exit time)
        if D2 < max(2.0 * math.sqrt(dt), 1e-4 * stop_radius) ** 2:
            g = state[-1]
            num = (
                abs(deriv) ** (rho * (rho + 8.0 - 2.0 * kappa) / (8.0 * kappa))
                * (g.imag / y) ** (rho * rho / (8.0 * kappa))
                * (abs(g - w) / y) ** (rho / kappa)
            )
            return float(num)
        if abs(d[-1]) ** 2 < (1e-6 * y) ** 2:
            raise ValueError("reference point iy swallowed before exit")
        new = w + _sqrt_flow_arr(d * d + 4.0 * dt, d)
        deriv = deriv * d[-1] / (new[-1] - w)
        state = new
    raise ValueError("trace did not exit the stopping radius within the horizon")


def radial_weight_ensemble(
    n: int,
    y: float,
    kappa: float,
    stop_radius: float,
    seed: int,
    stream: int = 0,
    step_factor: float = 18.0,
    n_arc: int = 96,
    max_iter: int = 400_000,
) -> np.ndarray:
    """Monte Carlo sample of M_{tau_R}(iy)/M_0(iy) over chordal SLE_kappa traces.

    Vectorized across paths with adaptive steps keyed to the distance
    between the tip image and the exit arc image.
    """
    rng = stream_generator(seed, stream, "radial-weight")
    rho = 6.0 - kappa
    th = np.linspace(0.0, math.pi, n_arc)
    arc0 = stop_radius * np.exp(1j * th)
    Z = np.tile(arc0, (n, 1))
    G = np.full(n, 1j * y)
    DG = np.ones(n, dtype=complex)
    W = np.zeros(n)
    out = np.full(n, np.nan)
    idx = np.arange(n)
    it = 0
    while len(idx) > 0 and it < max_iter:
        it += 1
        D2 = _interp_min_sq(np.abs(Z - W[:, None]) ** 2)
        done = D2 < (1e-4 * stop_radius) ** 2
        if done.any():
            g = G[done]
            w = W[done]
            out[idx[done]] = (
                np.abs(DG[done]) ** (rho * (rho + 8.0 - 2.0 * kappa) / (8.0 * kappa))
                * (g.imag / y) ** (rho * rho / (8.0 * kappa))
                * (np.abs(g - w) / y) ** (rho / kappa)
            )
            keep = ~done
            Z, G, DG, W, idx, D2 = Z[keep], G[keep], DG[keep], W[keep], idx[keep], D2[keep]
            if len(idx) == 0:
                break
        dt = np.maximum(D2 / step_factor**2, 1e-12)
        d = Z - W[:, None]
        Z = W[:, None] + _sqrt_flow_arr(d * d + 4.0 * dt[:, None], d)
        dg = G - W
        G_new = W + _sqrt_flow_arr(dg * dg + 4.0 * dt, dg)
        DG = DG * dg / (G_new - W)
        G = G_new
        W = W + rng.standard_normal(len(W)) * np.sqrt(kappa * dt)
    return out[~np.isnan(out)]
