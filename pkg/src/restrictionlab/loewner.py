"""Chordal and radial Loewner evolutions.

Chordal stepping uses the exact per-step solution for piecewise-constant
driving: over a step of capacity dt with driving value w the map is
z -> w + sqrt((z - w)^2 + 4 dt), i.e. a vertical-slit removal.  This is
unconditionally stable at the singularity and keeps capacity bookkeeping
exact.  Radial stepping has no elementary exact step, so it uses
fourth-order Runge-Kutta with step-doubling control.

The zipper recovers a driving function from a hull boundary polyline by
vertex-by-vertex peeling with recentered vertical-slit maps.  Each peeled
vertex lands exactly on the real axis, which makes trace(zipper(P)) exact
at the vertices of P; between vertices the error is set by the vertex
spacing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .conformal import (
    DiscHull,
    HullSpec,
    LoewnerHull,
    MapChain,
    Moebius,
    PolylineHull,
    SlitHull,
    VerticalSlit,
    cayley_disc_to_half,
    cayley_half_to_disc,
    moebius_fix_0_i,
)

__all__ = [
    "DrivingFunction",
    "PathSample",
    "FlowResult",
    "chordal_flow",
    "chordal_trace",
    "hcap",
    "zipper_driving",
    "zipper_chain",
    "radial_flow",
    "radial_trace",
    "radial_derivative_at_origin",
    "phi_from_hull",
    "chordal_step",
    "chordal_step_inverse",
    "radial_step_interior",
    "radial_step_boundary_angle",
]

SWALLOW_TOL = 1e-6


@dataclass(frozen=True)
class DrivingFunction:
    """Piecewise-constant driving on a strictly increasing capacity-time grid.

    The driving takes the value ``values[k]`` on ``[times[k], times[k+1])``.
    For radial geometry the values are angles (continuous lifts, not reduced
    mod 2 pi).  ``force_track`` carries O_t for SLE_kappa(rho) drivings.
    """

    times: np.ndarray
    values: np.ndarray
    geometry: str = "chordal"
    force_track: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a nonempty 1-d grid")
        if times[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if values.shape != times.shape:
            raise ValueError("values and times must have equal length")
        if self.geometry not in ("chordal", "radial"):
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.force_track is not None:
            ft = np.asarray(self.force_track, dtype=float)
            object.__setattr__(self, "force_track", ft)
            if ft.shape != times.shape:
                raise ValueError("force_track must match the time grid")

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @classmethod
    def constant(
        cls, value: float, horizon: float, geometry: str = "chordal", n: int = 2
    ) -> "DrivingFunction":
        t = np.linspace(0.0, horizon, max(2, n))
        return cls(t, np.full_like(t, value), geometry)

    def segments_to(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """(dt_k, w_k) covering [0, t]; last segment clipped to end at t."""
        if t < 0 or t > self.horizon + 1e-12:
            raise ValueError(f"time {t} outside driving horizon {self.horizon}")
        t = min(t, self.horizon)
        k = int(np.searchsorted(self.times, t, side="left"))
        cut = self.times[:k]
        edges = np.append(cut, t)
        dts = np.diff(edges)
        ws = self.values[: len(dts)]
        keep = dts > 0
        return dts[keep], ws[keep]

    def value_at(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.values) - 1)
        return float(self.values[k])

    def concat(self, other: "DrivingFunction") -> "DrivingFunction":
        """Run self, then other (times shifted by self.horizon).

        The last value of ``self`` is only the endpoint sentinel of the
        left-constant convention, so the joined grid takes other.values[0]
        on the first appended segment.
        """
        if other.geometry != self.geometry:
            raise ValueError("geometry mismatch")
        t = np.concatenate([self.times, other.times[1:] + self.horizon])
        v = np.concatenate([self.values[:-1], other.values])
        return DrivingFunction(t, v, self.geometry)


@dataclass(frozen=True)
class PathSample:
    """Finite polyline with capacity timestamps."""

    points: np.ndarray
    times: np.ndarray
    geometry: str = "chordal"

    def __post_init__(self) -> None:
        object.__setattr__(self, "points", np.asarray(self.points, dtype=complex))
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if self.points.shape != self.times.shape:
            raise ValueError("points and times must have equal length")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("path points must be finite")


@dataclass(frozen=True)
class FlowResult:
    value: complex
    swallowed: bool
    swallow_time: Optional[float] = None


# ---------------------------------------------------------------------------
# Chordal flow
# ---------------------------------------------------------------------------

def _sqrt_flow(u: np.ndarray, side: np.ndarray) -> np.ndarray:
    """Branch of sqrt landing in the closed upper half-plane.

    Real outputs inherit the sign of ``side`` (which side of the slit base
    the point lies on).
    """
    w = np.sqrt(u.astype(complex, copy=False))
    w = np.where(w.imag < 0.0, -w, w)
    real = w.imag == 0.0
    if np.any(real):
        s = np.where(np.real(side) >= 0.0, 1.0, -1.0)
        w = np.where(real, s * np.abs(w.real), w)
    return w


def chordal_step(z, w: float, dt: float):
    """Exact one-step chordal map g for constant driving w over capacity dt."""
    z = np.asarray(z, dtype=complex)
    d = z - w
    return w + _sqrt_flow(d * d + 4.0 * dt, d)


def chordal_step_inverse(g, w: float, dt: float):
    """Inverse of chordal_step (adds the slit back)."""
    g = np.asarray(g, dtype=complex)
    d = g - w
    return w + _sqrt_flow(d * d - 4.0 * dt, d)


def chordal_flow(
    driving: DrivingFunction,
    z: complex,
    t: float,
    swallow_tol: float = SWALLOW_TOL,
) -> FlowResult:
    """g_t(z) under the driving, with swallow detection.

    A point is swallowed during a step when it lies within ``swallow_tol``
    of the slit grown by that step (the segment from w to w + 2i sqrt(dt)
    in map coordinates); the within-step swallow time is recovered from the
    exact capacity of the sub-slit reaching the point.
    """
    if driving.geometry != "chordal":
        raise ValueError("chordal_flow requires a chordal driving")
    if not np.isfinite(z):
        raise ValueError("z must be finite")
    dts, ws = driving.segments_to(t)
    g = complex(z)
    elapsed = 0.0
    for dt, w in zip(dts, ws):
        d = g - w
        tip = 2.0 * math.sqrt(dt)
        if abs(d.real) <= swallow_tol and -swallow_tol <= d.imag <= tip + swallow_tol:
            return FlowResult(g, True, elapsed + min(dt, d.imag**2 / 4.0))
        g = complex(chordal_step(g, w, dt))
        elapsed += dt
    if abs(g - driving.value_at(t)) < swallow_tol:
        return FlowResult(g, True, elapsed)
    return FlowResult(g, False, None)


def chordal_trace(
    driving: DrivingFunction, sample_times: Sequence[float]
) -> PathSample:
    """Tips gamma(t) = g_t^{-1}(W_t) at the requested times.

    Backward composition of inverse slit steps, vectorized over sample
    times (each full segment is applied to every later seed at once).
    """
    if driving.geometry != "chordal":
        raise ValueError("chordal_trace requires a chordal driving")
    ts = np.asarray(sample_times, dtype=float)
    if ts.size == 0:
        return PathSample(np.empty(0, complex), ts)
    if np.any(ts < 0) or np.any(ts > driving.horizon + 1e-12):
        raise ValueError("sample times outside driving horizon")
    order = np.argsort(ts)[::-1]
    times = driving.times
    values = driving.values
    nseg = len(times) - 1
    # a knot time belongs to the segment it terminates, so the seed uses that
    # segment's driving value; this makes trace o zipper exact at vertices
    seg_of = np.clip(np.searchsorted(times, ts[order], side="left") - 1, 0, nseg - 1)

    active = np.empty(0, dtype=complex)
    out = np.empty_like(ts, dtype=complex)
    ptr = 0
    for k in range(nseg, 0, -1):
        kk = k - 1
        while ptr < len(order) and seg_of[ptr] == kk:
            t_m = ts[order[ptr]]
            w = values[kk]
            dt_part = t_m - times[kk]
            seed = complex(w)
            if dt_part > 0:
                seed = complex(chordal_step_inverse(seed, w, dt_part))
            active = np.append(active, seed)
            ptr += 1
        if kk > 0:
            dt_full = times[kk] - times[kk - 1]
            active = chordal_step_inverse(active, values[kk - 1], dt_full)
    out[order[: len(active)]] = active
    return PathSample(out, ts)


# ---------------------------------------------------------------------------
# Zipper: polyline -> driving / map chain
# ---------------------------------------------------------------------------

def _validate_arc(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    if pts.size < 2:
        raise ValueError("polyline needs at least two points")
    if abs(pts[0].imag) > 1e-9:
        raise ValueError("polyline must start on the real axis")
    if np.any(pts[1:-1].imag <= 0):
        raise ValueError("interior polyline vertices must lie in the upper half-plane")
    if _polyline_self_intersects(pts):
        raise ValueError("polyline self-intersects; not a simple arc")
    return pts


def _polyline_self_intersects(pts: np.ndarray) -> bool:
    """Crude O(n^2) check that non-adjacent segments do not cross."""
    n = len(pts) - 1
    if n < 3:
        return False
    a, b = pts[:-1], pts[1:]
    for i in range(n - 2):
        j = np.arange(i + 2, n)
        if _segments_cross(a[i], b[i], a[j], b[j]).any():
            return True
    return False


def _segments_cross(p1, p2, q1, q2) -> np.ndarray:
    def orient(a, b, c):
        return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (
            c.real - a.real
        )

    o1 = orient(p1, p2, q1)
    o2 = orient(p1, p2, q2)
    o3 = orient(q1, q2, p1)
    o4 = orient(q1, q2, p2)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def zipper_chain(points: Sequence[complex], validate: bool = True) -> MapChain:
    """Hydrodynamic uniformizer of the hull bounded by the polyline.

    Peels vertices one at a time with the recentered vertical-slit map
    F_k(z) = u_k + sqrt((z - u_k)^2 + v_k^2), where u_k + i v_k is the
    image of vertex k under the maps applied so far.
    """
    if validate:
        pts = _validate_arc(np.asarray(points, dtype=complex))
    else:
        pts = np.asarray(points, dtype=complex)
    work = pts[1:].copy()
    maps: list[VerticalSlit] = []
    for k in range(len(work)):
        w = work[k]
        u, v = float(w.real), float(max(w.imag, 0.0))
        if v <= 0.0:
            continue
        m = VerticalSlit(u, v)
        maps.append(m)
        if k + 1 < len(work):
            work[k + 1 :] = m.apply(work[k + 1 :])
    return MapChain(tuple(maps), normalization="chordal-hydrodynamic")


def zip_eval_boundary(
    points: np.ndarray, xs: Sequence[float]
) -> tuple[np.ndarray, np.ndarray]:
    """(h(x), h'(x)) at real points for the zipper uniformizer of the polyline.

    Fused peel-and-evaluate: the evaluation points ride along the peeling
    loop, so no chain object is built or re-traversed.
    """
    pts = np.asarray(points, dtype=complex)
    work = pts[1:].copy()
    ev = np.asarray(xs, dtype=float).copy()
    dv = np.ones_like(ev)
    for k in range(len(work)):
        w = work[k]
        u, v = float(w.real), float(w.imag)
        if v <= 0.0:
            continue
        du = ev - u
        s = np.sign(du) * np.sqrt(du * du + v * v)
        dv *= du / s
        ev = u + s
        if k + 1 < len(work):
            d = work[k + 1 :] - u
            work[k + 1 :] = u + _sqrt_flow(d * d + v * v, d)
    return ev, dv


def zipper_driving(points: Sequence[complex]) -> DrivingFunction:
    """Driving function whose Loewner hull approximates the polyline."""
    chain = zipper_chain(points)
    dts = np.array([m.capacity for m in chain.maps])
    ws = np.array([m.x for m in chain.maps])
    if len(ws) == 0:
        base = float(np.real(np.asarray(points, dtype=complex)[0]))
        return DrivingFunction(np.array([0.0]), np.array([base]), "chordal")
    times = np.concatenate([[0.0], np.cumsum(dts)])
    values = np.append(ws, ws[-1])
    return DrivingFunction(times, values, "chordal")


def hcap(hull: HullSpec) -> float:
    """Half-plane capacity (chordal hulls) or log-capacity (radial Loewner hulls)."""
    if isinstance(hull, SlitHull):
        return hull.y**2 / 4.0
    if isinstance(hull, DiscHull):
        return hull.eps**2 / 2.0
    if isinstance(hull, LoewnerHull):
        return hull.horizon()
    if isinstance(hull, PolylineHull):
        pts = np.asarray(hull.points, dtype=complex)
        if len(pts) == 2 and abs(pts[0].imag) < 1e-9 and abs(pts[1].imag) < 1e-9:
            return 0.0
        return zipper_chain(pts).hcap
    raise TypeError(f"unsupported hull {hull!r}")


# ---------------------------------------------------------------------------
# Radial flow
# ---------------------------------------------------------------------------

def _radial_rhs(z: np.ndarray, eiw: complex) -> np.ndarray:
    return z * (eiw + z) / (eiw - z)


def radial_step_interior(
    z: np.ndarray, w: float, dt: float, tol: float = 1e-10
) -> np.ndarray:
    """RK4 with step doubling for interior points over one constant-driving step."""
    z = np.asarray(z, dtype=complex)
    eiw = complex(math.cos(w), math.sin(w))
    n = 1
    prev = None
    while True:
        cur = z.copy()
        h = dt / n
        for _ in range(n):
            k1 = _radial_rhs(cur, eiw)
            k2 = _radial_rhs(cur + 0.5 * h * k1, eiw)
            k3 = _radial_rhs(cur + 0.5 * h * k2, eiw)
            k4 = _radial_rhs(cur + h * k3, eiw)
            cur = cur + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if prev is not None:
            err = np.max(np.abs(cur - prev)) if cur.size else 0.0
            if err < tol * max(1.0, dt) or n >= 4096:
                return cur
        prev = cur
        n *= 2


def radial_step_boundary_angle(
    theta: np.ndarray, w: float, dt: float, tol: float = 1e-10
) -> np.ndarray:
    """Boundary points tracked as angles: d theta/dt = cot((theta - w)/2)."""
    theta = np.asarray(theta, dtype=float)

    def rhs(th):
        return 1.0 / np.tan((th - w) / 2.0)

    n = 1
    prev = None
    while True:
        cur = theta.copy()
        h = dt / n
        for _ in range(n):
            k1 = rhs(cur)
            k2 = rhs(cur + 0.5 * h * k1)
            k3 = rhs(cur + 0.5 * h * k2)
            k4 = rhs(cur + h * k3)
            cur = cur + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if prev is not None:
            err = np.max(np.abs(cur - prev)) if cur.size else 0.0
            if err < tol * max(1.0, dt) or n >= 4096:
                return cur
        prev = cur
        n *= 2


def radial_flow(
    driving: DrivingFunction,
    z: complex,
    t: float,
    swallow_tol: float = SWALLOW_TOL,
) -> FlowResult:
    """g_t(z) for the radial Loewner ODE; |g'_t(0)| = e^t by construction."""
    if driving.geometry != "radial":
        raise ValueError("radial_flow requires a radial driving")
    if not np.isfinite(z) or abs(z) > 1.0 + 1e-9:
        raise ValueError("z must lie in the closed unit disc")
    dts, ws = driving.segments_to(t)
    g = np.array([complex(z)])
    elapsed = 0.0
    for dt, w in zip(dts, ws):
        eiw = complex(math.cos(w), math.sin(w))
        if abs(g[0] - eiw) < swallow_tol:
            return FlowResult(complex(g[0]), True, elapsed)
        g = radial_step_interior(g, w, dt)
        if abs(g[0]) > 1.0:
            g = g / abs(g[0]) if abs(g[0]) - 1.0 < 1e-8 else g
        elapsed += dt
    w_end = driving.value_at(t)
    if abs(g[0] - complex(math.cos(w_end), math.sin(w_end))) < swallow_tol:
        return FlowResult(complex(g[0]), True, elapsed)
    return FlowResult(complex(g[0]), False, None)


def radial_derivative_at_origin(driving: DrivingFunction, t: float) -> float:
    """|g'_t(0)| = e^t, exact for the capacity parameterization."""
    if driving.geometry != "radial":
        raise ValueError("radial driving required")
    if t < 0 or t > driving.horizon + 1e-12:
        raise ValueError("t outside horizon")
    return math.exp(t)


def _radial_backward_segment(z: complex, w: float, dt: float) -> complex:
    """Integrate the radial ODE backward over one constant-driving segment.

    Steps shrink quadratically with the distance to the boundary
    singularity e^{iw}, which repels backward trajectories into the domain.
    """
    eiw = complex(math.cos(w), math.sin(w))
    remaining = dt
    cur = z
    while remaining > 0.0:
        d = abs(eiw - cur)
        h = min(remaining, max(1e-12, 0.02 * d * d), 1e-3)
        hh = -h
        k1 = cur * (eiw + cur) / (eiw - cur)
        z2 = cur + 0.5 * hh * k1
        k2 = z2 * (eiw + z2) / (eiw - z2)
        z3 = cur + 0.5 * hh * k2
        k3 = z3 * (eiw + z3) / (eiw - z3)
        z4 = cur + hh * k3
        k4 = z4 * (eiw + z4) / (eiw - z4)
        cur = cur + (hh / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        remaining -= h
    return cur


def radial_trace(
    driving: DrivingFunction,
    sample_times: Sequence[float],
    offset: float = 1e-7,
) -> PathSample:
    """Tips gamma(t) = g_t^{-1}(e^{i W_t}) by backward integration.

    For each sample time, integrates the radial ODE backward from
    (1 - offset) e^{i W_t}; the offset regularizes the start at the
    boundary singularity and contributes O(offset) error.
    """
    if driving.geometry != "radial":
        raise ValueError("radial_trace requires a radial driving")
    ts = np.asarray(sample_times, dtype=float)
    out = np.empty(ts.shape, dtype=complex)
    for i, t in enumerate(ts):
        if t < 0 or t > driving.horizon + 1e-12:
            raise ValueError("sample time outside horizon")
        if t == 0.0:
            w0 = float(driving.values[0])
            out[i] = complex(math.cos(w0), math.sin(w0))
            continue
        dts, ws = driving.segments_to(t)
        cur = (1.0 - offset) * complex(math.cos(ws[-1]), math.sin(ws[-1]))
        for dt, w in zip(dts[::-1], ws[::-1]):
            cur = _radial_backward_segment(cur, w, dt)
        out[i] = cur
    return PathSample(out, ts, geometry="radial")


# ---------------------------------------------------------------------------
# Uniformizers from hulls
# ---------------------------------------------------------------------------

def _chain_from_chordal_driving(driving: DrivingFunction) -> MapChain:
    """g_T as a chain of exact slit steps (hydrodynamic normalization)."""
    dts, ws = driving.segments_to(driving.horizon)
    maps = tuple(VerticalSlit(w, 2.0 * math.sqrt(dt)) for dt, w in zip(dts, ws))
    return MapChain(maps, normalization="chordal-hydrodynamic")


def phi_from_hull(
    hull: HullSpec,
    normalization: str = "chordal-fix-0-inf",
    n_vertices: int = 400,
) -> MapChain:
    """Uniformizer Phi_A with the requested fixed points.

    chordal-fix-0-inf : H \\ A -> H fixing 0 and infinity with slope 1.
    chordal-hydrodynamic : normalized at infinity only.
    radial-fix-0-1 : U \\ A -> U fixing 0 (interior) and 1 (boundary).
    """
    if normalization in ("chordal-fix-0-inf", "chordal-hydrodynamic"):
        if isinstance(hull, DiscHull):
            base = MapChain((hull.phi().maps[0],))
        elif isinstance(hull, SlitHull):
            base = MapChain((VerticalSlit(hull.x, hull.y),))
        elif isinstance(hull, LoewnerHull):
            if hull.driving.geometry != "chordal":
                raise ValueError("chordal normalization needs a chordal hull")
            base = _chain_from_chordal_driving(hull.driving)
        elif isinstance(hull, PolylineHull):
            base = zipper_chain(np.asarray(hull.points, dtype=complex))
        else:
            raise TypeError(f"unsupported hull {hull!r}")
        if normalization == "chordal-hydrodynamic":
            return base
        val0 = complex(base.apply(0.0))
        if abs(val0.imag) > 1e-9:
            raise ValueError("hull swallows the origin; cannot fix 0")
        return MapChain(
            base.maps + (Moebius(1, -val0, 0, 1),), normalization="chordal-fix-0-inf"
        )

    if normalization == "radial-fix-0-1":
        if isinstance(hull, LoewnerHull):
            if hull.driving.geometry != "radial":
                raise ValueError("radial normalization needs a radial hull")
            T = hull.horizon()
            n = max(8, n_vertices)
            ts = np.linspace(0.0, T, n)
            path = radial_trace(hull.driving, ts)
            pts = path.points
            pts[0] = pts[0] / abs(pts[0])
            hull = PolylineHull(tuple(pts), geometry="radial")
        if not isinstance(hull, PolylineHull):
            raise TypeError("radial phi supports LoewnerHull and PolylineHull only")
        pts = np.asarray(hull.points, dtype=complex)
        if np.min(np.abs(pts)) < 1e-9:
            raise ValueError("hull touches the origin; cannot fix 0")
        if np.min(np.abs(pts - 1.0)) < 1e-9:
            raise ValueError("hull touches the boundary point 1; cannot fix it")
        C = cayley_disc_to_half()
        hpts = C.apply(pts)
        hpts[0] = complex(hpts[0].real, 0.0)
        psi = zipper_chain(hpts)
        p = complex(psi.apply(1j))
        q = float(np.real(psi.apply(0.0)))
        fix = moebius_fix_0_i(p, q)
        Ci = cayley_half_to_disc()
        return MapChain(
            (C,) + psi.maps + (fix, Ci), normalization="radial-fix-0-1"
        )

    raise ValueError(f"unknown normalization {normalization!r}")


def radial_log_capacity_from_polyline(points: Sequence[complex]) -> float:
    """log |Phi_A'(0)| for the 0-fixing radial uniformizer of a disc hull.

    Computed through the Cayley transport: |Phi'(0)| = |Psi'(i)| / Im Psi(i)
    where Psi is the hydrodynamic uniformizer of the Cayley image.
    """
    pts = np.asarray(points, dtype=complex)
    C = cayley_disc_to_half()
    hpts = C.apply(pts)
    hpts[0] = complex(hpts[0].real, 0.0)
    psi = zipper_chain(hpts)
    val = complex(psi.apply(1j))
    der = complex(psi.deriv(1j))
    return math.log(abs(der) / val.imag)
