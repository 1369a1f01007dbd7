"""Monte Carlo verification layer: estimators, martingale checks, and the
two-curve constructions of the chordal and radial restriction samples.

Everything here reduces a theorem to a pass/fail experiment:

* avoidance estimators compare hit frequencies against the closed-form
  reference Phi'_A(0)^beta (or its radial two-factor analogue);
* martingale checks compare ensemble means of the stopped observable
  M_{t ^ T} with M_0 at fixed checkpoint times;
* the restriction sample of exponent beta > 5/8 is built from a
  right-boundary SLE_{8/3}(rho) and a conditionally sampled left boundary
  SLE_{8/3}(rho-2) in the remaining domain, and its avoidance statistics
  are testable against the characterizing formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .conformal import (
    DiscHull,
    HullSpec,
    LoewnerHull,
    MapChain,
    PolylineHull,
    SlitHull,
    VerticalSlit,
    boundary_derivative,
)
from .exponents import radial_alpha_of_rho, rho_of_beta, xi
from .loewner import DrivingFunction, PathSample, zip_eval_boundary, zipper_chain
from .rng import stream_generator
from .sle import (
    AvoidanceStats,
    _BesselDriver,
    _BrownianDriver,
    _interp_min_sq,
    _sqrt_flow_arr,
    chordal_hull_avoidance,
    radial_hull_avoidance,
)
from . import brownian as _brownian

__all__ = [
    "Estimate",
    "RestrictionLaw",
    "estimate_avoidance",
    "check_chordal_restriction",
    "MartingaleSpec",
    "MartingaleReport",
    "martingale_check",
    "construct_P_beta",
    "construct_Q_beta",
    "fill_in",
    "fit_intersection_exponent",
    "wilson_interval",
]


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

def wilson_interval(hits: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    p = hits / n
    z2 = z * z
    center = (p + z2 / (2 * n)) / (1 + z2 / n)
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n)
    return (max(0.0, center - half), min(1.0, center + half))


@dataclass(frozen=True)
class Estimate:
    """Monte Carlo result with a 95% interval (Wilson for proportions)."""

    mean: float
    stderr: float
    n: int
    ci95: tuple[float, float]

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if not (self.ci95[0] - 1e-12 <= self.mean <= self.ci95[1] + 1e-12):
            raise ValueError("ci95 must contain the mean")

    @classmethod
    def from_counts(cls, successes: int, n: int) -> "Estimate":
        p = successes / n
        se = math.sqrt(max(p * (1 - p), 0.0) / n)
        return cls(p, se, n, wilson_interval(successes, n))

    @classmethod
    def from_values(cls, mean: float, stderr: float, n: int) -> "Estimate":
        half = 1.959963984540054 * stderr
        return cls(mean, stderr, n, (mean - half, mean + half))


@dataclass(frozen=True)
class RestrictionLaw:
    """Chordal, right-sided chordal, or radial restriction law."""

    kind: str  # 'chordal' | 'chordal-right' | 'radial'
    beta: float
    alpha: Optional[float] = None

    def __post_init__(self) -> None:
        if self.kind == "chordal":
            if self.beta < 5.0 / 8.0:
                raise ValueError("chordal restriction measures need beta >= 5/8")
        elif self.kind == "chordal-right":
            if self.beta <= 0:
                raise ValueError("right-sided laws need beta > 0")
        elif self.kind == "radial":
            if self.beta < 5.0 / 8.0:
                raise ValueError("radial restriction measures need beta >= 5/8")
            if self.alpha is not None and self.alpha > xi([self.beta]) + 1e-12:
                raise ValueError("radial laws need alpha <= xi(beta)")
        else:
            raise ValueError(f"unknown law kind {self.kind!r}")


def _phi_deriv0(hull: HullSpec) -> float:
    if isinstance(hull, (DiscHull, SlitHull)):
        return hull.phi_deriv0()
    if isinstance(hull, PolylineHull):
        return boundary_derivative(
            zipper_chain(np.asarray(hull.points, dtype=complex)), 0.0
        )
    raise TypeError(f"no closed-form Phi'(0) for {hull!r}")


def _require_right_footprint(hull: HullSpec) -> None:
    lo, _ = hull.footprint()
    if lo <= 0:
        raise ValueError("right-sided laws are tested on right-footprint hulls only")


def estimate_avoidance(
    sampler: str,
    hull: HullSpec,
    n: int,
    seed: int,
    stream: int = 0,
    **kwargs,
) -> Estimate:
    """Proportion of samples avoiding the hull, with a Wilson 95% interval.

    sampler: 'sle8/3' | 'sle8/3-rho' (kwargs rho) | 'excursion'
             (kwargs endpoints) | 'ppp' (kwargs beta) | 'radial-sle8/3'
             (hull as PolylineHull in the disc) | 'p-beta' (kwargs beta).
    """
    if n <= 0:
        raise ValueError("n must be positive")
    if sampler == "sle8/3":
        st = chordal_hull_avoidance(hull, n, seed, stream, kappa=8.0 / 3.0, **kwargs)
        return Estimate.from_counts(st.n - st.hits, st.n)
    if sampler == "sle8/3-rho":
        rho = kwargs.pop("rho")
        _require_right_footprint(hull)
        st = chordal_hull_avoidance(
            hull,
            n,
            seed,
            stream,
            kappa=8.0 / 3.0,
            rho=rho,
            side="left",
            stop_exponent=max((3 * rho * rho + 16 * rho + 20) / 32.0, 0.1),
            **kwargs,
        )
        return Estimate.from_counts(st.n - st.hits, st.n)
    if sampler == "excursion":
        mean, se, _ = _brownian.excursion_avoidance(hull, n, seed, stream, **kwargs)
        half = 1.959963984540054 * se
        return Estimate(mean, se, n, (mean - half, mean + half))
    if sampler == "ppp":
        beta = kwargs.pop("beta")
        p, se, _ = _brownian.ppp_avoidance(beta, hull, n, seed, stream)
        return Estimate.from_counts(int(round(p * n)), n)
    if sampler == "radial-sle8/3":
        pts = (
            np.asarray(hull.points, dtype=complex)
            if isinstance(hull, PolylineHull)
            else hull
        )
        st = radial_hull_avoidance(pts, n, seed, stream, kappa=8.0 / 3.0, **kwargs)
        return Estimate.from_counts(st.n - st.hits, st.n)
    if sampler == "p-beta":
        beta = kwargs.pop("beta")
        st = construct_P_beta(beta, hull, n, seed, stream, **kwargs)
        return Estimate.from_counts(st.n - st.hits, st.n)
    raise ValueError(f"unknown sampler {sampler!r}")


def check_chordal_restriction(
    law: RestrictionLaw,
    hulls: Sequence[HullSpec],
    n: int,
    seed: int,
    stream: int = 0,
) -> list[dict]:
    """Per-hull comparison of the estimated avoidance with Phi'_A(0)^beta."""
    rows = []
    for k, hull in enumerate(hulls):
        ref = _phi_deriv0(hull) ** law.beta
        if law.kind == "chordal-right":
            _require_right_footprint(hull)
            est = estimate_avoidance(
                "sle8/3-rho", hull, n, seed, stream * 1000 + k, rho=rho_of_beta(law.beta)
            )
        elif law.kind == "chordal":
            if abs(law.beta - 5.0 / 8.0) < 1e-12:
                est = estimate_avoidance("sle8/3", hull, n, seed, stream * 1000 + k)
            else:
                est = estimate_avoidance(
                    "p-beta", hull, n, seed, stream * 1000 + k, beta=law.beta
                )
        else:
            raise ValueError("radial laws use their own checker")
        ok = abs(est.mean - ref) <= 3.0 * max(est.stderr, 1e-12)
        rows.append(
            {"hull": hull, "estimate": est, "reference": ref, "pass": bool(ok)}
        )
    return rows


# ---------------------------------------------------------------------------
# martingale checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MartingaleSpec:
    """Which stopped observable to average.

    name: 'chordal-sle83'      M = h'(W)^{5/8}
          'chordal-sle83-rho'  M = h'(W)^{5/8} h'(O)^{r(3r+4)/32} (dh/dx)^{3r/8}
    """

    name: str
    rho: Optional[float] = None

    def __post_init__(self) -> None:
        if self.name not in ("chordal-sle83", "chordal-sle83-rho"):
            raise ValueError(f"unknown martingale spec {self.name!r}")
        if self.name == "chordal-sle83-rho" and (self.rho is None or self.rho <= -2):
            raise ValueError("rho > -2 required for the force-point martingale")


@dataclass(frozen=True)
class MartingaleReport:
    times: tuple[float, ...]
    means: tuple[float, ...]
    stderrs: tuple[float, ...]
    m0: float
    verdict: bool
    exclusion_rate: float
    ordering_ok_fraction: float
    bounded_ok: bool


def _image_hull_chain(points: np.ndarray) -> MapChain:
    return zipper_chain(points, validate=False)


def martingale_check(
    spec: MartingaleSpec,
    hull: HullSpec,
    n: int,
    seed: int,
    stream: int = 0,
    checkpoints: Sequence[float] = (0.1, 0.5, 1.0),
    dt: float = 1e-3,
    n_points: int = 96,
    swallow_rel: float = 1e-3,
) -> MartingaleReport:
    """Ensemble mean of M_{t ^ T} at the checkpoints versus M_0.

    h_t is realized by transporting the hull boundary under the forward
    flow and re-zipping the image polyline; hit paths contribute the limit
    value M = 0.  Pass iff |mean - M_0| <= 3 SE at every checkpoint.
    """
    kappa = 8.0 / 3.0
    rho = spec.rho
    rng = stream_generator(seed, stream, "martingale")
    pts0 = hull.boundary_polyline(n_points)
    phi = hull.phi()
    m0 = boundary_derivative(phi, 0.0) ** (
        5.0 / 8.0
        if spec.name == "chordal-sle83"
        else (3 * rho * rho + 16 * rho + 20) / 32.0
    )

    checkpoints = tuple(sorted(checkpoints))
    n_chk = len(checkpoints)
    Z = np.tile(pts0, (n, 1))
    W = np.zeros(n)
    t = np.zeros(n)
    nxt = np.zeros(n, dtype=int)  # index of the next pending checkpoint
    if spec.name == "chordal-sle83":
        driver = _BrownianDriver(n, kappa, rng)
    else:
        driver = _BesselDriver(n, kappa, rho, "left", rng)
    excluded = np.zeros(n, dtype=bool)
    vals_mat = np.zeros((n, n_chk))
    idx = np.arange(n)
    order_ok = 0
    order_total = 0
    bounded_ok = True
    step_factor = 18.0

    def evaluate(i_global: int, k_loc: int, row_Z, w_i: float, col: int) -> None:
        nonlocal order_ok, order_total, bounded_ok
        try:
            if spec.name == "chordal-sle83":
                _, dv = zip_eval_boundary(row_Z, [w_i])
                hw = float(dv[0])
                if not (0.0 < hw <= 1.0 + 1e-9):
                    raise ValueError("h'(W) out of range")
                vals_mat[i_global, col] = hw ** (5.0 / 8.0)
            else:
                o = float(driver.o[k_loc])
                ev, dv = zip_eval_boundary(row_Z, [w_i, o])
                hw, ho = float(dv[0]), float(dv[1])
                if w_i - o > 1e-12:
                    ratio = float(ev[0] - ev[1]) / (w_i - o)
                else:
                    ratio = hw
                order_ok_here = (
                    -1e-12 <= hw <= ratio + 1e-12
                    and ratio <= ho + 1e-12
                    and ho <= 1.0 + 1e-12
                )
                order_ok += int(order_ok_here)
                order_total += 1
                vals_mat[i_global, col] = (
                    hw ** (5.0 / 8.0)
                    * ho ** (rho * (3 * rho + 4) / 32.0)
                    * ratio ** (3.0 * rho / 8.0)
                )
            if vals_mat[i_global, col] > 1.0 + 1e-9:
                bounded_ok = False
        except (ValueError, FloatingPointError, ZeroDivisionError):
            excluded[i_global] = True

    max_iter = 2_000_000
    it = 0
    while len(idx) > 0 and it < max_iter:
        it += 1
        m = len(idx)
        D2 = _interp_min_sq(np.abs(Z - W[:, None]) ** 2)
        lo = Z.real.min(axis=1)
        hi = Z.real.max(axis=1)
        r = np.abs(Z - (0.5 * (lo + hi))[:, None]).max(axis=1)
        newly_hit = D2 < (swallow_rel * r) ** 2
        # hit paths keep M = 0 at every remaining checkpoint (already zeros)
        targets = np.array([checkpoints[min(j, n_chk - 1)] for j in nxt])
        at_checkpoint = (~newly_hit) & (np.abs(t - targets) < 1e-12)
        if at_checkpoint.any():
            for k_loc in np.nonzero(at_checkpoint)[0]:
                evaluate(
                    idx[k_loc], k_loc, Z[k_loc], float(W[k_loc]), int(nxt[k_loc])
                )
            nxt[at_checkpoint] += 1
        done = newly_hit | (nxt >= n_chk) | excluded[idx]
        if done.any():
            keep = ~done
            Z, W, t, nxt, idx = Z[keep], W[keep], t[keep], nxt[keep], idx[keep]
            driver.compact(keep)
            if len(idx) == 0:
                break
            D2 = D2[keep]
        targets = np.array([checkpoints[min(j, n_chk - 1)] for j in nxt])
        dt_step = np.minimum(D2 / step_factor**2, driver.dt_cap(None))
        dt_step = np.minimum(np.maximum(dt_step, 1e-12), dt)
        dt_step = np.minimum(dt_step, np.maximum(targets - t, 1e-15))
        d = Z - W[:, None]
        Z = W[:, None] + _sqrt_flow_arr(d * d + 4.0 * dt_step[:, None], d)
        W = W + driver.step(dt_step, None)
        t = t + dt_step

    keep = ~excluded
    n_eff = int(keep.sum())
    means, errs = [], []
    for col in range(n_chk):
        v = vals_mat[keep, col]
        means.append(float(v.mean()))
        errs.append(float(v.std(ddof=1) / math.sqrt(n_eff)))
    verdict = all(abs(mn - m0) <= 3.0 * e for mn, e in zip(means, errs))
    return MartingaleReport(
        tuple(checkpoints),
        tuple(means),
        tuple(errs),
        m0,
        verdict,
        1.0 - n_eff / n,
        (order_ok / order_total) if order_total else 1.0,
        bounded_ok,
    )


# ---------------------------------------------------------------------------
# two-curve constructions
# ---------------------------------------------------------------------------

def _transport_stage(
    hull_pts: np.ndarray,
    extra_real: float,
    n: int,
    seed: int,
    stream: int,
    kappa: float,
    rho: float,
    horizon: float,
    step_factor: float = 18.0,
    swallow_rel: float = 1e-3,
):
    """Run SLE^L_kappa(rho) to a fixed capacity, transporting hull points.

    Returns (points (n,P), o_left (n,), W (n,), hit flags (n,)).
    The extra real point rides along as the last column.
    """
    rng = stream_generator(seed, stream, "pbeta-stage1")
    pts0 = np.concatenate([hull_pts, [complex(extra_real)]])
    Z = np.tile(pts0, (n, 1))
    W = np.zeros(n)
    t = np.zeros(n)
    driver = _BesselDriver(n, kappa, rho, "left", rng)
    hit = np.zeros(n, dtype=bool)
    live_idx = np.arange(n)
    out = np.empty_like(Z)
    outW = np.empty(n)
    while len(live_idx) > 0:
        D2 = _interp_min_sq(np.abs(Z[:, :-1] - W[:, None]) ** 2)
        lo = Z[:, :-1].real.min(axis=1)
        hi = Z[:, :-1].real.max(axis=1)
        r = np.abs(Z[:, :-1] - (0.5 * (lo + hi))[:, None]).max(axis=1)
        newly_hit = D2 < (swallow_rel * r) ** 2
        finished = t >= horizon
        stopping = newly_hit | finished
        if stopping.any():
            gi = live_idx[stopping]
            hit[gi] = newly_hit[stopping]
            out[gi] = Z[stopping]
            outW[gi] = W[stopping]
            keep = ~stopping
            Z, W, t, live_idx = Z[keep], W[keep], t[keep], live_idx[keep]
            driver.compact(keep)
            if len(live_idx) == 0:
                break
            D2 = D2[keep]
        dt = np.minimum(D2 / step_factor**2, driver.dt_cap(None))
        dt = np.clip(dt, 1e-12, np.maximum(horizon - t, 1e-12))
        d = Z - W[:, None]
        Z = W[:, None] + _sqrt_flow_arr(d * d + 4.0 * dt[:, None], d)
        W = W + driver.step(dt, None)
        t = t + dt
    return out[:, :-1], np.real(out[:, -1]), outW, hit


def construct_P_beta(
    beta: float,
    hull: HullSpec,
    n: int,
    seed: int,
    stream: int = 0,
    horizon: float = 60.0,
    n_points: int = 96,
) -> AvoidanceStats:
    """Avoidance statistics of the two-sided restriction sample P(beta).

    The sample is the filled region between gamma^R ~ SLE^L_{8/3}(rho(beta))
    and, conditionally on it, gamma^L ~ SLE^R_{8/3}(rho-2) in the left
    component.  The second curve is sampled in the image half-plane of the
    first chain at the truncation capacity, which is the documented
    finite-horizon approximation of the conditional law.

    K hits a hull iff one of its boundary curves does, so left-footprint
    hulls are decided by gamma^L and right-footprint hulls by gamma^R.
    """
    if beta < 5.0 / 8.0:
        raise ValueError("P(beta) exists only for beta >= 5/8")
    rho = rho_of_beta(beta)
    lo, hi = hull.footprint()
    if lo > 0:
        # right-footprint hulls are decided by the right boundary alone
        return chordal_hull_avoidance(
            hull,
            n,
            seed,
            stream,
            kappa=8.0 / 3.0,
            rho=rho,
            side="left",
            stop_exponent=beta,
            n_points=n_points,
        )
    if hi >= 0:
        raise ValueError("hull must have a one-sided footprint away from 0")
    if abs(beta - 5.0 / 8.0) < 1e-12:
        # rho = 0: the sample degenerates to the SLE_{8/3} trace itself
        return chordal_hull_avoidance(
            hull, n, seed, stream, kappa=8.0 / 3.0, n_points=n_points
        )
    pts = hull.boundary_polyline(n_points)
    img, o_left, W_end, hit1 = _transport_stage(
        pts, -1e-9, n, seed, stream, 8.0 / 3.0, rho, horizon
    )
    # second stage: SLE^R_{8/3}(rho-2) from the left prime end of the base
    survivors = ~hit1
    idx = np.nonzero(survivors)[0]
    if len(idx) == 0:
        return AvoidanceStats(n, n, 0.0)
    shifted = img[idx] - o_left[idx][:, None]
    st2 = chordal_hull_avoidance(
        hull=None,
        n=len(idx),
        seed=seed,
        stream=stream + 7_777,
        kappa=8.0 / 3.0,
        rho=rho - 2.0,
        side="right",
        stop_exponent=beta,
        hull_points=shifted,
    )
    return AvoidanceStats(int(hit1.sum()) + st2.hits, n, st2.mean_residual)


def construct_Q_beta(
    beta: float,
    hull_points: np.ndarray,
    n: int,
    seed: int,
    stream: int = 0,
    deficit: float = 0.0,
    horizon: float = 9.0,
) -> tuple[AvoidanceStats, float]:
    """Avoidance statistics of the radial restriction sample Q(xi(beta)-deficit, beta).

    Returns (stats of the deficit-free construction, loop-soup avoidance
    factor exp(-deficit * loop hit mass)); the product of the avoidance
    fraction with the factor estimates the decorated sample's avoidance.
    Only the maximal construction (two radial/chordal curves) is sampled;
    the loop decoration enters through the hitting-mass factor.
    """
    if beta < 5.0 / 8.0:
        raise ValueError("Q exists only for beta >= 5/8")
    if deficit < 0:
        raise ValueError("deficit must be >= 0")
    rho = rho_of_beta(beta)
    if abs(beta - 5.0 / 8.0) < 1e-12:
        st = radial_hull_avoidance(hull_points, n, seed, stream, kappa=8.0 / 3.0)
    else:
        st = _q_beta_two_stage(beta, rho, hull_points, n, seed, stream, horizon)
    factor = 1.0
    if deficit > 0:
        cap = _cap_from_polyline(hull_points)
        mass, _ = _brownian.loop_hit_measure(cap, 40_000, seed, stream + 13)
        factor = math.exp(-deficit * mass)
    return st, factor


def _cap_from_polyline(pts: np.ndarray) -> "_brownian.RadialCapHull":
    pts = np.asarray(pts, dtype=complex)
    ang = np.angle(pts)
    center = 0.5 * (ang.min() + ang.max())
    half = 0.5 * (ang.max() - ang.min())
    depth = 1.0 - float(np.min(np.abs(pts)))
    return _brownian.RadialCapHull(center, depth, half)


def _q_beta_two_stage(beta, rho, hull_points, n, seed, stream, horizon):
    from .sle import _RadialRhoDriver, _radial_rk4_many

    rng = stream_generator(seed, stream, "qbeta-stage1")
    pts0 = np.asarray(hull_points, dtype=complex)
    Z = np.tile(pts0, (n, 1))
    W = np.zeros(n)
    t = np.zeros(n)
    driver = _RadialRhoDriver(n, 8.0 / 3.0, rho, "left", rng)
    hit = np.zeros(n, dtype=bool)
    live_idx = np.arange(n)
    outZ = np.empty_like(Z)
    outW = np.empty(n)
    outO = np.empty(n)
    while len(live_idx) > 0:
        eiw = np.exp(1j * W)
        D2 = _interp_min_sq(np.abs(Z - eiw[:, None]) ** 2)
        mc = Z[np.arange(len(W)), np.argmax(np.abs(Z), axis=1)]
        mc = mc / np.maximum(np.abs(mc), 1e-300)
        r = np.abs(Z - mc[:, None]).max(axis=1)
        newly_hit = D2 < (1e-3 * np.maximum(r, 1e-12)) ** 2
        finished = t >= horizon
        stopping = newly_hit | finished
        if stopping.any():
            gi = live_idx[stopping]
            hit[gi] = newly_hit[stopping]
            outZ[gi] = Z[stopping]
            outW[gi] = driver.w[stopping]
            outO[gi] = driver.o[stopping]
            keep = ~stopping
            Z, W, t, live_idx = Z[keep], W[keep], t[keep], live_idx[keep]
            driver.compact(keep)
            if len(live_idx) == 0:
                break
            D2 = D2[keep]
            eiw = eiw[keep]
        dt = np.minimum(D2 / 18.0**2, driver.dt_cap())
        dt = np.clip(dt, 1e-10, np.maximum(horizon - t, 1e-10))
        Z = _radial_rk4_many(Z, eiw[:, None], dt)
        W = W + driver.step(dt)
        t = t + dt

    survivors = np.nonzero(~hit)[0]
    if len(survivors) == 0:
        return AvoidanceStats(n, n, 0.0)
    # Moebius to the half-plane: e^{iO} -> 0 (start of gamma^L), e^{iW} -> inf
    a = np.exp(1j * outO[survivors])
    b = np.exp(1j * outW[survivors])
    zpts = outZ[survivors]
    m0 = (0.0 - a) / (b - 0.0)  # image of the origin before rotation
    rot = np.exp(1j * (0.5 * math.pi - np.angle(m0)))
    mapped = rot[:, None] * (zpts - a[:, None]) / (b[:, None] - zpts)
    bad = np.abs(mapped.imag.min(axis=1)) > 1e-6  # sanity: hull should map into H
    mapped[mapped.imag < 0] = mapped[mapped.imag < 0].real + 0j
    st2 = chordal_hull_avoidance(
        hull=None,
        n=len(survivors),
        seed=seed,
        stream=stream + 8_888,
        kappa=8.0 / 3.0,
        rho=rho - 2.0,
        side="right",
        stop_exponent=beta,
        hull_points=mapped,
    )
    return AvoidanceStats(int(hit.sum()) + st2.hits, n, st2.mean_residual)


# ---------------------------------------------------------------------------
# fill-in
# ---------------------------------------------------------------------------

def fill_in(
    paths: Sequence[PathSample],
    geometry: str = "chordal",
    resolution: float = 0.02,
) -> tuple[PolylineHull, float]:
    """Grid flood-fill closure of the union of paths; returns (hull, area).

    Chordal: cells unreachable from both the R_- and the R_+ anchor strips
    are absorbed.  Radial: cells unreachable from the boundary arc opposite
    the attachment are absorbed.
    """
    pts = np.concatenate([np.asarray(p.points, dtype=complex) for p in paths])
    segs_a = np.concatenate([np.asarray(p.points[:-1]) for p in paths])
    segs_b = np.concatenate([np.asarray(p.points[1:]) for p in paths])
    h = resolution
    if geometry == "chordal":
        x0 = float(pts.real.min()) - 4 * h
        x1 = float(pts.real.max()) + 4 * h
        y1 = float(pts.imag.max()) + 4 * h
        y0 = 0.0
    else:
        x0, x1, y0, y1 = -1.0 - 2 * h, 1.0 + 2 * h, -1.0 - 2 * h, 1.0 + 2 * h
    nx = max(8, int(math.ceil((x1 - x0) / h)))
    ny = max(8, int(math.ceil((y1 - y0) / h)))
    blocked = np.zeros((ny, nx), dtype=bool)
    for a, b in zip(segs_a, segs_b):
        L = abs(b - a)
        k = max(2, int(math.ceil(L / (0.5 * h))) + 1)
        zz = a + (b - a) * np.linspace(0.0, 1.0, k)
        ix = np.clip(((zz.real - x0) / h).astype(int), 0, nx - 1)
        iy = np.clip(((zz.imag - y0) / h).astype(int), 0, ny - 1)
        blocked[iy, ix] = True

    from collections import deque

    reach = np.zeros((2, ny, nx), dtype=bool)
    if geometry == "chordal":
        seeds = [
            [(0, j) for j in range(nx) if x0 + (j + 0.5) * h < pts.real.min() - h],
            [(0, j) for j in range(nx) if x0 + (j + 0.5) * h > pts.real.max() + h],
        ]
    else:
        # anchor: cells near the unit circle on the far side from the hull
        att = float(np.angle(pts[np.argmax(np.abs(pts))]))
        far = -np.exp(1j * att)
        j0 = int((far.real - x0) / h)
        i0 = int((far.imag - y0) / h)
        seeds = [[(i0, j0)], []]
    for s, seed_cells in enumerate(seeds):
        dq = deque(seed_cells)
        for i, j in seed_cells:
            reach[s, i, j] = True
        while dq:
            i, j = dq.popleft()
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < ny and 0 <= jj < nx and not blocked[ii, jj] and not reach[s, ii, jj]:
                    if geometry == "radial":
                        zc = (x0 + (jj + 0.5) * h) + 1j * (y0 + (ii + 0.5) * h)
                        if abs(zc) > 1.0:
                            continue
                    reach[s, ii, jj] = True
                    dq.append((ii, jj))
    outside = reach[0] | reach[1]
    if geometry == "radial":
        grid_x = x0 + (np.arange(nx) + 0.5) * h
        grid_y = y0 + (np.arange(ny) + 0.5) * h
        inside_disc = (grid_x[None, :] ** 2 + grid_y[:, None] ** 2) <= 1.0
        filled = (~outside) & inside_disc
    else:
        filled = ~outside
    area = float(filled.sum() - blocked.sum()) * h * h
    boundary = _mask_boundary_polyline(filled, x0, y0, h)
    return PolylineHull(tuple(boundary), geometry=geometry), max(area, 0.0)


def _mask_boundary_polyline(mask: np.ndarray, x0: float, y0: float, h: float):
    """Cells of the mask adjacent to its complement, as an unordered polyline."""
    ny, nx = mask.shape
    edge = mask & ~(
        np.roll(mask, 1, 0)
        & np.roll(mask, -1, 0)
        & np.roll(mask, 1, 1)
        & np.roll(mask, -1, 1)
    )
    iy, ix = np.nonzero(edge)
    if len(ix) == 0:
        return np.array([x0 + 0j, x0 + h + 0j])
    pts = (x0 + (ix + 0.5) * h) + 1j * (y0 + (iy + 0.5) * h)
    order = np.argsort(np.angle(pts - pts.mean()) + 1e-9 * np.abs(pts))
    return pts[order]


# ---------------------------------------------------------------------------
# exponent slope fits
# ---------------------------------------------------------------------------

def _clip_to_window(pts: np.ndarray, R: float) -> np.ndarray:
    """Truncate the polyline at its first exit from U(0, R)."""
    keep = np.abs(pts) <= R
    if keep.all():
        return pts
    first_exit = int(np.nonzero(~keep)[0][0])
    return pts[: max(first_exit, 2)]


def _polylines_intersect(p: np.ndarray, q: np.ndarray, cell: float) -> bool:
    """Segment-crossing test with a shared spatial hash."""
    def buckets(pts):
        d = {}
        a, b = pts[:-1], pts[1:]
        mid = 0.5 * (a + b)
        rad = 0.5 * np.abs(b - a)
        for k in range(len(a)):
            i0 = int((mid[k].real - rad[k]) // cell)
            i1 = int((mid[k].real + rad[k]) // cell)
            j0 = int((mid[k].imag - rad[k]) // cell)
            j1 = int((mid[k].imag + rad[k]) // cell)
            for i in range(i0, i1 + 1):
                for j in range(j0, j1 + 1):
                    d.setdefault((i, j), []).append(k)
        return d

    bp = buckets(p)
    bq = buckets(q)
    pa, pb = p[:-1], p[1:]
    qa, qb = q[:-1], q[1:]

    def orient(a, b, c):
        return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)

    for key, plist in bp.items():
        qlist = bq.get(key)
        if not qlist:
            continue
        for i in plist:
            a1, b1 = pa[i], pb[i]
            for j in qlist:
                c1, d1 = qa[j], qb[j]
                if (
                    orient(a1, b1, c1) * orient(a1, b1, d1) < 0
                    and orient(c1, d1, a1) * orient(c1, d1, b1) < 0
                ):
                    return True
    return False


def fit_intersection_exponent(
    law: str,
    eps_grid: Sequence[float],
    window: float,
    n: int,
    seed: int,
    stream: int = 0,
    n_boot: int = 400,
) -> dict:
    """Log-log slope of the non-intersection frequency of two shifted samples.

    law: 'excursion' (beta = 1 each) or 'sle8/3' (beta = 5/8 each).
    Returns slope, bootstrap stderr, and the per-epsilon counts.
    """
    eps_grid = sorted(eps_grid, reverse=True)
    if max(eps_grid) / min(eps_grid) < 10.0 - 1e-9:
        raise ValueError("epsilon grid must span at least one decade")
    rng = stream_generator(seed, stream, "exponent-fit")
    counts = {e: 0 for e in eps_grid}

    if law == "excursion":
        for k in range(n):
            p1 = _sample_excursion_polyline(rng, window)
            p2 = _sample_excursion_polyline(rng, window)
            for e in eps_grid:
                if not _polylines_intersect(p1, p2 + e, cell=0.25):
                    counts[e] += 1
    elif law == "sle8/3":
        from .sle import chordal_hull_avoidance as _cha

        dt = 2e-3
        T = (window / 2.5) ** 2
        for k in range(n):
            p1 = _sample_sle_polyline(seed, stream * 100_003 + k, T, dt, window)
            for e_i, e in enumerate(eps_grid):
                st = _cha(
                    hull=None,
                    n=1,
                    seed=seed,
                    stream=stream * 100_003 + 50_000_000 + k,
                    kappa=8.0 / 3.0,
                    hull_points=(p1 - e)[None, :],
                    stop_exponent=5.0 / 8.0,
                )
                if st.hits == 0:
                    counts[e] += 1
    else:
        raise ValueError(f"unknown law {law!r}")

    es = np.array(eps_grid, dtype=float)
    ps = np.array([max(counts[e], 1) / n for e in eps_grid])
    if counts[eps_grid[-1]] == 0:
        raise ValueError("zero non-intersection count at the smallest epsilon; widen grid")
    X = np.log(es)
    Y = np.log(ps)
    A = np.vstack([X, np.ones_like(X)]).T
    slope, _ = np.linalg.lstsq(A, Y, rcond=None)[0]

    boot = stream_generator(seed, stream, "exponent-fit-boot")
    slopes = np.empty(n_boot)
    for b in range(n_boot):
        pb = boot.binomial(n, ps) / n
        pb = np.maximum(pb, 0.5 / n)
        slopes[b] = np.linalg.lstsq(A, np.log(pb), rcond=None)[0][0]
    return {
        "slope": float(slope),
        "stderr": float(np.std(slopes, ddof=1)),
        "counts": dict(counts),
        "n": n,
    }


def _sample_excursion_polyline(rng, window: float) -> np.ndarray:
    xs = [0.0]
    ys = [0.0]
    x, y = 0.0, 1e-9
    cap = 1.2 * window
    while y < cap:
        dt = max(1e-4, (y / 4.0) ** 2)
        y = math.sqrt(float(dt * rng.noncentral_chisquare(3.0, y * y / dt)))
        x += math.sqrt(dt) * rng.standard_normal()
        xs.append(x)
        ys.append(y)
    pts = np.asarray(xs) + 1j * np.asarray(ys)
    return _clip_to_window(pts, window)


def _sample_sle_polyline(seed, stream, T, dt, window) -> np.ndarray:
    from .sle import SleParams, sample_chordal_driving
    from .loewner import chordal_trace

    drv = sample_chordal_driving(
        SleParams(kappa=8.0 / 3.0, horizon=T, dt=dt, seed=seed, stream=stream)
    )
    ts = np.unique(np.concatenate([
        np.linspace(0.0, min(1.0, T), 160),
        np.geomspace(max(dt, 1e-3), T, 240),
    ]))
    path = chordal_trace(drv, ts)
    return _clip_to_window(path.points, window)
