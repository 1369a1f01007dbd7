"""Batch experiment runner.

Configs are YAML files with a mandatory ``schema_version``, ``experiment``,
``seed``, and a ``params`` block; unknown keys are rejected.  Results are
written as one self-describing JSON summary per run (floats with 17
significant digits; reruns with the same config and seed are byte-identical
except for the wall-time field) plus optional CSV dumps.

Ensembles are split into fixed replicas keyed by (seed, replica); the
worker count only controls how replicas are executed, never the streams,
so any worker count reproduces the single-process result exactly.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .brownian import (
    RadialCapHull,
    excursion_avoidance,
    excursion_hit_measure,
    loop_hit_measure,
    ppp_avoidance,
    two_point_avoidance_exact,
)
from .conformal import DiscHull, PolylineHull, SlitHull, boundary_derivative
from .exponents import rho_of_beta, xi, xi_hat, xi_tilde, u_func
from .loewner import phi_from_hull
from .sle import chordal_hull_avoidance, radial_hull_avoidance
from .verify import (
    Estimate,
    MartingaleSpec,
    construct_P_beta,
    fit_intersection_exponent,
    martingale_check,
    wilson_interval,
)

EXPERIMENTS = (
    "exponents",
    "avoidance",
    "quadrature",
    "loop-soup",
    "martingale",
    "construct",
    "exponent-fit",
)

_TOP_KEYS = {"schema_version", "experiment", "seed", "params", "out", "workers", "replicas"}

_PARAM_KEYS = {
    "exponents": {"packets"},
    "avoidance": {"law", "hull", "n", "rho", "beta", "endpoints", "csv"},
    "quadrature": {"cases", "tolerance"},
    "loop-soup": {"hull", "n", "rel_tolerance"},
    "martingale": {"spec", "rho", "hull", "n", "checkpoints"},
    "construct": {"beta", "hull", "n", "horizon"},
    "exponent-fit": {"law", "eps_grid", "window", "n", "target", "tolerance"},
}


def _fmt17(x: float) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if math.isnan(x) or math.isinf(x):
        return "null"
    return f"{x:.17g}"


def dumps17(obj) -> str:
    """Deterministic JSON with floats at 17 significant digits."""
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt17(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps17(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: kv[0])
        return "{" + ",".join(json.dumps(k) + ":" + dumps17(v) for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)}")


@dataclass
class ExperimentConfig:
    experiment: str
    seed: int
    params: dict
    schema_version: int = 1
    out: Optional[str] = None
    workers: int = 1
    replicas: int = 4

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        raw = yaml.safe_load(Path(path).read_text())
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a mapping")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ValueError(f"{path}: unknown keys {sorted(unknown)}")
        for req in ("schema_version", "experiment", "seed"):
            if req not in raw:
                raise ValueError(f"{path}: missing required field {req!r}")
        exp = raw["experiment"]
        if exp not in EXPERIMENTS:
            raise ValueError(f"{path}: unknown experiment {exp!r}")
        params = raw.get("params", {}) or {}
        unknown_p = set(params) - _PARAM_KEYS[exp]
        if unknown_p:
            raise ValueError(f"{path}: unknown params {sorted(unknown_p)} for {exp}")
        return cls(
            experiment=exp,
            seed=int(raw["seed"]),
            params=params,
            schema_version=int(raw["schema_version"]),
            out=raw.get("out"),
            workers=int(raw.get("workers", 1)),
            replicas=int(raw.get("replicas", 4)),
        )


def _hull_from_spec(spec: dict):
    kind = spec.get("type")
    if kind == "disc":
        return DiscHull(float(spec["x"]), float(spec["eps"]))
    if kind == "slit":
        return SlitHull(float(spec["x"]), float(spec["y"]))
    if kind == "cap":
        return RadialCapHull(
            float(spec.get("center", 2.0)),
            float(spec.get("depth", 0.28)),
            float(spec.get("half_width", 0.35)),
        )
    raise ValueError(f"unknown hull spec {spec!r}")


def _merge_counts(parts: list[tuple[int, int]]) -> tuple[int, int]:
    return sum(h for h, _ in parts), sum(m for _, m in parts)


def _avoidance_replica(args) -> tuple:
    law, hull_spec, n_i, seed, stream, extra = args
    hull = _hull_from_spec(hull_spec)
    if law == "sle8/3":
        st = chordal_hull_avoidance(hull, n_i, seed, stream, kappa=8.0 / 3.0)
        return (st.hits, st.n)
    if law == "sle8/3-rho":
        rho = float(extra["rho"])
        beta = (3 * rho * rho + 16 * rho + 20) / 32.0
        st = chordal_hull_avoidance(
            hull, n_i, seed, stream, kappa=8.0 / 3.0, rho=rho, stop_exponent=beta
        )
        return (st.hits, st.n)
    if law == "radial-sle8/3":
        st = radial_hull_avoidance(hull.polyline(129), n_i, seed, stream, kappa=8.0 / 3.0)
        return (st.hits, st.n)
    if law == "excursion":
        endpoints = tuple(extra.get("endpoints", (0.0, None)))
        ep = (endpoints[0], None if endpoints[1] is None else endpoints[1])
        mean, se, _ = excursion_avoidance(hull, n_i, seed, stream, endpoints=ep)
        return (mean, se, n_i)
    if law == "p-beta":
        st = construct_P_beta(float(extra["beta"]), hull, n_i, seed, stream)
        return (st.hits, st.n)
    raise ValueError(f"unknown avoidance law {law!r}")


def _reference_for(law: str, hull, extra: dict) -> tuple[float, str]:
    if law == "sle8/3":
        return _phi0(hull) ** 0.625, "closed-form"
    if law == "sle8/3-rho":
        rho = float(extra["rho"])
        beta = (3 * rho * rho + 16 * rho + 20) / 32.0
        return _phi0(hull) ** beta, "exponent-algebra"
    if law == "p-beta":
        return _phi0(hull) ** float(extra["beta"]), "exponent-algebra"
    if law == "excursion":
        endpoints = extra.get("endpoints")
        if endpoints and endpoints[1] is not None:
            return (
                two_point_avoidance_exact(hull.phi(), endpoints[0], endpoints[1]),
                "closed-form",
            )
        return _phi0(hull), "closed-form"
    if law == "radial-sle8/3":
        phi = phi_from_hull(
            PolylineHull(tuple(hull.polyline(129)), geometry="radial"),
            "radial-fix-0-1",
        )
        d0 = abs(complex(phi.deriv(0.0)))
        d1 = float(np.real(phi.deriv(1.0)))
        return d0 ** (5.0 / 48.0) * d1**0.625, "quadrature"
    raise ValueError(law)


def _phi0(hull) -> float:
    return hull.phi_deriv0()


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Execute one experiment; returns the summary record (not yet written)."""
    t0 = time.time()
    p = cfg.params
    record: dict = {
        "experiment": cfg.experiment,
        "params": p,
        "seed": cfg.seed,
        "schema_version": cfg.schema_version,
        "code_version": __version__,
    }

    if cfg.experiment == "exponents":
        packets = p.get("packets", [[1.0], [1.0, 1.0]])
        table = []
        for vals in packets:
            table.append(
                {
                    "packet": list(map(float, vals)),
                    "xi_tilde": xi_tilde(vals),
                    "xi": xi(vals),
                    "xi_hat": xi_hat(vals),
                    "u_sum": sum(u_func(v) for v in vals),
                }
            )
        ok = all(
            abs(u_func(xi_tilde(row["packet"])) - row["u_sum"]) < 1e-10 for row in table
        )
        record.update(
            {
                "estimates": table,
                "reference": {"value": None, "provenance": "closed-form"},
                "verdict": "pass" if ok else "fail",
            }
        )

    elif cfg.experiment == "avoidance":
        law = p["law"]
        n = int(p["n"])
        hull_spec = p["hull"]
        extra = {k: p[k] for k in ("rho", "beta", "endpoints") if k in p}
        sizes = [n // cfg.replicas] * cfg.replicas
        sizes[0] += n - sum(sizes)
        jobs = [
            (law, hull_spec, sizes[i], cfg.seed, i, extra)
            for i in range(cfg.replicas)
            if sizes[i] > 0
        ]
        if cfg.workers > 1:
            with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
                parts = list(ex.map(_avoidance_replica, jobs))
        else:
            parts = [_avoidance_replica(j) for j in jobs]
        hull = _hull_from_spec(hull_spec)
        if law == "excursion":
            tot = sum(q[2] for q in parts)
            mean = sum(q[0] * q[2] for q in parts) / tot
            se = math.sqrt(sum((q[1] * q[2]) ** 2 for q in parts)) / tot
            est = Estimate.from_values(mean, se, tot)
        else:
            hits, tot = _merge_counts([(q[0], q[1]) for q in parts])
            est = Estimate.from_counts(tot - hits, tot)
        ref, prov = _reference_for(law, hull, extra)
        ok = abs(est.mean - ref) <= 3.0 * max(est.stderr, 1e-12)
        record.update(
            {
                "estimates": {
                    "mean": est.mean,
                    "stderr": est.stderr,
                    "n": est.n,
                    "ci95": list(est.ci95),
                },
                "reference": {"value": ref, "provenance": prov},
                "verdict": "pass" if ok else "fail",
            }
        )

    elif cfg.experiment == "quadrature":
        tol = float(p.get("tolerance", 1e-6))
        cases = p.get(
            "cases",
            [
                {"interval": [-2.0, -1.0], "hull": {"type": "disc", "x": 1.0, "eps": 0.3}},
                {"interval": [-2.0, -1.0], "hull": {"type": "slit", "x": 1.0, "y": 1.0}},
                {"interval": [-5.0, -0.5], "hull": {"type": "disc", "x": 2.0, "eps": 0.7}},
                {"interval": [-1.0, -0.2], "hull": {"type": "slit", "x": 0.5, "y": 0.4}},
                {"interval": [-3.0, -2.0], "hull": {"type": "disc", "x": -1.0, "eps": 0.4}},
            ],
        )
        rows = []
        ok = True
        for case in cases:
            hull = _hull_from_spec(case["hull"])
            a, b = case["interval"]
            quad = excursion_hit_measure((a, b), hull)
            oracle = -math.log(two_point_avoidance_exact(hull.phi(), a, b)) / math.pi
            rows.append({"interval": [a, b], "quad": quad, "oracle": oracle})
            ok &= abs(quad - oracle) <= tol
        record.update(
            {
                "estimates": rows,
                "reference": {"value": None, "provenance": "closed-form"},
                "verdict": "pass" if ok else "fail",
            }
        )

    elif cfg.experiment == "loop-soup":
        hull = _hull_from_spec(p.get("hull", {"type": "cap"}))
        n = int(p.get("n", 200_000))
        rel = float(p.get("rel_tolerance", 0.05))
        mean, se = loop_hit_measure(hull, n, cfg.seed)
        from .loewner import radial_log_capacity_from_polyline

        ref = radial_log_capacity_from_polyline(hull.polyline(257))
        ok = abs(mean - ref) <= rel * abs(ref)
        record.update(
            {
                "estimates": {"mean": mean, "stderr": se, "n": n},
                "reference": {"value": ref, "provenance": "quadrature"},
                "verdict": "pass" if ok else "fail",
            }
        )

    elif cfg.experiment == "martingale":
        spec = MartingaleSpec(p.get("spec", "chordal-sle83"), p.get("rho"))
        hull = _hull_from_spec(p.get("hull", {"type": "disc", "x": 1.0, "eps": 0.5}))
        rep = martingale_check(
            spec,
            hull,
            int(p.get("n", 2000)),
            cfg.seed,
            checkpoints=tuple(p.get("checkpoints", (0.1, 0.5, 1.0))),
        )
        record.update(
            {
                "estimates": {
                    "times": list(rep.times),
                    "means": list(rep.means),
                    "stderrs": list(rep.stderrs),
                    "ordering_ok_fraction": rep.ordering_ok_fraction,
                    "exclusion_rate": rep.exclusion_rate,
                },
                "reference": {"value": rep.m0, "provenance": "closed-form"},
                "verdict": "pass" if rep.verdict else "fail",
            }
        )

    elif cfg.experiment == "construct":
        beta = float(p["beta"])
        hull = _hull_from_spec(p["hull"])
        st = construct_P_beta(
            beta, hull, int(p["n"]), cfg.seed, horizon=float(p.get("horizon", 60.0))
        )
        est = Estimate.from_counts(st.n - st.hits, st.n)
        ref = _phi0(hull) ** beta
        ok = abs(est.mean - ref) <= 3.0 * max(est.stderr, 1e-12)
        record.update(
            {
                "estimates": {
                    "mean": est.mean,
                    "stderr": est.stderr,
                    "n": est.n,
                    "ci95": list(est.ci95),
                },
                "reference": {"value": ref, "provenance": "exponent-algebra"},
                "verdict": "pass" if ok else "fail",
            }
        )

    elif cfg.experiment == "exponent-fit":
        law = p.get("law", "excursion")
        eps_grid = [float(e) for e in p.get("eps_grid", [0.4, 0.2, 0.1, 0.04])]
        fit = fit_intersection_exponent(
            law, eps_grid, float(p.get("window", 10.0)), int(p.get("n", 2000)), cfg.seed
        )
        target = float(
            p.get("target", xi_hat([1.0, 1.0]) if law == "excursion" else 0.75)
        )
        tol = float(p.get("tolerance", 0.15))
        ok = abs(fit["slope"] - target) <= tol
        record.update(
            {
                "estimates": {
                    "slope": fit["slope"],
                    "stderr": fit["stderr"],
                    "counts": {f"{k:.6g}": v for k, v in fit["counts"].items()},
                    "n": fit["n"],
                },
                "reference": {"value": target, "provenance": "exponent-algebra"},
                "verdict": "pass" if ok else "fail",
            }
        )

    record["wall_time_s"] = time.time() - t0
    return record


def list_experiments() -> dict:
    """Catalog of experiment ids and their parameter schemas."""
    return {exp: sorted(_PARAM_KEYS[exp]) for exp in EXPERIMENTS}


def emit_plot_data(result_dir: str | Path, out_dir: Optional[str | Path] = None) -> list[Path]:
    """Columnar (x, y, yerr) text files from result records."""
    result_dir = Path(result_dir)
    files = sorted(result_dir.glob("*.json"))
    if not files:
        raise FileNotFoundError(f"no results in {result_dir}")
    out_dir = Path(out_dir) if out_dir else result_dir
    written = []
    for f in files:
        rec = json.loads(f.read_text())
        rows = []
        est = rec.get("estimates")
        if rec["experiment"] == "exponent-fit":
            counts = est["counts"]
            n = est["n"]
            for k, v in sorted(counts.items(), key=lambda kv: float(kv[0])):
                e = float(k)
                pv = max(v, 1) / n
                se = math.sqrt(max(pv * (1 - pv), 1e-12) / n) / pv
                rows.append((math.log(e), math.log(pv), se))
        elif isinstance(est, dict) and "means" in est:
            for t, mn, se in zip(est["times"], est["means"], est["stderrs"]):
                rows.append((t, mn, se))
        elif isinstance(est, dict) and "mean" in est:
            rows.append((0.0, est["mean"], est.get("stderr", 0.0)))
        else:
            continue
        target = out_dir / (f.stem + ".dat")
        with open(target, "w") as fh:
            fh.write("# x y yerr\n")
            for row in rows:
                fh.write(" ".join(_fmt17(v) for v in row) + "\n")
        written.append(target)
    return written


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="restrictionlab", description="conformal restriction experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=None)
    p_run.add_argument("--out", default=None)
    sub.add_parser("list", help="list experiments and parameter schemas")
    p_emit = sub.add_parser("emit-plot", help="emit columnar plot data")
    p_emit.add_argument("result_dir")
    p_emit.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    if args.command == "list":
        print(dumps17(list_experiments()))
        return 0

    if args.command == "emit-plot":
        try:
            written = emit_plot_data(args.result_dir, args.out)
        except FileNotFoundError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for w in written:
            print(w)
        return 0

    try:
        cfg = ExperimentConfig.load(args.config)
    except (ValueError, OSError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    out_root = args.out or cfg.out or os.environ.get("RESTRICTIONLAB_OUT", ".")
    out_dir = Path(out_root)
    out_dir.mkdir(parents=True, exist_ok=True)

    record = run_experiment(cfg)
    name = f"{cfg.experiment}-seed{cfg.seed}.json"
    (out_dir / name).write_text(dumps17(record) + "\n")
    print(f"{record['experiment']}: verdict={record['verdict']} -> {out_dir / name}")
    return 0 if record["verdict"] in ("pass", "n/a") else 1


if __name__ == "__main__":
    raise SystemExit(main())
