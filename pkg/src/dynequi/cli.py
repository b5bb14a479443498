"""Command-line front end: ``dynequi <experiment> [--config FILE] [--seed S] [--threads N] [--out DIR]``.

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 configuration error,
3 numerical failure (the report then carries the audit trail).
"""

from __future__ import annotations

import argparse
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__, _parallel
from .config import KINDS, SAMPLED, ConfigError, ExperimentConfig, from_dict, validate
from .core import CriticalPointError, Poly, classify_critical_orbits, green_grid
from .experiments import ExperimentReport, cohomology_count, jsonable, power_map_check, root_orbit_profile
from .fields import Rect
from .measures import TestFunctionSet, brolin_sample, discrepancy_potential, pb_average_field, u_n_field, weak_pairing
from .param import (
    CubicSliceSpec,
    cubic_slice_experiment,
    escape_estimate_check,
    mandelbrot_green_grid,
    param_potential_field,
    param_solve,
    sample_escaped_parameters,
)
from .reports import write_grid_csv, write_json, write_pgm, write_points_csv
from .roots import PhaseDerivative, RootFindingError, solve_all

SQUARE = [-2.0, 2.0, -2.0, 2.0]
MANDEL = [-2.5, 1.5, -2.0, 2.0]

DEFAULTS = {
    "phase-roots": dict(poly=[0, 0, 1], n=3, lam=8, thresholds={"residual": 1e-6}),
    "phase-potential": dict(
        poly=[-1, 0, 1], n=10, lam=1, rect=SQUARE, res=[128, 128], thresholds={"mask": 0.1, "sup": 0.02}
    ),
    "pb-average": dict(
        poly=[-1, 0, 1], n=10, radius=1.0, count=500, rect=SQUARE, res=[128, 128],
        thresholds={"mask": 0.1, "sup": 0.03},
    ),
    "brolin": dict(poly=[-1, 0, 1], z_start=0, depth=30, count=100000, n=10, lam=1, thresholds={"pairing": 0.05}),
    "classify": dict(poly=[-1, 0, 1]),
    "param-roots": dict(n=6, lam_poly=[1], thresholds={"residual": 1e-6}),
    "param-potential": dict(n=12, lam_poly=[1], rect=MANDEL, res=[128, 128], thresholds={"mask": 0.1, "sup": 0.03}),
    "escape-estimate": dict(count=50, n_range=[5, 12], rect=MANDEL, thresholds={"growth": 1.5, "min_green": 0.05}),
    "cubic-slice": dict(
        base=[0, 0.5], direction=[1, 0], critical_index=1, n=6, lam=0, rect=[-3.0, 3.0, -3.0, 3.0], res=[64, 64],
        thresholds={"mask": 0.1},
    ),
    "cohomology": dict(poly=[1, 0, 1], n=2, u0=1, z0=1, u1=2),
    "power-check": dict(d=2, n=3, lam=8),
    "orbit-profile": dict(poly=[-1, 0, 1], n=10, lam=1),
}

HELP = {
    "phase-roots": "Solve (f^n)^(k)(z) = lambda with certified multiplicities. "
    "Checks that the root count is d^n - k and every root has small backward error.",
    "phase-potential": "Compare the logarithmic potential of the normalized root measure of "
    "(f^n)^(k) = lambda with the Green function of f away from the Julia set; convergence of "
    "potentials means the roots equidistribute toward the equilibrium measure.",
    "pb-average": "Average the root-measure potentials over lambda uniform on a disk and compare "
    "with the Green function: averaging over a measure with bounded potential removes any "
    "exceptional lambda.",
    "brolin": "Sample the equilibrium measure by random backward orbits and compare it, by "
    "smooth test-function pairings, with the root measure of (f^n)' = lambda.",
    "classify": "Classify critical orbits (escaping, attracted to a certified attracting cycle, "
    "or undetermined) and decide hyperbolicity.",
    "param-roots": "Solve (p_c^n)'(c) = lambda(c) in the parameter c of z^2 + c; the normalized "
    "solution measure has mass (2^n - 1)/2^n.",
    "param-potential": "Compare 2^-n log|(p_c^n)'(c) - lambda(c)| with the Green function of the "
    "Mandelbrot set: the parameter solutions equidistribute toward its harmonic measure.",
    "escape-estimate": "Check the escape-rate bound |2^-n log|p_c^n(c)| - g_M(c)| <= C n 2^-n on "
    "sampled escaping parameters: the fitted constant must not grow with n.",
    "cubic-slice": "On a complex line in the cubic family, compare 3^-n log|(P^n)'(P(c_i)) - lambda| "
    "with the Green function at the critical point and at the critical value (exploratory).",
    "cohomology": "Count intersections behind the action of the tangent map on cohomology: "
    "one point on a vertical fiber and d^n - 1 on a horizontal line.",
    "power-check": "Exact case f = z^d: all roots of (f^n)' = lambda lie on one circle and are "
    "equally spaced in angle.",
    "orbit-profile": "For hyperbolic f, record how close each root's forward orbit comes to the "
    "critical set and when (descriptive).",
}


# ---------------------------------------------------------------------------
# experiment runners: each returns (report, [(filename, kind, payload), ...])


def _poly(cfg) -> Poly:
    return Poly(tuple(cfg.poly))


def _rect(cfg) -> Rect:
    return Rect(*cfg.rect)


def _res(cfg) -> tuple[int, int]:
    return tuple(cfg.res)


def _base_params(cfg: ExperimentConfig, keys) -> dict:
    d = {k: getattr(cfg, k) for k in keys}
    d["thresholds"] = dict(cfg.thresholds)
    return d


def _lambda_note(rep, lam) -> None:
    if lam is not None and lam == 0:
        rep.notes.append("lambda = 0: the measure is computed, but this value lies outside the equidistribution statement")


def run_phase_roots(cfg):
    f = _poly(cfg)
    p = PhaseDerivative(f, cfg.n, cfg.k, cfg.lam)
    cloud = solve_all(p, seed=cfg.seed or 0)
    rep = ExperimentReport("phase-roots", _base_params(cfg, ["poly", "n", "k", "lam"]))
    rep.parameters["thresholds"].setdefault("count", p.expected_count)
    rep.metrics.update(
        count=cloud.total_multiplicity, distinct=len(cloud), mass=str(cloud.exact_mass),
        max_residual=float(cloud.residuals.max()) if len(cloud) else 0.0,
    )
    rep.check("count", cloud.total_multiplicity, "count", "==")
    rep.check("residual", rep.metrics["max_residual"], "residual")
    _lambda_note(rep, cfg.lam)
    return rep, [("roots.csv", "points", cloud)]


def run_phase_potential(cfg):
    f = _poly(cfg)
    p = PhaseDerivative(f, cfg.n, cfg.k, cfg.lam)
    u = u_n_field(p, _rect(cfg), _res(cfg))
    g = green_grid(f, _rect(cfg), _res(cfg))
    sup, mean = discrepancy_potential(u, g, g, cfg.thresholds["mask"])
    rep = ExperimentReport("phase-potential", _base_params(cfg, ["poly", "n", "k", "lam", "rect", "res"]))
    rep.metrics.update(sup=sup, mean=mean, masked_fraction=float((g.mask & (g.values >= cfg.thresholds["mask"])).mean()))
    rep.check("sup", sup, "sup")
    _lambda_note(rep, cfg.lam)
    return rep, [("u_n.csv", "grid", u), ("green.csv", "grid", g)]


def run_pb_average(cfg):
    f = _poly(cfg)
    pb = pb_average_field(f, cfg.n, cfg.radius, cfg.count, cfg.seed, _rect(cfg), _res(cfg))
    g = green_grid(f, _rect(cfg), _res(cfg))
    sup, mean = discrepancy_potential(pb.field, g, g, cfg.thresholds["mask"])
    rep = ExperimentReport("pb-average", _base_params(cfg, ["poly", "n", "radius", "count", "rect", "res", "seed"]))
    rep.metrics.update(sup=sup, mean=mean, max_stderr=pb.max_stderr)
    rep.check("sup", sup, "sup")
    return rep, [("pb_average.csv", "grid", pb.field), ("green.csv", "grid", g)]


def run_brolin(cfg):
    f = _poly(cfg)
    sample = brolin_sample(f, cfg.z_start, cfg.depth, cfg.count, cfg.seed)
    rep = ExperimentReport("brolin", _base_params(cfg, ["poly", "z_start", "depth", "count", "seed", "n", "lam"]))
    files = [("brolin.csv", "points", sample)]
    if cfg.n is not None:
        roots = solve_all(PhaseDerivative(f, cfg.n, 1, cfg.lam if cfg.lam is not None else 0j), seed=cfg.seed)
        t = TestFunctionSet.grid()
        pair = weak_pairing(roots, sample, t)
        rep.metrics.update(pairings=pair.tolist(), max_pairing=float(pair.max()), roots=roots.total_multiplicity)
        rep.check("pairing", float(pair.max()), "pairing")
        files.append(("roots.csv", "points", roots))
    return rep, files


def run_classify(cfg):
    f = _poly(cfg)
    cls = classify_critical_orbits(f)
    rep = ExperimentReport("classify", _base_params(cfg, ["poly"]))
    rep.metrics.update(
        hyperbolic=cls.hyperbolic,
        undetermined=cls.undetermined,
        escaping_critical=cls.has_escaping_critical,
        fates=[
            dict(point=c.point, multiplicity=c.multiplicity, kind=c.kind, green=c.green_value,
                 period=c.period, multiplier=c.multiplier, cycle=list(c.cycle))
            for c in cls.fates
        ],
    )
    if "hyperbolic" in cfg.thresholds:
        rep.check("hyperbolic", cls.hyperbolic, "hyperbolic", "==")
    return rep, []


def run_param_roots(cfg):
    cloud = param_solve(cfg.n, cfg.lam_poly, seed=cfg.seed or 0)
    rep = ExperimentReport("param-roots", _base_params(cfg, ["n", "lam_poly"]))
    rep.parameters["thresholds"].setdefault("mass", str(Fraction(2**cfg.n - 1, 2**cfg.n)))
    rep.metrics.update(
        count=cloud.total_multiplicity, distinct=len(cloud), mass=str(cloud.exact_mass),
        max_residual=float(cloud.residuals.max()) if len(cloud) else 0.0,
    )
    rep.check("mass", str(cloud.exact_mass), "mass", "==")
    rep.check("residual", rep.metrics["max_residual"], "residual")
    return rep, [("param_roots.csv", "points", cloud)]


def run_param_potential(cfg):
    u = param_potential_field(cfg.n, cfg.lam_poly, _rect(cfg), _res(cfg))
    g = mandelbrot_green_grid(_rect(cfg), _res(cfg))
    sup, mean = discrepancy_potential(u, g, g, cfg.thresholds["mask"])
    rep = ExperimentReport("param-potential", _base_params(cfg, ["n", "lam_poly", "rect", "res"]))
    rep.metrics.update(sup=sup, mean=mean)
    rep.check("sup", sup, "sup")
    return rep, [("param_potential.csv", "grid", u), ("green_M.csv", "grid", g)]


def run_escape_estimate(cfg):
    lo, hi = cfg.n_range
    mg = cfg.thresholds.get("min_green", 0.05)
    samples = sample_escaped_parameters(cfg.count, cfg.seed, _rect(cfg), mg)
    r = escape_estimate_check(samples, range(lo, hi + 1), min_green=mg)
    rep = ExperimentReport("escape-estimate", _base_params(cfg, ["count", "n_range", "rect", "seed"]))
    ratio = float(r.c_hat[-1] / r.c_hat[0]) if r.c_hat[0] > 0 else (0.0 if r.c_hat[-1] == 0 else math.inf)
    rep.metrics.update(samples=samples.tolist(), c_hat=r.c_hat.tolist(), growth_ratio=ratio, c_hat_max=float(r.c_hat.max()))
    rep.check("growth", ratio, "growth")
    return rep, []


def run_cubic_slice(cfg):
    spec = CubicSliceSpec(tuple(cfg.base), tuple(cfg.direction), cfg.critical_index, cfg.n, cfg.lam or 0j)
    r = cubic_slice_experiment(spec, _rect(cfg), _res(cfg), threshold=cfg.thresholds["mask"])
    rep = ExperimentReport(
        "cubic-slice", _base_params(cfg, ["base", "direction", "critical_index", "n", "lam", "rect", "res"])
    )
    rep.metrics.update(
        escaped_fraction=r.escaped_fraction, sup_to_critical_point=r.sup_to_critical,
        sup_to_critical_value=r.sup_to_critical_value, mean_to_critical_point=r.mean_to_critical,
        mean_to_critical_value=r.mean_to_critical_value, closer=r.closer,
        functional_equation_error=r.functional_equation_error,
    )
    rep.notes.append("exploratory: reports which Green-function normalization the field follows")
    return rep, [("slice_field.csv", "grid", r.field), ("green_critical.csv", "grid", r.green_critical)]


def run_cohomology(cfg):
    rep = cohomology_count(_poly(cfg), cfg.n, cfg.u0, cfg.z0, cfg.u1, seed=cfg.seed or 0)
    return rep, []


def run_power_check(cfg):
    rep = power_map_check(cfg.d, cfg.n, cfg.lam, seed=cfg.seed or 0)
    return rep, [("roots.csv", "points", rep.cloud)]


def run_orbit_profile(cfg):
    f = _poly(cfg)
    horizon = cfg.horizon if cfg.horizon is not None else cfg.n
    rep0 = ExperimentReport("orbit-profile", _base_params(cfg, ["poly", "n", "lam", "horizon"]))
    cls = classify_critical_orbits(f)
    if not cls.hyperbolic:
        rep0.applicable = False
        rep0.notes.append("f is not certified hyperbolic; profile not applicable")
        return rep0, []
    cloud = solve_all(PhaseDerivative(f, cfg.n, 1, cfg.lam), seed=cfg.seed or 0)
    r = root_orbit_profile(f, cloud, horizon)
    rep0.metrics.update(r.metrics)
    rep0.notes.extend(r.notes)
    return rep0, [("roots.csv", "points", cloud)]


RUNNERS = {
    "phase-roots": run_phase_roots,
    "phase-potential": run_phase_potential,
    "pb-average": run_pb_average,
    "brolin": run_brolin,
    "classify": run_classify,
    "param-roots": run_param_roots,
    "param-potential": run_param_potential,
    "escape-estimate": run_escape_estimate,
    "cubic-slice": run_cubic_slice,
    "cohomology": run_cohomology,
    "power-check": run_power_check,
    "orbit-profile": run_orbit_profile,
}


# ---------------------------------------------------------------------------


def resolve_config(kind: str, path: str | None, seed: int | None, out: str | None) -> ExperimentConfig:
    """Defaults for ``kind`` overlaid with the config file and command-line flags."""
    import json

    raw = {"kind": kind, **DEFAULTS[kind]}
    raw["thresholds"] = dict(DEFAULTS[kind].get("thresholds", {}))
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
        if user.get("kind", kind) != kind:
            raise ConfigError(f"kind: config is for {user['kind']!r}, not {kind!r}")
        # thresholds merge key by key; any other key replaces the default
        thr = user.pop("thresholds", None)
        if thr is not None and not isinstance(thr, dict):
            raise ConfigError("thresholds: expected an object")
        raw.update(user)
        raw["thresholds"].update(thr or {})
    if seed is not None:
        raw["seed"] = seed
    if out is not None:
        raw["out"] = out
    return from_dict(raw)


def run(cfg: ExperimentConfig, out: Path) -> int:
    """Execute ``cfg``, write all outputs under ``out`` and return the exit code."""
    validate(cfg)
    out.mkdir(parents=True, exist_ok=True)
    h = cfg.hash()
    embedded = cfg.to_dict()
    embedded.pop("out", None)
    provenance = {"config_hash": h, "seed": cfg.seed, "version": __version__, "config": embedded}
    try:
        with np.errstate(all="ignore"):
            rep, files = RUNNERS[cfg.kind](cfg)
    except (RootFindingError, CriticalPointError) as e:
        audit = getattr(e, "audit", None) or []
        write_json(out / "report.json", jsonable({
            "experiment": cfg.kind, "error": str(e), "error_type": type(e).__name__,
            "audit": audit, "provenance": provenance,
        }))
        print(f"numerical failure: {e}", file=sys.stderr)
        for line in audit[-20:]:
            print(f"  audit: {line}", file=sys.stderr)
        return 3
    for name, kind, payload in files:
        if kind == "points":
            write_points_csv(out / name, payload, h)
        else:
            write_grid_csv(out / name, payload, h, name[:-4])
            if cfg.images:
                write_pgm(out / (name[:-4] + ".pgm"), payload, h, cfg.image_range)
                rep.artifacts.append(name[:-4] + ".pgm")
        rep.artifacts.append(name)
    body = rep.to_dict()
    body["provenance"] = provenance
    write_json(out / "report.json", body)
    for name, v in sorted(rep.verdicts.items()):
        print(f"{'PASS' if v['passed'] else 'FAIL'} {name}: {v['value']} {v['op']} {rep.parameters['thresholds'][v['threshold']]}")
    return 0 if rep.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config; keys override the defaults")
    common.add_argument("--seed", type=int, help="random seed (required for sampled experiments)")
    common.add_argument("--threads", type=int, default=1, help="worker threads; results do not depend on it")
    common.add_argument("--out", default="out", help="output directory (default: out)")
    parser = argparse.ArgumentParser(
        prog="dynequi",
        description="Numerical checks of equidistribution for points with prescribed iterated derivative.",
        epilog="Exit codes: 0 pass, 1 verdict failure, 2 config error, 3 numerical failure.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="kind", required=True, metavar="experiment")
    for kind in KINDS:
        sampled = " Sampled: needs a seed." if kind in SAMPLED else ""
        sub.add_parser(kind, parents=[common], help=HELP[kind], description=HELP[kind] + sampled)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("threads: must be >= 1")
        _parallel.set_threads(args.threads)
        cfg = resolve_config(args.kind, args.config, args.seed, args.out)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return run(cfg, Path(cfg.out))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as e:
        print(f"config error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    finally:
        _parallel.set_threads(1)


if __name__ == "__main__":
    sys.exit(main())
