"""Cross-checks: degree bookkeeping of the tangent map, the power map, root orbits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .core import Poly, classify_critical_orbits, critical_points, jet_derivatives
from .measures import angular_discrepancy
from .roots import CountMismatch, PhaseDerivative, RootCloud, solve_all

_OPS = {
    "<=": lambda v, t: v <= t,
    ">=": lambda v, t: v >= t,
    "==": lambda v, t: v == t,
    "<": lambda v, t: v < t,
}


def jsonable(x):
    """Plain JSON types; complex numbers become ``[re, im]``."""
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    return x


@dataclass
class ExperimentReport:
    experiment: str
    parameters: dict
    metrics: dict = field(default_factory=dict)
    verdicts: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    applicable: bool = True
    notes: list = field(default_factory=list)

    def check(self, name: str, value, threshold_key: str, op: str = "<="):
        """Record a verdict against ``parameters['thresholds'][threshold_key]``."""
        thr = self.parameters.get("thresholds", {})
        if threshold_key not in thr:
            raise KeyError(f"threshold {threshold_key!r} is not declared in the parameters")
        t = thr[threshold_key]
        self.verdicts[name] = {
            "value": value,
            "threshold": threshold_key,
            "op": op,
            "passed": bool(_OPS[op](value, t)),
        }
        return self.verdicts[name]["passed"]

    @property
    def passed(self) -> bool:
        return all(v["passed"] for v in self.verdicts.values())

    def to_dict(self) -> dict:
        return jsonable(
            {
                "experiment": self.experiment,
                "parameters": self.parameters,
                "metrics": self.metrics,
                "verdicts": self.verdicts,
                "passed": self.passed,
                "applicable": self.applicable,
                "artifacts": self.artifacts,
                "notes": self.notes,
            }
        )


# ---------------------------------------------------------------------------
# cohomological degree bookkeeping


def cohomology_count(f: Poly, n: int, u0: complex, z0: complex, u1: complex, seed: int = 0) -> ExperimentReport:
    """Intersection counts behind ``(F^n)^* {w2} = (d^n - 1){w1} + {w2}``.

    (i) the fiber ``{z = z0}`` meets ``{(f^n)'(z0) u = u0}`` once;
    (ii) ``{u = u1}`` meets it in ``d^n - 1`` points, i.e. roots of ``(f^n)' = u0/u1``.
    """
    if u0 == 0 or u1 == 0:
        raise ValueError("u0 and u1 must be nonzero")
    d = f.degree
    rng = np.random.Generator(np.random.Philox(seed))
    z = complex(z0)
    tries = 0
    D = complex(jet_derivatives(f, np.array([z]), n, 1)[1].to_complex()[0])
    while D == 0 or not np.isfinite(D):
        tries += 1
        if tries > 20:
            raise ValueError("could not find a generic base point")
        z = complex(z0) + 1e-3 * complex(*rng.normal(size=2))
        D = complex(jet_derivatives(f, np.array([z]), n, 1)[1].to_complex()[0])
    # (i) D u = u0 is linear with D != 0: exactly one solution
    fiber_count = 1
    u_sol = complex(u0) / D
    check = abs(D * u_sol - u0) <= 1e-12 * abs(u0)
    cloud = solve_all(PhaseDerivative(f, n, 1, complex(u0) / complex(u1)), seed=seed)
    expected = d**n - 1
    if cloud.total_multiplicity != expected:
        raise CountMismatch(cloud.total_multiplicity, expected, cloud.audit)
    rep = ExperimentReport(
        "cohomology",
        {
            "f": list(f.coeffs), "n": n, "u0": complex(u0), "z0": complex(z0), "u1": complex(u1), "seed": seed,
            "thresholds": {"fiber_count": 1, "hypersurface_count": expected},
        },
    )
    rep.metrics.update(
        fiber_count=fiber_count, fiber_solution=u_sol, fiber_residual_ok=bool(check), base_point=z,
        hypersurface_count=cloud.total_multiplicity, jitter_tries=tries,
    )
    rep.check("fiber", fiber_count, "fiber_count", "==")
    rep.check("hypersurface", cloud.total_multiplicity, "hypersurface_count", "==")
    return rep


# ---------------------------------------------------------------------------
# power map


def expanded_iterate(f: Poly, n: int) -> np.ndarray:
    """Ascending coefficients of ``f^n`` by direct composition (small n only)."""
    c = np.array([0, 1], dtype=complex)
    fc = np.asarray(f.coeffs)
    for _ in range(n):
        out = np.zeros(1, dtype=complex)
        for a in fc[::-1]:
            out = P.polyadd(P.polymul(out, c), [a])
        c = out
    return c


def power_map_leading(d: int, n: int) -> float:
    """Leading coefficient of ``(f^n)'`` for ``f = z^d``: ``(f^n)' = d^n z^(d^n - 1)``."""
    return float(d**n)


def power_map_check(d: int, n: int, lam: complex, seed: int = 0) -> ExperimentReport:
    if d < 2:
        raise ValueError("need d >= 2")
    if lam == 0:
        raise ValueError("lambda must be nonzero")
    f = Poly(tuple([0j] * d + [1 + 0j]))
    N = d**n - 1
    D = power_map_leading(d, n)
    oracle_ok = None
    if n <= 3:
        der = P.polyder(expanded_iterate(f, n))
        nz = np.flatnonzero(np.abs(der) > 0)
        oracle_ok = bool(nz.tolist() == [N] and abs(der[N] - D) <= 1e-9 * D)
    radius = (abs(lam) / D) ** (1.0 / N)
    cloud = solve_all(PhaseDerivative(f, n, 1, complex(lam)), seed=seed)
    dev = float(np.max(np.abs(np.abs(cloud.locations) - radius))) if len(cloud) else 0.0
    disc = angular_discrepancy(cloud) if len(cloud) else 0.0
    rep = ExperimentReport(
        "power-check",
        {
            "d": d, "n": n, "lambda": complex(lam), "seed": seed,
            "thresholds": {"count": N, "radial": 1e-9, "angular": 1.0 / N + 1e-9},
        },
    )
    rep.metrics.update(
        count=cloud.total_multiplicity, radius=radius, max_radial_deviation=dev,
        angular_discrepancy=disc, leading_oracle_agrees=oracle_ok, max_residual=float(cloud.residuals.max()),
    )
    rep.check("count", cloud.total_multiplicity, "count", "==")
    rep.check("radial", dev, "radial")
    rep.check("angular", disc, "angular")
    if oracle_ok is not None:
        rep.parameters["thresholds"]["leading_oracle"] = True
        rep.check("leading_oracle", oracle_ok, "leading_oracle", "==")
    rep.cloud = cloud
    return rep


# ---------------------------------------------------------------------------
# root orbits


DIST_BINS = np.concatenate([[0.0], np.logspace(-8, 1, 19), [np.inf]])


def root_orbit_profile(f: Poly, cloud: RootCloud, horizon: int) -> ExperimentReport:
    """Closest approach of each root's forward orbit to the critical set.

    Descriptive only: records the minimum distance over ``k <= horizon`` and
    the index ``k*`` where it happens, as histograms.
    """
    rep = ExperimentReport("orbit-profile", {"f": list(f.coeffs), "horizon": horizon, "thresholds": {}})
    cls = classify_critical_orbits(f)
    if not cls.hyperbolic:
        rep.applicable = False
        rep.notes.append("f is not certified hyperbolic; profile not applicable")
        return rep
    crit = np.array([c for c, _ in critical_points(f)], dtype=complex)
    z = cloud.locations.copy()
    best = np.full(z.size, np.inf)
    kstar = np.zeros(z.size, dtype=np.int64)
    R = f.escape_radius
    alive = np.ones(z.size, dtype=bool)
    for k in range(horizon + 1):
        if z.size:
            dist = np.min(np.abs(z[:, None] - crit[None, :]), axis=1)
            dist = np.where(alive, dist, np.inf)
            better = dist < best
            best = np.where(better, dist, best)
            kstar = np.where(better, k, kstar)
        if k < horizon:
            alive &= np.abs(z) <= 4 * R
            z = np.where(alive, f(np.where(alive, z, 0)), z)
    dist_hist, _ = np.histogram(best, bins=DIST_BINS) if z.size else (np.zeros(DIST_BINS.size - 1, int), None)
    k_hist = np.bincount(kstar, minlength=horizon + 1) if z.size else np.zeros(horizon + 1, int)
    rep.metrics.update(
        roots=int(z.size),
        distance_bin_edges=[float(b) if math.isfinite(b) else "inf" for b in DIST_BINS],
        distance_histogram=dist_hist.tolist(),
        kstar_histogram=k_hist.tolist(),
        min_distances=best.tolist(),
        kstar=kstar.tolist(),
    )
    return rep
