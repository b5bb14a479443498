"""Parameter space of ``p_c(z) = z**2 + c`` and a cubic-family slice probe."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _parallel
from .core import Poly, green_iterate, green_value
from .fields import GridField, Rect, grid_points
from .roots import Box, ParamDerivative, RootCloud, solve_all
from .scaled import ScaledComplex


def quadratic(c: complex) -> Poly:
    return Poly((complex(c), 0j, 1 + 0j))


def mandelbrot_green(c: complex, tol: float = 1e-12, budget: int = 10000) -> tuple[float, bool]:
    """``g_M(c) = g_{p_c}(c)`` with the certification flag of :func:`green_value`."""
    return green_value(quadratic(c), c, tol, budget)


def mandelbrot_green_grid(
    rect: Rect, res: tuple[int, int], tol: float = 1e-12, budget: int = 2000
) -> GridField:
    pts = grid_points(rect, res).ravel()

    def run(c):
        ac = np.abs(c)
        R = np.maximum(np.maximum(1.0, 2 * ac), ac + 2.0)
        return green_iterate(lambda w, idx: w * w + c[idx], c, ac, 2, 0.0, R, tol, budget)

    vals, cert = _parallel.chunked_map(run, pts)
    return GridField(rect, tuple(res), vals, cert)


def param_chain_product(c, n: int) -> ScaledComplex:
    """``2^n * prod_{k=0}^{n-1} p_c^k(c)``, i.e. ``(p_c^n)'(c)``."""
    if n < 1:
        raise ValueError("need n >= 1")
    c = np.asarray(c, dtype=complex)
    cs = ScaledComplex(c)
    w = cs
    P = ScaledComplex(np.full(c.shape, 2.0**n))
    for _ in range(n):
        P = P * w
        w = w.square() + cs
    return P


def _lambda_coeffs(lambda_poly) -> tuple[complex, ...]:
    if isinstance(lambda_poly, Poly):
        return lambda_poly.coeffs
    return tuple(complex(x) for x in np.atleast_1d(lambda_poly))


def param_problem(n: int, lambda_poly) -> ParamDerivative:
    return ParamDerivative(n, _lambda_coeffs(lambda_poly))


def param_solve(n: int, lambda_poly, search: Box | None = None, seed: int = 0) -> RootCloud:
    """Solutions of ``(p_c^n)'(c) = lambda(c)``, each with weight ``1/2^n``."""
    p = param_problem(n, lambda_poly)
    if p.lam_degree >= 2**n - 1:
        raise ValueError(f"deg lambda = {p.lam_degree} must be below 2^n - 1 = {2**n - 1}")
    return solve_all(p, search, seed)


def leading_log_correction(n: int) -> float:
    """``2^-n log|lc|`` for the degree ``2^n - 1`` polynomial ``(p_c^n)'(c) - lambda(c)``.

    Every ``p_c^k(c)`` is monic in ``c``, so ``lc = 2^n``.
    """
    return n * math.log(2.0) / 2**n


def param_potential_field(n: int, lambda_poly, rect: Rect, res: tuple[int, int]) -> GridField:
    """``u(c) = 2^-n log|(p_c^n)'(c) - lambda(c)|`` on a grid; zeros masked."""
    p = param_problem(n, lambda_poly)
    z = grid_points(rect, res).ravel()

    def run(chunk):
        G, _, _ = p.eval_batch(chunk)
        return (G.log_abs(),)

    (la,) = _parallel.chunked_map(run, z)
    vals = la / 2**n
    mask = np.isfinite(vals)
    return GridField(rect, tuple(res), np.where(mask, vals, 0.0), mask)


@dataclass
class EscapeEstimateReport:
    samples: np.ndarray
    n_values: list[int]
    green: np.ndarray
    errors: np.ndarray  # shape (len(samples), len(n_values))
    c_hat: np.ndarray  # per n: max_c error * 2^n / n
    growth_limit: float = 1.5

    @property
    def passed(self) -> bool:
        return bool(self.c_hat[-1] <= self.growth_limit * self.c_hat[0])


def orbit_log_abs(c, n: int) -> np.ndarray:
    """``log|p_c^n(c)|`` in scaled arithmetic."""
    c = np.asarray(c, dtype=complex)
    cs = ScaledComplex(c)
    w = cs
    for _ in range(n):
        w = w.square() + cs
    return w.log_abs()


def escape_estimate_check(
    samples, n_range, min_green: float = 0.05, tol: float = 1e-13, budget: int = 10000
) -> EscapeEstimateReport:
    """Empirical constant in ``|2^-n log|p_c^n(c)| - g_M(c)| <= C n / 2^n``."""
    samples = np.asarray(samples, dtype=complex).ravel()
    greens = []
    for c in samples:
        g, ok = mandelbrot_green(c, tol, budget)
        if not ok or g < min_green:
            raise ValueError(f"sample c={c} has g_M={g:.4g} (certified={ok}); need >= {min_green}")
        greens.append(g)
    green = np.array(greens)
    ns = list(n_range)
    errs = np.empty((samples.size, len(ns)))
    for j, n in enumerate(ns):
        errs[:, j] = np.abs(orbit_log_abs(samples, n) / 2**n - green)
    c_hat = np.array([errs[:, j].max() * 2**n / n for j, n in enumerate(ns)])
    return EscapeEstimateReport(samples, ns, green, errs, c_hat)


def sample_escaped_parameters(
    count: int, seed: int, rect: Rect = Rect(-2.5, 1.5, -2.0, 2.0), min_green: float = 0.05
) -> np.ndarray:
    """Uniform parameters in ``rect`` with certified ``g_M >= min_green`` (rejection sampling)."""
    rng = np.random.Generator(np.random.Philox(seed))
    out: list[complex] = []
    while len(out) < count:
        c = complex(rng.uniform(rect.xmin, rect.xmax), rng.uniform(rect.ymin, rect.ymax))
        g, ok = mandelbrot_green(c)
        if ok and g >= min_green:
            out.append(c)
    return np.array(out)


# ---------------------------------------------------------------------------
# cubic family  P_{c,a}(z) = z^3/3 - (c/2) z^2 + a^3, critical points 0 and c


def cubic_poly(c: complex, a: complex) -> Poly:
    return Poly((complex(a) ** 3, 0j, -complex(c) / 2, 1 / 3 + 0j))


@dataclass(frozen=True)
class CubicSliceSpec:
    base: tuple[complex, complex]
    direction: tuple[complex, complex]
    critical_index: int
    n: int
    lam: complex = 0j

    def __post_init__(self):
        if self.direction[0] == 0 and self.direction[1] == 0:
            raise ValueError("slice direction must be nonzero")
        if self.critical_index not in (0, 1):
            raise ValueError("critical index must be 0 or 1")

    def parameters(self, t):
        t = np.asarray(t, dtype=complex)
        return self.base[0] + t * self.direction[0], self.base[1] + t * self.direction[1]


@dataclass
class CubicSliceReport:
    spec: CubicSliceSpec
    field: GridField
    green_critical: GridField  # g(c_i)
    green_value_point: GridField  # g(P(c_i))
    escaped_fraction: float
    sup_to_critical: float | None
    sup_to_critical_value: float | None
    mean_to_critical: float | None
    mean_to_critical_value: float | None
    functional_equation_error: float | None

    @property
    def closer(self) -> str | None:
        if self.sup_to_critical is None:
            return None
        return "critical_value" if self.sup_to_critical_value < self.sup_to_critical else "critical_point"


def _cubic_green(z, c, a, tol, budget):
    a3 = a**3
    rest = 3.0 * (np.abs(c) / 2 + np.abs(a3))
    R = np.maximum(np.maximum(1.0, 2 * rest), rest + 6.0)
    shift = math.log(1 / 3) / 2

    def step(w, idx):
        return (w / 3 - c[idx] / 2) * w * w + a3[idx]

    return green_iterate(step, z, rest, 3, shift, R, tol, budget)


def cubic_derivative_field(spec: CubicSliceSpec, c, a) -> np.ndarray:
    """``3^-n log|(P^n)'(P(c_i)) - lambda|`` at parameters ``(c, a)``."""
    c = np.asarray(c, dtype=complex)
    a = np.asarray(a, dtype=complex)
    crit = np.zeros_like(c) if spec.critical_index == 0 else c
    cs = ScaledComplex(c)
    a3 = ScaledComplex(a**3)

    def P(w: ScaledComplex) -> ScaledComplex:
        return (w * (1 / 3) - cs * 0.5) * w.square() + a3

    w = P(ScaledComplex(crit))
    D = ScaledComplex.ones(c.shape)
    for _ in range(spec.n):
        D = D * (w * (w - cs))
        w = P(w)
    G = D - ScaledComplex(np.full(c.shape, complex(spec.lam)))
    return G.log_abs() / 3**spec.n


def cubic_slice_experiment(
    spec: CubicSliceSpec,
    rect: Rect,
    res: tuple[int, int],
    threshold: float = 0.1,
    tol: float = 1e-12,
    budget: int = 2000,
) -> CubicSliceReport:
    """Compare the slice potential with ``g(c_i)`` and ``g(P(c_i)) = 3 g(c_i)``.

    Exploratory: it reports which normalization the computed field follows on
    the region where the marked critical orbit escapes.
    """
    t = grid_points(rect, res).ravel()
    c, a = spec.parameters(t)
    crit = np.zeros_like(c) if spec.critical_index == 0 else c
    pc = (crit / 3 - c / 2) * crit * crit + a**3

    def run(cc, aa, zc, zv):
        g0, ok0 = _cubic_green(zc, cc, aa, tol, budget)
        g1, ok1 = _cubic_green(zv, cc, aa, tol, budget)
        with np.errstate(divide="ignore"):
            fld = cubic_derivative_field(spec, cc, aa)
        return fld, g0, ok0, g1, ok1

    fld, g0, ok0, g1, ok1 = _parallel.chunked_map(run, c, a, crit, pc)
    esc = ok0 & ok1 & (g0 >= threshold) & np.isfinite(fld)
    field = GridField(rect, tuple(res), np.where(esc, fld, 0.0), esc)
    gcrit = GridField(rect, tuple(res), g0, ok0)
    gval = GridField(rect, tuple(res), g1, ok1)
    frac = float(esc.mean())
    if not np.any(esc):
        return CubicSliceReport(spec, field, gcrit, gval, 0.0, None, None, None, None, None)
    d0 = np.abs(fld[esc] - g0[esc])
    d1 = np.abs(fld[esc] - g1[esc])
    fe = float(np.max(np.abs(g1[esc] - 3 * g0[esc])))
    return CubicSliceReport(
        spec, field, gcrit, gval, frac, float(d0.max()), float(d1.max()), float(d0.mean()), float(d1.mean()), fe
    )
