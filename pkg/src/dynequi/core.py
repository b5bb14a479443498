"""Polynomials, derivative jets of iterates, Green functions and critical orbits."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from . import _parallel
from .fields import GridField, Rect, grid_points
from .scaled import ScaledComplex

MAX_JET_ORDER = 9


class CriticalPointError(RuntimeError):
    """Critical points could not be resolved to the residual target."""


def _strip(coeffs) -> tuple[complex, ...]:
    cs = [complex(c) for c in coeffs]
    if not cs:
        cs = [0j]
    while len(cs) > 1 and cs[-1] == 0:
        cs.pop()
    return tuple(cs)


def escape_radius_for(coeffs) -> float:
    """Radius ``R`` with ``|z| > R  =>  |f(z)| > 2|z|`` and ``|f(z)| >= |a_d||z|^d / 2``."""
    lead = abs(coeffs[-1])
    rest = sum(abs(a) for a in coeffs[:-1]) / lead
    return max(1.0, 2.0 * rest, rest + 2.0 / lead)


@dataclass(frozen=True)
class Poly:
    """Complex polynomial with ascending coefficients ``a_0 .. a_d``.

    ``monic_conjugacy = (s, t)`` records ``phi(z) = s*z + t`` when this
    polynomial was produced as ``phi o f o phi^-1`` by :func:`normalize_monic`.
    """

    coeffs: tuple[complex, ...]
    monic_conjugacy: tuple[complex, complex] = (1 + 0j, 0j)
    escape_radius: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _strip(self.coeffs))
        rad = escape_radius_for(self.coeffs) if self.degree >= 2 else math.inf
        object.__setattr__(self, "escape_radius", rad)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1]

    @property
    def is_monic(self) -> bool:
        return self.coeffs[-1] == 1

    def __call__(self, z):
        acc = np.zeros_like(np.asarray(z, dtype=complex)) + self.coeffs[-1]
        for a in reversed(self.coeffs[:-1]):
            acc = acc * z + a
        return acc if np.ndim(acc) else complex(acc)

    def eval_scaled(self, w: ScaledComplex) -> ScaledComplex:
        acc = ScaledComplex(np.full(w.shape, self.coeffs[-1]))
        for a in reversed(self.coeffs[:-1]):
            acc = acc * w + a
        return acc

    def to_phi(self, z):
        s, t = self.monic_conjugacy
        return s * np.asarray(z) + t

    def from_phi(self, w):
        s, t = self.monic_conjugacy
        return (np.asarray(w) - t) / s

    def __repr__(self) -> str:
        return f"Poly({[complex(c) for c in self.coeffs]!r})"


def normalize_monic(f: Poly) -> Poly:
    """Affinely conjugate ``f`` to a monic polynomial ``g``.

    With ``phi(z) = s*z``, ``g = phi o f o phi^-1`` so ``g(s*z) = s*f(z)``;
    ``s`` is the principal root of ``s**(d-1) = a_d``.
    """
    d = f.degree
    if d < 2:
        raise ValueError("normalize_monic needs degree >= 2")
    if f.is_monic:
        return Poly(f.coeffs, (1 + 0j, 0j))
    s = cmath.exp(cmath.log(f.leading) / (d - 1))
    coeffs = [a * s ** (1 - i) for i, a in enumerate(f.coeffs)]
    coeffs[-1] = 1 + 0j
    return Poly(coeffs, (s, 0j))


def derivative(f: Poly) -> Poly:
    if f.degree == 0:
        return Poly((0j,))
    return Poly([i * a for i, a in enumerate(f.coeffs)][1:])


def _cluster(roots: np.ndarray, tol: float) -> list[list[complex]]:
    groups: list[list[complex]] = []
    for r in roots:
        for g in groups:
            if min(abs(r - x) for x in g) <= tol:
                g.append(r)
                break
        else:
            groups.append([r])
    # single-linkage merge of groups that became adjacent
    merged = True
    while merged:
        merged = False
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                if min(abs(a - b) for a in groups[i] for b in groups[j]) <= tol:
                    groups[i].extend(groups.pop(j))
                    merged = True
                    break
            if merged:
                break
    return groups


def _newton_poly(p: Poly, z: complex, iters: int = 60) -> complex:
    dp = derivative(p)
    for _ in range(iters):
        v, dv = p(z), dp(z)
        if dv == 0:
            break
        step = v / dv
        z -= step
        if abs(step) <= 4e-16 * (1 + abs(z)):
            break
    return z


def critical_points(f: Poly, budget: int = 60) -> list[tuple[complex, int]]:
    """Roots of ``f'`` with multiplicity, sorted by (real, imag)."""
    if f.degree < 2:
        raise ValueError("critical_points needs degree >= 2")
    df = derivative(f)
    raw = np.roots(np.array(df.coeffs[::-1]))
    bound = 1.0 + max(abs(a / df.leading) for a in df.coeffs)
    groups = _cluster(list(raw), 1e-4 * bound)
    out = []
    for g in groups:
        m = len(g)
        z = complex(np.mean(g))
        # multiple root of f' is a simple root of its (m-1)-th derivative
        q = df
        for _ in range(m - 1):
            q = derivative(q)
        z = _newton_poly(q, z, budget)
        scale = sum(abs(a) * max(1.0, abs(z)) ** i for i, a in enumerate(df.coeffs))
        if not math.isfinite(z.real) or abs(df(z)) > 1e-10 * scale:
            raise CriticalPointError(
                f"critical point near {z} has residual {abs(df(z)):.3e} (scale {scale:.3e})"
            )
        out.append((z, m))
    out.sort(key=lambda t: (round(t[0].real, 12), round(t[0].imag, 12)))
    return out


# ---------------------------------------------------------------------------
# jets


def _taylor_at(f: Poly, w: ScaledComplex, K: int) -> list[ScaledComplex]:
    """Taylor coefficients ``f^(m)(w)/m!`` for ``m = 0..K`` by repeated synthetic division."""
    cur = [ScaledComplex(np.full(w.shape, a)) for a in reversed(f.coeffs)]
    out = []
    for _ in range(K + 1):
        if not cur:
            out.append(ScaledComplex.zeros(w.shape))
            continue
        acc = cur[0]
        quotient = [acc]
        for a in cur[1:]:
            acc = acc * w + a
            quotient.append(acc)
        out.append(quotient[-1])
        cur = quotient[:-1]
    return out


def _series_mul(a: list, b: list, K: int, shape) -> list[ScaledComplex]:
    out = [None] * (K + 1)
    for i in range(K + 1):
        if a[i] is None:
            continue
        for j in range(K + 1 - i):
            if b[j] is None:
                continue
            term = a[i] * b[j]
            out[i + j] = term if out[i + j] is None else out[i + j] + term
    return out


def _compose_step(f: Poly, series: list[ScaledComplex], K: int) -> list[ScaledComplex]:
    """Order-``K`` jet of ``f o g`` from the jet of ``g`` (Taylor coefficients)."""
    shape = series[0].shape
    b = _taylor_at(f, series[0], K)
    delta = [None] + series[1:]
    s = [b[K]] + [None] * K
    for m in range(K - 1, -1, -1):
        s = _series_mul(s, delta, K, shape)
        s[0] = b[m] if s[0] is None else s[0] + b[m]
    return [x if x is not None else ScaledComplex.zeros(shape) for x in s]


def _initial_series(z0: np.ndarray, K: int) -> list[ScaledComplex]:
    shape = z0.shape
    s = [ScaledComplex(z0)]
    if K >= 1:
        s.append(ScaledComplex.ones(shape))
    s += [ScaledComplex.zeros(shape) for _ in range(K - 1)]
    return s


def iterate_jet(f: Poly, z0, n: int, K: int) -> list[ScaledComplex]:
    """Taylor coefficients of ``f^n`` at each point of ``z0`` up to order ``K``."""
    z0 = np.asarray(z0, dtype=complex)
    s = _initial_series(z0, K)
    for _ in range(n):
        s = _compose_step(f, s, K)
    return s


def jet_derivatives(f: Poly, z0, n: int, K: int) -> list[ScaledComplex]:
    """``[(f^n)(z0), (f^n)'(z0), ..., (f^n)^(K)(z0)]`` in scaled arithmetic."""
    s = iterate_jet(f, z0, n, K)
    return [s[i] * float(factorial(i)) if i > 1 else s[i] for i in range(K + 1)]


@dataclass
class OrbitJet:
    """Entry ``(j, i)`` holds ``(f^j)^(i)(z0)`` as mantissa/exponent arrays."""

    z0: complex
    n: int
    k: int
    mantissa: np.ndarray
    exponent: np.ndarray

    def entry(self, j: int, i: int) -> ScaledComplex:
        return ScaledComplex(self.mantissa[j, i], self.exponent[j, i], normalized=True)

    def value(self, j: int, i: int) -> complex:
        return complex(self.entry(j, i).to_complex())

    def log_abs(self, j: int, i: int) -> float:
        return float(self.entry(j, i).log_abs())


def orbit_jet(f: Poly, z0: complex, n: int, k: int) -> OrbitJet:
    if n < 0 or not 0 <= k <= MAX_JET_ORDER - 1:
        raise ValueError("need n >= 0 and 0 <= k <= 8")
    m = np.zeros((n + 1, k + 1), dtype=complex)
    e = np.zeros((n + 1, k + 1), dtype=np.int64)
    s = _initial_series(np.asarray(complex(z0)), k)
    for j in range(n + 1):
        if j:
            s = _compose_step(f, s, k)
        for i in range(k + 1):
            v = s[i] * float(factorial(i)) if i > 1 else s[i]
            m[j, i], e[j, i] = v.m, v.e
    return OrbitJet(complex(z0), n, k, m, e)


# ---------------------------------------------------------------------------
# Green function


def _green_tail(d: int, rest: float, absw, scale):
    """Bound on ``|g - d^-N (log|w_N| + log|a_d|/(d-1))|`` once ``|w_N| > R``."""
    return scale / d * 2.0 * rest / absw * (2.0 * d / (2.0 * d - 1.0))


def green_value(f: Poly, z: complex, tol: float = 1e-12, budget: int = 10000) -> tuple[float, bool]:
    """Escape-rate potential ``g_f(z)`` with a certified truncation error.

    Once the orbit leaves the escape radius, ``d^-N (log|f^N z| + log|a_d|/(d-1))``
    is returned for the first ``N`` whose tail bound is below ``tol``.
    Bounded orbits return ``(0.0, False)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    d = f.degree
    rest = sum(abs(a) for a in f.coeffs[:-1]) / abs(f.leading)
    shift = math.log(abs(f.leading)) / (d - 1)
    R = f.escape_radius
    w = complex(z)
    scale = 1.0
    for _ in range(budget + 1):
        aw = abs(w)
        if aw > R:
            if _green_tail(d, rest, aw, scale) <= tol or aw > 1e150:
                return scale * (math.log(aw) + shift), True
        w = f(w)
        scale /= d
    return 0.0, False


def green_iterate(step, z, rest, d: int, shift, R, tol: float, budget: int):
    """Vectorized Green values for a family of degree-``d`` maps.

    ``step(w, idx)`` applies the map belonging to points ``idx`` to ``w``;
    ``rest``, ``shift`` and ``R`` are per-point arrays (or scalars).
    """
    z = np.asarray(z, dtype=complex).ravel()
    npts = z.size
    rest = np.broadcast_to(np.asarray(rest, dtype=float), (npts,))
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (npts,))
    R = np.broadcast_to(np.asarray(R, dtype=float), (npts,))
    values = np.zeros(npts)
    cert = np.zeros(npts, dtype=bool)
    idx = np.arange(npts)
    w = z.copy()
    scale = 1.0
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(budget + 1):
            aw = np.abs(w)
            esc = aw > R[idx]
            if np.any(esc):
                tail = np.full(aw.shape, np.inf)
                tail[esc] = _green_tail(d, rest[idx[esc]], aw[esc], scale)
                fin = esc & ((tail <= tol) | (aw > 1e150))
                if np.any(fin):
                    j = idx[fin]
                    values[j] = scale * (np.log(aw[fin]) + shift[j])
                    cert[j] = True
                    keep = ~fin
                    idx, w = idx[keep], w[keep]
            if idx.size == 0:
                break
            w = step(w, idx)
            scale /= d
    return values, cert


def green_grid(
    f: Poly, rect: Rect, res: tuple[int, int], tol: float = 1e-12, budget: int = 2000
) -> GridField:
    """Green function sampled on a grid; the mask flags certified escape."""
    d = f.degree
    rest = sum(abs(a) for a in f.coeffs[:-1]) / abs(f.leading)
    shift = math.log(abs(f.leading)) / (d - 1)
    pts = grid_points(rect, res).ravel()

    def run(chunk):
        return green_iterate(lambda w, idx: f(w), chunk, rest, d, shift, f.escape_radius, tol, budget)

    vals, cert = _parallel.chunked_map(run, pts)
    return GridField(rect, tuple(res), vals, cert)


# ---------------------------------------------------------------------------
# critical orbits

SNAP_TOL = 1e-9
MULTIPLIER_MARGIN = 1e-6


@dataclass(frozen=True)
class CriticalFate:
    point: complex
    multiplicity: int
    kind: str  # "escaping" | "attracted" | "undetermined"
    green_value: float = 0.0
    cycle: tuple[complex, ...] = ()
    period: int = 0
    multiplier: complex | None = None


@dataclass(frozen=True)
class CriticalClassification:
    fates: tuple[CriticalFate, ...]
    hyperbolic: bool
    has_escaping_critical: bool

    @property
    def undetermined(self) -> bool:
        return any(f.kind == "undetermined" for f in self.fates)


def _close(a: complex, b: complex, tol: float = SNAP_TOL) -> bool:
    return abs(a - b) <= tol * (1.0 + abs(a))


def _brent_cycle(f: Poly, w: complex, max_steps: int) -> tuple[complex, int] | None:
    power = lam = 1
    tortoise, hare = w, f(w)
    steps = 0
    while not _close(tortoise, hare):
        if power == lam:
            tortoise = hare
            power *= 2
            lam = 0
        hare = f(hare)
        lam += 1
        steps += 1
        if steps > max_steps or not math.isfinite(abs(hare)):
            return None
    return hare, lam


def _iterate_with_derivative(f: Poly, df: Poly, z: complex, p: int) -> tuple[complex, complex]:
    w, dw = z, 1 + 0j
    for _ in range(p):
        dw *= df(w)
        w = f(w)
    return w, dw


def _refine_cycle_point(f: Poly, df: Poly, z: complex, p: int) -> complex | None:
    for _ in range(100):
        w, dw = _iterate_with_derivative(f, df, z, p)
        denom = dw - 1
        if denom == 0:
            return z
        step = (w - z) / denom
        z -= step
        if abs(step) <= 1e-15 * (1 + abs(z)):
            break
    return z if math.isfinite(abs(z)) else None


def classify_critical_orbits(f: Poly, budget: int = 20000) -> CriticalClassification:
    """Fate of each critical point: escaping, attracted to a cycle, or undetermined.

    Escape is certified through :func:`green_value`.  Otherwise the orbit is
    iterated, a cycle is detected with Brent's algorithm (snap tolerance
    ``1e-9``), the cycle point is refined by Newton on ``f^p(z) - z``, and the
    cycle is called attracting only when ``|multiplier| < 1 - 1e-6``.
    Siegel disks and neutral cycles end up ``undetermined``.
    """
    df = derivative(f)
    fates = []
    for c, mult in critical_points(f):
        g, escaped = green_value(f, c, budget=budget)
        if escaped:
            fates.append(CriticalFate(c, mult, "escaping", green_value=g))
            continue
        w = c
        for _ in range(budget):
            w = f(w)
        found = _brent_cycle(f, w, budget)
        if found is None:
            fates.append(CriticalFate(c, mult, "undetermined"))
            continue
        w, lam = found
        z = _refine_cycle_point(f, df, w, lam)
        if z is None or abs(z - w) > 1e-6 * (1 + abs(w)):
            fates.append(CriticalFate(c, mult, "undetermined"))
            continue
        period = next(p for p in range(1, lam + 1) if _close(_iterate_with_derivative(f, df, z, p)[0], z))
        if period != lam:
            z = _refine_cycle_point(f, df, z, period) or z
        cycle = [z]
        for _ in range(period - 1):
            cycle.append(f(cycle[-1]))
        multiplier = _iterate_with_derivative(f, df, z, period)[1]
        if abs(multiplier) < 1 - MULTIPLIER_MARGIN:
            fates.append(CriticalFate(c, mult, "attracted", cycle=tuple(cycle), period=period, multiplier=multiplier))
        else:
            fates.append(CriticalFate(c, mult, "undetermined", cycle=tuple(cycle), period=period, multiplier=multiplier))
    hyperbolic = all(x.kind in ("escaping", "attracted") for x in fates)
    has_escaping = any(x.kind == "escaping" for x in fates)
    return CriticalClassification(tuple(fates), hyperbolic, has_escaping)
