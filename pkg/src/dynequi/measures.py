"""Point measures, logarithmic potentials and weak-* comparison tools."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _parallel
from .core import Poly, critical_points, jet_derivatives
from .fields import GridField, GridMismatch, Rect, grid_points
from .roots import DerivativeProblem, ParamDerivative, PhaseDerivative, RootCloud

__all__ = [
    "GridField",
    "GridMismatch",
    "TestFunctionSet",
    "angular_discrepancy",
    "brolin_sample",
    "discrepancy_potential",
    "log_potential",
    "pb_average_field",
    "u_n_field",
    "weak_pairing",
]


@dataclass(frozen=True)
class TestFunctionSet:
    """Gaussian bumps ``exp(-|z - center|^2 / width^2)``."""

    __test__ = False  # not a pytest class

    centers: tuple[complex, ...]
    widths: tuple[float, ...]

    def __post_init__(self):
        if len(self.centers) != len(self.widths):
            raise ValueError("one width per center")
        if any(w <= 0 for w in self.widths):
            raise ValueError("bump widths must be positive")

    @classmethod
    def grid(cls, rect: Rect = Rect(-2.0, 2.0, -2.0, 2.0), per_side: int = 5, width_factor: float = 2.0):
        """``per_side x per_side`` bumps on ``rect``; width = spacing * ``width_factor``."""
        xs = np.linspace(rect.xmin, rect.xmax, per_side)
        ys = np.linspace(rect.ymin, rect.ymax, per_side)
        spacing = (rect.xmax - rect.xmin) / (per_side - 1)
        centers = tuple(complex(x, y) for y in ys for x in xs)
        return cls(centers, tuple([spacing * width_factor] * len(centers)))

    def evaluate(self, z) -> np.ndarray:
        """Matrix ``phi_j(z_i)`` of shape ``(len(z), len(self))``."""
        z = np.asarray(z, dtype=complex).ravel()
        c = np.asarray(self.centers)
        w = np.asarray(self.widths)
        return np.exp(-np.abs(z[:, None] - c[None, :]) ** 2 / w[None, :] ** 2)

    def __len__(self):
        return len(self.centers)


def log_potential(m: RootCloud, w):
    """``sum_i weight_i * log|w - z_i|``; ``-inf`` at an atom."""
    w_arr = np.asarray(w, dtype=complex)
    flat = w_arr.ravel()
    out = np.empty(flat.size)
    weights = m.weights
    for lo in range(0, flat.size, 2048):
        blk = flat[lo:lo + 2048]
        with np.errstate(divide="ignore"):
            out[lo:lo + 2048] = np.log(np.abs(blk[:, None] - m.locations[None, :])) @ weights
    out = out.reshape(w_arr.shape)
    return float(out) if out.ndim == 0 else out


def _log_abs_G(p: DerivativeProblem, z: np.ndarray) -> np.ndarray:
    def run(chunk):
        G, _, _ = p.eval_batch(chunk)
        return (G.log_abs(),)

    return _parallel.chunked_map(run, z)[0]


def u_n_field(p: DerivativeProblem, rect: Rect, res: tuple[int, int]) -> GridField:
    """Exact logarithmic potential of the root measure of ``p``, without roots.

    Phase problems: ``(log|G| - log L) / (d^n - k)`` with ``L`` the leading
    coefficient of ``(f^n)^(k)``.  Parameter problems: ``log|G| / 2^n``.
    Zeros of ``G`` are masked out.
    """
    z = grid_points(rect, res).ravel()
    la = _log_abs_G(p, z)
    if isinstance(p, PhaseDerivative):
        vals = (la - p.log_leading()) / p.weight_denominator
    else:
        vals = la / p.weight_denominator
    mask = np.isfinite(vals)
    return GridField(rect, tuple(res), np.where(mask, vals, 0.0), mask)


@dataclass
class PBAverage:
    field: GridField
    stderr: np.ndarray  # per grid point, Monte Carlo standard error
    lambdas: np.ndarray

    @property
    def max_stderr(self) -> float:
        s = self.stderr[self.field.mask]
        return float(s.max()) if s.size else 0.0


def sample_disk(radius: float, count: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    r = radius * np.sqrt(rng.random(count))
    th = 2 * np.pi * rng.random(count)
    return r * np.exp(1j * th)


def pb_average_field(
    f: Poly, n: int, radius: float, count: int, seed: int, rect: Rect, res: tuple[int, int]
) -> PBAverage:
    """Average over ``lambda`` uniform on a disk of the normalized potential of
    ``[(f^n)' = lambda]``.

    Per point and sample the potential is ``(log|(f^n)'(z) - lambda| - log L) / (d^n - 1)``
    as in :func:`u_n_field`.  ``(f^n)'`` does not depend on ``lambda`` and is
    computed once per grid point.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    lambdas = sample_disk(radius, count, seed)
    p0 = PhaseDerivative(f, n, 1, 0j)
    z = grid_points(rect, res).ravel()

    def run(chunk):
        D = jet_derivatives(f, chunk, n, 1)[1]
        return D.log_abs(), D.angle()

    la, ang = _parallel.chunked_map(run, z)
    total = np.zeros(z.size)
    total_sq = np.zeros(z.size)
    finite = np.isfinite(la)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for lam in lambdas:
            # log|D - lam| factored around the larger of |D|, |lam| so neither overflows
            ll = math.log(abs(lam)) if lam else -np.inf
            big = la >= ll
            t = np.where(big, la, ll)
            r = np.zeros(la.shape, dtype=complex)
            if lam:
                r = np.where(big, lam * np.exp(-np.where(finite, la, 0) - 1j * ang), 0)
                small = np.exp(np.where(finite, la, ll) - ll + 1j * (ang - np.angle(lam)))
                r = np.where(big, r, np.where(finite, small, 0))
            v = t + np.log(np.abs(1 - r))
            v = (v - p0.log_leading()) / p0.weight_denominator
            total += v
            total_sq += v * v
    mean = total / count
    var = np.maximum(total_sq / count - mean**2, 0.0) * count / max(count - 1, 1)
    stderr = np.sqrt(var / count)
    mask = np.isfinite(mean)
    field = GridField(rect, tuple(res), np.where(mask, mean, 0.0), mask)
    return PBAverage(field, np.where(mask, stderr, 0.0).reshape(field.values.shape), lambdas)


def _exceptional_point(f: Poly) -> complex | None:
    crit = critical_points(f)
    if len(crit) == 1 and crit[0][1] == f.degree - 1:
        c = crit[0][0]
        if abs(f(c) - c) <= 1e-12 * (1 + abs(c)):
            return c
    return None


def _preimages(f: Poly, a: np.ndarray) -> np.ndarray:
    """All ``d`` solutions of ``f(w) = a`` for each ``a``; shape ``(len(a), d)``."""
    d = f.degree
    cs = np.asarray(f.coeffs)
    if d == 2:
        a2, a1 = cs[2], cs[1]
        a0 = cs[0] - a
        disc = np.sqrt(a1 * a1 - 4 * a2 * a0)
        disc = np.where((np.conj(a1) * disc).real < 0, -disc, disc)
        q = -(a1 + disc) / 2
        safe = q != 0
        r1 = np.where(safe, q / a2, 0)
        r2 = np.where(safe, a0 / np.where(safe, q, 1), 0)
        return np.stack([r1, r2], axis=1)
    comp = np.zeros((a.size, d, d), dtype=complex)
    mon = cs / cs[-1]
    comp[:, 0, :] = -mon[-2::-1]
    comp[:, 0, -1] = -(cs[0] - a) / cs[-1]
    if d > 1:
        comp[:, np.arange(1, d), np.arange(d - 1)] = 1
    roots = np.linalg.eigvals(comp)
    roots = np.sort_complex(roots)  # fixed order before the random pick
    df = np.asarray([i * c for i, c in enumerate(cs)][1:])
    for _ in range(3):
        val = np.polyval(cs[::-1], roots) - a[:, None]
        der = np.polyval(df[::-1], roots)
        ok = der != 0
        roots = roots - np.where(ok, val / np.where(ok, der, 1), 0)
    return roots


def brolin_sample(f: Poly, z_start: complex, depth: int, count: int, seed: int) -> RootCloud:
    """Endpoints of ``count`` random backward orbits of length ``depth``.

    Each step picks one of the ``d`` preimages uniformly.  The random choices
    come from a Philox counter-based stream drawn up front, so the result
    only depends on ``seed``.
    """
    if abs(z_start) > 4 * f.escape_radius:
        raise ValueError(f"z_start {z_start} lies too far outside (> 4 * escape radius)")
    exc = _exceptional_point(f)
    if exc is not None and abs(z_start - exc) <= 1e-12 * (1 + abs(exc)):
        raise ValueError(f"z_start {z_start} is the exceptional point of f")
    rng = np.random.Generator(np.random.Philox(seed))
    choices = rng.integers(0, f.degree, size=(depth, count))
    z0 = np.full(count, complex(z_start))

    def run(cols, zs):
        z = zs.copy()
        for step in range(depth):
            pre = _preimages(f, z)
            z = pre[np.arange(z.size), cols[:, step]]
        return (z,)

    (z,) = _parallel.chunked_map(run, np.ascontiguousarray(choices.T), z0)
    return RootCloud.uniform(z, count)


def discrepancy_potential(a: GridField, b: GridField, threshold_field: GridField, threshold: float):
    """``(sup, mean)`` of ``|a - b|`` where ``threshold_field >= threshold`` and both masks hold."""
    if not (a.same_grid(b) and a.same_grid(threshold_field)):
        raise GridMismatch("fields are sampled on different grids")
    sel = a.mask & b.mask & threshold_field.mask & (threshold_field.values >= threshold)
    if not np.any(sel):
        return 0.0, 0.0
    diff = np.abs(a.values[sel] - b.values[sel])
    return float(diff.max()), float(diff.mean())


def weak_pairing(a: RootCloud, b: RootCloud, t: TestFunctionSet) -> np.ndarray:
    """``|<a - b, phi>|`` for each test function."""
    pa = a.weights @ t.evaluate(a.locations) if len(a) else np.zeros(len(t))
    pb = b.weights @ t.evaluate(b.locations) if len(b) else np.zeros(len(t))
    return np.abs(pa - pb)


def star_discrepancy(u) -> float:
    """Star discrepancy of samples in ``[0, 1)`` against the uniform law."""
    u = np.sort(np.asarray(u, dtype=float))
    n = u.size
    if n == 0:
        return 0.0
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))


def angular_discrepancy(m: RootCloud, center: complex = 0j) -> float:
    """Star discrepancy of the angles of ``m`` about ``center`` (multiplicities repeated)."""
    rel = np.repeat(m.locations, m.multiplicities) - center
    if np.any(rel == 0):
        raise ValueError("a point coincides with the center")
    u = np.mod(np.angle(rel), 2 * np.pi) / (2 * np.pi)
    u = np.where(u >= 1.0, 0.0, u)
    return star_discrepancy(u)

