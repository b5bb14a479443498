"""All solutions of ``(f^n)^(k)(z) = lambda`` or ``(p_c^n)'(c) = lambda(c)``.

The left-hand sides are never expanded into coefficients (those grow like
``exp(d**n)``); they are evaluated implicitly in scaled arithmetic.  Roots are
counted with the argument principle on box contours, isolated by quadtree
subdivision and polished by damped Newton steps.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial

import numpy as np

from . import _parallel
from .core import Poly, iterate_jet
from .scaled import ScaledComplex

EPS = np.finfo(float).eps


class RootFindingError(RuntimeError):
    def __init__(self, message: str, audit: list | None = None):
        super().__init__(message)
        self.audit = list(audit or [])


class NotCertified(RootFindingError):
    """A box contour could not be certified."""


class SubdivisionFailure(RootFindingError):
    """Subdivision could not resolve a region."""


class NewtonEscape(RootFindingError):
    """Newton iterate left the doubled box."""


class CountMismatch(RootFindingError):
    def __init__(self, found: int, expected: int, audit: list | None = None):
        super().__init__(f"found {found} roots, expected {expected}", audit)
        self.found = found
        self.expected = expected


# ---------------------------------------------------------------------------
# problems


def _poly_eval(coeffs, z):
    acc = np.zeros_like(z) + coeffs[-1]
    for a in reversed(coeffs[:-1]):
        acc = acc * z + a
    return acc


def _poly_deriv(coeffs):
    d = [i * a for i, a in enumerate(coeffs)][1:]
    return d or [0j]


class DerivativeProblem:
    """Analytic ``G`` evaluated implicitly, with its expected root count."""

    expected_count: int
    weight_denominator: int
    n: int

    def eval_batch(self, z: np.ndarray) -> tuple[ScaledComplex, ScaledComplex, np.ndarray]:
        """``(G, G', log(|main term| + |lambda|))`` at each point of ``z``."""
        raise NotImplementedError

    def eval_G(self, z) -> tuple[ScaledComplex, ScaledComplex]:
        G, Gp, _ = self.eval_batch(np.asarray(z, dtype=complex))
        return G, Gp

    @property
    def weight_per_unit(self) -> float:
        return 1.0 / self.weight_denominator

    def log_leading(self) -> float:
        raise NotImplementedError

    def default_search_half_width(self) -> float:
        raise NotImplementedError


def _subtract(D: ScaledComplex, Dp: ScaledComplex, lam, lamp):
    lam = np.broadcast_to(np.asarray(lam, dtype=complex), D.shape)
    G = D - ScaledComplex(lam)
    Gp = Dp - ScaledComplex(np.broadcast_to(np.asarray(lamp, dtype=complex), D.shape))
    with np.errstate(divide="ignore"):
        log_scale = np.logaddexp(D.log_abs(), np.log(np.abs(lam)))
    return G, Gp, log_scale


@dataclass(frozen=True)
class PhaseDerivative(DerivativeProblem):
    """``G(z) = (f^n)^(k)(z) - lambda``."""

    f: Poly
    n: int
    k: int = 1
    lam: complex = 0j

    def __post_init__(self):
        if self.f.degree < 2 or self.n < 0 or self.k < 1:
            raise ValueError("need degree >= 2, n >= 0, k >= 1")
        if self.f.degree ** self.n <= self.k:
            raise ValueError("(f^n)^(k) is constant: need d**n > k")

    @property
    def expected_count(self) -> int:
        return self.f.degree**self.n - self.k

    @property
    def weight_denominator(self) -> int:
        return self.f.degree**self.n - self.k

    def eval_batch(self, z):
        z = np.asarray(z, dtype=complex)
        s = iterate_jet(self.f, z, self.n, self.k + 1)
        D = s[self.k] * float(factorial(self.k))
        Dp = s[self.k + 1] * float(factorial(self.k + 1))
        return _subtract(D, Dp, self.lam, 0j)

    def log_leading(self) -> float:
        """``log |leading coefficient of (f^n)^(k)|``."""
        d, n = self.f.degree, self.n
        N = d**n
        out = (N - 1) / (d - 1) * math.log(abs(self.f.leading))
        out += sum(math.log(N - j) for j in range(self.k))
        return out

    def default_search_half_width(self) -> float:
        f = self.f
        center = abs(f.coeffs[-2] / (f.degree * f.leading))
        N = self.expected_count
        extra = 0.0
        if self.lam != 0:
            extra = math.exp((math.log(abs(self.lam)) - self.log_leading()) / N)
        return 1.1 * f.escape_radius + center + extra + 0.1


@dataclass(frozen=True)
class ParamDerivative(DerivativeProblem):
    """``G(c) = (p_c^n)'(c) - lambda(c)`` for ``p_c(z) = z**2 + c``.

    The main term is the chain-rule product ``2^n * prod_{k<n} p_c^k(c)``;
    its ``c``-derivative follows the product rule through
    ``w_{k+1} = w_k**2 + c``, ``w'_{k+1} = 2 w_k w'_k + 1``.
    """

    n: int
    lam_coeffs: tuple[complex, ...] = (0j,)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need n >= 1")
        cs = [complex(c) for c in np.atleast_1d(self.lam_coeffs)] or [0j]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        object.__setattr__(self, "lam_coeffs", tuple(cs))

    @property
    def lam_degree(self) -> int:
        return 0 if self.lam_coeffs == (0j,) else len(self.lam_coeffs) - 1

    @property
    def expected_count(self) -> int:
        return max(2**self.n - 1, self.lam_degree)

    @property
    def weight_denominator(self) -> int:
        return 2**self.n

    def main_term(self, c) -> tuple[ScaledComplex, ScaledComplex]:
        c = np.asarray(c, dtype=complex)
        cs = ScaledComplex(c)
        w, dw = cs, ScaledComplex.ones(c.shape)
        P = ScaledComplex(np.full(c.shape, 2.0**self.n))
        dP = ScaledComplex.zeros(c.shape)
        for _ in range(self.n):
            dP = dP * w + P * dw
            P = P * w
            dw = 2.0 * (w * dw) + 1.0
            w = w.square() + cs
        return P, dP

    def eval_batch(self, c):
        c = np.asarray(c, dtype=complex)
        P, dP = self.main_term(c)
        lam = _poly_eval(self.lam_coeffs, c)
        lamp = _poly_eval(_poly_deriv(self.lam_coeffs), c)
        return _subtract(P, dP, lam, lamp)

    def log_leading(self) -> float:
        """``log |leading coefficient|`` (``2^n`` when ``deg lambda < 2^n - 1``)."""
        if self.lam_degree > 2**self.n - 1:
            return math.log(abs(self.lam_coeffs[-1]))
        return self.n * math.log(2.0)

    def default_search_half_width(self) -> float:
        big = sum(abs(a) for a in self.lam_coeffs)
        extra = (big / 2.0**self.n) ** (1.0 / max(1, 2**self.n - 1 - self.lam_degree)) if big else 0.0
        return 2.2 + extra


def eval_G(p: DerivativeProblem, z) -> tuple[ScaledComplex, ScaledComplex]:
    return p.eval_G(z)


# ---------------------------------------------------------------------------
# boxes and clouds


@dataclass(frozen=True)
class Box:
    """Axis-aligned box; square unless ``half_height`` is given."""

    center: complex
    half_width: float
    half_height: float | None = None

    def __post_init__(self):
        if self.half_height is None:
            object.__setattr__(self, "half_height", self.half_width)
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("box half sizes must be positive")

    @property
    def size(self) -> float:
        return max(self.half_width, self.half_height)

    def contains(self, z) -> bool:
        z = complex(z)
        return (
            abs(z.real - self.center.real) <= self.half_width
            and abs(z.imag - self.center.imag) <= self.half_height
        )


@dataclass
class RootCloud:
    """Weighted point measure ``sum_i weight * mult_i * delta_{z_i}``."""

    locations: np.ndarray
    multiplicities: np.ndarray
    residuals: np.ndarray
    weight_denominator: int
    audit: list = field(default_factory=list)

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=complex).ravel()
        self.multiplicities = np.asarray(self.multiplicities, dtype=np.int64).ravel()
        self.residuals = np.asarray(self.residuals, dtype=float).ravel()

    @classmethod
    def uniform(cls, points, denominator: int | None = None) -> "RootCloud":
        pts = np.asarray(points, dtype=complex).ravel()
        return cls(pts, np.ones(pts.size, dtype=np.int64), np.zeros(pts.size), denominator or max(pts.size, 1))

    @property
    def weight_per_unit(self) -> float:
        return 1.0 / self.weight_denominator

    @property
    def weights(self) -> np.ndarray:
        return self.multiplicities / self.weight_denominator

    @property
    def total_multiplicity(self) -> int:
        return int(self.multiplicities.sum())

    @property
    def exact_mass(self) -> Fraction:
        return Fraction(self.total_multiplicity, self.weight_denominator)

    @property
    def total_mass(self) -> float:
        return self.weight_per_unit * self.total_multiplicity

    def __len__(self) -> int:
        return self.locations.size


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class WindingOptions:
    initial_per_side: int = 8
    max_phase_step: float = math.pi / 2
    max_log_step: float = 1.0
    max_trapezoid_error: float = 0.05
    max_samples: int = 1 << 20
    max_rounds: int = 64


def _eval_flat(p: DerivativeProblem, z: np.ndarray):
    def run(chunk):
        G, Gp, scale = p.eval_batch(chunk)
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            L = (Gp / G).to_complex()
        return G.log_abs(), G.angle(), L, scale

    return _parallel.chunked_map(run, z)


_SIDE_DIR = np.array([1, 1j, -1, -1j])


def _contour_points(cx, cy, hx, hy, t):
    side = np.minimum(np.floor(t).astype(int), 3)
    s = t - side
    x = np.select([side == 0, side == 1, side == 2], [-1 + 2 * s, np.ones_like(s), 1 - 2 * s], -np.ones_like(s))
    y = np.select([side == 0, side == 1, side == 2], [-np.ones_like(s), -1 + 2 * s, np.ones_like(s)], 1 - 2 * s)
    return (cx + hx * x) + 1j * (cy + hy * y)


def _winding_batch(p: DerivativeProblem, cx, cy, hx, hy, opts: WindingOptions = WindingOptions()):
    """Winding numbers of ``G`` around many boxes at once.

    Returns ``(counts, certified)``.  A contour is refined (midpoints
    inserted) until every phase step is below ``pi/2``, the first-order
    estimate ``|G'/G| * step`` is below ``max_log_step`` and the trapezoid
    rule on ``G'/G`` reproduces the sampled change of ``log G``.  It is certified
    only if every sample clears the rounding floor
    ``log|G| >= log(60 eps n) + log(|main| + |lambda|)``.
    """
    cx, cy, hx, hy = (np.asarray(a, dtype=float).ravel() for a in (cx, cy, hx, hy))
    nb = cx.size
    m0 = opts.initial_per_side
    box = np.repeat(np.arange(nb), 4 * m0)
    t = np.tile(np.arange(4 * m0) / m0, nb)
    z = _contour_points(cx[box], cy[box], hx[box], hy[box], t)
    # lap holds G'/G at each sample
    la, ang, lap, scale = _eval_flat(p, z)
    floor_off = math.log(60 * EPS * max(p.n, 1))
    ok = np.ones(nb, dtype=bool)
    done = np.zeros(nb, dtype=bool)
    counts = np.zeros(nb, dtype=np.int64)
    min_len = np.maximum(2e-9 * np.maximum(hx, hy), 1e-15 * (1 + np.hypot(cx, cy)))
    for _ in range(opts.max_rounds):
        bad = ~(la >= scale + floor_off)
        if np.any(bad):
            ok[np.unique(box[bad])] = False
        order = np.lexsort((t, box))
        box, t, la, ang, lap, scale = box[order], t[order], la[order], ang[order], lap[order], scale[order]
        # successor index within the same box (cyclic)
        starts = np.searchsorted(box, np.arange(nb))
        ends = np.searchsorted(box, np.arange(nb), side="right")
        nxt = np.arange(box.size) + 1
        last = ends - 1
        nxt[last[ends > starts]] = starts[ends > starts]
        t_next = np.where(nxt == np.arange(box.size) + 1, t[nxt % box.size], t[nxt] + 4.0)
        dt = t_next - t
        side = np.minimum(np.floor(t).astype(int), 3)
        seg_len = dt * 2.0 * np.where(side % 2 == 0, hx[box], hy[box])
        dphi = np.angle(np.exp(1j * (ang[nxt] - ang)))
        dz = seg_len * _SIDE_DIR[side]
        with np.errstate(over="ignore", invalid="ignore"):
            s0, s1 = lap * dz, lap[nxt] * dz
            rate = np.maximum(np.abs(s0), np.abs(s1))
            # trapezoid prediction of the change of log G along the segment
            mismatch = np.abs(0.5 * (s0 + s1) - ((la[nxt] - la) + 1j * dphi))
        need = (
            (np.abs(dphi) >= opts.max_phase_step)
            | ~(rate < opts.max_log_step)
            | ~(mismatch < opts.max_trapezoid_error)
        )
        need &= ok[box] & ~done[box]
        tiny = need & (seg_len < min_len[box])
        if np.any(tiny):
            ok[np.unique(box[tiny])] = False
            need &= ok[box]
        sizes = np.bincount(box, minlength=nb)
        over = sizes > opts.max_samples
        if np.any(over):
            ok[over] = False
            need &= ok[box]
        finished = ok & ~done & (np.bincount(box[need], minlength=nb) == 0)
        if np.any(finished):
            tot = np.bincount(box, weights=dphi, minlength=nb) / (2 * math.pi)
            counts[finished] = np.rint(tot[finished]).astype(np.int64)
            bad_int = finished & (np.abs(tot - np.rint(tot)) > 0.1)
            ok[bad_int] = False
            done |= finished
        if not np.any(need):
            break
        t_new = t[need] + dt[need] / 2
        b_new = box[need]
        z_new = _contour_points(cx[b_new], cy[b_new], hx[b_new], hy[b_new], t_new % 4.0)
        la2, ang2, lap2, sc2 = _eval_flat(p, z_new)
        box = np.concatenate([box, b_new])
        t = np.concatenate([t, t_new % 4.0])
        la = np.concatenate([la, la2])
        ang = np.concatenate([ang, ang2])
        lap = np.concatenate([lap, lap2])
        scale = np.concatenate([scale, sc2])
    certified = ok & done
    return np.where(certified, counts, 0), certified


def winding_number(p: DerivativeProblem, b: Box, opts: WindingOptions = WindingOptions()) -> int:
    """Number of zeros of ``G`` in ``b`` (with multiplicity).

    Raises :class:`NotCertified` when the contour cannot be certified.
    """
    c = complex(b.center)
    counts, cert = _winding_batch(p, [c.real], [c.imag], [b.half_width], [b.half_height], opts)
    if not cert[0]:
        raise NotCertified(f"contour of {b} not certified")
    return int(counts[0])


# ---------------------------------------------------------------------------
# Newton


def _newton_batch(p: DerivativeProblem, z0, cx, cy, hx, hy, max_iter: int = 80):
    """Damped Newton from ``z0`` inside each box.

    Returns ``(z, converged, escaped)``; steps are clipped to the box half
    size and an iterate outside the doubled box marks ``escaped``.
    """
    z = np.array(z0, dtype=complex)
    h = np.maximum(hx, hy)
    active = np.ones(z.size, dtype=bool)
    converged = np.zeros(z.size, dtype=bool)
    escaped = np.zeros(z.size, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        G, Gp, _ = p.eval_batch(z[idx])
        step = (G / Gp).to_complex()
        zero = G.is_zero()
        step = np.where(zero, 0, step)
        bad = ~np.isfinite(step)
        a = np.abs(step)
        step = np.where(a > h[idx], step / np.where(a > 0, a, 1) * h[idx], step)
        znew = z[idx] - np.where(bad, 0, step)
        out = (np.abs(znew.real - cx[idx]) > 2 * hx[idx]) | (np.abs(znew.imag - cy[idx]) > 2 * hy[idx])
        z[idx] = np.where(out, z[idx], znew)
        conv = ~bad & ~out & (np.abs(step) < 1e-13 * (1 + np.abs(znew)))
        escaped[idx[out | bad]] = True
        converged[idx[conv]] = True
        active[idx[out | bad | conv]] = False
    return z, converged, escaped


def relative_residual(p: DerivativeProblem, z) -> np.ndarray:
    """``min(backward, forward)`` error of a computed root, from log magnitudes.

    backward: ``|G| / (|main term| + |lambda|)``; forward: the relative Newton
    step ``|G / G'| / (1 + |z|)``.  The backward error is uninformative when
    ``lambda = 0`` (it is identically 1) and the forward one when ``G'``
    vanishes at a cluster, so each covers the other's blind spot.
    """
    z = np.asarray(z, dtype=complex)
    G, Gp, scale = p.eval_batch(z)
    la = G.log_abs()
    with np.errstate(under="ignore", invalid="ignore", over="ignore", divide="ignore"):
        back = np.exp(la - scale)
        fwd = np.exp(la - Gp.log_abs() - np.log1p(np.abs(z)))
        out = np.fmin(back, fwd)
        return np.where(np.isneginf(la), 0.0, out)


def polish_newton(p: DerivativeProblem, seed: complex, box: Box) -> tuple[complex, float]:
    c = complex(box.center)
    z, conv, esc = _newton_batch(
        p, [complex(seed)], np.array([c.real]), np.array([c.imag]),
        np.array([box.half_width]), np.array([box.half_height]),
    )
    if esc[0]:
        raise NewtonEscape(f"Newton from {seed} left the doubled box {box}")
    return complex(z[0]), float(relative_residual(p, z)[0])


# ---------------------------------------------------------------------------
# subdivision

SIMPLE_TERMINAL = 1e-3
CLUSTER_TERMINAL = 1e-8
# a certified box of count >= 2 this small (relative to 1 + |center|) whose
# children cannot be certified is reported as a cluster: near a multiple root
# |G| drops below the rounding floor before CLUSTER_TERMINAL is reached
CLUSTER_FLOOR = 1e-6
MAX_DEPTH = 60
MAX_JITTER_TRIES = 8
MAX_DENSITY_LEVEL = 3


def _density_opts(level: int) -> WindingOptions:
    """Initial contour sampling grows 4x per retry level.

    Endpoint tests cannot see a root that hides between two samples where
    ``G`` is nearly constant (e.g. deep in an attracting basin), so retries
    start from a denser contour.
    """
    return WindingOptions(initial_per_side=8 * 4**level)


def _jitter(seed: int, cx: float, cy: float, attempt: int) -> tuple[float, float]:
    if attempt == 0:
        return 0.0, 0.0
    words = struct.unpack("<4I", struct.pack("<2d", cx, cy))
    rng = np.random.default_rng([seed, attempt, *words])
    return tuple(rng.uniform(-1.0, 1.0, 2))


@dataclass
class _Pending:
    cx: float
    cy: float
    hx: float
    hy: float
    count: int
    depth: int
    attempt: int = 0
    terminal: float = SIMPLE_TERMINAL


def _isolate(p: DerivativeProblem, root: _Pending, seed: int, audit: list):
    """Quadtree isolation.  Returns lists of simple roots and clusters."""
    pending = [root]
    simple: list[tuple[complex, float, float, float, float]] = []  # (z, cx, cy, hx, hy)
    clusters: list[tuple[complex, int]] = []
    while pending:
        for b in pending:
            if b.depth >= MAX_DEPTH:
                raise SubdivisionFailure(f"depth {MAX_DEPTH} reached near {complex(b.cx, b.cy)}", audit)
        # children of every pending box, split point jittered per attempt
        ccx, ccy, chx, chy = [], [], [], []
        for b in pending:
            jx, jy = _jitter(seed, b.cx, b.cy, b.attempt)
            sx, sy = b.cx + 1e-2 * b.hx * jx, b.cy + 1e-2 * b.hy * jy
            x0, x1, y0, y1 = b.cx - b.hx, b.cx + b.hx, b.cy - b.hy, b.cy + b.hy
            for (a0, a1) in ((x0, sx), (sx, x1)):
                for (c0, c1) in ((y0, sy), (sy, y1)):
                    ccx.append((a0 + a1) / 2)
                    ccy.append((c0 + c1) / 2)
                    chx.append((a1 - a0) / 2)
                    chy.append((c1 - c0) / 2)
        ccx, ccy, chx, chy = map(np.array, (ccx, ccy, chx, chy))
        counts = np.zeros(ccx.size, dtype=np.int64)
        cert = np.zeros(ccx.size, dtype=bool)
        level = np.repeat([min(b.attempt, MAX_DENSITY_LEVEL) for b in pending], 4)
        for lv in np.unique(level):
            sel = level == lv
            counts[sel], cert[sel] = _winding_batch(p, ccx[sel], ccy[sel], chx[sel], chy[sel], _density_opts(lv))
        nxt: list[_Pending] = []
        shortcut: list[_Pending] = []
        for i, b in enumerate(pending):
            sl = slice(4 * i, 4 * i + 4)
            if not cert[sl].all() or counts[sl].sum() != b.count:
                if b.count >= 2 and max(b.hx, b.hy) <= CLUSTER_FLOOR * (1 + abs(complex(b.cx, b.cy))):
                    audit.append({"event": "cluster-floor", "center": [b.cx, b.cy], "half": b.hx, "count": b.count})
                    clusters.append((complex(b.cx, b.cy), b.count))
                    continue
                if b.attempt + 1 > MAX_JITTER_TRIES:
                    raise SubdivisionFailure(
                        f"box at {complex(b.cx, b.cy)} (half size {b.hx:.3g}) unresolved after jitter", audit
                    )
                count = b.count
                if cert[sl].all():
                    # the parent may be the miscounted one: recount it on a denser contour
                    lv = min(b.attempt + 1, MAX_DENSITY_LEVEL)
                    rc, rok = _winding_batch(p, [b.cx], [b.cy], [b.hx], [b.hy], _density_opts(lv))
                    if rok[0] and rc[0] != b.count:
                        audit.append({"event": "recount", "center": [b.cx, b.cy], "old": b.count, "new": int(rc[0])})
                        count = int(rc[0])
                audit.append({"event": "jitter", "center": [b.cx, b.cy], "half": b.hx, "attempt": b.attempt + 1})
                nxt.append(_Pending(b.cx, b.cy, b.hx, b.hy, count, b.depth, b.attempt + 1, b.terminal))
                continue
            for j in range(4 * i, 4 * i + 4):
                cnt = int(counts[j])
                child = _Pending(ccx[j], ccy[j], chx[j], chy[j], cnt, b.depth + 1, 0, b.terminal)
                size = max(child.hx, child.hy)
                if cnt == 0:
                    continue
                if cnt == 1:
                    if size <= child.terminal:
                        simple.append((complex(child.cx, child.cy), child.cx, child.cy, child.hx, child.hy))
                    elif child.terminal == SIMPLE_TERMINAL:
                        shortcut.append(child)
                    else:
                        nxt.append(child)
                elif size <= CLUSTER_TERMINAL:
                    clusters.append((complex(child.cx, child.cy), cnt))
                else:
                    nxt.append(child)
        nxt.extend(_newton_shortcut(p, shortcut, simple))
        pending = nxt
    return simple, clusters


def _newton_shortcut(p, boxes: list[_Pending], simple: list) -> list[_Pending]:
    """Shrink single-root boxes around a Newton limit when a small box certifies."""
    if not boxes:
        return []
    cx = np.array([b.cx for b in boxes])
    cy = np.array([b.cy for b in boxes])
    hx = np.array([b.hx for b in boxes])
    hy = np.array([b.hy for b in boxes])
    z, conv, _ = _newton_batch(p, cx + 1j * cy, cx, cy, hx, hy)
    margin = np.minimum(hx - np.abs(z.real - cx), hy - np.abs(z.imag - cy))
    hs = np.minimum(0.5 * SIMPLE_TERMINAL, 0.5 * margin)
    try_it = conv & (hs > 1e-10)
    rest = [b for b, ok in zip(boxes, try_it) if not ok]
    idx = np.flatnonzero(try_it)
    if idx.size:
        counts, cert = _winding_batch(p, z[idx].real, z[idx].imag, hs[idx], hs[idx])
        for j, i in enumerate(idx):
            if cert[j] and counts[j] == 1:
                simple.append((z[i], z[i].real, z[i].imag, hs[i], hs[i]))
            else:
                rest.append(boxes[i])
    return rest


def _inside(z, cx, cy, hx, hy, slack=1e-12):
    return (np.abs(z.real - cx) <= hx * (1 + slack)) & (np.abs(z.imag - cy) <= hy * (1 + slack))


def _polish_simple(p, simple: list, seed: int, audit: list, depth: int = 0) -> np.ndarray:
    """Newton-polish one root per terminal box; the limit must stay in its own box.

    Boxes where Newton wanders off are subdivided to a finer terminal size
    and polished again there.
    """
    if not simple:
        return np.zeros(0, dtype=complex)
    z0 = np.array([s[0] for s in simple], dtype=complex)
    cx, cy, hx, hy = (np.array([s[i] for s in simple]) for i in range(1, 5))
    z, conv, esc = _newton_batch(p, z0, cx, cy, hx, hy)
    lost = esc | ~_inside(z, cx, cy, hx, hy)
    for i in np.flatnonzero(lost):
        audit.append({"event": "newton-escape", "center": [float(cx[i]), float(cy[i])], "half": float(hx[i])})
        if depth >= 2:
            z[i] = complex(cx[i], cy[i])
            continue
        fine = 1e-7 if depth == 0 else 1e-12
        sub, _ = _isolate(p, _Pending(cx[i], cy[i], hx[i], hy[i], 1, 0, 0, fine), seed, audit)
        z[i] = _polish_simple(p, sub, seed, audit, depth + 1)[0]
    return z


def isolate_roots(p: DerivativeProblem, b: Box, seed: int = 0) -> list[tuple[Box, int]]:
    """Terminal boxes with multiplicities whose sum is the winding number of ``b``."""
    count = winding_number(p, b)
    c = complex(b.center)
    simple, clusters = _isolate(p, _Pending(c.real, c.imag, b.half_width, b.half_height, count, 0), seed, [])
    out = [(Box(complex(cx, cy), hx, hy), 1) for _, cx, cy, hx, hy in simple]
    out += [(Box(z, CLUSTER_TERMINAL), m) for z, m in clusters]
    return out


def solve_all(p: DerivativeProblem, search: Box | None = None, seed: int = 0) -> RootCloud:
    """Root measure of ``G`` with weight ``1/(d^n - k)`` (phase) or ``1/2^n`` (parameter).

    Without ``search`` the default box is doubled (up to 6 times) until its
    winding number reaches the expected count.  Raises :class:`CountMismatch`
    if the total multiplicity differs from ``p.expected_count``.
    """
    audit: list = []
    expected = p.expected_count
    grows = 7 if search is None else 1  # a caller-supplied box is used as is
    if search is None:
        hw = p.default_search_half_width()
        center = 0j
        if isinstance(p, PhaseDerivative):
            f = p.f
            center = -f.coeffs[-2] / (f.degree * f.leading)
        search = Box(center, hw)
    count = None
    for grow in range(grows):
        box = search if grow == 0 else Box(search.center, search.half_width * 2**grow, search.half_height * 2**grow)
        for attempt in range(MAX_JITTER_TRIES + 1):
            jx, jy = _jitter(seed, box.center.real, box.center.imag, attempt)
            trial = Box(box.center, box.half_width * (1 + 1e-3 * abs(jx)), box.half_height * (1 + 1e-3 * abs(jy)))
            try:
                count = winding_number(p, trial)
                box = trial
                break
            except NotCertified:
                audit.append({"event": "search-box-jitter", "half": trial.half_width, "attempt": attempt + 1})
        else:
            raise SubdivisionFailure("search box contour could not be certified", audit)
        audit.append({"event": "search-box", "half": box.half_width, "count": count})
        if count >= expected:
            break
    if count != expected:
        raise CountMismatch(count, expected, audit)
    c = complex(box.center)
    simple, clusters = _isolate(p, _Pending(c.real, c.imag, box.half_width, box.half_height, count, 0), seed, audit)

    locs = _polish_simple(p, simple, seed, audit)
    mults = [1] * len(locs)
    if clusters:
        locs = np.concatenate([locs, np.array([c[0] for c in clusters], dtype=complex)])
        mults += [c[1] for c in clusters]
    mults = np.array(mults, dtype=np.int64)
    res = relative_residual(p, locs) if locs.size else np.zeros(0)
    order = np.lexsort((locs.imag, locs.real))
    cloud = RootCloud(locs[order], mults[order], res[order], p.weight_denominator, audit)
    if cloud.total_multiplicity != expected:
        raise CountMismatch(cloud.total_multiplicity, expected, audit)
    return cloud
