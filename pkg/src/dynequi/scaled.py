"""Overflow-safe complex numbers stored as ``mantissa * 2**exponent``.

Iterated derivatives such as ``(f^n)'(z)`` reach magnitudes like
``exp(d**n * g)`` which leave double range after a dozen iterations.
:class:`ScaledComplex` keeps a complex mantissa with ``0.5 <= |m| < 1``
(or exactly zero) and an ``int64`` binary exponent, renormalized after every
operation.  All operations are elementwise over numpy arrays; a scalar is a
0-d array.
"""

from __future__ import annotations

import math

import numpy as np

LOG2 = math.log(2.0)

# Exponent assigned to zero while aligning for addition.
_ZERO_EXP = -(2**62)
# Shifts below this flush the smaller operand to zero.
_MIN_SHIFT = -2200


def _ldexp_c(m: np.ndarray, e: np.ndarray) -> np.ndarray:
    e = np.clip(e, -4000, 4000)
    return np.ldexp(m.real, e) + 1j * np.ldexp(m.imag, e)


def _normalize(m: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.abs(m)
    _, ex = np.frexp(a)
    ex = ex.astype(np.int64)
    zero = a == 0
    m = _ldexp_c(m, -ex)
    e = np.where(zero, 0, e + ex)
    return m, e


class ScaledComplex:
    """Array of complex values ``mantissa * 2**exponent``."""

    __slots__ = ("m", "e")

    def __init__(self, mantissa, exponent=0, *, normalized: bool = False):
        m = np.asarray(mantissa, dtype=np.complex128)
        e = np.broadcast_to(np.asarray(exponent, dtype=np.int64), m.shape)
        if normalized:
            self.m, self.e = m, np.array(e)
        else:
            self.m, self.e = _normalize(m, e)

    # construction -------------------------------------------------------
    @classmethod
    def from_complex(cls, z) -> "ScaledComplex":
        return cls(z, 0)

    @classmethod
    def zeros(cls, shape) -> "ScaledComplex":
        return cls(np.zeros(shape, dtype=np.complex128), 0, normalized=True)

    @classmethod
    def ones(cls, shape) -> "ScaledComplex":
        return cls(np.full(shape, 0.5 + 0j), np.ones(shape, dtype=np.int64), normalized=True)

    @classmethod
    def from_polar_log(cls, log_abs, angle) -> "ScaledComplex":
        """Build from ``log|z|`` and ``arg z``; ``log_abs = -inf`` gives zero."""
        log_abs = np.asarray(log_abs, dtype=float)
        finite = np.isfinite(log_abs)
        safe = np.where(finite, log_abs, 0.0)
        e = np.floor(safe / LOG2).astype(np.int64)
        r = np.exp(safe - e * LOG2)
        m = np.where(finite, r * np.exp(1j * np.asarray(angle, dtype=float)), 0.0)
        return cls(m, e)

    @staticmethod
    def concatenate(items) -> "ScaledComplex":
        items = list(items)
        return ScaledComplex(
            np.concatenate([np.atleast_1d(x.m) for x in items]),
            np.concatenate([np.atleast_1d(x.e) for x in items]),
            normalized=True,
        )

    # conversion ---------------------------------------------------------
    def to_complex(self) -> np.ndarray:
        """Ordinary complex value; overflows to ``inf`` outside double range."""
        big = self.e > 2000
        out = _ldexp_c(self.m, self.e)
        if np.any(big):
            with np.errstate(invalid="ignore", over="ignore"):
                out = np.where(big, self.m * np.inf, out)
        return out

    def log_abs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.m)) + self.e * LOG2

    def angle(self) -> np.ndarray:
        return np.angle(self.m)

    def is_zero(self) -> np.ndarray:
        return self.m == 0

    @property
    def shape(self):
        return self.m.shape

    def __len__(self):
        return len(self.m)

    def __getitem__(self, idx) -> "ScaledComplex":
        return ScaledComplex(self.m[idx], self.e[idx], normalized=True)

    def copy(self) -> "ScaledComplex":
        return ScaledComplex(self.m.copy(), self.e.copy(), normalized=True)

    def where(self, cond, other: "ScaledComplex") -> "ScaledComplex":
        """Elementwise ``self if cond else other``."""
        return ScaledComplex(
            np.where(cond, self.m, other.m), np.where(cond, self.e, other.e), normalized=True
        )

    # arithmetic ---------------------------------------------------------
    @staticmethod
    def _coerce(x) -> "ScaledComplex":
        if isinstance(x, ScaledComplex):
            return x
        return ScaledComplex(x, 0)

    def __mul__(self, other) -> "ScaledComplex":
        o = self._coerce(other)
        return ScaledComplex(self.m * o.m, self.e + o.e)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "ScaledComplex":
        o = self._coerce(other)
        with np.errstate(divide="ignore", invalid="ignore"):
            return ScaledComplex(self.m / o.m, self.e - o.e)

    def __add__(self, other) -> "ScaledComplex":
        o = self._coerce(other)
        e1 = np.where(self.m == 0, _ZERO_EXP, self.e)
        e2 = np.where(o.m == 0, _ZERO_EXP, o.e)
        emax = np.maximum(e1, e2)
        s1 = np.maximum(e1 - emax, _MIN_SHIFT)
        s2 = np.maximum(e2 - emax, _MIN_SHIFT)
        m = _ldexp_c(self.m, s1) + _ldexp_c(o.m, s2)
        emax = np.where(emax == _ZERO_EXP, 0, emax)
        return ScaledComplex(m, emax)

    __radd__ = __add__

    def __neg__(self) -> "ScaledComplex":
        return ScaledComplex(-self.m, self.e, normalized=True)

    def __sub__(self, other) -> "ScaledComplex":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "ScaledComplex":
        return self._coerce(other) + (-self)

    def square(self) -> "ScaledComplex":
        return ScaledComplex(self.m * self.m, 2 * self.e)

    def __repr__(self) -> str:
        if self.m.ndim == 0:
            return f"ScaledComplex({complex(self.m)!r} * 2**{int(self.e)})"
        return f"ScaledComplex(shape={self.m.shape})"
