"""Scalar fields sampled on rectangular grids in the complex plane."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridMismatch(ValueError):
    """Two fields that must share a grid do not."""


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    @classmethod
    def square(cls, center: complex = 0j, half_width: float = 2.0) -> "Rect":
        c = complex(center)
        return cls(c.real - half_width, c.real + half_width, c.imag - half_width, c.imag + half_width)

    def as_list(self) -> list[float]:
        return [self.xmin, self.xmax, self.ymin, self.ymax]


def grid_points(rect: Rect, res: tuple[int, int]) -> np.ndarray:
    """Complex sample points, shape ``(ny, nx)``, endpoints included.

    Row ``j`` has imaginary part ``y_j`` (increasing), column ``i`` real part
    ``x_i``.  A single sample along an axis sits at the lower bound.
    """
    nx, ny = res
    xs = np.linspace(rect.xmin, rect.xmax, nx)
    ys = np.linspace(rect.ymin, rect.ymax, ny)
    return xs[None, :] + 1j * ys[:, None]


@dataclass
class GridField:
    rect: Rect
    res: tuple[int, int]
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        nx, ny = self.res
        self.values = np.asarray(self.values, dtype=float).reshape(ny, nx)
        self.mask = np.asarray(self.mask, dtype=bool).reshape(ny, nx)
        if np.any(~np.isfinite(self.values[self.mask])):
            raise ValueError("masked-valid entries must be finite")

    @property
    def points(self) -> np.ndarray:
        return grid_points(self.rect, self.res)

    @property
    def spacing(self) -> tuple[float, float]:
        nx, ny = self.res
        hx = (self.rect.xmax - self.rect.xmin) / (nx - 1) if nx > 1 else 0.0
        hy = (self.rect.ymax - self.rect.ymin) / (ny - 1) if ny > 1 else 0.0
        return hx, hy

    def same_grid(self, other: "GridField") -> bool:
        return self.rect == other.rect and tuple(self.res) == tuple(other.res)
