"""Regular evaluation grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class Grid:
    """Node-centred rectangular grid; arrays are indexed [iy, ix]."""

    x0: float
    y0: float
    dx: float
    dy: float
    nx: int
    ny: int

    def __post_init__(self):
        if not (self.dx > 0 and self.dy > 0 and self.nx >= 2 and self.ny >= 2):
            raise ArgumentError("grid needs positive spacing and at least 2x2 nodes")

    @classmethod
    def from_bounds(cls, x0, y0, x1, y1, nx, ny):
        return cls(float(x0), float(y0), (x1 - x0) / (nx - 1), (y1 - y0) / (ny - 1), int(nx), int(ny))

    @classmethod
    def centered(cls, half_width, spacing, center=(0.0, 0.0)):
        """Square grid of odd size with a node at ``center``."""
        n = int(np.ceil(half_width / spacing))
        return cls(center[0] - n * spacing, center[1] - n * spacing, spacing, spacing, 2 * n + 1, 2 * n + 1)

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.nx)

    @property
    def y(self):
        return self.y0 + self.dy * np.arange(self.ny)

    @property
    def shape(self):
        return (self.ny, self.nx)

    def mesh(self):
        return np.meshgrid(self.x, self.y)

    def points(self):
        X, Y = self.mesh()
        return np.stack([X, Y], axis=-1)

    def same_as(self, other):
        return (self.nx, self.ny) == (other.nx, other.ny) and np.allclose(
            [self.x0, self.y0, self.dx, self.dy], [other.x0, other.y0, other.dx, other.dy])
