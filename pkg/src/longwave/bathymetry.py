"""Depth models H(x) and the long-wave speed C(x) = sqrt(g H(x)).

All evaluators accept a single point of shape ``(2,)`` or a stack of points
of shape ``(..., 2)`` and broadcast accordingly.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RectBivariateSpline, RegularGridInterpolator

from .errors import ArgumentError, DomainError, ValidityError

KINDS = ("constant", "linear_slope", "radial_bank", "gridded")


class Bathymetry:
    """Static depth field with its first and second derivatives.

    Use the classmethod constructors rather than calling ``__init__``
    directly.

    Parameters
    ----------
    kind : str
        One of ``constant``, ``linear_slope``, ``radial_bank``, ``gridded``.
    params : dict
        Model parameters (see the constructors).
    g : float
        Gravitational acceleration.
    """

    def __init__(self, kind: str, params: dict, g: float = 9.81):
        if kind not in KINDS:
            raise ArgumentError(f"unknown bathymetry kind {kind!r}")
        if not g > 0:
            raise ArgumentError("g must be positive")
        self.kind = kind
        self.params = dict(params)
        self.g = float(g)
        self._bilinear = None
        self._spline = None
        if kind == "gridded":
            self._setup_grid()

    # -- constructors -------------------------------------------------------
    @classmethod
    def constant(cls, H0, g=9.81):
        if not H0 > 0:
            raise ValidityError("depth must be positive")
        return cls("constant", {"H0": float(H0)}, g)

    @classmethod
    def linear_slope(cls, H0, eps, angle=0.0, g=9.81):
        """H(x) = H0 (1 + eps <d, x>) with d = (cos angle, sin angle)."""
        if not H0 > 0:
            raise ValidityError("depth must be positive")
        return cls("linear_slope", {"H0": float(H0), "eps": float(eps), "angle": float(angle)}, g)

    @classmethod
    def radial_bank(cls, H0=1.0, amplitude=0.5, width=1.0, center=(0.0, 0.0), g=9.81):
        """H(x) = H0 (1 - amplitude exp(-|x - center|^2 / width^2))."""
        if not (H0 > 0 and width > 0 and amplitude < 1):
            raise ValidityError("radial bank must have positive depth everywhere")
        c = np.asarray(center, dtype=float)
        return cls("radial_bank", {"H0": float(H0), "amplitude": float(amplitude),
                                   "width": float(width), "center": (float(c[0]), float(c[1]))}, g)

    @classmethod
    def gridded(cls, origin, spacing, values, g=9.81):
        """Tabulated depth; ``values`` has shape (ny, nx), x varying fastest."""
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or min(values.shape) < 2:
            raise ArgumentError("gridded depth needs a 2-D table with at least 2x2 nodes")
        if np.any(values <= 0):
            raise ValidityError("gridded depth has nonpositive samples")
        return cls("gridded", {"origin": tuple(map(float, origin)),
                               "spacing": tuple(map(float, spacing)),
                               "values": values}, g)

    @classmethod
    def from_file(cls, path, g=9.81):
        origin, spacing, values = read_grid_file(path)
        return cls.gridded(origin, spacing, values, g)

    # -- gridded helpers ----------------------------------------------------
    def _setup_grid(self):
        p = self.params
        ny, nx = p["values"].shape
        (x0, y0), (dx, dy) = p["origin"], p["spacing"]
        if not (dx > 0 and dy > 0):
            raise ArgumentError("grid spacing must be positive")
        self._gx = x0 + dx * np.arange(nx)
        self._gy = y0 + dy * np.arange(ny)
        # RegularGridInterpolator wants axes in (x, y) order
        self._bilinear = RegularGridInterpolator((self._gx, self._gy), p["values"].T,
                                                 method="linear", bounds_error=False)
        if nx >= 4 and ny >= 4:
            self._spline = RectBivariateSpline(self._gx, self._gy, p["values"].T, kx=3, ky=3, s=0)

    # -- evaluation ---------------------------------------------------------
    def inside(self, x):
        """Boolean mask of points where the model is defined and H > 0."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gridded":
            ok = ((x[..., 0] >= self._gx[0]) & (x[..., 0] <= self._gx[-1])
                  & (x[..., 1] >= self._gy[0]) & (x[..., 1] <= self._gy[-1]))
            return ok
        if self.kind == "linear_slope":
            return self._analytic(x)[0] > 0
        return np.ones(x.shape[:-1], dtype=bool)

    def depth(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gridded":
            if not np.all(self.inside(x)):
                raise DomainError("depth query outside the grid hull")
            H = self._bilinear(x.reshape(-1, 2)).reshape(x.shape[:-1])
        else:
            H = self._analytic(x)[0]
        if np.any(H <= 0):
            raise ValidityError("nonpositive depth")
        return H[()] if np.ndim(H) == 0 else H

    def speed(self, x):
        return np.sqrt(self.g * self.depth(x))

    def speed_derivs(self, x):
        """Return (grad C, Hess C) at x."""
        _, dC, d2C = self.fields(x)
        return dC, d2C

    def fields(self, x, check=True):
        """C, grad C and Hess C from one consistent smooth depth model.

        For gridded data this uses the bicubic spline throughout, so the
        values differ from :meth:`speed` (bilinear) between nodes.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == "gridded":
            if self._spline is None:
                raise DomainError("grid too small for a bicubic derivative stencil")
            if check and not np.all(self.inside(x)):
                raise DomainError("derivative query outside the grid hull")
            H, dH, d2H = self._spline_eval(x)
        else:
            H, dH, d2H = self._analytic(x)
        if check and np.any(H <= 0):
            raise ValidityError("nonpositive depth")
        g = self.g
        C = np.sqrt(g * np.abs(H))
        a = g / (2 * C)
        b = g * g / (4 * C ** 3)
        h1, h2 = dH[..., 0], dH[..., 1]
        dC = np.empty_like(dH)
        dC[..., 0] = a * h1
        dC[..., 1] = a * h2
        d2C = np.empty_like(d2H)
        d2C[..., 0, 0] = a * d2H[..., 0, 0] - b * h1 * h1
        d2C[..., 1, 1] = a * d2H[..., 1, 1] - b * h2 * h2
        d2C[..., 0, 1] = a * d2H[..., 0, 1] - b * h1 * h2
        d2C[..., 1, 0] = a * d2H[..., 1, 0] - b * h1 * h2
        return C, dC, d2C

    def _spline_eval(self, x):
        shp = x.shape[:-1]
        a, b = x[..., 0].ravel(), x[..., 1].ravel()
        s = self._spline
        H = s.ev(a, b)
        dH = np.stack([s.ev(a, b, dx=1), s.ev(a, b, dy=1)], axis=-1)
        hxx, hxy, hyy = s.ev(a, b, dx=2), s.ev(a, b, dx=1, dy=1), s.ev(a, b, dy=2)
        d2H = np.stack([np.stack([hxx, hxy], -1), np.stack([hxy, hyy], -1)], -2)
        return H.reshape(shp), dH.reshape(shp + (2,)), d2H.reshape(shp + (2, 2))

    def _analytic(self, x):
        p = self.params
        shp = x.shape[:-1]
        if self.kind == "constant":
            H = np.full(shp, p["H0"])
            return H, np.zeros(shp + (2,)), np.zeros(shp + (2, 2))
        if self.kind == "linear_slope":
            d = np.array([np.cos(p["angle"]), np.sin(p["angle"])])
            H = p["H0"] * (1 + p["eps"] * (x @ d))
            dH = np.broadcast_to(p["H0"] * p["eps"] * d, shp + (2,)).copy()
            return H, dH, np.zeros(shp + (2, 2))
        # radial bank
        cx, cy = p["center"]
        r1, r2 = x[..., 0] - cx, x[..., 1] - cy
        w2 = p["width"] ** 2
        e = p["H0"] * p["amplitude"] * np.exp(-(r1 * r1 + r2 * r2) / w2)
        H = p["H0"] - e
        dH = np.empty(shp + (2,))
        dH[..., 0] = 2 * e * r1 / w2
        dH[..., 1] = 2 * e * r2 / w2
        f = 2 * e / w2
        d2H = np.empty(shp + (2, 2))
        d2H[..., 0, 0] = f * (1 - 2 * r1 * r1 / w2)
        d2H[..., 1, 1] = f * (1 - 2 * r2 * r2 / w2)
        d2H[..., 0, 1] = d2H[..., 1, 0] = -f * 2 * r1 * r2 / w2
        return H, dH, d2H

    def describe(self):
        items = {k: v for k, v in self.params.items() if k != "values"}
        if self.kind == "gridded":
            items["shape"] = self.params["values"].shape
        return f"{self.kind} {items} g={self.g}"


def read_grid_file(path):
    """Read ``nx ny x0 y0 dx dy`` followed by nx*ny samples (x fastest).

    Returns
    -------
    origin, spacing, values
        ``values`` has shape (ny, nx).
    """
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 6:
            raise ArgumentError(f"{path}: header must be 'nx ny x0 y0 dx dy'")
        nx, ny = int(head[0]), int(head[1])
        x0, y0, dx, dy = map(float, head[2:])
        data = np.array(fh.read().split(), dtype=float)
    if data.size != nx * ny:
        raise ArgumentError(f"{path}: expected {nx * ny} samples, found {data.size}")
    return (x0, y0), (dx, dy), data.reshape(ny, nx)


def write_grid_file(path, origin, spacing, values):
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    with open(path, "w") as fh:
        head = " ".join(f"{float(v):.17g}" for v in (*origin, *spacing))
        fh.write(f"{nx} {ny} {head}\n")
        for row in values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
