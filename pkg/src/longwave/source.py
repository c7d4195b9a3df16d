"""Source shapes V(y), their Fourier transforms and the profile integrals.

The transform convention is

    Vt(p) = (1 / 2 pi) * integral V(y) exp(-i <p, y>) dy,

and spectra are addressed in polar form Vt(rho, psi) = Vt(rho * n(psi)) with
n(psi) = (cos psi, sin psi).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.interpolate import RectBivariateSpline
from scipy.special import erfcx, gamma

from .bathymetry import read_grid_file
from .errors import ArgumentError, CapabilityError, NumericError
from .special import hyp1f1

SQRT_2PI = math.sqrt(2 * math.pi)
_G34 = math.gamma(0.75)
_G54 = math.gamma(1.25)


class SourceModel:
    """Localized initial elevation V(y) in the scaled coordinate y = x / mu.

    Build with :meth:`gauss_cosine` or :meth:`custom_grid`.
    """

    def __init__(self, kind, params):
        self.kind = kind
        self.params = params
        self._table = None

    @classmethod
    def gauss_cosine(cls, amplitude=1.0, a1=0.0, a2=0.0, b1=0.5, b2=0.5, theta=0.0, chi=0.0):
        """V(y) = amplitude cos(a.Y + chi) exp(-b1 Y1^2 - b2 Y2^2), Y = Rot(theta) y."""
        if not (b1 > 0 and b2 > 0):
            raise ArgumentError("b1 and b2 must be positive")
        p = dict(amplitude=float(amplitude), a1=float(a1), a2=float(a2), b1=float(b1),
                 b2=float(b2), theta=float(theta), chi=float(chi))
        return cls("gauss_cosine", p)

    @classmethod
    def custom_grid(cls, origin, spacing, values, table_shape=(256, 128), rho_max=None):
        """Tabulated V on a regular grid (values shape (ny, nx), x fastest).

        The spectrum is precomputed on a (rho, psi) table and interpolated
        bicubically.  ``rho_max`` is the declared support of the spectrum; by
        default the grid Nyquist wavenumber.
        """
        values = np.asarray(values, dtype=float)
        dx, dy = map(float, spacing)
        if rho_max is None:
            rho_max = math.pi / max(dx, dy)
        if not (math.isfinite(rho_max) and rho_max > 0):
            raise ArgumentError("rho_max must be a positive finite wavenumber")
        src = cls("custom_grid", dict(origin=tuple(map(float, origin)), spacing=(dx, dy),
                                      values=values, rho_max=float(rho_max),
                                      table_shape=tuple(table_shape)))
        src._build_table()
        return src

    @classmethod
    def from_file(cls, path, **kw):
        origin, spacing, values = read_grid_file(path)
        return cls.custom_grid(origin, spacing, values, **kw)

    # -- V ------------------------------------------------------------------
    def value(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "gauss_cosine":
            p = self.params
            c, s = math.cos(p["theta"]), math.sin(p["theta"])
            Y1 = c * y[..., 0] + s * y[..., 1]
            Y2 = -s * y[..., 0] + c * y[..., 1]
            return p["amplitude"] * np.cos(p["a1"] * Y1 + p["a2"] * Y2 + p["chi"]) * np.exp(
                -p["b1"] * Y1 ** 2 - p["b2"] * Y2 ** 2)
        p = self.params
        from scipy.interpolate import RegularGridInterpolator
        ny, nx = p["values"].shape
        gx = p["origin"][0] + p["spacing"][0] * np.arange(nx)
        gy = p["origin"][1] + p["spacing"][1] * np.arange(ny)
        f = RegularGridInterpolator((gx, gy), p["values"].T, bounds_error=False, fill_value=0.0)
        return f(y.reshape(-1, 2)).reshape(y.shape[:-1])

    # -- spectrum -----------------------------------------------------------
    def gauss_terms(self, psi):
        """Return (alpha, beta, gamma) of the Gaussian-cosine spectrum at psi.

        Vt(rho, psi) = A sum_{s=+-1} exp(i s chi - alpha - beta rho^2 + s gamma rho)
        with A = amplitude / (4 sqrt(b1 b2)).
        """
        p = self.params
        b1, b2, a1, a2 = p["b1"], p["b2"], p["a1"], p["a2"]
        d = np.asarray(psi, dtype=float) - p["theta"]
        alpha = (b2 * a1 ** 2 + b1 * a2 ** 2) / (4 * b1 * b2)
        beta = (b2 * np.cos(d) ** 2 + b1 * np.sin(d) ** 2) / (4 * b1 * b2)
        gam = (b2 * a1 * np.cos(d) + b1 * a2 * np.sin(d)) / (2 * b1 * b2)
        return alpha, beta, gam

    def spectrum(self, rho, psi):
        """Vt(rho n(psi)); arrays broadcast."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise ArgumentError("radial wavenumber must be nonnegative")
        if self.kind == "gauss_cosine":
            p = self.params
            alpha, beta, gam = self.gauss_terms(psi)
            A = p["amplitude"] / (4 * math.sqrt(p["b1"] * p["b2"]))
            out = 0j
            for s in (1, -1):
                out = out + np.exp(1j * s * p["chi"] - alpha - beta * rho ** 2 + s * gam * rho)
            return A * out
        return self._table_eval(rho, psi)

    def spectrum_direct(self, p):
        """Direct quadrature of the transform of the tabulated V at wavevectors p."""
        if self.kind != "custom_grid":
            raise ArgumentError("direct quadrature is only for custom_grid sources")
        prm = self.params
        V = prm["values"]
        ny, nx = V.shape
        dx, dy = prm["spacing"]
        gx = prm["origin"][0] + dx * np.arange(nx)
        gy = prm["origin"][1] + dy * np.arange(ny)
        p = np.atleast_2d(np.asarray(p, dtype=float))
        out = np.empty(len(p), dtype=complex)
        for s in range(0, len(p), 4096):
            q = p[s:s + 4096]
            e1 = np.exp(-1j * np.outer(q[:, 0], gx))
            e2 = np.exp(-1j * np.outer(q[:, 1], gy))
            out[s:s + 4096] = np.sum((e2 @ V) * e1, axis=1) * dx * dy / (2 * math.pi)
        return out

    def _build_table(self):
        nr, npsi = self.params["table_shape"]
        rho = np.linspace(0.0, self.params["rho_max"], nr)
        # periodic padding in psi keeps the bicubic interpolant smooth across 0
        k = np.arange(-3, npsi + 3)
        psi = 2 * math.pi * k / npsi
        R, PS = np.meshgrid(rho, psi[3:npsi + 3], indexing="ij")
        p = np.stack([R * np.cos(PS), R * np.sin(PS)], -1).reshape(-1, 2)
        vals = self.spectrum_direct(p).reshape(nr, npsi)
        vals = np.concatenate([vals[:, -3:], vals, vals[:, :3]], axis=1)
        self._table = (RectBivariateSpline(rho, psi, vals.real, kx=3, ky=3, s=0),
                       RectBivariateSpline(rho, psi, vals.imag, kx=3, ky=3, s=0))
        self._table_max = float(np.max(np.abs(vals)))

    def _table_eval(self, rho, psi):
        rho, psi = np.broadcast_arrays(np.asarray(rho, float), np.asarray(psi, float))
        ps = np.mod(psi, 2 * math.pi)
        re, im = self._table
        out = re.ev(rho.ravel(), ps.ravel()) + 1j * im.ev(rho.ravel(), ps.ravel())
        out = out.reshape(rho.shape)
        return np.where(rho <= self.params["rho_max"], out, 0.0)

    def support_radius(self, psi=0.0, rel=1e-14):
        """Radius R with |Vt(rho)| < rel * max|Vt| for rho > R (along psi)."""
        if self.kind == "custom_grid":
            return self.params["rho_max"]
        alpha, beta, gam = self.gauss_terms(psi)
        beta, gam = float(np.min(beta)), float(np.max(np.abs(gam)))
        # envelope exp(-beta rho^2 + |gamma| rho): peak at rho0, fall by rel beyond
        rho0 = gam / (2 * beta)
        return rho0 + math.sqrt(-math.log(rel) / beta) + 1e-12

    def spatial_radius(self, rel=1e-6):
        """Radius in y beyond which |V| < rel * amplitude (grid extent for tables)."""
        p = self.params
        if self.kind == "custom_grid":
            (x0, y0), (dx, dy) = p["origin"], p["spacing"]
            ny, nx = p["values"].shape
            xs, ys = (x0, x0 + dx * (nx - 1)), (y0, y0 + dy * (ny - 1))
            return max(math.hypot(a, b) for a in xs for b in ys)
        return math.sqrt(-math.log(rel) / min(p["b1"], p["b2"]))

    def describe(self):
        items = {k: v for k, v in self.params.items() if k != "values"}
        return f"{self.kind} {items}"


# -- profile integrals ------------------------------------------------------

def profile_F(src, z, psi, method="quadrature", tol=1e-12):
    """F(z, psi) = (2 pi)^{-1/2} int_0^inf exp(i z rho) sqrt(rho) Vt(rho, psi) d rho.

    ``method='quadrature'`` uses adaptive Gauss-Kronrod after rho = y^2 / 2;
    ``method='closed_form'`` uses the confluent hypergeometric representation
    (Gaussian-cosine sources only).
    """
    if np.ndim(z) or np.ndim(psi):
        f = np.vectorize(lambda a, b: profile_F(src, a, b, method, tol), otypes=[complex])
        return f(z, psi)
    z, psi = float(z), float(psi)
    if method == "closed_form":
        if src.kind != "gauss_cosine":
            raise ArgumentError("closed form F exists only for gauss_cosine sources")
        return _profile_closed(src, z, psi)
    if method != "quadrature":
        raise ArgumentError(f"unknown method {method!r}")
    Y = math.sqrt(2 * src.support_radius(psi))

    def part(fn):
        def integrand(y):
            v = y * y * src.spectrum(0.5 * y * y, psi) * np.exp(0.5j * z * y * y)
            return fn(v)
        val, err = integrate.quad(integrand, 0.0, Y, epsabs=tol * 1e-2, epsrel=tol,
                                  limit=4000)
        return val, err

    (re, e1), (im, e2) = part(np.real), part(np.imag)
    val = (re + 1j * im) / (math.sqrt(2) * SQRT_2PI)
    err = math.hypot(e1, e2) / (math.sqrt(2) * SQRT_2PI)
    if err > max(1e3 * tol * abs(val), 1e-14):
        raise NumericError("profile quadrature did not converge", err)
    return complex(val)


def _half_line_moment(beta, w):
    """int_0^inf sqrt(r) exp(-beta r^2 + w r) dr via Kummer functions."""
    x = w * w / (4 * beta)
    return (_G34 / (2 * beta ** 0.75) * hyp1f1(0.75, 0.5, x)
            + w * _G54 / (2 * beta ** 1.25) * hyp1f1(1.25, 1.5, x))


def _profile_closed(src, z, psi):
    p = src.params
    alpha, beta, gam = src.gauss_terms(psi)
    A = p["amplitude"] / (4 * math.sqrt(p["b1"] * p["b2"]))
    total = 0j
    for s in (1, -1):
        total += np.exp(1j * s * p["chi"] - alpha) * _half_line_moment(float(beta), s * float(gam) + 1j * z)
    return complex(A * total / SQRT_2PI)


class ProfileEvaluator:
    """Vectorized F(z, psi) and G(z, psi) for field assembly.

    G(z, psi) = int_0^inf rho Vt(rho, psi) exp(i z rho) d rho is the kernel
    of the focal and chart integrals.  Gaussian-cosine sources use closed
    forms for G; F always uses fixed Gauss-Legendre quadrature in y with
    rho = y^2 / 2, with a node count scaled to the largest |z|.
    """

    def __init__(self, src: SourceModel, nodes: int = 96):
        self.src = src
        self.nodes = nodes
        self.R = src.support_radius(np.linspace(0, 2 * np.pi, 73))
        self.Y = math.sqrt(2 * self.R)

    def _legendre(self, phase, upper):
        # enough nodes to resolve a total oscillation phase on [0, upper]
        n = min(int(self.nodes + phase), 6000)
        t, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * upper * (t + 1), 0.5 * upper * w

    def F(self, z, psi, chunk=2048):
        z, psi = np.broadcast_arrays(np.asarray(z, float), np.asarray(psi, float))
        shape = z.shape
        z, psi = z.ravel(), psi.ravel()
        out = np.empty(z.shape, dtype=complex)
        if z.size == 0:
            return out.reshape(shape)
        y, w = self._legendre(float(np.max(np.abs(z))) * self.R, self.Y)
        rho = 0.5 * y * y
        for s in range(0, z.size, chunk):
            zz, pp = z[s:s + chunk, None], psi[s:s + chunk, None]
            vals = self.src.spectrum(rho[None, :], pp) * (y * y)[None, :] * np.exp(1j * zz * rho[None, :])
            out[s:s + chunk] = vals @ w
        return (out / (math.sqrt(2) * SQRT_2PI)).reshape(shape)

    def G(self, z, psi, chunk=2048):
        z, psi = np.broadcast_arrays(np.asarray(z, float), np.asarray(psi, float))
        if self.src.kind == "gauss_cosine":
            return _G_closed(self.src, z, psi)
        shape = z.shape
        z, psi = z.ravel(), psi.ravel()
        out = np.empty(z.shape, dtype=complex)
        if z.size == 0:
            return out.reshape(shape)
        rho, w = self._legendre(float(np.max(np.abs(z))) * self.R, self.R)
        for s in range(0, z.size, chunk):
            zz, pp = z[s:s + chunk, None], psi[s:s + chunk, None]
            vals = self.src.spectrum(rho[None, :], pp) * rho[None, :] * np.exp(1j * zz * rho[None, :])
            out[s:s + chunk] = vals @ w
        return out.reshape(shape)


def _G_closed(src, z, psi):
    p = src.params
    alpha, beta, gam = src.gauss_terms(psi)
    A = p["amplitude"] / (4 * math.sqrt(p["b1"] * p["b2"]))
    sb = np.sqrt(beta)
    total = 0j
    for s in (1, -1):
        w = s * gam + 1j * z
        K = 1 / (2 * beta) + w / (2 * beta) * (math.sqrt(math.pi) / (2 * sb)) * erfcx(-w / (2 * sb))
        total = total + np.exp(1j * s * p["chi"] - alpha) * K
    return A * total


def G_quadrature(src, z, psi, tol=1e-12):
    """Adaptive-quadrature oracle for G(z, psi) (scalar)."""
    R = src.support_radius(psi)

    def part(fn):
        return integrate.quad(lambda r: fn(r * src.spectrum(r, psi) * np.exp(1j * z * r)),
                              0.0, R, epsabs=tol * 1e-2, epsrel=tol, limit=4000)[0]

    return part(np.real) + 1j * part(np.imag)


def require_decay(src):
    """Raise CapabilityError unless the spectrum has a declared finite support."""
    if src.kind == "custom_grid" and not np.isfinite(src.params.get("rho_max", np.inf)):
        raise CapabilityError("custom spectrum needs a declared decay bound")
