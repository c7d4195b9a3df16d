"""Reference solutions of the long-wave problem on regular grids.

* :func:`spectral_eta` - exact Fourier solution over constant depth, with or
  without the water-wave dispersion relation.
* :func:`fd_eta` - leapfrog finite differences for eta_tt = g div(H grad eta).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.spatial import cKDTree

from .errors import ArgumentError, ResolutionError, ValidityError
from .grid import Grid


def dispersion_threshold(H, l):
    """Distance l^3 / H^2 beyond which dispersion alters the front."""
    if not (H > 0 and l > 0):
        raise ArgumentError("H and l must be positive")
    return l ** 3 / H ** 2


def _wavenumbers(grid):
    kx = 2 * np.pi * np.fft.fftfreq(grid.nx, grid.dx)
    ky = 2 * np.pi * np.fft.fftfreq(grid.ny, grid.dy)
    KX, KY = np.meshgrid(kx, ky)
    return KX, KY


def spectral_eta(src, H, g, t, grid: Grid, l, dispersive=True):
    """Constant-depth solution with initial data V(x / l), eta_t = 0.

    Dispersive: eta_hat = V_hat / cosh(H k) cos(t sqrt(g k tanh(H k))).
    Nondispersive: eta_hat = V_hat cos(t k sqrt(g H)).  The Fourier synthesis
    is periodic on the grid, so the grid must contain the whole wave.
    """
    pts = grid.points()
    V = src.value(pts / l)
    Vh = np.fft.fft2(V)
    power = np.abs(Vh) ** 2
    KX, KY = _wavenumbers(grid)
    outer = (np.abs(KX) > 0.5 * np.pi / grid.dx) | (np.abs(KY) > 0.5 * np.pi / grid.dy)
    if power[outer].sum() > 1e-6 * power.sum():
        raise ResolutionError("source spectrum not resolved by the grid")
    k = np.hypot(KX, KY)
    if dispersive:
        omega = np.sqrt(g * k * np.tanh(H * k))
        mult = np.cos(omega * t) / np.cosh(np.minimum(H * k, 700.0))
    else:
        mult = np.cos(k * math.sqrt(g * H) * t)
    return np.real(np.fft.ifft2(Vh * mult))


def _face_depths(bathy, grid):
    x, y = grid.x, grid.y
    xf = 0.5 * (x[1:] + x[:-1])
    yf = 0.5 * (y[1:] + y[:-1])
    Xe, Ye = np.meshgrid(xf, y)
    Hx = bathy.depth(np.stack([Xe, Ye], -1))
    Xn, Yn = np.meshgrid(x, yf)
    Hy = bathy.depth(np.stack([Xn, Yn], -1))
    return Hx, Hy


def _check_causal(grid, u0, protect, cmax, t, tol, margin_cells=4):
    pts = grid.points()
    live = np.abs(u0) > tol * np.max(np.abs(u0))
    src_pts = pts[live]
    edge = np.concatenate([pts[0], pts[-1], pts[:, 0], pts[:, -1]])
    if np.any(live[0]) or np.any(live[-1]) or np.any(live[:, 0]) or np.any(live[:, -1]):
        raise ValidityError("initial elevation touches the FD boundary")
    # earliest time the true wave is non-negligible at each boundary node
    d_src, _ = cKDTree(src_pts).query(edge)
    p = np.atleast_2d(np.asarray(protect, float))
    reach = d_src[None, :] + np.linalg.norm(edge[None, :, :] - p[:, None, :], axis=-1)
    slack = margin_cells * max(grid.dx, grid.dy)
    if np.min(reach) <= cmax * t + slack:
        raise ValidityError("protected points are within reach of boundary reflections; "
                            "enlarge the FD domain")


class FDResult(np.ndarray):
    """Field array carrying ``energy_drift`` and ``steps`` attributes."""


def fd_eta(bathy, src, mu, t, grid: Grid, dt=None, cfl=0.7, guard_cells=10, guard_tol=1e-6,
           protect=None):
    """Leapfrog solution of eta_tt = g div(H grad eta) with eta = V(x/mu).

    Flux-form second-order differences, Dirichlet boundaries, first step
    from the Taylor expansion with eta_t(0) = 0.  The step is the largest
    dt <= cfl * min(dx, dy) / max C that lands exactly on t.

    By default the result is rejected when the wave amplitude in the outer
    ``guard_cells`` exceeds ``guard_tol`` times the maximum.  Passing
    ``protect`` (an array of points) replaces this with a causality check:
    each protected point must be out of reach of any boundary disturbance,
    i.e. (dist(source, b) + |b - p|) / max C > t for every boundary node b.
    This allows sub-domains that cut through the wave away from the points
    of interest.
    """
    g = bathy.g
    Hx, Hy = _face_depths(bathy, grid)
    cmax = math.sqrt(g * max(Hx.max(), Hy.max()))
    limit = cfl * min(grid.dx, grid.dy) / cmax
    if dt is None:
        steps = max(1, int(math.ceil(t / limit)))
    else:
        if dt > limit * (1 + 1e-12):
            raise ArgumentError(f"dt={dt} violates the CFL bound {limit}")
        steps = max(1, int(round(t / dt)))
    h = t / steps
    ax = g * Hx / grid.dx ** 2
    ay = g * Hy / grid.dy ** 2

    def lap(u):
        out = np.zeros_like(u)
        fx = ax * np.diff(u, axis=1)
        fy = ay * np.diff(u, axis=0)
        out[:, 1:-1] += fx[:, 1:] - fx[:, :-1]
        out[1:-1, :] += fy[1:] - fy[:-1]
        out[0, :] = out[-1, :] = out[:, 0] = out[:, -1] = 0.0
        return out

    def stiffness(u, v):
        return (np.sum(ax * np.diff(u, axis=1) * np.diff(v, axis=1))
                + np.sum(ay * np.diff(u, axis=0) * np.diff(v, axis=0)))

    u0 = src.value(grid.points() / mu)
    if protect is not None:
        _check_causal(grid, u0, protect, cmax, t, guard_tol)
    u0[0, :] = u0[-1, :] = u0[:, 0] = u0[:, -1] = 0.0
    u1 = u0 + 0.5 * h * h * lap(u0)
    E0 = np.sum(((u1 - u0) / h) ** 2) + stiffness(u1, u0)
    for _ in range(steps - 1):
        u2 = 2 * u1 - u0 + h * h * lap(u1)
        u0, u1 = u1, u2
    E1 = np.sum(((u1 - u0) / h) ** 2) + stiffness(u1, u0)
    drift = abs(E1 - E0) / abs(E0)
    g_ = guard_cells
    border = np.concatenate([u1[:g_].ravel(), u1[-g_:].ravel(), u1[:, :g_].ravel(), u1[:, -g_:].ravel()])
    if protect is None and np.max(np.abs(border)) > guard_tol * np.max(np.abs(u1)):
        raise ValidityError("wave reached the boundary guard band; enlarge the FD domain")
    out = u1.view(FDResult)
    out.energy_drift = drift
    out.steps = steps
    return out


def front_mask(grid: Grid, front_points, width):
    """Cells within ``width`` of a polyline through ``front_points``."""
    pts = np.asarray(front_points, dtype=float)
    pts = pts[np.all(np.isfinite(pts), axis=1)]
    if len(pts) < 2:
        raise ArgumentError("front polyline needs at least two points")
    # densify so that vertex distance approximates segment distance
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    dense = [pts[:1]]
    for a, b, L in zip(pts[:-1], pts[1:], seg):
        m = max(1, int(math.ceil(4 * L / width)))
        s = (np.arange(1, m + 1) / m)[:, None]
        dense.append(a + s * (b - a))
    tree = cKDTree(np.concatenate(dense))
    d, _ = tree.query(grid.points().reshape(-1, 2))
    return (d <= width).reshape(grid.shape)


def front_band_error(field_a, field_b, grid: Grid, front_points=None, width=None, mask=None):
    """Errors of field_a against field_b inside the front band.

    Returns
    -------
    dict with ``linf_rel``, ``l2_rel`` (both relative to field_b in the
    mask), ``peak_ratio`` = max|a| / max|b| and ``peak_shift`` (distance
    between the argmax locations).
    """
    a, b = np.asarray(field_a), np.asarray(field_b)
    if a.shape != b.shape or a.shape != grid.shape:
        raise ArgumentError("fields must share the grid")
    if mask is None:
        mask = front_mask(grid, front_points, width)
    if not np.any(mask):
        raise ArgumentError("empty front band")
    da, db = a[mask], b[mask]
    bmax = np.max(np.abs(db))
    pts = grid.points()[mask]
    ia, ib = np.argmax(np.abs(da)), np.argmax(np.abs(db))
    return {
        "linf_rel": float(np.max(np.abs(da - db)) / bmax),
        "l2_rel": float(np.linalg.norm(da - db) / np.linalg.norm(db)),
        "peak_ratio": float(np.max(np.abs(da)) / bmax),
        "peak_shift": float(np.linalg.norm(pts[ia] - pts[ib])),
    }


def causal_box(points, t, cmax, source_radius, spacing, slack_cells=8):
    """Smallest axis-aligned grid whose boundary cannot influence ``points``
    by time t (see ``fd_eta(protect=...)``), for a source centred at 0.

    Each point p is safe when the ellipse |b| + |b - p| <= cmax t + r + slack
    fits inside the box.  Points beyond that reach are merely enclosed.
    """
    p = np.atleast_2d(np.asarray(points, float))
    if not (t > 0 and cmax > 0 and spacing > 0):
        raise ArgumentError("t, cmax and spacing must be positive")
    slack = slack_cells * spacing
    a = 0.5 * (cmax * t + source_radius + slack)
    c = 0.5 * np.linalg.norm(p, axis=1)
    far = p[c >= a]
    p, c = p[c < a], c[c < a]
    b = np.sqrt(a * a - c * c)
    th = np.arctan2(p[:, 1], p[:, 0])
    hx = np.sqrt((a * np.cos(th)) ** 2 + (b * np.sin(th)) ** 2)
    hy = np.sqrt((a * np.sin(th)) ** 2 + (b * np.cos(th)) ** 2)
    m = 0.5 * p
    lo = np.min(np.vstack([m - np.stack([hx, hy], 1), far]), axis=0) - 2 * spacing
    hi = np.max(np.vstack([m + np.stack([hx, hy], 1), far]), axis=0) + 2 * spacing
    nx = int(math.ceil((hi[0] - lo[0]) / spacing)) + 1
    ny = int(math.ceil((hi[1] - lo[1]) / spacing)) + 1
    return Grid(float(lo[0]), float(lo[1]), spacing, spacing, nx, ny)


def sample_field(u, grid: Grid, points, order=3):
    """Spline interpolation of a grid field at arbitrary points (..., 2)."""
    pts = np.asarray(points, float)
    c = np.stack([(pts[..., 1] - grid.y0) / grid.dy, (pts[..., 0] - grid.x0) / grid.dx])
    if np.any(c[0] < 0) or np.any(c[0] > grid.ny - 1) or np.any(c[1] < 0) or np.any(c[1] > grid.nx - 1):
        raise ArgumentError("sample points outside the grid")
    return map_coordinates(np.asarray(u), c.reshape(2, -1), order=order).reshape(pts.shape[:-1])


def fd_at_points(bathy, src, mu, t, points, divs=(8, 12), cfl=0.7):
    """Finite-difference elevation at scattered points, Richardson-extrapolated.

    For each entry of ``divs`` the solution is computed with dx = mu / div
    on the smallest causally safe box around the points and sampled with
    cubic splines.  With two resolutions the leading dx^2 error is removed:
    u = (r^2 u_fine - u_coarse) / (r^2 - 1), r = div_fine / div_coarse.

    Returns
    -------
    values : extrapolated (or single-resolution) samples, shape points.shape[:-1]
    raw : dict div -> samples
    """
    pts = np.asarray(points, float)
    flat = pts.reshape(-1, 2)
    r_src = mu * src.spatial_radius()
    raw = {}
    for div in divs:
        h = mu / div
        # the box depends on the largest speed inside it; iterate to a fixed point
        cmax = float(bathy.speed(np.zeros(2)))
        for _ in range(4):
            grid = causal_box(flat, t, cmax, r_src, h)
            probe = Grid.from_bounds(grid.x0, grid.y0, grid.x[-1], grid.y[-1], 65, 65).points()
            c_new = math.sqrt(bathy.g * float(np.max(bathy.depth(probe))))
            if c_new <= cmax * (1 + 1e-12):
                break
            cmax = c_new
        u = fd_eta(bathy, src, mu, t, grid, cfl=cfl, protect=flat)
        raw[div] = sample_field(u, grid, pts)
    if len(divs) == 1:
        return raw[divs[0]], raw
    if len(divs) != 2:
        raise ArgumentError("give one or two resolutions")
    a, b = sorted(divs)
    r2 = (b / a) ** 2
    return (r2 * raw[b] - raw[a]) / (r2 - 1), raw
