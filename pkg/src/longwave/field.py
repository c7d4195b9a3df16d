"""Asymptotic free-surface elevation assembled from a traced front.

A :class:`Scene` freezes everything that depends only on (bathymetry, source,
mu, t): the ray bundle, the front, its classified focal points and the
branches between them.  Field evaluators take a scene and an array of points
of shape (..., 2) and return arrays of shape (...).

Regular points use the branch sum

    eta = sum_j sqrt(mu / |X_psi|) (H0 / H(X))^{1/4}
          Re[exp(-i pi/4 - i pi m_j / 2) F(S_j / mu, psi_j)],

focal neighbourhoods use the model functions g_n^sigma, and
:func:`eta_chart02` evaluates the oscillatory integral of the rotated
(p'_1, x'_2) chart directly for validation.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ArgumentError, NumericError, SingularityError, ValidityError
from .front_geometry import (FocalPointInfo, classify_focal, find_focal_points, focal_chart_index,
                             local_fan, segment_front)
from .raytrace import front_at, state_rhs, trace_bundle
from .source import ProfileEvaluator, SourceModel, require_decay
from .special import airy_ai

FOCAL_RADIUS = 3.0   # r_psi in units of the focal scale lambda
BAND_FACTOR = 12.0   # band half-width in units of mu


_EIGHTH = np.exp(-0.25j * np.pi)


def _phase(m):
    """exp(-i pi m / 2) with m reduced mod 4."""
    return (1, -1j, -1, 1j)[int(m) % 4]


def maslov_profile(F, m):
    """Re[e^{-i pi / 4 - i pi m / 2} F], the front profile carried by index m.

    m and m + 2 give exact negations; m + 1 is the quarter-phase rotation.
    """
    m = np.asarray(m)
    ph = np.array([_phase(k) for k in m.ravel()], dtype=complex).reshape(m.shape)
    return np.real(ph * _EIGHTH * np.asarray(F, dtype=complex))


def focal_scale(fp: FocalPointInfo, mu):
    """lambda = (mu C_F^2 / |Jtilde_F J^(n)_F|)^{1/(n+1)}, the angular focal scale."""
    return (mu * fp.CF ** 2 / abs(fp.Jtilde * fp.JnF)) ** (1.0 / (fp.n + 1))


@dataclass
class Scene:
    """Frozen geometry for field evaluation at one time."""

    bathy: object
    src: SourceModel
    mu: float
    t: float
    bundle: object
    front: object
    focal: list
    branches: list
    profile: ProfileEvaluator
    C0: float
    H0: float
    band: float
    _fans: dict = field(default_factory=dict, repr=False)

    def lam(self, k):
        return focal_scale(self.focal[k], self.mu)

    def r_psi(self, k):
        return FOCAL_RADIUS * self.lam(k)


def prepare_scene(bathy, src, mu, t, n_psi=512, dt=None, bundle=None, profile_nodes=96,
                  band_factor=BAND_FACTOR):
    """Trace, locate and classify focal points, and segment the front."""
    if not mu > 0:
        raise ArgumentError("mu must be positive")
    if bundle is None:
        bundle = trace_bundle(bathy, n_psi, t, dt=dt)
    C0 = bundle.C0
    if t <= 5 * mu / C0:
        warnings.warn("t is below 5 mu / C0; the front has not formed yet")
    front = front_at(bundle, t)
    focal = []
    for fp in find_focal_points(bundle, t):
        fp = classify_focal(bundle, fp)
        fp.mbold = focal_chart_index(bundle, fp)
        focal.append(fp)
    branches = segment_front(front, focal)
    H0 = float(bathy.depth(np.zeros(2)))
    Hf = bathy.depth(front.X[front.alive])
    band = band_factor * mu * max(1.0, 1.0 / math.sqrt(float(np.min(Hf)) / H0))
    return Scene(bathy, src, float(mu), float(t), bundle, front, focal, branches,
                 ProfileEvaluator(src, nodes=profile_nodes), C0, H0, band)


# -- branch points ------------------------------------------------------------

@dataclass
class BranchPoint:
    """Foot of the front normal through x on one branch."""

    psi: float
    y: float
    S: float
    m: int
    Xpsi_norm: float
    H_ratio: float


def _perp(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _branch_table(scene: Scene, pts, chunk=256, newton_tol=1e-10, max_iter=100):
    """All branch points of the points ``pts`` (n, 2) within the band.

    The roots are those of g(psi) = <x - X, P_perp>; since X_psi is parallel
    to P_perp these are the feet of the normals, and folds (X_psi = 0) do not
    produce spurious roots.
    """
    fr = scene.front
    psi = fr.psi
    N = len(psi)
    h = 2 * np.pi / N
    X, P = fr.X, fr.P
    Pn = P / np.linalg.norm(P, axis=1)[:, None]
    Pperp = _perp(P)
    step = np.linalg.norm(np.roll(X, -1, axis=0) - X, axis=1)
    out_idx, out_lo = [], []
    for s in range(0, len(pts), chunk):
        x = pts[s:s + chunk]
        d = x[:, None, :] - X[None]
        g = np.einsum("nij,ij->ni", d, Pperp)
        y = np.einsum("nij,ij->ni", d, Pn)
        g1, y1 = np.roll(g, -1, axis=1), np.roll(y, -1, axis=1)
        near = np.minimum(np.abs(y), np.abs(y1)) < scene.band + step[None]
        # a root exactly on a ray belongs to the interval starting there
        hit = ((g >= 0) != (g1 >= 0)) & near
        a, b = np.nonzero(hit)
        out_idx.append(a + s)
        out_lo.append(b)
    idx = np.concatenate(out_idx) if out_idx else np.zeros(0, int)
    lo_i = np.concatenate(out_lo) if out_lo else np.zeros(0, int)
    empty = {k: np.zeros(0) for k in ("psi", "y", "S", "Xpsi_norm", "H_ratio", "resid")}
    empty.update(point=np.zeros(0, int), m=np.zeros(0, int))
    if len(idx) == 0:
        return empty
    x = pts[idx]
    lo = psi[lo_i].astype(float)
    hi = lo + h

    def gfun(p):
        Xp_, Pp_ = fr.eval("X", p), fr.eval("P", p)
        return np.einsum("ij,ij->i", x - Xp_, _perp(Pp_))

    glo = gfun(lo)
    ps = lo + h * glo / (glo - gfun(hi))
    for it in range(max_iter):
        Xv, Pv = fr.eval("X", ps), fr.eval("P", ps)
        Xpv, Ppv = fr.eval("Xp", ps), fr.eval("Pp", ps)
        gv = np.einsum("ij,ij->i", x - Xv, _perp(Pv))
        dg = -np.einsum("ij,ij->i", Xpv, _perp(Pv)) + np.einsum("ij,ij->i", x - Xv, _perp(Ppv))
        # keep the bracket current
        same = np.sign(gv) == np.sign(glo)
        lo = np.where(same, ps, lo)
        glo = np.where(same, gv, glo)
        hi = np.where(same, hi, ps)
        with np.errstate(divide="ignore", invalid="ignore"):
            new = ps - gv / dg
        bad = ~np.isfinite(new) | (new < lo) | (new > hi) | (it >= max_iter // 2)
        new = np.where(bad, 0.5 * (lo + hi), new)
        delta = np.abs(new - ps)
        ps = new
        if np.all(delta <= newton_tol * np.maximum(1.0, np.abs(ps))):
            break
    else:
        raise NumericError("branch-point iteration did not converge", float(np.max(delta)))
    Xv, Pv, Xpv = fr.eval("X", ps), fr.eval("P", ps), fr.eval("Xp", ps)
    d = x - Xv
    nP = np.linalg.norm(Pv, axis=1)
    yv = np.einsum("ij,ij->i", d, Pv) / nP
    keep = np.abs(yv) <= scene.band
    Xn = np.linalg.norm(Xpv, axis=1)
    resid = np.abs(np.einsum("ij,ij->i", d, Xpv)) / np.maximum(np.linalg.norm(d, axis=1) * Xn, 1e-300)
    Hr = (scene.H0 / scene.bathy.depth(Xv)) ** 0.25
    ps = np.mod(ps, 2 * np.pi)
    m = np.full(len(ps), -1, dtype=int)
    for br in scene.branches:
        m = np.where(br.contains(ps) & (m < 0), br.morse, m)
    return {"point": idx[keep], "psi": ps[keep], "y": yv[keep], "S": np.einsum("ij,ij->i", d, Pv)[keep],
            "m": m[keep], "Xpsi_norm": Xn[keep], "H_ratio": Hr[keep], "resid": resid[keep]}


def branch_points(scene: Scene, x):
    """Branch points of a single point x as a list of :class:`BranchPoint`."""
    tab = _branch_table(scene, np.asarray(x, float).reshape(1, 2))
    order = np.argsort(tab["psi"])
    return [BranchPoint(float(tab["psi"][i]), float(tab["y"][i]), float(tab["S"][i]), int(tab["m"][i]),
                        float(tab["Xpsi_norm"][i]), float(tab["H_ratio"][i])) for i in order]


def _flat(x):
    x = np.asarray(x, float)
    if x.shape[-1] != 2:
        raise ArgumentError("points must have a trailing dimension of 2")
    return x.reshape(-1, 2), x.shape[:-1]


def _psi_dist(a, b):
    return np.abs(np.mod(a - b + np.pi, 2 * np.pi) - np.pi)


def _regular_terms(scene: Scene, tab):
    F = scene.profile.F(tab["S"] / scene.mu, tab["psi"])
    amp = np.sqrt(scene.mu / tab["Xpsi_norm"]) * tab["H_ratio"]
    return amp * maslov_profile(F, tab["m"])


def eta_regular(scene: Scene, x):
    """Branch-sum elevation at points away from focal neighbourhoods."""
    pts, shape = _flat(x)
    tab = _branch_table(scene, pts)
    for k, fp in enumerate(scene.focal):
        if np.any(_psi_dist(tab["psi"], fp.psiF) < scene.r_psi(k)):
            raise SingularityError("point lies in a focal neighbourhood; use eta_focal / eta_total")
    out = np.zeros(len(pts))
    np.add.at(out, tab["point"], _regular_terms(scene, tab))
    return out.reshape(shape)


# -- model functions g_n ------------------------------------------------------

def _gl(n, a, b):
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * t + 0.5 * (b + a), 0.5 * (b - a) * w


def _g_airy(src, sigma, z1, z2, psiF, tol):
    """n = 2: the xi-integral is 2 pi (2 / rho)^{1/3} Ai(sigma (2 rho^2)^{1/3} z1).

    g = 2 pi 2^{1/3} int rho^{2/3} Vt e^{i rho z2} Ai(...) d rho, computed in
    s = rho^{1/3} with Gauss-Legendre nodes sized to the oscillation count;
    the node count is raised until two successive sizes agree.
    """
    R = src.support_radius(psiF)
    S = R ** (1.0 / 3.0)
    zmax1, zmax2 = float(np.max(np.abs(z1), initial=0)), float(np.max(np.abs(z2), initial=0))
    osc = zmax2 * R + (2.0 / 3.0) * math.sqrt(2.0) * R * zmax1 ** 1.5
    n = int(64 + 2 * osc)
    prev = None
    for _ in range(6):
        s, w = _gl(n, 0.0, S)
        rho = s ** 3
        Vt = src.spectrum(rho, psiF)
        base = 3 * s ** 4 * Vt * w
        arg = sigma * 2 ** (1.0 / 3.0) * s[None, :] ** 2 * z1[:, None]
        vals = (np.exp(1j * rho[None, :] * z2[:, None]) * airy_ai(arg)) @ base
        vals *= 2 * np.pi * 2 ** (1.0 / 3.0)
        if prev is not None:
            err = np.max(np.abs(vals - prev)) / max(np.max(np.abs(vals)), 1e-300)
            if err < tol:
                return vals
        prev = vals
        n = int(1.5 * n)
    raise NumericError("Airy-route quadrature did not converge", float(err))


def _g_direct(profile, n, sigma, z1, z2, psiF, tol):
    """Direct xi-integral of G(z2 - xi z1 - sigma xi^{n+1}/(n+1)!, psiF).

    Gauss-Legendre panels on [-Xi, Xi]; the tails use xi = Xi / u.
    """
    fact = math.factorial(n + 1)
    zmax1 = float(np.max(np.abs(z1), initial=0))
    zmax2 = float(np.max(np.abs(z2), initial=0))
    Xi = max(4.0, 2 * (fact * (zmax2 + 1)) ** (1.0 / (n + 1)), 2 * (fact * zmax1) ** (1.0 / n))
    prev = None
    panels = int(16 + 4 * Xi * (1 + zmax1))
    for _ in range(5):
        edges = np.linspace(-Xi, Xi, panels + 1)
        t, w = np.polynomial.legendre.leggauss(16)
        xi = (0.5 * np.diff(edges)[:, None] * t[None] + 0.5 * (edges[1:] + edges[:-1])[:, None]).ravel()
        wx = (0.5 * np.diff(edges)[:, None] * w[None]).ravel()
        u, wu = _gl(48, 0.0, 1.0)
        xt = Xi / u
        wt = Xi / u ** 2 * wu
        xi = np.concatenate([xi, xt, -xt])
        wx = np.concatenate([wx, wt, wt])
        arg = z2[:, None] - xi[None] * z1[:, None] - sigma * xi[None] ** (n + 1) / fact
        vals = profile.G(arg, np.full(arg.shape, psiF)) @ wx
        if prev is not None:
            err = np.max(np.abs(vals - prev)) / max(np.max(np.abs(vals)), 1e-300)
            if err < tol:
                return vals
        prev = vals
        panels *= 2
    raise NumericError("direct g-model quadrature did not converge", float(err))


def g_model(n, sigma, z1, z2, src, psiF, method="auto", tol=1e-10, profile=None):
    """g_n^sigma(z1, z2, psiF) = int d xi int rho d rho Vt(rho n(psiF)) e^{i rho phase},
    phase = z2 - xi z1 - sigma xi^{n+1} / (n+1)!.

    ``method`` is 'airy' (n = 2 only), 'direct' or 'auto' (Airy for folds).
    """
    if n not in (2, 3):
        raise ArgumentError("model functions are implemented for n = 2 and 3")
    if sigma not in (1, -1):
        raise ArgumentError("sigma must be +1 or -1")
    require_decay(src)
    z1, z2 = np.broadcast_arrays(np.asarray(z1, float), np.asarray(z2, float))
    shape = z1.shape
    a, b = z1.ravel(), z2.ravel()
    if method == "auto":
        method = "airy" if n == 2 else "direct"
    if method == "airy":
        if n != 2:
            raise ArgumentError("the Airy reduction applies to n = 2 only")
        out = _g_airy(src, sigma, a, b, psiF, tol)
    elif method == "direct":
        out = _g_direct(profile or ProfileEvaluator(src), n, sigma, a, b, psiF, tol)
    else:
        raise ArgumentError(f"unknown method {method!r}")
    return out.reshape(shape)


def g_model_bruteforce(n, sigma, z1, z2, src, psiF, Xi=8.0, tol=1e-10):
    """Reference g_n^sigma by nested adaptive quadrature (scalar, slow).

    Outer: adaptive quadrature in xi over the whole line.  Inner: the rho
    integral int_0^R rho Vt cos/sin(z rho) d rho with QUADPACK's Fourier
    weights.
    """
    fact = math.factorial(n + 1)
    R = src.support_radius(psiF)

    # QUADPACK revisits the same nodes for every z; cache the spectrum there
    @functools.lru_cache(maxsize=None)
    def rvt(r):
        return complex(r * src.spectrum(r, psiF))

    def f_re(r):
        return rvt(float(r)).real

    def f_im(r):
        return rvt(float(r)).imag

    def G(z):
        if z == 0.0:
            re = integrate.quad(f_re, 0, R, epsabs=1e-14, limit=400)[0]
            im = integrate.quad(f_im, 0, R, epsabs=1e-14, limit=400)[0]
            return re + 1j * im
        kw = dict(wvar=abs(z), epsabs=1e-14, limit=800)
        cr = integrate.quad(f_re, 0, R, weight="cos", **kw)[0]
        sr = integrate.quad(f_re, 0, R, weight="sin", **kw)[0]
        ci = integrate.quad(f_im, 0, R, weight="cos", **kw)[0]
        si = integrate.quad(f_im, 0, R, weight="sin", **kw)[0]
        sg = math.copysign(1.0, z)
        # e^{i z r} = cos + i sg sin|z| r
        return (cr - sg * si) + 1j * (ci + sg * sr)

    def part(fn, a, b):
        return integrate.quad(lambda xi: fn(G(z2 - xi * z1 - sigma * xi ** (n + 1) / fact)), a, b,
                              epsabs=tol * 1e-2, epsrel=tol, limit=2000)[0]

    total = 0j
    for a, b in ((-np.inf, -Xi), (-Xi, 0.0), (0.0, Xi), (Xi, np.inf)):
        total += part(np.real, a, b) + 1j * part(np.imag, a, b)
    return complex(total)


# -- focal field --------------------------------------------------------------

def focal_coordinates(scene: Scene, k, x):
    """Scaled focal coordinates (z1, z2) of points x for focal point k."""
    fp = scene.focal[k]
    d = np.asarray(x, float) - fp.XF
    xr = d @ fp.frame.T
    lam = scene.lam(k)
    z1 = fp.Jtilde * xr[..., 0] * lam / (scene.mu * fp.CF)
    z2 = (d @ fp.PF) / scene.mu
    return z1, z2


def eta_focal(scene: Scene, x, k):
    """Focal-point field of focal point ``k`` (index into scene.focal)."""
    fp = scene.focal[k]
    if not fp.classified or fp.mbold is None:
        raise ArgumentError("focal point is not classified")
    pts, shape = _flat(x)
    z1, z2 = focal_coordinates(scene, k, pts)
    g = g_model(fp.n, fp.sigma, z1, z2, scene.src, fp.psiF, profile=scene.profile)
    lam = scene.lam(k)
    amp = math.sqrt(scene.C0) / (2 * np.pi) * math.sqrt(abs(fp.Jtilde)) / fp.CF * lam
    return (amp * np.real(_phase(fp.mbold) * g)).reshape(shape)


def _smooth_window(d, inner, outer):
    """1 for |d| <= inner, C-infinity taper to 0 at |d| = outer."""
    a = np.clip((np.abs(d) - inner) / (outer - inner), 0.0, 1.0)

    def bump(s):
        return np.where(s > 0, np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)

    return bump(1 - a) / (bump(1 - a) + bump(a))


def _chart_fan(scene: Scene, k, width, rays, margin=0.9, min_width=1.0):
    key = (k, scene.mu, scene.t, width, rays, margin, min_width)
    if key in scene._fans:
        return scene._fans[key]
    fp = scene.focal[k]
    lam = scene.lam(k)
    W = width * lam
    spacing = 2 * W / (rays - 1)
    fan = local_fan(scene.bundle, fp.psiF, scene.t, (rays - 1) // 2, spacing)
    s = fan.states[-1]
    d = state_rhs(scene.bathy, s)
    R = fp.frame
    P, X, Pp, Xp = s[:, 0:2] @ R.T, s[:, 2:4] @ R.T, s[:, 4:6] @ R.T, s[:, 6:8] @ R.T
    Pd, Xd = d[:, 0:2] @ R.T, d[:, 2:4] @ R.T
    J02 = Pd[:, 0] * Xp[:, 1] - Pp[:, 0] * Xd[:, 1]
    dpsi = fan.psi - fp.psiF
    # the chart is valid up to the nearest sign change of J'02 on each side
    bad = np.sign(J02) != np.sign(fp.rotated_J02())
    right = np.min(dpsi[bad & (dpsi > 0)], initial=np.inf)
    left = np.min(-dpsi[bad & (dpsi < 0)], initial=np.inf)
    Wl, Wr = min(W, margin * left), min(W, margin * right)
    if min(Wl, Wr) < min_width * lam:
        raise ValidityError(f"rotated (p1, x2) chart degenerates {min(Wl, Wr) / lam:.2f} focal scales "
                            "from psiF")
    Q = np.where(bad, 0.0, (Pd[:, 0] * Pp[:, 1] - Pd[:, 1] * Pp[:, 0]) / np.where(bad, 1.0, J02))
    win = np.where(dpsi < 0, _smooth_window(dpsi, 0.7 * Wl, Wl), _smooth_window(dpsi, 0.7 * Wr, Wr))
    wts = spacing * win * np.abs(Pp[:, 0]) / np.sqrt(np.where(win > 0, np.abs(J02), 1.0))
    use = win > 0
    data = dict(psi=np.mod(fan.psi[use], 2 * np.pi), P=s[use, 0:2], X=s[use, 2:4], X2r=X[use, 1],
                Q=Q[use], w=wts[use], W=(Wl, Wr))
    scene._fans[key] = data
    return data


def eta_chart02(scene: Scene, x, k, width=8.0, rays=1025, chunk=64, min_width=1.0):
    """Field from the rotated (p'_1, x'_2) chart integral around focal point k.

    eta = sqrt(C0) / (2 pi) Re[e^{-i pi mbold / 2}
          int d psi win(psi) |P'_1psi| / sqrt|J'02| G(Phi(psi) / mu, psi)],
    Phi = <P, x - X> + (x'_2 - X'_2)^2 Q / 2.

    The window covers ``width`` focal scales on each side of psiF, cut back
    to 90% of the distance to the nearest zero of J'02.  A ValidityError is
    raised when that leaves less than ``min_width`` focal scales.
    """
    fp = scene.focal[k]
    if fp.mbold is None:
        raise ArgumentError("focal point has no chart index")
    pts, shape = _flat(x)
    fan = _chart_fan(scene, k, width, rays, min_width=min_width)
    x2r = pts @ fp.frame[1]
    out = np.empty(len(pts))
    for s in range(0, len(pts), chunk):
        xx = pts[s:s + chunk]
        Phi = (np.einsum("nj,mj->nm", xx, fan["P"]) - np.einsum("mj,mj->m", fan["X"], fan["P"])[None]
               + 0.5 * (x2r[s:s + chunk, None] - fan["X2r"][None]) ** 2 * fan["Q"][None])
        G = scene.profile.G(Phi / scene.mu, np.broadcast_to(fan["psi"], Phi.shape))
        out[s:s + chunk] = np.real(_phase(fp.mbold) * (G @ fan["w"]))
    return (math.sqrt(scene.C0) / (2 * np.pi) * out).reshape(shape)


def chart_window(scene: Scene, k, width=8.0, rays=1025, min_width=1.0):
    """Largest angular half-width of the (possibly cut back) chart window."""
    return max(_chart_fan(scene, k, width, rays, min_width=min_width)["W"])


# -- constant bottom and totals -----------------------------------------------

def eta_constant_bottom(src, H, g, x, t, l, radius="x", profile=None):
    """Closed-form elevation over constant depth H with initial data V(x / l).

    eta = sqrt(l / r) Re[e^{-i pi / 4} F((|x| - t sqrt(g H)) / l, x / |x|)]
    with r = |x| (``radius='x'``) or the front radius r = t sqrt(g H)
    (``radius='front'``).
    """
    pts, shape = _flat(x)
    r = np.linalg.norm(pts, axis=1)
    if np.any(r < 3 * l):
        warnings.warn("|x| < 3 l: the far-field formula is not valid there")
    c = math.sqrt(g * H)
    psi = np.arctan2(pts[:, 1], pts[:, 0])
    prof = profile or ProfileEvaluator(src)
    F = prof.F((r - c * t) / l, psi)
    if radius == "x":
        rr = r
    elif radius == "front":
        rr = np.full_like(r, c * t)
    else:
        raise ArgumentError("radius must be 'x' or 'front'")
    return (np.sqrt(l / rr) * np.real(np.exp(-0.25j * np.pi) * F)).reshape(shape)


def focal_zone(scene: Scene, k, pts, tab=None):
    """Boolean mask of points inside the neighbourhood of focal point k."""
    fp = scene.focal[k]
    z1, z2 = focal_coordinates(scene, k, pts)
    zone = (np.abs(z1) <= FOCAL_RADIUS ** fp.n / math.factorial(fp.n)) & (np.abs(z2) <= scene.band / scene.mu)
    if tab is not None:
        near = _psi_dist(tab["psi"], fp.psiF) < scene.r_psi(k)
        zone[tab["point"][near]] = True
    return zone


def eta_total(scene: Scene, x, focal="model", return_info=False):
    """Regular branches plus focal contributions.

    Inside the neighbourhood of a focal point the branch points within r_psi
    of psiF are replaced by the focal field (``focal='model'``) or by the
    chart integral (``focal='chart'``, which covers its wider window).
    """
    pts, shape = _flat(x)
    tab = _branch_table(scene, pts)
    use = np.ones(len(tab["psi"]), dtype=bool)
    out = np.zeros(len(pts))
    nfoc = np.zeros(len(pts), dtype=int)
    for k, fp in enumerate(scene.focal):
        zone = focal_zone(scene, k, pts, tab)
        if not np.any(zone):
            continue
        reach = scene.r_psi(k) if focal == "model" else chart_window(scene, k)
        drop = zone[tab["point"]] & (_psi_dist(tab["psi"], fp.psiF) < reach)
        use &= ~drop
        if focal == "model":
            out[zone] += eta_focal(scene, pts[zone], k)
        elif focal == "chart":
            out[zone] += eta_chart02(scene, pts[zone], k)
        else:
            raise ArgumentError("focal must be 'model' or 'chart'")
        nfoc[zone] += 1
    sub = {key: v[use] for key, v in tab.items()}
    np.add.at(out, sub["point"], _regular_terms(scene, sub))
    if not return_info:
        return out.reshape(shape)
    nall = np.bincount(tab["point"], minlength=len(pts))
    nbr = np.bincount(sub["point"], minlength=len(pts))
    info = {"n_branches": nbr.reshape(shape), "n_focal": nfoc.reshape(shape),
            "inside_band": ((nall > 0) | (nfoc > 0)).reshape(shape)}
    return out.reshape(shape), info
