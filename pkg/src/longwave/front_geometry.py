"""Focal points, Jacobians and Morse/Maslov indices of traced fronts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar

from .errors import ArgumentError, ConsistencyError, DegenerateFocalError, ValidityError
from .raytrace import (Front, RayBundle, det2, front_at, jacobians_packed, state_rhs,
                       trace_rays)

REFINE = 16
CHART_SHIFT = 8   # time steps searched for a regular neighbour of a focal point
MAX_ORDER = 4


def jacobians(state, bathy):
    """(J, Jtilde, J10, J02) for packed state(s) of shape (..., 8)."""
    s = np.asarray(state, dtype=float)
    d = state_rhs(bathy, s)
    return jacobians_packed(d[..., 0:2], d[..., 2:4], s[..., 4:6], s[..., 6:8])


@dataclass
class FocalPointInfo:
    """A focal point (psiF, tF) on the front, with its local normal form.

    ``n``, ``JnF``, ``sigma``, ``a``, ``b``, ``q`` are filled by
    :func:`classify_focal` and ``mbold`` by :func:`focal_chart_index`.
    """

    psiF: float
    tF: float
    XF: np.ndarray
    PF: np.ndarray
    CF: float
    Jtilde: float
    Xdot: np.ndarray
    Pdot: np.ndarray
    Ppsi: np.ndarray
    C0: float
    n: int | None = None
    JnF: float | None = None
    sigma: int | None = None
    mbold: int | None = None
    a: float | None = None
    b: float | None = None
    q: float | None = None
    degenerate: bool = False
    residual: float | None = None
    derivs: dict = field(default_factory=dict, repr=False)
    fan: object = field(default=None, repr=False, compare=False)

    @property
    def frame(self):
        """Rows k1, k2 of the rotation to the focal frame (k2 along Xdot)."""
        k2 = self.Xdot / np.linalg.norm(self.Xdot)
        k1 = np.array([k2[1], -k2[0]])
        return np.stack([k1, k2])

    @property
    def classified(self):
        return self.n is not None

    def rotated_J02(self):
        """Chart Jacobian Pdot'_1 X'_2psi - P'_1psi Xdot'_2 in the focal frame."""
        R = self.frame
        Pd, Xd, Pp = R @ self.Pdot, R @ self.Xdot, R @ self.Ppsi
        Xp = R @ self.derivs.get("Xpsi", np.zeros(2))
        return Pd[0] * Xp[1] - Pp[0] * Xd[1]

    def rotated_J10(self):
        R = self.frame
        Pd, Xd, Pp = R @ self.Pdot, R @ self.Xdot, R @ self.Ppsi
        Xp = R @ self.derivs.get("Xpsi", np.zeros(2))
        return Xd[0] * Pp[1] - Xp[0] * Pd[1]


@dataclass
class FrontBranch:
    """Arc of the front between two consecutive focal angles.

    ``lo`` and ``hi`` are the bounding angles with ``lo < hi`` (``hi`` may
    exceed 2 pi when the arc wraps).  ``left``/``right`` index the bounding
    focal points in the focal list, or None for a closed front.
    """

    lo: float
    hi: float
    morse: int
    J_sign: int
    left: int | None = None
    right: int | None = None

    def contains(self, psi):
        psi = np.asarray(psi, float)
        return np.mod(psi - self.lo, 2 * np.pi) < (self.hi - self.lo)


# -- local fans --------------------------------------------------------------

def _steps_to(bundle, t):
    return max(1, int(round(t / bundle.dt)))


def local_fan(bundle: RayBundle, psi_c, t, half_rays=REFINE, spacing=None, extra_steps=0):
    """Re-trace a narrow fan around psi_c to time t (same step size).

    ``extra_steps`` continues the trace past t by whole steps.
    """
    h = spacing if spacing is not None else 2 * np.pi / bundle.n_psi / REFINE
    psi = psi_c + h * np.arange(-half_rays, half_rays + 1)
    k = _steps_to(bundle, t)
    fan = trace_rays(bundle.bathy, psi, (k + extra_steps) * bundle.dt, steps=k + extra_steps)
    return fan


def _fan_front(fan):
    return front_at(fan, fan.T)


# -- focal point search -------------------------------------------------------

def _J_on_states(bathy, s):
    d = state_rhs(bathy, s)
    return det2(d[..., 2:4], s[..., 6:8])


def _make_fp(bathy, psiF, t, s, C0):
    d = state_rhs(bathy, s[None])[0]
    C = float(bathy.fields(s[2:4], check=False)[0])
    Jt = det2(d[2:4], s[4:6])
    return FocalPointInfo(psiF=float(psiF), tF=float(t), XF=s[2:4].copy(), PF=s[0:2].copy(), CF=C,
                          Jtilde=float(Jt), Xdot=d[2:4].copy(), Pdot=d[0:2].copy(),
                          Ppsi=s[4:6].copy(), C0=C0)


def _refine_psi(bundle, psi_lo, psi_hi, t):
    """Locate the zero of J(psi) at fixed t within [psi_lo, psi_hi]."""
    span = psi_hi - psi_lo
    fan = trace_rays(bundle.bathy, psi_lo + span * np.linspace(-0.25, 1.25, 2 * REFINE + 1), t,
                     steps=_steps_to(bundle, t))
    s = fan.states[-1]
    J = _J_on_states(bundle.bathy, s)
    spl = CubicSpline(fan.psi, J)
    sign_change = np.nonzero(np.sign(J[:-1]) != np.sign(J[1:]))[0]
    if len(sign_change):
        k = sign_change[np.argmin(np.abs(fan.psi[sign_change] - 0.5 * (psi_lo + psi_hi)))]
        root = brentq(spl, fan.psi[k], fan.psi[k + 1], xtol=1e-15)
    else:
        k = int(np.argmin(np.abs(J)))
        lo, hi = fan.psi[max(k - 1, 0)], fan.psi[min(k + 1, len(J) - 1)]
        root = minimize_scalar(lambda p: abs(spl(p)), bounds=(lo, hi), method="bounded",
                               options={"xatol": 1e-14}).x
    return float(root)


def find_focal_points(bundle: RayBundle, t=None, refine=True):
    """Focal points of the bundle.

    With ``t=None`` every zero of J along a traced ray is returned (a
    sampling of the caustic); each lies on a grid ray with its time refined
    by bisection.  With a time ``t`` the focal points on the front at t are
    located: sign changes of J in psi, plus near-zero local minima of |J|
    (odd-order points), refined on a locally re-traced fan.
    """
    bathy, C0 = bundle.bathy, bundle.C0
    if t is None:
        out = []
        for i, tf in zip(bundle.cross_ray, bundle.cross_t):
            s = trace_rays(bathy, bundle.psi[i:i + 1], tf, steps=_steps_to(bundle, tf)).states[-1, 0]
            out.append(_make_fp(bathy, bundle.psi[i], tf, s, C0))
        out.sort(key=lambda f: (f.tF, f.psiF))
        return out
    front = front_at(bundle, t)
    J = front.J
    if not np.all(front.alive):
        J = np.where(front.alive, J, np.nan)
    N = len(J)
    scale = np.nanmax(np.abs(J))
    cands = []
    for i in range(N):
        j = (i + 1) % N
        if not (np.isfinite(J[i]) and np.isfinite(J[j])):
            continue
        if np.sign(J[i]) != np.sign(J[j]):
            cands.append(i)
        else:
            k = (i - 1) % N
            if (abs(J[i]) < 1e-3 * scale and abs(J[i]) <= abs(J[k]) and abs(J[i]) <= abs(J[j])):
                cands.append(("min", i))
    out = []
    h = 2 * np.pi / N
    for c in cands:
        if isinstance(c, tuple):
            i = c[1]
            lo, hi = front.psi[i] - h, front.psi[i] + h
        else:
            i = c
            lo, hi = front.psi[i], front.psi[i] + h
        if not refine:
            psiF = 0.5 * (lo + hi)
        else:
            psiF = _refine_psi(bundle, lo, hi, t)
        fan = local_fan(bundle, psiF, t, extra_steps=CHART_SHIFT + 1)
        s = fan.states[_steps_to(bundle, t), REFINE]
        Jc = _J_on_states(bathy, s)
        if isinstance(c, tuple) and abs(Jc) > 1e-8 * scale:
            continue
        fp = _make_fp(bathy, np.mod(psiF, 2 * np.pi), t, s, C0)
        fp.fan = fan
        if abs(fp.Jtilde) < 1e-10:
            fp.degenerate = True
        out.append(fp)
    # merge duplicates
    merged = []
    for fp in sorted(out, key=lambda f: f.psiF):
        if merged and abs(fp.psiF - merged[-1].psiF) < 1e-9:
            continue
        merged.append(fp)
    return merged


def critical_time(bundle: RayBundle):
    """Earliest focal time in (0, T], or +inf when there is none."""
    return float(np.min(bundle.cross_t)) if len(bundle.cross_t) else math.inf


# -- classification -----------------------------------------------------------

def classify_focal(bundle: RayBundle, fp: FocalPointInfo, half_rays=REFINE, spacing=None):
    """Fill n, J^(n), sigma and the normal-form coefficients a, b, q.

    The psi-derivatives of X are taken from a polynomial fit of the exact
    X_psi samples on a locally refined fan centred on psiF.
    """
    if fp.degenerate:
        raise DegenerateFocalError("focal point has vanishing mixed Jacobian")
    if fp.fan is not None and spacing is None and half_rays == REFINE:
        fan = fp.fan
    else:
        h = spacing if spacing is not None else 2 * np.pi / bundle.n_psi / REFINE
        fan = local_fan(bundle, fp.psiF, fp.tF, half_rays, h)
    s = fan.states[_steps_to(bundle, fp.tF)]
    y = fan.psi - fan.psi[half_rays]
    Xp = s[:, 6:8]
    X = s[:, 2:4]
    deg = 8
    u = y / y[-1]
    coef = np.polynomial.polynomial.polyfit(u, Xp, deg)
    # d^k/dpsi^k X_psi at 0 -> X^(k+1)
    Xn = {k + 1: coef[k] * math.factorial(k) / y[-1] ** k for k in range(0, MAX_ORDER)}
    CF = fp.CF
    scale = CF * fp.tF
    n = None
    for k in range(2, MAX_ORDER + 1):
        if np.linalg.norm(Xn[k]) > 1e-6 * scale:
            n = k
            break
    if n is None:
        raise DegenerateFocalError("no psi-derivative of order <= 4 is significant")
    JnF = float(det2(fp.Xdot, Xn[n]))
    Jt, C0 = fp.Jtilde, fp.C0
    a = -JnF / (math.factorial(n) * CF)
    b = -n * Jt * JnF / (math.factorial(n + 1) * CF * C0)
    q = -C0 * math.factorial(n - 1) / JnF
    # normal-form check: leading coefficients of a local fit of the rotated
    # positions must agree with a and b (higher orders absorb the O(y) drift)
    R = np.stack([np.array([fp.Xdot[1], -fp.Xdot[0]]), fp.Xdot]) / np.linalg.norm(fp.Xdot)
    xr = (X - X[half_rays]) @ R.T
    V1 = np.stack([u ** (n + j) for j in range(3)], axis=1)
    V2 = np.stack([u ** (n + 1 + j) for j in range(3)], axis=1)
    a_fit = np.linalg.lstsq(V1, xr[:, 0], rcond=None)[0][0] / y[-1] ** n
    b_fit = np.linalg.lstsq(V2, xr[:, 1], rcond=None)[0][0] / y[-1] ** (n + 1)
    residual = float(max(abs(a_fit - a) / abs(a), abs(b_fit - b) / abs(b)))
    if residual > 0.05:
        raise ConsistencyError(f"local normal form residual {residual:.3f} exceeds 5%")
    out = replace(fp, fan=fan, n=n, JnF=JnF, sigma=int(np.sign(Jt * JnF)), a=a, b=b, q=q, residual=residual,
                  derivs={"Xpsi": s[half_rays, 6:8].copy(), **{f"X{k}": v for k, v in Xn.items()}})
    out.XF, out.PF = s[half_rays, 2:4].copy(), s[half_rays, 0:2].copy()
    return out


def fit_exponents(bundle, fp, half_rays=REFINE, spacing=None):
    """Log-log slopes of |x'_1| and |x'_2| against |y| on the local fan."""
    h = spacing if spacing is not None else 2 * np.pi / bundle.n_psi / REFINE
    fan = local_fan(bundle, fp.psiF, fp.tF, half_rays, h)
    X = fan.states[-1, :, 2:4]
    y = fan.psi - fp.psiF
    xr = (X - X[half_rays]) @ fp.frame.T
    m = y > 0
    e1 = np.polyfit(np.log(y[m]), np.log(np.abs(xr[m, 0])), 1)[0]
    e2 = np.polyfit(np.log(y[m]), np.log(np.abs(xr[m, 1])), 1)[0]
    return float(e1), float(e2)


# -- indices ------------------------------------------------------------------

def _ray_crossings(bundle, psi, t_end):
    r = trace_rays(bundle.bathy, np.array([psi]), t_end, steps=_steps_to(bundle, t_end))
    return r


def morse_index(bundle: RayBundle, psi, t, recount=True):
    """Number of J zeros on the ray psi during (0, t)."""
    if not (0 < t <= bundle.T * (1 + 1e-12)):
        raise ArgumentError("time outside the traced interval")
    hits = np.nonzero(np.isclose(np.mod(bundle.psi - psi + np.pi, 2 * np.pi) - np.pi, 0.0, atol=1e-13))[0]
    if len(hits):
        i = int(hits[0])
        ct = bundle.crossings(i)
        m = int(np.sum(ct < t))
        s = bundle.states_at(t)[i]
        if recount:
            k = int(math.floor(t / bundle.dt))
            Js = _J_on_states(bundle.bathy, bundle.states[1:k + 1, i])
            recount_m = int(np.sum(np.sign(Js[1:]) != np.sign(Js[:-1])))
            if recount_m != int(np.sum(ct < k * bundle.dt)):
                raise ConsistencyError("recounted Morse index disagrees with the running count")
    else:
        r = _ray_crossings(bundle, psi, t)
        m = len(r.cross_t)
        s = r.states[-1, 0]
    J = _J_on_states(bundle.bathy, s)
    scale = abs(bundle.C0) ** 2 * t
    if abs(J) < 1e-9 * scale:
        raise ArgumentError("query point is focal; use focal_chart_index")
    return m


def front_index_jump(branch_left: FrontBranch, fp: FocalPointInfo, branch_right: FrontBranch):
    """Index change m(right) - m(left) across a focal point (psi increasing)."""
    if not fp.classified:
        raise ArgumentError("focal point is not classified")
    if fp.n % 2 == 1:
        return 0
    dm = int(np.sign(fp.Jtilde * fp.JnF))
    if branch_right is not None:
        other = 1 if branch_right.J_sign == np.sign(fp.Jtilde) else -1
        if other != dm:
            raise ConsistencyError("index jump rules disagree at a focal point")
    return dm


def focal_chart_index(bundle: RayBundle, fp: FocalPointInfo, max_shift=CHART_SHIFT):
    """Maslov index of the rotated (p'_1, x'_2) chart at a focal point.

    Equal to the Morse index of a regular point (psiF, tF +- delta) whose J
    has the sign of the chart Jacobian J'^(0,2).
    """
    if not fp.classified:
        raise ArgumentError("focal point is not classified")
    sgn = np.sign(fp.rotated_J02())
    if sgn == 0:
        raise ValidityError("rotated chart Jacobian vanishes")
    dt = bundle.dt
    fan = fp.fan
    if fan is not None and fan.T >= fp.tF + (max_shift + 1) * dt * (1 - 1e-9):
        r, i = fan, len(fan.psi) // 2
    else:
        r, i = _ray_crossings(bundle, fp.psiF, fp.tF + (max_shift + 1) * dt), 0
    cross = r.crossings(i)
    for k in range(1, max_shift + 1):
        for tau in (fp.tF + k * dt, fp.tF - k * dt):
            if tau <= 0:
                continue
            s = r.states_at(tau)[i]
            J = _J_on_states(bundle.bathy, s)
            if np.sign(J) == sgn and abs(J) > 0:
                return int(np.sum(cross < tau))
    raise ValidityError("no regular neighbour with matching Jacobian sign")


def initial_chart_indices(bundle: RayBundle, n_check=64):
    """Indices of the four charts covering the initial circle.

    The charts use J10 = C0 cos^2 psi and J02 = C0 sin^2 psi (both
    nonnegative); the index is the Morse index of a nearby regular point
    with J of the same (positive) sign, i.e. a point at small t > 0.
    """
    psi = np.linspace(0, 2 * np.pi, n_check, endpoint=False)
    s = trace_rays(bundle.bathy, psi, 10 * bundle.dt, steps=10).states[-1]
    J = _J_on_states(bundle.bathy, s)
    if np.any(J <= 0):
        raise ConsistencyError("J is not positive at small t")
    return [0, 0, 0, 0]


def segment_front(front: Front, focal: list):
    """Split the front at focal angles into arcs of constant Morse index."""
    psi = front.psi
    J = front.J
    if not focal:
        if np.any(front.morse != front.morse[0]):
            raise ConsistencyError("Morse index varies along a front without focal points")
        return [FrontBranch(psi[0], psi[0] + 2 * np.pi, int(front.morse[0]), int(np.sign(np.nanmedian(J))))]
    order = sorted(range(len(focal)), key=lambda k: focal[k].psiF)
    angles = [np.mod(focal[k].psiF, 2 * np.pi) for k in order]
    branches = []
    for j in range(len(angles)):
        lo = angles[j]
        hi = angles[(j + 1) % len(angles)]
        if hi <= lo:
            hi += 2 * np.pi
        inside = np.mod(psi - lo, 2 * np.pi) < (hi - lo)
        # stay away from the ends where J is tiny
        d = np.minimum(np.mod(psi - lo, 2 * np.pi), np.mod(hi - psi, 2 * np.pi))
        core = inside & (d > 1e-9)
        if not np.any(core):
            # arc narrower than the grid: sample its midpoint via interpolation
            mid = lo + 0.5 * (hi - lo)
            st = front.state_at_psi(np.array([mid]))[0]
            Jm = _J_on_states(front.bathy, st)
            m = None
            branches.append(FrontBranch(lo, hi, m, int(np.sign(Jm)), order[j], order[(j + 1) % len(order)]))
            continue
        ms = front.morse[core]
        if np.any(ms != ms[0]):
            raise ConsistencyError("Morse index not constant on a front arc")
        branches.append(FrontBranch(lo, hi, int(ms[0]), int(np.sign(np.median(J[core]))),
                                    order[j], order[(j + 1) % len(order)]))
    # fill unresolved arcs from the jump rule, then verify every jump
    nb = len(branches)
    for _ in range(nb):
        for j, br in enumerate(branches):
            if br.morse is None:
                prev = branches[j - 1]
                if prev.morse is not None and focal[br.left].classified:
                    br.morse = prev.morse + front_index_jump(prev, focal[br.left], br)
    for j, br in enumerate(branches):
        prev = branches[j - 1]
        fp = focal[br.left]
        if fp.classified and prev.morse is not None and br.morse is not None:
            if br.morse - prev.morse != front_index_jump(prev, fp, br):
                raise ConsistencyError("Morse index jump contradicts the focal-point rule")
    return branches


def maslov_argdet(bundle: RayBundle, i, t, eps=1e-3, samples_per_step=64):
    """Index increment along ray i on (0, t] from the argument of
    det(Xdot - i eps Pdot, Xpsi - i eps Ppsi), with unwrapping on a fine grid.
    """
    k_end = min(int(math.ceil(t / bundle.dt)), bundle.states.shape[0] - 1)
    taus = np.linspace(10 * bundle.dt, t, max(2, k_end * 4))
    ct = bundle.crossings(i)
    extra = [np.linspace(c - 4 * bundle.dt, c + 4 * bundle.dt, samples_per_step) for c in ct if c < t]
    taus = np.unique(np.concatenate([taus] + extra))
    taus = taus[(taus > 0) & (taus <= t)]
    vals = []
    for tau in taus:
        s = bundle.states_at(tau)[i]
        d = state_rhs(bundle.bathy, s[None])[0]
        a = d[2:4] - 1j * eps * d[0:2]
        b = s[6:8] - 1j * eps * s[4:6]
        vals.append(a[0] * b[1] - a[1] * b[0])
    ph = np.unwrap(np.angle(np.array(vals)))
    return float((ph[-1] - ph[0]) / np.pi)
