"""Rays of H = C(x)|p| together with their angle derivatives.

The traced state per launch angle psi is the 8-vector
(P1, P2, X1, X2, Ppsi1, Ppsi2, Xpsi1, Xpsi2).  Pdot and Xdot are always
recomputed from the vector field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from .errors import ArgumentError, SingularityError


def hamilton_rhs(bathy, p, x):
    """Return (xdot, pdot) for H = C(x)|p|."""
    p = np.asarray(p, dtype=float)
    C, dC, _ = bathy.fields(x)
    pn = np.linalg.norm(p, axis=-1)
    if np.any(pn < 1e-12):
        raise SingularityError("momentum vanished")
    xdot = C[..., None] * p / pn[..., None]
    pdot = -pn[..., None] * dC
    return xdot, pdot


def hamiltonian_blocks(bathy, p, x):
    """Second derivatives (H_pp, H_px, H_xx) of H = C(x)|p|."""
    p = np.asarray(p, dtype=float)
    C, dC, d2C = bathy.fields(x)
    pn = np.linalg.norm(p, axis=-1)
    ph = p / pn[..., None]
    Hpp = C[..., None, None] * (np.eye(2) - ph[..., :, None] * ph[..., None, :]) / pn[..., None, None]
    Hpx = ph[..., :, None] * dC[..., None, :]
    Hxx = pn[..., None, None] * d2C
    return Hpp, Hpx, Hxx


def variational_rhs(bathy, p, x, dp, dx):
    """Linearized flow: returns (d xdot, d pdot) for a variation (dp, dx)."""
    p = np.asarray(p, dtype=float)
    if np.any(np.linalg.norm(p, axis=-1) < 1e-12):
        raise SingularityError("momentum vanished")
    Hpp, Hpx, Hxx = hamiltonian_blocks(bathy, p, x)
    dp, dx = np.asarray(dp, float), np.asarray(dx, float)
    mv = lambda A, v: np.einsum("...ij,...j->...i", A, v)
    dxdot = mv(Hpp, dp) + mv(Hpx, dx)
    dpdot = -(mv(np.swapaxes(Hpx, -1, -2), dp) + mv(Hxx, dx))
    return dxdot, dpdot


def state_rhs(bathy, s):
    """Time derivative of the packed 8-component state, shape (..., 8)."""
    C, dC, d2C = bathy.fields(s[..., 2:4], check=False)
    p1, p2 = s[..., 0], s[..., 1]
    q1, q2, y1, y2 = s[..., 4], s[..., 5], s[..., 6], s[..., 7]
    c1, c2 = dC[..., 0], dC[..., 1]
    pn = np.sqrt(p1 * p1 + p2 * p2)
    h1, h2 = p1 / pn, p2 / pn
    phdp = h1 * q1 + h2 * q2
    dcdx = c1 * y1 + c2 * y2
    cp = C / pn
    out = np.empty_like(s)
    out[..., 0] = -pn * c1
    out[..., 1] = -pn * c2
    out[..., 2] = C * h1
    out[..., 3] = C * h2
    out[..., 4] = -(c1 * phdp + pn * (d2C[..., 0, 0] * y1 + d2C[..., 0, 1] * y2))
    out[..., 5] = -(c2 * phdp + pn * (d2C[..., 1, 0] * y1 + d2C[..., 1, 1] * y2))
    out[..., 6] = cp * (q1 - h1 * phdp) + h1 * dcdx
    out[..., 7] = cp * (q2 - h2 * phdp) + h2 * dcdx
    return out


def initial_state(psi):
    psi = np.asarray(psi, dtype=float)
    c, s = np.cos(psi), np.sin(psi)
    z = np.zeros_like(psi)
    return np.stack([c, s, z, z, -s, c, z, z], axis=-1)


def jacobian_J(bathy, s, C0):
    """J = det(Xdot, Xpsi) for packed states."""
    d = state_rhs(bathy, s)
    return d[..., 2] * s[..., 7] - d[..., 3] * s[..., 6]


def hermite(s0, d0, s1, d1, h, tau):
    """Cubic Hermite interpolation at fraction tau in [0, 1] of a step h."""
    tau = np.asarray(tau, dtype=float)[..., None]
    t2, t3 = tau * tau, tau ** 3
    h00 = 2 * t3 - 3 * t2 + 1
    h10 = t3 - 2 * t2 + tau
    h01 = -2 * t3 + 3 * t2
    h11 = t3 - t2
    return h00 * s0 + h10 * h * d0 + h01 * s1 + h11 * h * d1


@dataclass
class RayBundle:
    """Fan of rays traced on a uniform time grid.

    Attributes
    ----------
    psi : (N,) launch angles.
    dt, T : step and final time; ``times[k] = k * dt``.
    states : (K+1, N, 8) packed states, NaN after a ray dies.
    alive : (K+1, N) flags.
    cross_ray, cross_t : ray index and refined time of every sign change of
        J along a ray, sorted by time within each ray.
    """

    bathy: object
    psi: np.ndarray
    dt: float
    T: float
    states: np.ndarray
    alive: np.ndarray
    cross_ray: np.ndarray
    cross_t: np.ndarray
    C0: float
    _cross_by_ray: list = field(default=None, repr=False)

    @property
    def times(self):
        return self.dt * np.arange(self.states.shape[0])

    @property
    def n_psi(self):
        return len(self.psi)

    def crossings(self, i):
        if self._cross_by_ray is None:
            order = np.lexsort((self.cross_t, self.cross_ray))
            r, t = self.cross_ray[order], self.cross_t[order]
            idx = np.searchsorted(r, np.arange(self.n_psi + 1))
            self._cross_by_ray = [t[idx[k]:idx[k + 1]] for k in range(self.n_psi)]
        return self._cross_by_ray[i]

    def morse_counts(self, t):
        """Number of J zeros crossed before time t, for every ray."""
        out = np.zeros(self.n_psi, dtype=int)
        np.add.at(out, self.cross_ray[self.cross_t < t], 1)
        return out

    def states_at(self, t):
        """Hermite-interpolated states of all rays at time t."""
        if not (0 <= t <= self.T * (1 + 1e-12)):
            raise ArgumentError(f"time {t} outside [0, {self.T}]")
        K = self.states.shape[0] - 1
        k = min(int(math.floor(t / self.dt)), K - 1)
        tau = t / self.dt - k
        if abs(tau) < 1e-12:
            return self.states[k].copy()
        if abs(tau - 1) < 1e-12:
            return self.states[k + 1].copy()
        s0, s1 = self.states[k], self.states[k + 1]
        d0, d1 = state_rhs(self.bathy, s0), state_rhs(self.bathy, s1)
        return hermite(s0, d0, s1, d1, self.dt, tau)


def _rk4_step(bathy, s, h):
    k1 = state_rhs(bathy, s)
    k2 = state_rhs(bathy, s + 0.5 * h * k1)
    k3 = state_rhs(bathy, s + 0.5 * h * k2)
    k4 = state_rhs(bathy, s + h * k3)
    return s + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _refine_crossings(bathy, s0, s1, C0, h, t0, tol):
    """Bisection for the zero of J on the Hermite cubic of each step."""
    d0, d1 = state_rhs(bathy, s0), state_rhs(bathy, s1)
    J0 = jacobian_J(bathy, s0, C0)
    lo = np.zeros(len(s0))
    hi = np.ones(len(s0))
    n_iter = int(math.ceil(math.log2(max(h / tol, 2.0)))) + 1
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        Jm = jacobian_J(bathy, hermite(s0, d0, s1, d1, h, mid), C0)
        same = np.sign(Jm) == np.sign(J0)
        lo = np.where(same, mid, lo)
        hi = np.where(same, hi, mid)
    return t0 + h * 0.5 * (lo + hi)


def trace_rays(bathy, psi, T, dt=None, steps=None, keep=True):
    """Trace rays for the given launch angles with fixed-step RK4.

    Either ``dt`` or ``steps`` may be given; the default is T / 4096.  The
    step is adjusted so that an integer number of steps lands exactly on T.
    """
    psi = np.asarray(psi, dtype=float)
    if not T > 0:
        raise ArgumentError("T must be positive")
    if steps is None:
        steps = 4096 if dt is None else max(1, int(round(T / dt)))
    if steps < 1:
        raise ArgumentError("need at least one step")
    h = T / steps
    C0 = float(bathy.fields(np.zeros(2))[0])
    s = initial_state(psi)
    alive = np.ones(len(psi), dtype=bool)
    store = np.full((steps + 1,) + s.shape if keep else (1,) + s.shape, np.nan)
    alive_hist = np.zeros((steps + 1 if keep else 1, len(psi)), dtype=bool)
    store[0], alive_hist[0] = s, alive
    Jprev = np.zeros(len(psi))
    cr_i, cr_t = [], []
    tol = 1e-10 * T
    for k in range(steps):
        s_new = _rk4_step(bathy, s, h)
        ok = bathy.inside(s_new[:, 2:4]) & np.all(np.isfinite(s_new), axis=1)
        died = alive & ~ok
        alive = alive & ok
        s_new[~alive] = np.nan
        J = np.where(alive, jacobian_J(bathy, np.where(alive[:, None], s_new, 0.0), C0), np.nan)
        if k > 0:
            flip = alive & (np.sign(J) != np.sign(Jprev)) & (J != 0)
            if np.any(flip):
                idx = np.nonzero(flip)[0]
                tf = _refine_crossings(bathy, s[idx], s_new[idx], C0, h, k * h, tol)
                cr_i.append(idx)
                cr_t.append(tf)
        Jprev = J
        s = s_new
        if keep:
            store[k + 1], alive_hist[k + 1] = s, alive
        else:
            store[0], alive_hist[0] = s, alive
        if died.any():
            warnings.warn(f"{int(died.sum())} rays left the bathymetry domain at t={(k + 1) * h:.6g}")
    cross_ray = np.concatenate(cr_i) if cr_i else np.zeros(0, dtype=int)
    cross_t = np.concatenate(cr_t) if cr_t else np.zeros(0)
    return RayBundle(bathy, psi, h, steps * h, store, alive_hist, cross_ray, cross_t, C0)


def trace_bundle(bathy, n_psi=512, T=1.0, dt=None, psi0=0.0):
    """Trace a uniform fan of ``n_psi`` rays on [psi0, psi0 + 2 pi)."""
    if n_psi < 16:
        raise ArgumentError("need at least 16 rays")
    if dt is not None and not dt > 0:
        raise ArgumentError("dt must be positive")
    psi = psi0 + 2 * np.pi * np.arange(n_psi) / n_psi
    bundle = trace_rays(bathy, psi, T, dt=dt)
    rep = conservation_report(bundle)
    if rep["hamiltonian"] > 1e-5:
        warnings.warn(f"Hamiltonian drift {rep['hamiltonian']:.2e} exceeds 1e-5; reduce dt")
    return bundle


class Front:
    """Ray states at one time t, indexed by launch angle.

    Derived quantities (Xdot, Pdot, C and the four Jacobians) are computed
    once at construction.  ``spline(name)`` returns a periodic cubic spline
    in psi of a state block.
    """

    def __init__(self, bathy, psi, t, states, morse, alive, C0):
        self.bathy, self.psi, self.t, self.C0 = bathy, np.asarray(psi), t, C0
        self.states = states
        self.morse = morse
        self.alive = alive
        self.P, self.X = states[:, 0:2], states[:, 2:4]
        self.Pp, self.Xp = states[:, 4:6], states[:, 6:8]
        good = np.where(alive[:, None], states, initial_state(self.psi))
        d = state_rhs(bathy, good)
        d[~alive] = np.nan
        self.Pdot, self.Xdot = d[:, 0:2], d[:, 2:4]
        self.C = np.where(alive, bathy.fields(np.where(alive[:, None], self.X, 0.0), check=False)[0], np.nan)
        self._splines = {}

    @property
    def J(self):
        return det2(self.Xdot, self.Xp)

    @property
    def Jtilde(self):
        return det2(self.Xdot, self.Pp)

    def jacobians(self):
        return jacobians_packed(self.Pdot, self.Xdot, self.Pp, self.Xp)

    def spline(self, name):
        """Periodic interpolant in psi of 'P', 'X', 'Pp' or 'Xp'.

        P and X use cubic Hermite interpolation with their exact psi
        derivatives Pp and Xp; Pp and Xp use periodic cubic splines.
        """
        if name not in self._splines:
            if not np.all(self.alive):
                raise ArgumentError("front has dead rays; periodic interpolation unavailable")
            vals = getattr(self, name)
            psi = self.psi
            xs = np.concatenate([psi, [psi[0] + 2 * np.pi]])
            ys = np.concatenate([vals, vals[:1]], axis=0)
            if name in ("P", "X"):
                der = getattr(self, name + "p")
                self._splines[name] = CubicHermiteSpline(xs, ys, np.concatenate([der, der[:1]]), axis=0)
            else:
                self._splines[name] = CubicSpline(xs, ys, bc_type="periodic", axis=0)
        return self._splines[name]

    def eval(self, name, psi, nu=0):
        sp = self.spline(name)
        p0 = self.psi[0]
        return sp(p0 + np.mod(np.asarray(psi, float) - p0, 2 * np.pi), nu)

    def state_at_psi(self, psi):
        """Interpolated packed state(s) at arbitrary angles."""
        return np.concatenate([self.eval(k, psi) for k in ("P", "X", "Pp", "Xp")], axis=-1)


def det2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def jacobians_packed(Pdot, Xdot, Pp, Xp):
    """(J, Jtilde, J10, J02) from the columns of the variational matrices."""
    J = det2(Xdot, Xp)
    Jt = det2(Xdot, Pp)
    J10 = Xdot[..., 0] * Pp[..., 1] - Xp[..., 0] * Pdot[..., 1]
    J02 = Pdot[..., 0] * Xp[..., 1] - Pp[..., 0] * Xdot[..., 1]
    return J, Jt, J10, J02


def front_at(bundle: RayBundle, t: float) -> Front:
    if not (0 < t <= bundle.T * (1 + 1e-12)):
        raise ArgumentError(f"front time {t} outside (0, {bundle.T}]")
    s = bundle.states_at(t)
    k = min(int(math.ceil(t / bundle.dt - 1e-9)), bundle.states.shape[0] - 1)
    alive = bundle.alive[k] & np.all(np.isfinite(s), axis=1)
    return Front(bundle.bathy, bundle.psi, t, s, bundle.morse_counts(t), alive, bundle.C0)


def conservation_report(bundle: RayBundle, skip_initial=True):
    """Largest violations of the invariants of the ray system.

    Returns a dict with keys ``hamiltonian`` (max ||P|C/C0 - 1|),
    ``orthogonality`` (max |<P, Xpsi>| / (|P| max_psi |Xpsi|)),
    ``lagrangian`` (asymmetry of B^T C, normalized per time level) and, for
    radial banks, ``angular_momentum`` (max drift of (X - c) x P).
    """
    bathy = bundle.bathy
    S = bundle.states
    ok = bundle.alive
    P, X, Pp, Xp = S[..., 0:2], S[..., 2:4], S[..., 4:6], S[..., 6:8]
    safe = np.where(ok[..., None], S, initial_state(bundle.psi)[None])
    C = bathy.fields(safe[..., 2:4], check=False)[0]
    pn = np.linalg.norm(P, axis=-1)
    ham = np.nanmax(np.where(ok, np.abs(pn * C / bundle.C0 - 1), 0.0))
    d = state_rhs(bathy, safe)
    Pdot, Xdot = d[..., 0:2], d[..., 2:4]
    xpn = np.linalg.norm(Xp, axis=-1)
    scale = np.nanmax(np.where(ok, xpn, 0.0), axis=1)
    first = 1 if skip_initial else 0
    orth = np.abs(np.sum(P * Xp, axis=-1)) / (pn * np.maximum(scale, 1e-300)[:, None])
    orth = np.nanmax(np.where(ok, orth, 0.0)[first:])
    asym = np.abs(np.sum(Pdot * Xp, axis=-1) - np.sum(Pp * Xdot, axis=-1))
    norm = (np.linalg.norm(Pdot, axis=-1) * scale[:, None]
            + np.linalg.norm(Pp, axis=-1) * np.linalg.norm(Xdot, axis=-1))
    lag = np.nanmax(np.where(ok, asym / np.maximum(norm, 1e-300), 0.0)[first:])
    rep = {"hamiltonian": float(ham), "orthogonality": float(orth), "lagrangian": float(lag)}
    if bathy.kind == "radial_bank":
        c = np.asarray(bathy.params["center"])
        r = X - c
        pphi = r[..., 0] * P[..., 1] - r[..., 1] * P[..., 0]
        drift = np.abs(pphi - pphi[0][None])
        rep["angular_momentum"] = float(np.nanmax(np.where(ok, drift, 0.0)))
    return rep
