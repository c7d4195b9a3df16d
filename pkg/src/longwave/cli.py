"""Command line front-end: ``longwave COMMAND CONFIG [options]``.

Commands
--------
trace            ray samples, focal crossings and conservation diagnostics
front            front samples at each evaluation time
focal            focal points, branches and the MFRONT1 scene cache
field            asymptotic elevation on the evaluation grid
oracle-fd        finite-difference elevation on the evaluation grid
oracle-spectral  constant-depth Fourier elevation on the evaluation grid
compare          asymptotic vs finite differences, front-band error metrics
profile          asymptotic elevation along a cut through the front
threshold        distance l^3 / H^2 beyond which dispersion matters
plot             plot-ready CSV from earlier outputs (``emit_plot_data``)

Every command except ``plot`` writes ``run.meta`` into the output directory.
Exit codes: 0 ok, 2 configuration error, 3 numeric error, 4 validity error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import platform
import sys
import time
import traceback
import warnings

import numpy as np
import scipy

from . import __version__
from .config import ScenarioConfig, format_float, load_config
from .errors import ArgumentError, ConfigError, LongwaveError
from .field import eta_total, prepare_scene
from .front_geometry import critical_time
from .grid import Grid
from .oracles import dispersion_threshold, fd_eta, front_band_error, spectral_eta
from .raytrace import conservation_report, front_at, trace_bundle

COMMANDS = ("trace", "front", "focal", "field", "oracle-fd", "oracle-spectral", "compare",
            "profile", "threshold")
PLOT_KINDS = ("front_polyline", "profile_cut", "field_heatmap")

# documented limits for the conservation diagnostics reported in run.meta
CONSERVATION_LIMITS = {"hamiltonian": 1e-8, "orthogonality": 1e-7, "lagrangian": 1e-7,
                       "angular_momentum": 1e-8}

FIELD_COLUMNS = ("x1", "x2", "eta", "n_branches", "n_focal_contribs", "inside_band")


# -- small helpers --------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [row for row in r if row]
    return header, rows


class _Scale:
    """Output rescaling for ``--dimensional`` (lengths by L, times by L / C0)."""

    def __init__(self, cfg: ScenarioConfig, on: bool):
        L = cfg.get("scale.L", 1.0)
        C0 = math.sqrt(cfg["g"] * cfg["bathy.H0"])
        self.length = L if on else 1.0
        self.time = L / C0 if on else 1.0

    def x(self, v):
        return float(v) * self.length

    def t(self, v):
        return float(v) * self.time


def _tag(i):
    return f"t{i}"


class Run:
    """Output directory plus the metadata collected for ``run.meta``."""

    def __init__(self, cfg: ScenarioConfig | None, command, out_dir, dimensional=False):
        self.cfg, self.command, self.out = cfg, command, out_dir
        self.meta = {}
        self.timings = {}
        self.files = []
        self.scale = _Scale(cfg, dimensional) if cfg is not None else None
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        p = os.path.join(self.out, name)
        self.files.append(name)
        return p

    def timed(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        out = fn(*a, **kw)
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0
        return out

    def write_meta(self, status, error=None, code=0):
        lines = ["# longwave run metadata", f"command = {self.command}", f"status = {status}",
                 f"error_code = {code}"]
        if error is not None:
            lines.append(f"error = {type(error).__name__}: {str(error).splitlines()[0] if str(error) else ''}")
        lines += [f"version.longwave = {__version__}", f"version.python = {platform.python_version()}",
                  f"version.numpy = {np.__version__}", f"version.scipy = {scipy.__version__}"]
        for k in sorted(self.meta):
            lines.append(f"{k} = {self.meta[k]}")
        for k in sorted(self.timings):
            lines.append(f"timing.{k} = {self.timings[k]:.3f}")
        lines.append("files = " + ", ".join(self.files))
        if self.cfg is not None:
            lines.append("[config]")
            lines.append(self.cfg.echo())
        with open(os.path.join(self.out, "run.meta"), "w") as fh:
            fh.write("\n".join(lines) + "\n")


def _record_conservation(run: Run, bundle):
    rep = conservation_report(bundle)
    ok = True
    for k, v in sorted(rep.items()):
        run.meta[f"conservation.{k}"] = format_float(v)
        if v > CONSERVATION_LIMITS.get(k, math.inf):
            ok = False
    run.meta["conservation.ok"] = str(ok).lower()
    if not ok:
        warnings.warn("a conservation diagnostic exceeds its documented limit; see run.meta")
    return rep


def _bundle(run: Run):
    cfg = run.cfg
    bathy = cfg.bathymetry()
    bundle = run.timed("trace", trace_bundle, bathy, cfg["n_psi"], cfg["T"], cfg["dt"])
    _record_conservation(run, bundle)
    run.meta["critical_time"] = format_float(critical_time(bundle))
    return bathy, bundle


def _require_grid(cfg):
    if not cfg.has_grid:
        raise ConfigError("this command needs grid.x0, grid.y0, grid.x1, grid.y1, grid.nx, grid.ny")
    return cfg.grid()


def _scenes(run: Run, bathy, bundle):
    cfg = run.cfg
    src = cfg.source()
    for i, t in enumerate(cfg.times):
        yield i, t, run.timed("scene", prepare_scene, bathy, src, cfg.mu, t, bundle=bundle)


def _write_field(run: Run, name, grid: Grid, eta, info=None, source=None):
    pts = grid.points().reshape(-1, 2)
    eta = np.asarray(eta).reshape(-1)
    header = list(FIELD_COLUMNS) + (["source"] if source else [])
    if info is None:
        nb = nf = np.full(len(pts), -1)
        band = np.full(len(pts), -1)
    else:
        nb = info["n_branches"].reshape(-1)
        nf = info["n_focal"].reshape(-1)
        band = info["inside_band"].reshape(-1).astype(int)
    sc = run.scale
    rows = []
    for k in range(len(pts)):
        row = [sc.x(pts[k, 0]), sc.x(pts[k, 1]), float(eta[k]), int(nb[k]), int(nf[k]), int(band[k])]
        if source:
            row.append(source)
        rows.append(row)
    _write_csv(run.path(name), header, rows)


# -- scene cache ----------------------------------------------------------------

def write_scene_cache(path, scene):
    """Text serialization of a prepared scene's front, focal table and branches."""
    fr = scene.front
    with open(path, "w") as fh:
        fh.write("MFRONT1\n")
        fh.write(f"bathy {scene.bathy.describe()}\n")
        fh.write(" ".join(["scalars"] + [f"{k}={format_float(v)}" for k, v in
                                          (("mu", scene.mu), ("t", scene.t), ("C0", scene.C0),
                                           ("H0", scene.H0), ("band", scene.band),
                                           ("dt", scene.bundle.dt), ("T", scene.bundle.T))]) + "\n")
        fh.write(f"[front] {len(fr.psi)}\n")
        fh.write("psi P1 P2 X1 X2 Pp1 Pp2 Xp1 Xp2 morse alive\n")
        for i in range(len(fr.psi)):
            vals = [fr.psi[i], *fr.states[i]]
            fh.write(" ".join(format_float(v) for v in vals) + f" {int(fr.morse[i])} {int(fr.alive[i])}\n")
        fh.write(f"[focal] {len(scene.focal)}\n")
        fh.write("psiF tF XF1 XF2 PF1 PF2 CF Jtilde n JnF sigma mbold residual\n")
        for fp in scene.focal:
            vals = [fp.psiF, fp.tF, *fp.XF, *fp.PF, fp.CF, fp.Jtilde]
            tail = [fp.n, fp.JnF, fp.sigma, fp.mbold, fp.residual]
            fh.write(" ".join(format_float(v) for v in vals) + " "
                     + " ".join("none" if v is None else (str(v) if isinstance(v, int) else format_float(v))
                                for v in tail) + "\n")
        fh.write(f"[branches] {len(scene.branches)}\n")
        fh.write("lo hi morse J_sign left right\n")
        for b in scene.branches:
            fh.write(f"{format_float(b.lo)} {format_float(b.hi)} {b.morse} {b.J_sign} "
                     f"{'none' if b.left is None else b.left} {'none' if b.right is None else b.right}\n")
        fh.write("end\n")


def read_scene_cache(path):
    """Parse an MFRONT1 file into plain arrays and dicts."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "MFRONT1":
        raise ArgumentError(f"{path}: not an MFRONT1 scene cache")
    out = {"bathy": lines[1][len("bathy "):]}
    out.update({k: float(v) for k, v in (item.split("=") for item in lines[2].split()[1:])})
    i = 3

    def table(i):
        name, n = lines[i].split()
        cols = lines[i + 1].split()
        rows = [lines[i + 2 + k].split() for k in range(int(n))]
        return name.strip("[]"), cols, rows, i + 2 + int(n)

    def num(v):
        if v == "none":
            return None
        return int(v) if v.lstrip("-").isdigit() else float(v)

    while lines[i] != "end":
        name, cols, rows, i = table(i)
        out[name] = [{c: num(v) for c, v in zip(cols, row)} for row in rows]
    return out


# -- plot data ------------------------------------------------------------------

def count_self_intersections(points, closed=True):
    """Number of proper crossings between non-adjacent segments of a polyline."""
    p = np.asarray(points, float)
    if closed:
        p = np.vstack([p, p[:1]])
    a, b = p[:-1], p[1:]
    n = len(a)
    count = 0
    for i in range(n):
        d = b[i] - a[i]
        j = np.arange(i + 2, n)
        if closed and i == 0:
            j = j[j != n - 1]
        if len(j) == 0:
            continue
        e = b[j] - a[j]
        den = d[0] * e[:, 1] - d[1] * e[:, 0]
        w = a[j] - a[i]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (w[:, 0] * e[:, 1] - w[:, 1] * e[:, 0]) / den
            u = (w[:, 0] * d[1] - w[:, 1] * d[0]) / den
        count += int(np.sum((den != 0) & (s > 0) & (s < 1) & (u > 0) & (u < 1)))
    return count


def _read_field(path):
    header, rows = _read_csv(path)
    if header[:3] != ["x1", "x2", "eta"]:
        raise ArgumentError(f"{path}: not a field CSV")
    arr = np.array([[float(r[0]), float(r[1]), float(r[2])] for r in rows])
    xs, ys = np.unique(arr[:, 0]), np.unique(arr[:, 1])
    if len(xs) * len(ys) != len(arr):
        raise ArgumentError(f"{path}: samples do not form a regular grid")
    return xs, ys, arr[:, 2].reshape(len(ys), len(xs))


def emit_plot_data(files, kind, out_path, angle=0.0, n=401):
    """Plot-ready CSV from field or front CSV files.

    ``front_polyline`` takes one front CSV and returns the number of
    self-intersections; ``profile_cut`` samples fields along the line
    through the origin at ``angle``; ``field_heatmap`` lists every grid
    node.  Multiple field files must share a grid.
    """
    if kind not in PLOT_KINDS:
        raise ArgumentError(f"kind must be one of {', '.join(PLOT_KINDS)}")
    files = list(files)
    if not files:
        raise ArgumentError("no input files")
    for f in files:
        if not os.path.exists(f):
            raise ArgumentError(f"input file {f} does not exist")
    if kind == "front_polyline":
        header, rows = _read_csv(files[0])
        ix = [header.index(c) for c in ("psi", "x1", "x2")]
        pts = np.array([[float(r[k]) for k in ix] for r in rows])
        _write_csv(out_path, ["order", "psi", "x1", "x2"],
                   [[k, pts[k, 0], pts[k, 1], pts[k, 2]] for k in range(len(pts))])
        return {"rows": len(pts), "self_intersections": count_self_intersections(pts[:, 1:])}
    grids = [_read_field(f) for f in files]
    xs, ys = grids[0][0], grids[0][1]
    for gx, gy, _ in grids[1:]:
        if gx.shape != xs.shape or gy.shape != ys.shape or not (np.allclose(gx, xs) and np.allclose(gy, ys)):
            raise ArgumentError("input fields do not share a grid")
    names = [f"eta_{k}" for k in range(len(files))]
    if kind == "field_heatmap":
        rows = []
        for iy, y in enumerate(ys):
            for ix, x in enumerate(xs):
                rows.append([ix, iy, float(x), float(y)] + [float(g[2][iy, ix]) for g in grids])
        _write_csv(out_path, ["ix", "iy", "x1", "x2"] + names, rows)
        return {"rows": len(rows)}
    from scipy.interpolate import RegularGridInterpolator
    d = np.array([math.cos(angle), math.sin(angle)])
    # clip the line s*d to the grid rectangle
    lo, hi = -np.inf, np.inf
    for c, (a0, a1) in zip(d, ((xs[0], xs[-1]), (ys[0], ys[-1]))):
        if abs(c) < 1e-15:
            if not a0 <= 0 <= a1:
                raise ArgumentError("the cut line misses the grid")
            continue
        s0, s1 = sorted((a0 / c, a1 / c))
        lo, hi = max(lo, s0), min(hi, s1)
    if not hi > lo:
        raise ArgumentError("the cut line misses the grid")
    s = np.linspace(lo, hi, n)
    pts = np.clip(s[:, None] * d, [xs[0], ys[0]], [xs[-1], ys[-1]])
    vals = [RegularGridInterpolator((ys, xs), g[2])(pts[:, ::-1]) for g in grids]
    rows = [[float(s[k]), float(pts[k, 0]), float(pts[k, 1])] + [float(v[k]) for v in vals]
            for k in range(len(s))]
    _write_csv(out_path, ["s", "x1", "x2"] + names, rows)
    return {"rows": len(rows)}


# -- commands -------------------------------------------------------------------

def _cmd_trace(run: Run):
    cfg = run.cfg
    bathy, bundle = _bundle(run)
    every = cfg["trace.every"]
    ks = list(range(0, bundle.states.shape[0], every))
    if ks[-1] != bundle.states.shape[0] - 1:
        ks.append(bundle.states.shape[0] - 1)
    sc = run.scale
    rows = []
    for i, psi in enumerate(bundle.psi):
        cr = bundle.crossings(i)
        for k in ks:
            s = bundle.states[k, i]
            t = k * bundle.dt
            rows.append([i, float(psi), sc.t(t), sc.x(s[2]), sc.x(s[3]), float(s[0]), float(s[1]),
                         int(np.sum(cr < t))])
    _write_csv(run.path("rays.csv"), ["ray", "psi", "t", "x1", "x2", "p1", "p2", "morse"], rows)
    _write_csv(run.path("crossings.csv"), ["ray", "psi", "t"],
               [[int(i), float(bundle.psi[i]), sc.t(t)] for i, t in sorted(zip(bundle.cross_ray, bundle.cross_t))])
    run.meta["rays"] = len(bundle.psi)
    run.meta["crossings"] = len(bundle.cross_t)


def _cmd_front(run: Run):
    cfg = run.cfg
    bathy, bundle = _bundle(run)
    sc = run.scale
    for i, t in enumerate(cfg.times):
        fr = front_at(bundle, t)
        J, Jt, _, _ = fr.jacobians()
        rows = [[float(fr.psi[k]), sc.x(fr.X[k, 0]), sc.x(fr.X[k, 1]), float(fr.P[k, 0]), float(fr.P[k, 1]),
                 float(J[k]), float(Jt[k]), int(fr.morse[k])] for k in range(len(fr.psi))]
        _write_csv(run.path(f"front_{_tag(i)}.csv"), ["psi", "x1", "x2", "p1", "p2", "J", "Jtilde", "morse"],
                   rows)
        run.meta[f"front.{_tag(i)}.time"] = format_float(t)
        if bathy.kind == "constant":
            err = float(np.max(np.abs(np.linalg.norm(fr.X, axis=1) - bundle.C0 * t)))
            run.meta[f"front.{_tag(i)}.radius_error"] = format_float(err)


def _cmd_focal(run: Run):
    bathy, bundle = _bundle(run)
    sc = run.scale
    rows, brows = [], []
    for i, t, scene in _scenes(run, bathy, bundle):
        for k, fp in enumerate(scene.focal):
            rows.append([_tag(i), sc.t(t), k, float(fp.psiF), sc.x(fp.XF[0]), sc.x(fp.XF[1]), fp.n,
                         float(fp.Jtilde), float(fp.JnF), fp.sigma, fp.mbold, float(fp.residual),
                         float(scene.lam(k))])
        for j, b in enumerate(scene.branches):
            brows.append([_tag(i), sc.t(t), j, float(b.lo), float(b.hi), b.morse, b.J_sign,
                          "" if b.left is None else b.left, "" if b.right is None else b.right])
        write_scene_cache(run.path(f"scene_{_tag(i)}.mfront"), scene)
        run.meta[f"focal.{_tag(i)}.count"] = len(scene.focal)
    _write_csv(run.path("focal.csv"), ["tag", "t", "index", "psiF", "x1", "x2", "n", "Jtilde", "JnF", "sigma",
                                       "mbold", "residual", "focal_scale"], rows)
    _write_csv(run.path("branches.csv"), ["tag", "t", "index", "psi_lo", "psi_hi", "morse", "J_sign",
                                          "left_focal", "right_focal"], brows)


def _asymptotic_fields(run: Run, grid):
    cfg = run.cfg
    bathy, bundle = _bundle(run)
    pts = grid.points()
    for i, t, scene in _scenes(run, bathy, bundle):
        eta, info = run.timed("field", eta_total, scene, pts, focal=cfg["field.focal"], return_info=True)
        yield i, t, scene, eta, info


def _cmd_field(run: Run):
    grid = _require_grid(run.cfg)
    for i, t, scene, eta, info in _asymptotic_fields(run, grid):
        _write_field(run, f"field_{_tag(i)}.csv", grid, eta, info)
        run.meta[f"field.{_tag(i)}.band_points"] = int(np.sum(info["inside_band"]))


def _fd_on_grid(run: Run, grid, t):
    cfg = run.cfg
    r = cfg["oracle.refine"]
    fine = Grid(grid.x0, grid.y0, grid.dx / r, grid.dy / r, (grid.nx - 1) * r + 1, (grid.ny - 1) * r + 1)
    u = run.timed("fd", fd_eta, cfg.bathymetry(), cfg.source(), cfg.mu, t, fine, cfl=cfg["oracle.cfl"])
    run.meta.setdefault("fd.energy_drift", format_float(getattr(u, "energy_drift", float("nan"))))
    return np.asarray(u)[::r, ::r]


def _cmd_oracle_fd(run: Run):
    grid = _require_grid(run.cfg)
    for i, t in enumerate(run.cfg.times):
        _write_field(run, f"fd_{_tag(i)}.csv", grid, _fd_on_grid(run, grid, t), source="fd")


def _cmd_oracle_spectral(run: Run):
    cfg = run.cfg
    grid = _require_grid(cfg)
    bathy = cfg.bathymetry()
    if bathy.kind != "constant":
        raise ArgumentError("the spectral oracle needs constant bathymetry")
    disp = cfg["oracle.dispersive"]
    tag = "spectral_disp" if disp else "spectral_nondisp"
    for i, t in enumerate(cfg.times):
        eta = run.timed("spectral", spectral_eta, cfg.source(), cfg["bathy.H0"], cfg["g"], t, grid, cfg.mu,
                        dispersive=disp)
        _write_field(run, f"{tag}_{_tag(i)}.csv", grid, eta, source=tag)


def _cmd_compare(run: Run):
    cfg = run.cfg
    grid = _require_grid(cfg)
    rows = []
    for i, t, scene, eta, info in _asymptotic_fields(run, grid):
        ref = _fd_on_grid(run, grid, t)
        width = cfg.get("oracle.band", scene.band)
        m = front_band_error(eta, ref, grid, scene.front.X[scene.front.alive], width)
        _write_field(run, f"field_{_tag(i)}.csv", grid, eta, info, source="asymptotic")
        _write_field(run, f"fd_{_tag(i)}.csv", grid, ref, source="fd")
        rows.append([_tag(i), run.scale.t(t), m["linf_rel"], m["l2_rel"], m["peak_ratio"],
                     run.scale.x(m["peak_shift"]), float(width)])
    _write_csv(run.path("metrics.csv"), ["tag", "t", "linf_rel", "l2_rel", "peak_ratio", "peak_shift", "band"],
               rows)


def _front_crossing(front, d):
    """Largest s with s*d on the front polyline (None when the line misses)."""
    X = front.X[front.alive]
    a, b = X, np.roll(X, -1, axis=0)
    ca = a[:, 0] * d[1] - a[:, 1] * d[0]
    cb = b[:, 0] * d[1] - b[:, 1] * d[0]
    hit = np.nonzero(np.sign(ca) != np.sign(cb))[0]
    best = None
    for k in hit:
        lam = ca[k] / (ca[k] - cb[k])
        p = a[k] + lam * (b[k] - a[k])
        s = float(p @ d)
        if s > 0 and (best is None or s > best):
            best = s
    return best


def _cmd_profile(run: Run):
    cfg = run.cfg
    bathy, bundle = _bundle(run)
    th = cfg["profile.angle"]
    d = np.array([math.cos(th), math.sin(th)])
    sc = run.scale
    for i, t, scene in _scenes(run, bathy, bundle):
        s0 = _front_crossing(scene.front, d)
        if s0 is None:
            raise ArgumentError(f"the profile line at angle {th} misses the front at t={t}")
        hw = cfg.get("profile.halfwidth", scene.band)
        s = s0 + np.linspace(-hw, hw, cfg["profile.n"])
        pts = s[:, None] * d
        eta, info = run.timed("field", eta_total, scene, pts, focal=cfg["field.focal"], return_info=True)
        rows = [[sc.x(s[k]), sc.x(pts[k, 0]), sc.x(pts[k, 1]), float(eta[k]), int(info["n_branches"][k]),
                 int(info["n_focal"][k])] for k in range(len(s))]
        _write_csv(run.path(f"profile_{_tag(i)}.csv"), ["s", "x1", "x2", "eta", "n_branches", "n_focal_contribs"],
                   rows)
        run.meta[f"profile.{_tag(i)}.front_distance"] = format_float(sc.x(s0))


def _cmd_threshold(run: Run, H=None, l=None):
    cfg = run.cfg
    if H is None and cfg is not None:
        H = cfg.get("threshold.H")
    if l is None and cfg is not None:
        l = cfg.get("threshold.l")
    if H is None or l is None:
        raise ConfigError("threshold needs H and l (threshold.H / threshold.l or --H / --l)")
    val = dispersion_threshold(H, l)
    run.meta["threshold.H"] = format_float(H)
    run.meta["threshold.l"] = format_float(l)
    run.meta["threshold.value"] = format_float(val)
    _write_csv(run.path("threshold.csv"), ["H", "l", "threshold"], [[float(H), float(l), float(val)]])
    print(f"{val:.10g} km")
    return val


HANDLERS = {"trace": _cmd_trace, "front": _cmd_front, "focal": _cmd_focal, "field": _cmd_field,
            "oracle-fd": _cmd_oracle_fd, "oracle-spectral": _cmd_oracle_spectral,
            "compare": _cmd_compare, "profile": _cmd_profile}


def run_scenario(cfg: ScenarioConfig | None, command, out_dir=None, dimensional=False, **kw):
    """Execute one pipeline stage and write its CSVs plus ``run.meta``.

    Returns the :class:`Run` record.  Errors are recorded in ``run.meta``
    (with their exit code) and re-raised.
    """
    if command not in COMMANDS:
        raise ArgumentError(f"unknown command {command!r}")
    if out_dir is None:
        out_dir = cfg.get("output.dir", "out") if cfg is not None else "out"
    if cfg is None and command != "threshold":
        raise ConfigError(f"command {command} needs a configuration file")
    run = Run(cfg, command, out_dir, dimensional)
    t0 = time.perf_counter()
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if command == "threshold":
                _cmd_threshold(run, **kw)
            else:
                HANDLERS[command](run)
        for k, w in enumerate(caught):
            run.meta[f"warning.{k}"] = str(w.message).replace("\n", " ")
    except LongwaveError as exc:
        run.timings["total"] = time.perf_counter() - t0
        run.write_meta("error", exc, exc.exit_code)
        raise
    except Exception as exc:
        run.timings["total"] = time.perf_counter() - t0
        run.write_meta("error", exc, 1)
        raise
    run.timings["total"] = time.perf_counter() - t0
    run.write_meta("ok")
    return run


def _limit_threads(n):
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(n)


def build_parser():
    ap = argparse.ArgumentParser(prog="longwave", description="Asymptotic long-wave fields over variable bathymetry.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?" if name == "threshold" else None)
        p.add_argument("--out", help="output directory (default: output.dir from the config)")
        p.add_argument("--dimensional", action="store_true",
                       help="rescale lengths by scale.L and times by scale.L / sqrt(g H0)")
        p.add_argument("--threads", type=int, default=None, help="cap on worker threads")
        if name == "threshold":
            p.add_argument("--H", type=float, default=None, help="depth (km)")
            p.add_argument("--l", type=float, default=None, help="source size (km)")
    p = sub.add_parser("plot")
    p.add_argument("kind", choices=PLOT_KINDS)
    p.add_argument("files", nargs="+")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--n", type=int, default=401)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "plot":
            info = emit_plot_data(args.files, args.kind, args.out, angle=args.angle, n=args.n)
            print(" ".join(f"{k}={v}" for k, v in info.items()))
            return 0
        if args.threads is not None:
            _limit_threads(args.threads)
        cfg = load_config(args.config) if args.config else None
        kw = {}
        if args.command == "threshold":
            kw = {"H": args.H, "l": args.l}
        run = run_scenario(cfg, args.command, args.out, args.dimensional, **kw)
        if args.command != "threshold":
            print(f"{args.command}: wrote {', '.join(run.files)} to {run.out}")
        return 0
    except LongwaveError as exc:
        print(f"longwave: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
