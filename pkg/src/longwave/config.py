"""Scenario configuration: a flat ``key = value`` text format.

Keys are dotted (``bathy.kind``, ``source.b1``, ``grid.nx`` ...).  Blank
lines and everything after ``#`` are ignored.  List values are comma
separated.  See the README for the full key table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


from .bathymetry import Bathymetry
from .errors import ConfigError, LongwaveError
from .grid import Grid
from .source import SourceModel

# key -> (type, default).  A default of None means "no default".
SCHEMA = {
    "mu": (float, None),
    "g": (float, 9.81),
    "n_psi": (int, 512),
    "dt": (float, None),
    "T": (float, None),
    "times": ("floats", None),
    "trace.every": (int, 64),
    "bathy.kind": (str, None),
    "bathy.H0": (float, 1.0),
    "bathy.eps": (float, 0.0),
    "bathy.angle": (float, 0.0),
    "bathy.amplitude": (float, 0.5),
    "bathy.width": (float, 1.0),
    "bathy.center": ("floats", (0.0, 0.0)),
    "bathy.file": (str, None),
    "source.kind": (str, "gauss_cosine"),
    "source.amplitude": (float, 1.0),
    "source.a1": (float, 0.0),
    "source.a2": (float, 0.0),
    "source.b1": (float, 0.5),
    "source.b2": (float, 0.5),
    "source.theta": (float, 0.0),
    "source.chi": (float, 0.0),
    "source.file": (str, None),
    "source.table_nrho": (int, 256),
    "source.table_npsi": (int, 128),
    "grid.x0": (float, None),
    "grid.y0": (float, None),
    "grid.x1": (float, None),
    "grid.y1": (float, None),
    "grid.nx": (int, None),
    "grid.ny": (int, None),
    "field.focal": (str, "model"),
    "oracle.cfl": (float, 0.7),
    "oracle.refine": (int, 1),
    "oracle.dispersive": (bool, False),
    "oracle.band": (float, None),
    "profile.angle": (float, 0.0),
    "profile.n": (int, 401),
    "profile.halfwidth": (float, None),
    "threshold.H": (float, None),
    "threshold.l": (float, None),
    "scale.L": (float, 1.0),
    "output.dir": (str, "out"),
}

BATHY_KINDS = ("constant", "linear_slope", "radial_bank", "gridded")
SOURCE_KINDS = ("gauss_cosine", "custom_grid")
FOCAL_MODES = ("model", "chart")


def _convert(kind, text):
    if kind == "floats":
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ValueError("empty list")
        return tuple(float(p) for p in parts)
    if kind is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        v = float(text)
        if v != int(v):
            raise ValueError(f"not an integer: {text!r}")
        return int(v)
    return kind(text)


@dataclass
class ScenarioConfig:
    """Validated scenario.  ``values`` holds every schema key after defaults."""

    values: dict
    lines: dict = field(default_factory=dict)
    path: str | None = None

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        v = self.values.get(key)
        return default if v is None else v

    @property
    def mu(self):
        return self.values["mu"]

    @property
    def times(self):
        return tuple(self.values["times"])

    def bathymetry(self) -> Bathymetry:
        v, g = self.values, self.values["g"]
        kind = v["bathy.kind"]
        if kind == "constant":
            return Bathymetry.constant(v["bathy.H0"], g=g)
        if kind == "linear_slope":
            return Bathymetry.linear_slope(v["bathy.H0"], v["bathy.eps"], v["bathy.angle"], g=g)
        if kind == "radial_bank":
            return Bathymetry.radial_bank(v["bathy.H0"], v["bathy.amplitude"], v["bathy.width"],
                                          v["bathy.center"], g=g)
        return Bathymetry.from_file(v["bathy.file"], g=g)

    def source(self) -> SourceModel:
        v = self.values
        if v["source.kind"] == "gauss_cosine":
            return SourceModel.gauss_cosine(v["source.amplitude"], v["source.a1"], v["source.a2"],
                                            v["source.b1"], v["source.b2"], v["source.theta"],
                                            v["source.chi"])
        return SourceModel.from_file(v["source.file"],
                                     table_shape=(v["source.table_nrho"], v["source.table_npsi"]))

    def grid(self) -> Grid:
        v = self.values
        return Grid.from_bounds(v["grid.x0"], v["grid.y0"], v["grid.x1"], v["grid.y1"],
                                v["grid.nx"], v["grid.ny"])

    @property
    def has_grid(self):
        return all(self.values[f"grid.{k}"] is not None for k in ("x0", "y0", "x1", "y1", "nx", "ny"))

    def echo(self):
        """Canonical text of the effective configuration."""
        out = []
        for k in sorted(self.values):
            v = self.values[k]
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ", ".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(f"{k} = {v}")
        return "\n".join(out)


def parse_config(text, path=None) -> ScenarioConfig:
    values, lines = {}, {}
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", no)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", no)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", no)
        try:
            values[key] = _convert(SCHEMA[key][0], val)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {exc}", no) from None
        lines[key] = no
    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)
    cfg = ScenarioConfig(values, lines, path)
    _validate(cfg)
    return cfg


def load_config(path) -> ScenarioConfig:
    """Read, default-fill and validate a scenario file."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))


def _validate(cfg: ScenarioConfig):
    v, ln = cfg.values, cfg.lines

    def fail(key, msg):
        raise ConfigError(f"{key}: {msg}", ln.get(key))

    for key in ("mu", "T", "bathy.kind"):
        if v[key] is None:
            fail(key, "required key missing")
    if not (0 < v["mu"] < 0.5):
        fail("mu", f"must lie in (0, 0.5), got {v['mu']}")
    if not v["g"] > 0:
        fail("g", "must be positive")
    if not v["T"] > 0:
        fail("T", "must be positive")
    if v["n_psi"] < 16:
        fail("n_psi", "need at least 16 rays")
    if v["dt"] is None:
        v["dt"] = v["T"] / 4096
    elif not v["dt"] > 0:
        fail("dt", "must be positive")
    if v["times"] is None:
        v["times"] = (v["T"],)
    if any(not (0 < t <= v["T"] * (1 + 1e-12)) for t in v["times"]):
        fail("times", "evaluation times must lie in (0, T]")
    if v["trace.every"] < 1:
        fail("trace.every", "must be positive")
    if v["bathy.kind"] not in BATHY_KINDS:
        fail("bathy.kind", f"must be one of {', '.join(BATHY_KINDS)}")
    if v["bathy.kind"] == "gridded" and v["bathy.file"] is None:
        fail("bathy.kind", "gridded bathymetry needs bathy.file")
    if len(v["bathy.center"]) != 2:
        fail("bathy.center", "needs two coordinates")
    if v["bathy.H0"] <= 0 or v["bathy.width"] <= 0:
        fail("bathy.H0" if v["bathy.H0"] <= 0 else "bathy.width", "must be positive")
    if v["source.kind"] not in SOURCE_KINDS:
        fail("source.kind", f"must be one of {', '.join(SOURCE_KINDS)}")
    if v["source.kind"] == "custom_grid" and v["source.file"] is None:
        fail("source.kind", "custom_grid source needs source.file")
    if v["source.b1"] <= 0 or v["source.b2"] <= 0:
        fail("source.b1" if v["source.b1"] <= 0 else "source.b2", "must be positive")
    gkeys = [f"grid.{k}" for k in ("x0", "y0", "x1", "y1", "nx", "ny")]
    given = [k for k in gkeys if v[k] is not None]
    if given and len(given) != len(gkeys):
        fail(given[0], "grid needs all of x0, y0, x1, y1, nx, ny")
    if given:
        if v["grid.nx"] < 2 or v["grid.ny"] < 2:
            fail("grid.nx", "grid needs at least 2x2 nodes")
        if not (v["grid.x1"] > v["grid.x0"] and v["grid.y1"] > v["grid.y0"]):
            fail("grid.x1", "grid bounds must be increasing")
    if v["field.focal"] not in FOCAL_MODES:
        fail("field.focal", f"must be one of {', '.join(FOCAL_MODES)}")
    if not v["oracle.cfl"] > 0 or v["oracle.cfl"] > 1:
        fail("oracle.cfl", "must lie in (0, 1]")
    if v["oracle.refine"] < 1:
        fail("oracle.refine", "must be a positive integer")
    if v["profile.n"] < 2:
        fail("profile.n", "need at least two samples")
    for key in ("threshold.H", "threshold.l", "scale.L", "oracle.band", "profile.halfwidth"):
        if v[key] is not None and not v[key] > 0:
            fail(key, "must be positive")
    # model construction errors surface as config errors with the kind line
    try:
        cfg.bathymetry()
    except LongwaveError as exc:
        fail("bathy.kind", str(exc))
    if v["source.kind"] == "gauss_cosine":
        cfg.source()
    return cfg


def format_float(x):
    """Fixed 17-significant-digit formatting used in every CSV."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x:.17g}"

