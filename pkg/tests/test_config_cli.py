import csv
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from longwave.cli import (count_self_intersections, emit_plot_data, main, read_scene_cache,
                          run_scenario)
from longwave.config import format_float, load_config, parse_config
from longwave.errors import ArgumentError, ConfigError

FLAT = """\
mu = 0.1
g = 1.0
T = 1.0
n_psi = 64
bathy.kind = constant
bathy.H0 = 1.0
grid.x0 = -1.5
grid.y0 = -1.5
grid.x1 = 1.5
grid.y1 = 1.5
grid.nx = 121
grid.ny = 121
"""

BANK = """\
mu = 0.05
g = 1.0
T = 4.44
n_psi = 256
bathy.kind = radial_bank
bathy.H0 = 1.0
bathy.amplitude = 0.9
bathy.width = 0.7
bathy.center = 0.0, 1.2
"""


def write_cfg(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def read_meta(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if line.startswith("[config]"):
                break
            if " = " in line:
                k, v = line.rstrip("\n").split(" = ", 1)
                out[k] = v
    return out


# -- configuration ----------------------------------------------------------------

def test_defaults_are_filled():
    cfg = parse_config("mu = 0.1\nT = 2.0\nbathy.kind = constant\n")
    assert cfg["dt"] == 2.0 / 4096
    assert cfg.times == (2.0,)
    assert cfg["g"] == 9.81 and cfg["n_psi"] == 512
    assert not cfg.has_grid


@pytest.mark.parametrize("text, line, fragment", [
    ("mu = 0.1\nT = 1\nbogus = 3\nbathy.kind = constant\n", 3, "unknown key"),
    ("mu = 0.1\nT = 1\nmu = 0.2\nbathy.kind = constant\n", 3, "duplicate key"),
    ("mu = 0.1\nT = 1\nn_psi = many\nbathy.kind = constant\n", 3, "bad value"),
    ("mu = 0.1\n\n# comment\nT 1\n", 4, "key = value"),
    ("T = 1\nmu = 0.7\nbathy.kind = constant\n", 2, "(0, 0.5)"),
    ("mu = 0.1\nT = 1\ntimes = 0.5, 2.0\nbathy.kind = constant\n", 3, "(0, T]"),
    ("mu = 0.1\nT = 1\nbathy.kind = reef\n", 3, "bathy.kind"),
    ("mu = 0.1\nT = 1\nbathy.kind = constant\ngrid.x0 = 0\n", 4, "grid needs all"),
])
def test_config_errors_report_line(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert fragment in str(exc.value) and str(exc.value).startswith(f"line {line}:")


def test_missing_required_key():
    with pytest.raises(ConfigError, match="mu: required key missing"):
        parse_config("T = 1\nbathy.kind = constant\n")


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.cfg"))


@settings(max_examples=30, deadline=None)
@given(mu=st.floats(1e-4, 0.49), T=st.floats(0.1, 10), eps=st.floats(-0.5, 0.5),
       n=st.integers(16, 2048))
def test_echo_round_trip(mu, T, eps, n):
    text = (f"mu = {mu!r}\nT = {T!r}\nn_psi = {n}\nbathy.kind = linear_slope\n"
            f"bathy.eps = {eps!r}\nbathy.center = 0.25, -1.5\n")
    cfg = parse_config(text)
    again = parse_config(cfg.echo())
    assert again.values == cfg.values
    assert again.echo() == cfg.echo()


def test_format_float_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 1e300, math.pi):
        assert float(format_float(x)) == x
    assert format_float(float("nan")) == "nan"
    assert format_float(np.float64(0.5)) == "0.5"


# -- commands -----------------------------------------------------------------------

def test_threshold_command(tmp_path, capsys):
    assert main(["threshold", "--H", "4", "--l", "40", "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.strip() == "4000 km"
    header, rows = read_csv(tmp_path / "threshold.csv")
    assert header == ["H", "l", "threshold"] and float(rows[0][2]) == 4000.0
    assert read_meta(tmp_path / "run.meta")["status"] == "ok"


def test_threshold_without_inputs_exits_2(tmp_path):
    assert main(["threshold", "--out", str(tmp_path)]) == 2
    meta = read_meta(tmp_path / "run.meta")
    assert meta["status"] == "error" and meta["error_code"] == "2"


def test_bad_config_exits_2(tmp_path):
    path = write_cfg(tmp_path, "mu = 0.1\nT = 1\nwhat = 1\nbathy.kind = constant\n")
    assert main(["front", path, "--out", str(tmp_path / "o")]) == 2
    assert main(["front", str(tmp_path / "absent.cfg")]) == 2


def test_front_command_on_constant_depth(tmp_path):
    run = run_scenario(parse_config(FLAT), "front", str(tmp_path))
    meta = read_meta(tmp_path / "run.meta")
    assert meta["status"] == "ok" and meta["conservation.ok"] == "true"
    assert float(meta["front.t0.radius_error"]) < 1e-12
    header, rows = read_csv(tmp_path / "front_t0.csv")
    assert header == ["psi", "x1", "x2", "p1", "p2", "J", "Jtilde", "morse"]
    assert len(rows) == 64 and run.files == ["front_t0.csv"]
    r = np.hypot([float(r[1]) for r in rows], [float(r[2]) for r in rows])
    assert np.allclose(r, 1.0, atol=1e-12)
    # the polyline of a circle is simple
    out = tmp_path / "poly.csv"
    info = emit_plot_data([str(tmp_path / "front_t0.csv")], "front_polyline", str(out))
    assert info == {"rows": 64, "self_intersections": 0}


def test_dimensional_output_rescales_lengths(tmp_path):
    cfg = parse_config(FLAT + "scale.L = 40.0\n")
    run_scenario(cfg, "front", str(tmp_path), dimensional=True)
    _, rows = read_csv(tmp_path / "front_t0.csv")
    assert np.allclose(np.hypot(float(rows[0][1]), float(rows[0][2])), 40.0)


def test_trace_command(tmp_path):
    run_scenario(parse_config(FLAT + "trace.every = 1024\n"), "trace", str(tmp_path))
    header, rows = read_csv(tmp_path / "rays.csv")
    assert header[:3] == ["ray", "psi", "t"]
    # four steps per ray at every=1024 over 4096 steps, plus the final state
    assert len(rows) == 64 * 5
    _, cross = read_csv(tmp_path / "crossings.csv")
    assert cross == []
    assert read_meta(tmp_path / "run.meta")["critical_time"] == "inf"


def test_focal_command_and_scene_cache(tmp_path):
    run_scenario(parse_config(BANK), "focal", str(tmp_path))
    header, rows = read_csv(tmp_path / "focal.csv")
    assert len(rows) == 2
    assert {int(r[header.index("mbold")]) for r in rows} == {1}
    cache = read_scene_cache(tmp_path / "scene_t0.mfront")
    assert cache["mu"] == 0.05 and cache["t"] == 4.44
    assert len(cache["front"]) == 256 and len(cache["focal"]) == 2
    for r, fp in zip(rows, cache["focal"]):
        assert float(r[header.index("psiF")]) == fp["psiF"]
        assert fp["n"] == 2 and fp["mbold"] == 1
    _, brows = read_csv(tmp_path / "branches.csv")
    assert len(brows) == len(cache["branches"])
    lo = [b["lo"] for b in cache["branches"]]
    hi = [b["hi"] for b in cache["branches"]]
    assert sum(h - l for l, h in zip(lo, hi)) == pytest.approx(2 * np.pi)


def test_scene_cache_rejects_other_files(tmp_path):
    p = tmp_path / "x.mfront"
    p.write_text("hello\n")
    with pytest.raises(ArgumentError):
        read_scene_cache(p)


def test_field_and_spectral_commands(tmp_path):
    cfg = parse_config(FLAT)
    run_scenario(cfg, "field", str(tmp_path / "a"))
    header, rows = read_csv(tmp_path / "a" / "field_t0.csv")
    assert header == ["x1", "x2", "eta", "n_branches", "n_focal_contribs", "inside_band"]
    assert len(rows) == 121 * 121
    inside = np.array([int(r[5]) for r in rows])
    eta = np.array([float(r[2]) for r in rows])
    assert np.any(inside == 1) and np.all(eta[inside == 0] == 0)
    run_scenario(cfg, "oracle-spectral", str(tmp_path / "b"))
    header, rows = read_csv(tmp_path / "b" / "spectral_nondisp_t0.csv")
    assert header[-1] == "source" and rows[0][-1] == "spectral_nondisp"
    files = [str(tmp_path / "a" / "field_t0.csv"), str(tmp_path / "b" / "spectral_nondisp_t0.csv")]
    info = emit_plot_data(files, "field_heatmap", str(tmp_path / "heat.csv"))
    assert info == {"rows": 121 * 121}
    info = emit_plot_data(files, "profile_cut", str(tmp_path / "cut.csv"), angle=0.3, n=51)
    header, rows = read_csv(tmp_path / "cut.csv")
    assert header == ["s", "x1", "x2", "eta_0", "eta_1"] and len(rows) == 51


def test_spectral_oracle_needs_constant_depth(tmp_path):
    text = FLAT.replace("bathy.kind = constant", "bathy.kind = linear_slope\nbathy.eps = 0.2")
    path = write_cfg(tmp_path, text)
    assert main(["oracle-spectral", path, "--out", str(tmp_path / "o")]) == 2
    meta = read_meta(tmp_path / "o" / "run.meta")
    assert meta["status"] == "error" and meta["error"].startswith("ArgumentError")


def test_field_needs_grid(tmp_path):
    with pytest.raises(ConfigError):
        run_scenario(parse_config(BANK), "field", str(tmp_path))


def test_outputs_are_deterministic(tmp_path):
    cfg = parse_config(FLAT)
    for d in ("a", "b"):
        run_scenario(cfg, "field", str(tmp_path / d))
    a = (tmp_path / "a" / "field_t0.csv").read_bytes()
    assert a == (tmp_path / "b" / "field_t0.csv").read_bytes()
    def untimed(path):
        return [ln for ln in path.read_text().splitlines() if not ln.startswith("timing.")]

    assert untimed(tmp_path / "a" / "run.meta") == untimed(tmp_path / "b" / "run.meta")


# -- plot data ------------------------------------------------------------------------

def test_plot_rejects_mismatched_grids(tmp_path):
    paths = []
    for k, n in enumerate((3, 4)):
        p = tmp_path / f"f{k}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "x2", "eta"])
            for y in range(n):
                for x in range(n):
                    w.writerow([x, y, 0.0])
        paths.append(str(p))
    with pytest.raises(ArgumentError):
        emit_plot_data(paths, "field_heatmap", str(tmp_path / "o.csv"))
    with pytest.raises(ArgumentError):
        emit_plot_data([str(tmp_path / "none.csv")], "field_heatmap", str(tmp_path / "o.csv"))
    assert main(["plot", "field_heatmap", *paths, "--out", str(tmp_path / "o.csv")]) == 2
    assert not os.path.exists(tmp_path / "o.csv")


def test_count_self_intersections():
    s = np.linspace(0, 2 * np.pi, 200, endpoint=False) + 0.01
    eight = np.stack([np.sin(s), np.sin(s) * np.cos(s)], 1)
    assert count_self_intersections(eight) == 1
    circle = np.stack([np.cos(s), np.sin(s)], 1)
    assert count_self_intersections(circle) == 0
    # a swallowtail-like loop: one extra crossing
    loop = np.stack([np.cos(s) + 0.6 * np.cos(2 * s), np.sin(s) - 0.6 * np.sin(2 * s)], 1)
    assert count_self_intersections(loop) > 0


@pytest.mark.parametrize("name", ["constant.cfg", "radial_bank.cfg", "slope.cfg"])
def test_shipped_configs_load(name):
    path = os.path.join(os.path.dirname(__file__), os.pardir, "configs", name)
    cfg = load_config(path)
    assert cfg.has_grid and cfg.bathymetry().kind == name.split(".")[0].replace("slope", "linear_slope")
