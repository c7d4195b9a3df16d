"""Shared scenarios and the acceptance summary."""

import warnings
from collections import defaultdict

import numpy as np
import pytest

from longwave import Bathymetry, SourceModel, trace_bundle

BANK_T = 4.44
_RESULTS = defaultdict(list)


def bank_bathy():
    """Gaussian shoal ahead of the source; the front folds after t ~ 2.4."""
    return Bathymetry.radial_bank(1.0, 0.9, 0.7, (0.0, 1.2), g=1.0)


def radial_source():
    return SourceModel.gauss_cosine(1.0, 0.0, 0.0, 0.5, 0.5)


@pytest.fixture(scope="session")
def bank():
    return bank_bathy()


@pytest.fixture(scope="session")
def src():
    return radial_source()


@pytest.fixture(scope="session")
def bank_bundle(bank):
    return trace_bundle(bank, 512, BANK_T)


@pytest.fixture(scope="session")
def bank_scene(bank, src, bank_bundle):
    from longwave import prepare_scene
    return prepare_scene(bank, src, 0.05, BANK_T, bundle=bank_bundle)


@pytest.fixture
def record():
    """record(k, part, ok, detail) stores one acceptance check."""
    def _record(k, part, ok, detail=""):
        _RESULTS[k].append((part, bool(ok), detail))
        return ok
    return _record


@pytest.fixture(autouse=True)
def _quiet_integration_warnings():
    with warnings.catch_warnings():
        from scipy.integrate import IntegrationWarning
        warnings.simplefilter("ignore", IntegrationWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        parts = _RESULTS[k]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        detail = "; ".join(f"{p}: {'ok' if ok else 'FAIL'} {d}".rstrip() for p, ok, d in parts)
        terminalreporter.write_line(f"CRITERION {k}: {status} ({detail})")


def ring_points(fp, lam, mu, n=16, radius=1.0):
    """Points with focal coordinates (z1, z2) on a circle of the given radius."""
    th = 2 * np.pi * np.arange(n) / n
    z1, z2 = radius * np.cos(th), radius * np.sin(th)
    x1 = z1 * mu * fp.CF / (abs(fp.Jtilde) * lam)
    x2 = mu * z2 / np.linalg.norm(fp.PF)
    return fp.XF + np.outer(x1, fp.frame[0]) + np.outer(x2, fp.frame[1])
