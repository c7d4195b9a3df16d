import math

import numpy as np
import pytest

from conftest import BANK_T
from longwave import (Bathymetry, classify_focal, critical_time, find_focal_points,
                      focal_chart_index, front_at, jacobians, morse_index, segment_front,
                      trace_bundle)
from longwave.errors import ArgumentError
from longwave.front_geometry import fit_exponents, initial_chart_indices, maslov_argdet
from longwave.raytrace import trace_rays


@pytest.fixture(scope="module")
def flat_bundle():
    return trace_bundle(Bathymetry.constant(4.0, g=1.0), 64, 1.5)


@pytest.fixture(scope="module")
def bank_focal(bank_scene):
    return bank_scene.focal


def test_constant_depth_jacobians(flat_bundle):
    s = flat_bundle.states[-1]
    J, Jt, J10, J02 = jacobians(s, flat_bundle.bathy)
    # X = C0 t n(psi), P = n(psi): J = C0^2 t and Jtilde = C0
    assert np.allclose(J, 4.0 * 1.5) and np.allclose(Jt, 2.0)
    psi = flat_bundle.psi
    # the initial chart Jacobians are C0 cos^2 and C0 sin^2
    J10_0, J02_0 = jacobians(flat_bundle.states[0], flat_bundle.bathy)[2:]
    assert np.allclose(J10_0, 2.0 * np.cos(psi) ** 2) and np.allclose(J02_0, 2.0 * np.sin(psi) ** 2)


def test_no_focal_points_on_flat_bottom(flat_bundle):
    assert critical_time(flat_bundle) == math.inf
    assert find_focal_points(flat_bundle, 1.5) == []
    assert initial_chart_indices(flat_bundle) == [0, 0, 0, 0]
    br = segment_front(front_at(flat_bundle, 1.5), [])
    assert len(br) == 1 and br[0].morse == 0 and br[0].hi - br[0].lo == pytest.approx(2 * np.pi)


def test_bank_critical_time_and_early_front(bank_bundle):
    tcr = critical_time(bank_bundle)
    assert 2.3 < tcr < 2.6
    assert find_focal_points(bank_bundle, 0.9 * tcr) == []


def test_classification_is_reproducible(bank_bundle, bank_focal):
    fp = classify_focal(bank_bundle, find_focal_points(bank_bundle, BANK_T)[0])
    assert fp.psiF == bank_focal[0].psiF and fp.JnF == bank_focal[0].JnF


def test_bank_folds(bank_focal, bank_bundle):
    assert len(bank_focal) == 2
    a, b = bank_focal
    # the bank sits on the y axis, so the two folds are mirror images
    assert a.psiF + b.psiF == pytest.approx(np.pi, abs=1e-6)
    assert a.n == b.n == 2
    assert {a.sigma, b.sigma} == {1, -1}
    assert a.JnF == pytest.approx(-b.JnF, rel=1e-6)
    for fp in bank_focal:
        assert fp.residual < 1e-2
        assert np.linalg.norm(fp.derivs["Xpsi"]) < 1e-6 * fp.CF * fp.tF
        assert fp.sigma == int(np.sign(fp.Jtilde * fp.JnF))
        assert focal_chart_index(bank_bundle, fp) == 1


def test_fold_normal_form_exponents(bank_bundle, bank_focal):
    e1, e2 = fit_exponents(bank_bundle, bank_focal[0])
    assert abs(e1 - 2) < 0.2 and abs(e2 - 3) < 0.2


def test_caustic_sampling(bank):
    coarse = trace_bundle(bank, 32, BANK_T)
    caustic = find_focal_points(coarse)
    assert len(caustic) == len(coarse.cross_t) > 0
    J = [abs(fp.Jtilde) for fp in caustic]
    assert min(J) > 0
    times = [fp.tF for fp in caustic]
    assert times == sorted(times)


def test_morse_index_two_routes(bank_bundle):
    counts = bank_bundle.morse_counts(BANK_T)
    for m in (0, 1):
        i = int(np.nonzero(counts == m)[0][0])
        assert morse_index(bank_bundle, bank_bundle.psi[i], BANK_T) == m
        # independent route: winding of arg det(Xdot - i eps Pdot, Xpsi - i eps Ppsi)
        assert round(maslov_argdet(bank_bundle, i, BANK_T)) == m


def test_morse_index_off_grid_ray(bank_bundle, bank_focal):
    psi = 0.5 * (bank_focal[0].psiF + bank_focal[1].psiF)
    ray = trace_rays(bank_bundle.bathy, [psi], BANK_T, steps=4096)
    assert morse_index(bank_bundle, psi, BANK_T) == len(ray.cross_t)


def test_morse_index_rejects_bad_time(bank_bundle):
    with pytest.raises(ArgumentError):
        morse_index(bank_bundle, 0.1, 2 * BANK_T)


def test_segmentation_matches_ray_counts(bank_scene, bank_bundle):
    counts = bank_bundle.morse_counts(BANK_T)
    for br in bank_scene.branches:
        inside = br.contains(bank_bundle.psi)
        assert np.all(counts[inside] == br.morse)
    covered = sum(br.hi - br.lo for br in bank_scene.branches)
    assert covered == pytest.approx(2 * np.pi)
