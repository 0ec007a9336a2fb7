from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import diag_wells, random_set
from matres.geometry import PotentialSpec, l1_norm, random_potential
from matres.symmetry import (IDENTITIES, projector_compatible, projector_det_deviation,
                             run_symmetry_suite)


def _samples(rng, real=20, cplx=20):
    r = rng.uniform(0.5, 50, real)
    c = rng.uniform(0.5, 50, cplx) * np.exp(1j * rng.uniform(-np.pi, np.pi, cplx))
    return np.concatenate([r, c])


def test_zero_potential_exact():
    p = PotentialSpec(2, [0, 1], [np.zeros((2, 2))])
    rep = run_symmetry_suite(p, _samples(np.random.default_rng(0)))
    assert all(v <= 1e-15 for v in rep.deviations.values())
    assert rep.ok


def test_random_symmetric_identity_projector():
    rng = np.random.default_rng(1)
    p = random_potential(rng, 2, 3, 1.0, 10.0)
    ks = rng.uniform(0.5, 50, 20)
    rep = run_symmetry_suite(p, ks)
    assert rep.samples["n_real"] == 20
    assert rep.ok, rep.deviations
    assert all(rep.deviations[name] <= 1e-8 for name in IDENTITIES)


def test_property_suite_over_random_potentials():
    rng = np.random.default_rng(2)
    for p in random_set(3, 8, n_max=3):
        assert l1_norm(p) <= 10 + 1e-9
        rep = run_symmetry_suite(p, _samples(rng), seed=3)
        assert rep.ok, rep.deviations


def test_block_diagonal_projector():
    p = diag_wells()
    P = np.diag([1.0, 0.0])
    assert projector_compatible(p, P)
    ks = np.linspace(0.5, 50, 20)
    assert projector_det_deviation(p, ks, P) <= 1e-8
    rep = run_symmetry_suite(p, ks, projectors=[np.eye(2), P, np.eye(2) - P])
    assert rep.ok and not rep.skipped


def test_incompatible_projector_skipped():
    p = PotentialSpec(2, [0, 1], [[[1.0, 0.5], [0.5, 2.0]]])
    bad = np.array([[0.0, 1.0], [1.0, 0.0]])  # not idempotent
    swap = np.diag([1.0, 0.0])                # idempotent, but P V != tV P
    assert not projector_compatible(p, bad) and not projector_compatible(p, swap)
    rep = run_symmetry_suite(p, [1.0, 2.0 - 1j], projectors=[bad, swap])
    assert len(rep.skipped) == 2
    assert rep.deviations["wronskian"] == 0.0


def test_deviation_growth_with_l1_norm():
    rng = np.random.default_rng(4)
    base = random_potential(rng, 2, 2, 1.0, 1.0, symmetric=False)
    ks = _samples(np.random.default_rng(5), 10, 10)
    devs = []
    for scale in (1, 3, 10):
        q = PotentialSpec(2, base.breakpoints, base.pieces * scale)
        devs.append(max(run_symmetry_suite(q, ks).deviations.values()))
    # linear growth at most, with headroom for rounding noise at tiny values
    assert devs[2] <= 10 * max(devs[0], 1e-13) * 3


def test_report_json_and_k_zero():
    p = diag_wells()
    rep = run_symmetry_suite(p, [1.0, 3 - 1j])
    d = json.loads(rep.to_json())
    assert set(d["deviations"]) == set(IDENTITIES)
    with pytest.raises(ValueError):
        run_symmetry_suite(p, [0.0, 1.0])


def test_tolerance_failure_reported():
    p = random_set(6, 1)[0]
    rep = run_symmetry_suite(p, [1.0, 2.0], tolerances={"unitarity": -1.0})
    assert not rep.ok and not rep.passed["unitarity"]
