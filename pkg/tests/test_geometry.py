from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_set
from matres.geometry import (PotentialError, PotentialSpec, constants_for, l1_norm,
                             load_potential, predicted_constants, random_potential,
                             support_geometry)


# --- load_potential -----------------------------------------------------------

def test_load_scalar_well():
    p = load_potential('{"n": 1, "breakpoints": [0, 1], "pieces": [[[1.0]]]}')
    assert p.n == 1 and p.m == 1
    assert p.pieces[0, 0, 0] == 1.0
    assert p(0.5)[0, 0] == 1.0 and p(1.5)[0, 0] == 0.0


def test_load_yaml_two_pieces():
    p = load_potential("n: 2\nbreakpoints: [-1, 0, 2]\npieces:\n"
                       "  - [[1, 0], [0, 1]]\n  - [[0, 2], [2, 0]]\n")
    assert p.m == 2
    np.testing.assert_array_equal(p.widths, [1.0, 2.0])


@pytest.mark.parametrize("text, msg", [
    ('{"n": 2, "breakpoints": [0, 1, 0.5], "pieces": [[[1,0],[0,1]], [[1,0],[0,1]]]}',
     "not increasing"),
    ('{"n": 1, "breakpoints": [0, 1, 2], "pieces": [[[1.0]]]}', "piece count"),
    ('{"n": 2, "breakpoints": [0, 1], "pieces": [[[1.0, 2.0]]]}', "2x2"),
    ('{"n": 1, "breakpoints": [0, 1]}', "missing"),
    ('{"n": 1, "breakpoints": [0, 1], "pieces": [[["1+2j"]]]}', "non-real"),
    ('{"n": 1, "breakpoints": [0, 1], "pieces": [[[1.0]]', "parse"),
    ('[1, 2, 3]', "mapping"),
    ('{"n": 0, "breakpoints": [0, 1], "pieces": [[[1.0]]]}', "positive"),
])
def test_load_errors(text, msg):
    with pytest.raises(PotentialError, match=msg):
        load_potential(text)


def test_spec_rejects_complex_and_nonfinite():
    with pytest.raises(PotentialError):
        PotentialSpec(1, [0, 1], [[[1 + 1j]]])
    with pytest.raises(PotentialError):
        PotentialSpec(1, [0, 1], [[[np.inf]]])
    with pytest.raises(PotentialError):
        PotentialSpec(1, [0, np.nan], [[[1.0]]])


def test_roundtrip_to_dict():
    p = random_set(0, 1)[0]
    q = load_potential(json.dumps(p.to_dict()))
    np.testing.assert_array_equal(q.pieces, p.pieces)
    np.testing.assert_array_equal(q.breakpoints, p.breakpoints)


def test_empty_potential():
    p = PotentialSpec(2, [], [])
    assert p.m == 0 and p.is_zero()
    assert l1_norm(p) == 0.0


# --- support geometry ----------------------------------------------------------

def test_support_scalar():
    g = support_geometry(PotentialSpec(1, [0, 1], [[[1.0]]]))
    assert g.t[0, 0] == 0 and g.u[0, 0] == 1 and g.diameter == 1


def test_support_offdiagonal_and_sentinel():
    p = PotentialSpec(2, [0.0, 0.5, 2.0],
                      [[[1.0, 0.0], [0.0, 1.0]], [[1.0, 3.0], [0.0, 1.0]]])
    g = support_geometry(p)
    assert g.t[0, 1] == 0.5 and g.u[0, 1] == 2.0
    assert g.t[1, 0] == math.inf and g.u[1, 0] == -math.inf
    assert g.diameter == 2.0


def test_support_gap_in_middle():
    p = PotentialSpec(1, [0, 1, 2, 3], [[[1.0]], [[0.0]], [[2.0]]])
    g = support_geometry(p)
    assert g.t[0, 0] == 0 and g.u[0, 0] == 3


# --- constants -------------------------------------------------------------------

def test_scalar_diameter():
    rep = constants_for(PotentialSpec(1, [0, 1], [[[1.0]]]))
    assert rep.scalar_diameter == pytest.approx(1 / math.pi, abs=1e-15)
    assert rep.scalar_diameter == pytest.approx(0.3183, abs=1e-4)


def test_triangular_diagonal():
    p = PotentialSpec(2, [-1.0, 0.0, 1.0, 2.0],
                      [np.diag([0.0, 1.0]), np.diag([1.0, 1.0]), np.diag([0.0, 1.0])])
    rep = constants_for(p)
    assert rep.triangular == pytest.approx(4 / math.pi, abs=1e-14)
    assert rep.triangular <= rep.upper_bound + 1e-12


def test_full_matrix_upper_bound():
    rep = constants_for(PotentialSpec(2, [0, 1], [np.ones((2, 2))]))
    assert rep.upper_bound == pytest.approx(2 / math.pi, abs=1e-14)
    assert rep.triangular is None


def test_triangular_absent_for_full_and_zero_diagonal():
    p = PotentialSpec(2, [0, 1], [[[0.0, 1.0], [0.0, 0.0]]])
    rep = constants_for(p)
    assert rep.triangular is None
    assert any("zero diagonal" in d for d in rep.diagnostics)


def test_theorem_form_reported():
    rep = constants_for(PotentialSpec(2, [0, 1, 3], [np.diag([1.0, 0.0]), [[0.0, 1.0], [1.0, 0.0]]]))
    assert rep.upper_bound_theorem_form >= rep.upper_bound - 1e-12


def test_h2_flags_and_json():
    rep = constants_for(PotentialSpec(2, [0, 1, 2], [np.diag([1.0, 2.0]), np.diag([0.0, 2.0])]))
    h2 = rep.h2
    assert h2.sigma0 == [0, 1]
    assert h2.value == pytest.approx(3 / math.pi)
    assert h2.nonnegative and h2.unique_sigma
    d = json.loads(rep.to_json())
    assert set(d) >= {"upper_bound", "triangular", "h2", "scalar_diameter"}
    assert "holds" in d["h2"]


def test_permutation_limit():
    g = support_geometry(PotentialSpec(9, [0, 1], [np.ones((9, 9))]))
    with pytest.raises(ValueError, match="n <= 8"):
        predicted_constants(g)


def test_l1_norm_examples():
    assert l1_norm(PotentialSpec(1, [0, 3], [[[2.0]]])) == 6.0
    assert l1_norm(PotentialSpec(1, [0, 3], [[[0.0]]])) == 0.0
    assert l1_norm(PotentialSpec(2, [0, 0.5], [np.ones((2, 2))])) == 2.0


def test_random_potential_respects_l1(rng):
    for _ in range(20):
        p = random_potential(rng, 3, 3, 1.5, 10.0)
        assert l1_norm(p) <= 10.0 + 1e-12
        np.testing.assert_allclose(p.pieces, p.pieces.transpose(0, 2, 1))


# --- properties ----------------------------------------------------------------

@st.composite
def potentials(draw, n_max=3):
    n = draw(st.integers(1, n_max))
    m = draw(st.integers(1, 3))
    cuts = sorted(draw(st.lists(st.floats(-3, 3, allow_nan=False), min_size=m + 1,
                                max_size=m + 1, unique=True)))
    if min(np.diff(cuts)) < 1e-3:
        cuts = list(np.arange(m + 1, dtype=float))
    vals = draw(st.lists(st.sampled_from([0.0, 0.0, 1.0, -2.0, 0.5]),
                         min_size=m * n * n, max_size=m * n * n))
    return PotentialSpec(n, cuts, np.array(vals).reshape(m, n, n))


@settings(max_examples=150, deadline=None)
@given(potentials())
def test_bounds_ordering(p):
    rep = constants_for(p)
    if rep.triangular is not None:
        assert rep.triangular <= rep.upper_bound + 1e-12
    if rep.scalar_diameter is not None:
        assert rep.scalar_diameter <= rep.upper_bound + 1e-12


@settings(max_examples=100, deadline=None)
@given(potentials(), st.permutations(range(3)), st.floats(-5, 5, allow_nan=False))
def test_permutation_and_translation_invariance(p, perm, s):
    perm = [i for i in perm if i < p.n]
    base = constants_for(p).upper_bound
    assert constants_for(p.permuted(perm)).upper_bound == pytest.approx(base, abs=1e-12)
    shifted = constants_for(p.shifted(s))
    assert shifted.upper_bound == pytest.approx(base, abs=1e-9)
    if shifted.triangular is not None:
        assert shifted.triangular == pytest.approx(constants_for(p).triangular, abs=1e-9)
