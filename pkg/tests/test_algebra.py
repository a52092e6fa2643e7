from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lightlike.algebra import (
    MembershipError,
    adjoint,
    algebra_suite,
    bracket,
    element,
    form,
    grade_project,
    grading_element,
    group_residual,
    h_embed,
    h_parameters,
    is_orthochronous,
    membership_residual,
    p_embed,
    quotient_adjoint,
    random_element,
    random_graded,
    random_orthogonal,
    run_suite,
)


def test_grading_element_is_pure_degree_zero():
    g = grade_project(grading_element(3))
    assert g.a == 1.0
    assert not g.X.any() and not g.A.any() and not g.Zrow.any()


def test_lower_block_is_pure_degree_minus_one():
    X = np.array([1.0, -2.0, 0.5])
    g = grade_project(element(X=X, m=3))
    assert np.array_equal(g.X, X) and g.a == 0.0 and not g.Zrow.any()


def test_components_of_sum():
    X = np.array([0.3, 0.7])
    g = grade_project(grading_element(2) + element(X=X, m=2))
    assert np.array_equal(g.X, X) and g.a == 1.0 and not g.A.any() and not g.Zrow.any()


def test_bracket_examples():
    m = 3
    E = grading_element(m)
    X = element(X=[1.0, 2.0, 3.0], m=m)
    Zr = element(Zrow=[0.5, -1.0, 2.0], m=m)
    assert np.array_equal(bracket(E, X), -X)
    assert np.array_equal(bracket(E, Zr), Zr)
    assert not bracket(X, X).any()


def test_quotient_adjoint_examples():
    m = 3
    X = np.array([1.0, 0.5, -2.0])
    w = np.array([0.2, -0.1, 0.4])
    a, Y = quotient_adjoint(np.zeros(m), np.eye(m), 0.7, X)
    assert a == 0.7 and np.array_equal(Y, X)
    a, Y = quotient_adjoint(w, np.eye(m), 0.0, X)
    assert a == pytest.approx(-float(w @ X), abs=1e-15) and np.array_equal(Y, X)


def test_h_embed_examples():
    m = 2
    assert np.array_equal(h_embed(np.zeros(m), np.eye(m)), np.eye(m + 2))
    w = np.array([1.0, 2.0])
    expected = np.array([[1, -1, -2, -2.5], [0, 1, 0, 1], [0, 0, 1, 2], [0, 0, 0, 1]], float)
    assert np.array_equal(h_embed(w, np.eye(m)), expected)


def test_non_orthogonal_g_is_rejected():
    with pytest.raises(MembershipError):
        h_embed(np.zeros(2), np.array([[1.0, 0.1], [0.0, 1.0]]))
    with pytest.raises(MembershipError):
        grade_project(np.eye(4))
    with pytest.raises(MembershipError):
        h_parameters(np.diag([2.0, 1.0, 1.0, 0.5]))


def test_form_signature():
    eig = np.linalg.eigvalsh(form(3))
    assert (eig < 0).sum() == 1 and (eig > 0).sum() == 4


ms = st.integers(2, 5)
seeds = st.integers(0, 2**32 - 1)


@given(ms, seeds)
def test_random_elements_are_members(m, seed):
    M = random_element(m, np.random.default_rng(seed))
    assert membership_residual(M) < 1e-12
    assert np.max(np.abs(grade_project(M).assemble() - M)) == 0.0


@given(ms, seeds, st.sampled_from([-1, 0, 1]), st.sampled_from([-1, 0, 1]))
def test_grading_is_compatible_with_bracket(m, seed, i, j):
    rng = np.random.default_rng(seed)
    B = bracket(random_graded(m, i, rng), random_graded(m, j, rng))
    assert np.max(np.abs(B - grade_project(B).part(i + j))) < 1e-12


@given(ms, seeds)
def test_h_elements_preserve_the_form_and_time_orientation(m, seed):
    rng = np.random.default_rng(seed)
    sig = h_embed(rng.standard_normal(m), random_orthogonal(m, rng))
    assert group_residual(sig) < 1e-12
    assert is_orthochronous(sig)
    lam = float(np.exp(rng.standard_normal()))
    assert group_residual(p_embed(lam, rng.standard_normal(m), random_orthogonal(m, rng))) < 1e-11


@given(ms, seeds)
def test_quotient_adjoint_is_a_representation(m, seed):
    rng = np.random.default_rng(seed)
    w1, g1, w2, g2 = rng.standard_normal(m), random_orthogonal(m, rng), rng.standard_normal(m), random_orthogonal(m, rng)
    a, X = float(rng.standard_normal()), rng.standard_normal(m)
    w, g = h_parameters(h_embed(w1, g1) @ h_embed(w2, g2))
    direct = quotient_adjoint(w, g, a, X)
    composed = quotient_adjoint(w1, g1, *quotient_adjoint(w2, g2, a, X))
    assert abs(direct[0] - composed[0]) < 1e-12 * max(1.0, abs(direct[0]))
    assert np.max(np.abs(direct[1] - composed[1])) < 1e-12 * max(1.0, np.max(np.abs(direct[1])))


@given(ms, seeds)
def test_quotient_adjoint_matches_conjugation(m, seed):
    rng = np.random.default_rng(seed)
    w, g = rng.standard_normal(m), random_orthogonal(m, rng)
    M = random_element(m, rng)
    gp = grade_project(M)
    c, Xc = grade_project(adjoint(h_embed(w, g), M), tol=1e-9).quotient()
    qa, qX = quotient_adjoint(w, g, gp.a, gp.X)
    assert abs(c - qa) < 1e-10 and np.max(np.abs(Xc - qX)) < 1e-10


def test_suite_passes_quickly():
    recs, seconds = run_suite((2, 3, 4), 200, 0)
    assert all(r.passed for r in recs), [r.line() for r in recs if not r.passed]
    assert seconds < 10


def test_suite_is_deterministic():
    a = [r.as_dict() for r in algebra_suite(3, 20, 5)]
    b = [r.as_dict() for r in algebra_suite(3, 20, 5)]
    assert a == b
