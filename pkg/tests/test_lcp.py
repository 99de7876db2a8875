import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_p_matrix
from copostab.exceptions import DimensionError, PartitionError
from copostab.lcp import (
    LcpInstance,
    assert_solvability_class,
    index_partition,
    is_P_matrix,
    is_R0_matrix,
    lcp_solve_all,
    principal_minor,
)

QP0_F = np.array([[1.0, -1.0], [1.0, 0.0]])
CAM_F = np.array([[1.0, 3.0], [0.0, 1.0]])
seeds = st.integers(0, 2**32 - 1)


def test_index_partition_examples():
    assert index_partition([1, 0], [0, 2]) == ({0}, set(), {1})
    assert index_partition([0, 0], [0, 0]) == (set(), {0, 1}, set())
    with pytest.raises(PartitionError):
        index_partition([1, 1], [1, 0])


def test_solve_all_examples():
    sols = lcp_solve_all([1, 1], np.eye(2))
    assert len(sols) == 1 and np.all(sols[0].lam == 0)
    sols = lcp_solve_all([-1, 0], CAM_F)
    assert len(sols) == 1 and sols[0].lam == pytest.approx([1, 0])
    sols = lcp_solve_all(LcpInstance([0, 0], QP0_F))
    assert len(sols) == 1 and np.all(sols[0].lam == 0)


def test_solve_all_segment_of_solutions():
    # q = (2, 0): lam = (0, t), t in [0, 2], all solve the LCP
    sols = lcp_solve_all([2.0, 0.0], QP0_F)
    assert len(sols) >= 2
    for s in sols:
        assert s.lam[0] == 0 and 0 <= s.lam[1] <= 2 + 1e-12


def test_solve_all_no_solution():
    assert lcp_solve_all([-1.0], [[-1.0]]) == []


def test_dimension_limit():
    with pytest.raises(DimensionError):
        lcp_solve_all(np.ones(13), np.eye(13))


def test_matrix_classes():
    assert is_P_matrix(CAM_F)
    assert not is_P_matrix(QP0_F)
    assert not is_P_matrix(-np.eye(2))
    assert is_R0_matrix(np.eye(2))
    assert is_R0_matrix(QP0_F)
    assert not is_R0_matrix([[0.0, 0.0], [0.0, 1.0]])


def test_solvability_class():
    c = assert_solvability_class(CAM_F)
    assert (c.is_p, c.is_r0, c.q_matrix_certified) == (True, True, True)
    c = assert_solvability_class(QP0_F)
    assert (c.is_p, c.is_r0, c.q_matrix_certified) == (False, True, False)
    # SOL(0, -I) = {0}: R0 although LCP(q, -I) is unsolvable for q < 0
    c = assert_solvability_class(-np.eye(1))
    assert (c.is_p, c.is_r0, c.q_matrix_certified) == (False, True, False)
    c = assert_solvability_class([[0.0, 0.0], [0.0, 1.0]])
    assert (c.is_p, c.is_r0, c.q_matrix_certified) == (False, False, False)


def test_principal_minor_matches_det():
    rng = np.random.default_rng(3)
    for _ in range(100):
        m = rng.standard_normal((4, 4))
        idx = sorted(rng.choice(4, int(rng.integers(1, 5)), replace=False))
        assert principal_minor(m, idx) == pytest.approx(np.linalg.det(m[np.ix_(idx, idx)]), abs=1e-9)


def _check_solution(sol, q, m):
    w = m @ sol.lam + q
    assert np.all(sol.lam >= -1e-8) and np.all(w >= -1e-8)
    assert np.all(np.abs(sol.lam * w) <= 1e-8)
    a, b, g = sol.partition
    assert a | b | g == set(range(q.size))
    assert not (a & b or a & g or b & g)


@given(seeds, st.integers(1, 4))
def test_solutions_satisfy_invariants(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    q = rng.standard_normal(n)
    for sol in lcp_solve_all(q, m):
        _check_solution(sol, q, m)


def test_p_matrix_unique_and_homogeneous():
    rng = np.random.default_rng(11)
    for _ in range(5):
        n = int(rng.integers(1, 5))
        m = random_p_matrix(rng, n)
        assert is_P_matrix(m)
        ratios = []
        for _ in range(200):
            q = rng.standard_normal(n)
            sols = lcp_solve_all(q, m)
            assert len(sols) == 1
            _check_solution(sols[0], q, m)
            tau = rng.uniform(0.1, 10)
            scaled = lcp_solve_all(tau * q, m)
            assert np.max(np.abs(scaled[0].lam - tau * sols[0].lam)) <= 1e-8 * (1 + tau)
            ratios.append(np.linalg.norm(sols[0].lam) / np.linalg.norm(q))
        # one constant bounds lam by q
        assert max(ratios) < np.inf


@given(seeds, st.integers(1, 3))
def test_r0_iff_trivial_solution(seed, n):
    rng = np.random.default_rng(seed)
    m = rng.integers(-1, 2, (n, n)).astype(float)
    sols = lcp_solve_all(np.zeros(n), m)
    trivial = len(sols) == 1 and np.all(sols[0].lam == 0)
    assert is_R0_matrix(m) == trivial
