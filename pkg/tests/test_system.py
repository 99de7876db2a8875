import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import random_p_matrix
from copostab import registry
from copostab.exceptions import EmptyResult, NoSolutionError, PreconditionError, StepSizeError
from copostab.lcp import is_P_matrix
from copostab.system import (
    BranchPolicy,
    Dlcs,
    InhomogeneousDlcs,
    Lcs,
    discretize,
    explore_branches,
    find_equilibrium,
    reduce_inhomogeneous,
    simulate,
    step,
)

seeds = st.integers(0, 2**32 - 1)


def test_discretize_cam32_explicit():
    d = discretize(registry.get("cam32"), 0.1, 0.0)
    np.testing.assert_allclose(d.a, [[0.9]])
    np.testing.assert_allclose(d.c, [[0.0, 0.1]])
    np.testing.assert_allclose(d.d, [[0.9], [0.9]])
    np.testing.assert_allclose(d.f, [[1.0, 3.1], [0.0, 1.1]])


def test_discretize_explicit_limit_and_zero_drift():
    lcs = registry.get("cam33")
    d = discretize(lcs, 0.05, 0.0)
    np.testing.assert_array_equal(d.a, np.eye(3) + 0.05 * lcs.a_tilde)
    z = Lcs(np.zeros((2, 2)), [[1.0], [2.0]], [[1.0, -1.0]], [[2.0]])
    for theta in (0.0, 0.5, 1.0):
        d = discretize(z, 0.1, theta)
        np.testing.assert_allclose(d.a, np.eye(2))
        np.testing.assert_allclose(d.c, 0.1 * z.c_tilde)
        np.testing.assert_allclose(d.d, z.d_tilde)
        np.testing.assert_allclose(d.f, z.f_tilde + 0.1 * z.d_tilde @ z.c_tilde)


def test_discretize_errors():
    lcs = registry.get("cam32")
    with pytest.raises(StepSizeError):
        discretize(lcs, 5.0, 0.0)
    with pytest.raises(StepSizeError):
        discretize(lcs, -0.1, 0.0)
    with pytest.raises(StepSizeError):
        discretize(lcs, 0.1, 1.5)


@pytest.mark.parametrize("name", ["cam31", "cam32", "cam33", "hem2"])
@pytest.mark.parametrize("theta", [0.0, 1.0])
def test_discretize_first_order(name, theta):
    lcs = registry.get(name)
    res = [
        np.max(np.abs((discretize(lcs, dt, theta).a - np.eye(lcs.n_x)) / dt - lcs.a_tilde))
        for dt in (0.1, 0.05, 0.025)
    ]
    if theta == 0.0:
        assert max(res) < 1e-12
    else:
        for a, b in zip(res, res[1:]):
            assert 1.5 <= a / b <= 2.5


def test_cam33_implicit_f_is_p():
    assert is_P_matrix(discretize(registry.get("cam33"), 0.1, 1.0).f)


def test_step_examples():
    hem = discretize(registry.get("hem2"), 0.1, 1.0)
    x = np.array([1.0, 0.0, 0.0, 0.0])
    assert hem.d @ x >= 0
    xn, lam, _ = step(hem, x)
    assert np.all(lam == 0)
    np.testing.assert_allclose(xn, hem.a @ x)

    xn, lam, _ = step(Dlcs(0.5, 1, -1, 1), [2.0])
    assert lam == pytest.approx([2.0]) and xn == pytest.approx([3.0])

    xn, lam, _ = step(registry.get("qp0"), [0.0, 0.0])
    assert np.all(lam == 0) and np.all(xn == 0)


def test_step_no_solution():
    with pytest.raises(NoSolutionError):
        step(Dlcs(1.0, 1.0, 1.0, -1.0), [-1.0])


def test_simulate_examples():
    d = Dlcs(0.5, 0, 1, 1)
    assert len(simulate(d, [1.0], 0).states) == 1
    traj = simulate(d, [1.0], 3)
    np.testing.assert_allclose(np.ravel(traj.states), [1, 0.5, 0.25, 0.125])


def test_simulate_residuals_cam31():
    d = discretize(registry.get("cam31"), 0.1, 0.0)
    rng = np.random.default_rng(0)
    traj = simulate(d, rng.standard_normal(1), 100)
    assert traj.complementarity_residual(d) <= 1e-8


def test_simulate_reports_step_on_failure():
    d = Dlcs(2.0, 1.0, -1.0, -1.0)
    with pytest.raises(NoSolutionError) as info:
        simulate(d, [1.0], 5)
    assert info.value.step is not None


def test_random_policy_is_seeded():
    d = registry.get("qp0")
    a = simulate(d, [1.0, 0.0], 6, BranchPolicy("random", 3))
    b = simulate(d, [1.0, 0.0], 6, BranchPolicy("random", 3))
    assert a.branch_log == b.branch_log


def test_explore_branches_qp0():
    branches, truncated = explore_branches(registry.get("qp0"), [1.0, 0.0], 2)
    assert len(branches) >= 2 and not truncated
    branches, truncated = explore_branches(registry.get("qp0"), [1.0, 0.0], 8, budget=4)
    assert truncated and len(branches) == 4


@given(seeds)
def test_simulate_invariants(seed):
    rng = np.random.default_rng(seed)
    nx, nc = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    d = Dlcs(rng.uniform(-0.7, 0.7, (nx, nx)), rng.standard_normal((nx, nc)),
             rng.standard_normal((nc, nx)), random_p_matrix(rng, nc))
    traj = simulate(d, rng.standard_normal(nx), 20)
    for x, lam, xn in zip(traj.states, traj.multipliers, traj.states[1:]):
        w = d.d @ x + d.f @ lam
        scale = 1 + np.abs(x).max()
        assert np.all(lam >= -1e-8 * scale) and np.all(w >= -1e-8 * scale)
        assert abs(lam @ w) <= 1e-8 * scale ** 2
        np.testing.assert_allclose(xn, d.a @ x + d.c @ lam, atol=1e-12)


def test_find_equilibrium_examples():
    eq = find_equilibrium(InhomogeneousDlcs(Dlcs(0.5, 1, 1, 1), [1.0], [0.0]))
    assert len(eq) == 1
    assert eq[0][0] == pytest.approx([2.0]) and eq[0][1] == pytest.approx([0.0])

    d = registry.get("qp0")
    eq = find_equilibrium(InhomogeneousDlcs(d, np.zeros(2), np.zeros(2)))
    assert any(np.all(x == 0) and np.all(lam == 0) for x, lam in eq)


def test_find_equilibrium_sign_tests():
    # both patterns of the scalar system fail their sign tests
    sys_ = InhomogeneousDlcs(Dlcs(0.5, 1, -1, 1), [0.0], [-1.0])
    with pytest.raises(EmptyResult):
        find_equilibrium(sys_)


def test_reduce_examples():
    base = Dlcs([[0.5, 0.1], [0.0, 0.4]], [[1.0, 0.0], [0.0, 1.0]],
                [[1.0, 0.0], [0.0, 1.0]], [[2.0, 1.0], [1.0, 3.0]])
    # all rows strictly inactive: reduced system has no contacts
    r = reduce_inhomogeneous(InhomogeneousDlcs(base, [0, 0], [1, 1]), (np.zeros(2), np.zeros(2)))
    assert r.n_c == 0 and np.array_equal(r.a, base.a)
    # all rows weakly active: nothing changes
    r = reduce_inhomogeneous(InhomogeneousDlcs(base, [0, 0], [0, 0]), (np.zeros(2), np.zeros(2)))
    for got, want in zip((r.a, r.c, r.d, r.f), (base.a, base.c, base.d, base.f)):
        np.testing.assert_array_equal(got, want)
    # alpha = {0}, beta = {1}: Schur complement of F
    sys_ = InhomogeneousDlcs(base, [0, 0], [-2.0, -1.0])
    lam = np.array([1.0, 0.0])
    r = reduce_inhomogeneous(sys_, (np.zeros(2), lam))
    f = base.f
    assert r.f[0, 0] == pytest.approx(f[1, 1] - f[1, 0] * f[0, 1] / f[0, 0])


def test_reduce_requires_p():
    sys_ = InhomogeneousDlcs(registry.get("qp0"), np.zeros(2), np.zeros(2))
    with pytest.raises(PreconditionError):
        reduce_inhomogeneous(sys_, (np.zeros(2), np.zeros(2)))


@given(seeds)
def test_reduced_system_has_origin_equilibrium(seed):
    rng = np.random.default_rng(seed)
    nx, nc = int(rng.integers(1, 4)), int(rng.integers(1, 3))
    base = Dlcs(rng.uniform(-0.5, 0.5, (nx, nx)), rng.standard_normal((nx, nc)),
                rng.standard_normal((nc, nx)), random_p_matrix(rng, nc))
    sys_ = InhomogeneousDlcs(base, rng.standard_normal(nx), rng.standard_normal(nc))
    try:
        eqs = find_equilibrium(sys_)
    except EmptyResult:
        eqs = []
    assume(eqs)
    for eq in eqs:
        red = reduce_inhomogeneous(sys_, eq)
        hom = InhomogeneousDlcs(red, np.zeros(red.n_x), np.zeros(red.n_c))
        assert any(np.allclose(x, 0) and np.allclose(lam, 0) for x, lam in find_equilibrium(hom))
