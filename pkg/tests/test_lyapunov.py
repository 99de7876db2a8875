import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_p_matrix
from copostab import registry
from copostab.exceptions import DimensionError, NegativityError
from copostab.lyapunov import (
    build_M,
    build_Mhat,
    build_Q_cqlf,
    build_slemma_cqlf,
    build_slemma_eqlf,
    eval_decrease_identity,
    is_negative_definite,
    lemma_residual,
    validate_certificate,
)
from copostab.system import Dlcs, Lcs, discretize

seeds = st.integers(0, 2**32 - 1)
CAM32 = discretize(registry.get("cam32"), 0.1, 0.0)
SCALAR = Dlcs(0.5, 0, 1, 1)


def random_dlcs(rng, nx=None, nc=None):
    nx = nx or int(rng.integers(1, 4))
    nc = nc or int(rng.integers(1, 3))
    return Dlcs(rng.standard_normal((nx, nx)), rng.standard_normal((nx, nc)),
                rng.standard_normal((nc, nx)), random_p_matrix(rng, nc))


def sym(rng, n):
    a = rng.standard_normal((n, n))
    return a + a.T


def test_build_M_examples():
    np.testing.assert_allclose(build_M(CAM32, [[1.0]]), [[-0.19, 0, 0.09], [0, 0, 0], [0.09, 0, 0.01]],
                               atol=1e-15)
    d = Dlcs(np.eye(2), np.zeros((2, 1)), np.zeros((1, 2)), [[1.0]])
    assert np.all(build_M(d, [[2.0, 1.0], [1.0, 3.0]]) == 0)
    assert np.all(build_M(CAM32, [[0.0]]) == 0)
    with pytest.raises(DimensionError):
        build_M(CAM32, np.eye(2))


def test_build_Mhat_examples():
    rng = np.random.default_rng(0)
    d = random_dlcs(rng, 2, 2)
    pxx = sym(rng, 2)
    p = np.zeros((4, 4))
    p[:2, :2] = pxx
    mh = build_Mhat(d, p)
    assert np.array_equal(mh[:4, :4], build_M(d, pxx))
    assert np.all(mh[4:] == 0) and np.all(mh[:, 4:] == 0)

    d = Dlcs(np.eye(2), np.zeros((2, 2)), np.ones((2, 2)), np.eye(2))
    want = np.diag([0, 0, -1, -1, 1, 1])
    np.testing.assert_array_equal(build_Mhat(d, np.eye(4)), want)
    assert np.all(build_Mhat(d, np.zeros((4, 4))) == 0)


def test_build_Q_examples():
    lcs = registry.get("cam32")
    np.testing.assert_array_equal(build_Q_cqlf(lcs, [[1.0]]), [[-2, 0, 1], [0, 0, 0], [1, 0, 0]])
    assert np.all(build_Q_cqlf(lcs, [[0.0]]) == 0)
    skew = Lcs([[0.0, 1.0], [-1.0, 0.0]], [[1.0], [0.0]], [[1.0, 0.0]], [[1.0]])
    assert np.all(build_Q_cqlf(skew, np.eye(2))[:2, :2] == 0)


def test_decrease_identity_examples():
    assert eval_decrease_identity(CAM32, [[1.0]], [0.0], [0.0, 0.0]) == (0.0, 0.0)
    lhs, rhs = eval_decrease_identity(CAM32, [[1.0]], [1.0], [0.0, 0.0])
    assert lhs == pytest.approx(-0.19) and rhs == pytest.approx(-0.19)


@given(seeds)
def test_decrease_identity_random(seed):
    rng = np.random.default_rng(seed)
    d = random_dlcs(rng)
    x, lam, lh = rng.standard_normal(d.n_x), rng.standard_normal(d.n_c), rng.standard_normal(d.n_c)
    lhs, rhs = eval_decrease_identity(d, sym(rng, d.n_x), x, lam)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
    lhs, rhs = eval_decrease_identity(d, sym(rng, d.n_x + d.n_c), x, lam, lh)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


def test_decrease_identity_needs_lam_hat():
    with pytest.raises(DimensionError):
        eval_decrease_identity(CAM32, np.eye(3), [1.0], [0.0, 0.0])


@pytest.mark.parametrize("name", ["cam31", "cam32", "cam33"])
@pytest.mark.parametrize("theta", [0.0, 1.0])
def test_lemma_residual_second_order_small_steps(name, theta):
    # in the asymptotic regime the residual ratio settles near 4
    lcs = registry.get(name)
    rng = np.random.default_rng(5)
    for _ in range(20):
        p = sym(rng, lcs.n_x)
        r = lemma_residual(lcs, p, 0.0125, theta) / lemma_residual(lcs, p, 0.00625, theta)
        assert 3.0 <= r <= 5.0


def test_slemma_cqlf_examples():
    np.testing.assert_array_equal(build_slemma_cqlf(CAM32, [[1.0]], np.zeros((4, 4))),
                                  build_M(CAM32, [[1.0]]))
    m = build_slemma_cqlf(SCALAR, [[1.0]], np.zeros((2, 2)))
    np.testing.assert_allclose(m, [[-0.75, 0], [0, 0]])
    assert not is_negative_definite(m)
    with pytest.raises(NegativityError):
        build_slemma_cqlf(SCALAR, [[1.0]], -np.eye(2))
    with pytest.raises(DimensionError):
        build_slemma_cqlf(SCALAR, [[1.0]], np.zeros((3, 3)))


def test_slemma_eqlf_examples():
    p = np.eye(3)
    pos, dec = build_slemma_eqlf(CAM32, p, *(np.zeros((4, 4)),) * 3)
    np.testing.assert_array_equal(pos, p)
    np.testing.assert_array_equal(dec, build_Mhat(CAM32, p))


# F = -1 keeps (0, lam) out of the cone, so the LMIs can hold
SLEMMA_SYS = Dlcs([[0.3]], [[-0.2]], [[1.0]], [[-1.0]])


def _random_w(rng):
    w = rng.uniform(0, 3, (2, 2))
    return 0.5 * (w + w.T)


def _sample_relaxed_cone(rng, d, n, hat=False):
    # lam >= 0, Dx + F lam >= 0 (and the same one step ahead for lam_hat)
    pts = []
    while len(pts) < n:
        x, lam = rng.standard_normal(d.n_x), rng.exponential(size=d.n_c)
        if np.any(d.d @ x + d.f @ lam < 0):
            continue
        if not hat:
            pts.append(np.concatenate([x, lam]))
            continue
        lh = rng.exponential(size=d.n_c)
        if np.all(d.d @ (d.a @ x + d.c @ lam) + d.f @ lh >= 0):
            pts.append(np.concatenate([x, lam, lh]))
    return np.array(pts)


def test_slemma_cqlf_implication_sampled():
    rng = np.random.default_rng(1)
    d, p = SLEMMA_SYS, np.array([[1.0]])
    hits = 0
    for _ in range(200):
        if not is_negative_definite(build_slemma_cqlf(d, p, _random_w(rng))):
            continue
        hits += 1
        pts = _sample_relaxed_cone(rng, d, 1000)
        assert np.all(np.einsum("ij,jk,ik->i", pts, build_M(d, p), pts) < 0)
    assert hits > 0


def test_slemma_eqlf_implication_sampled():
    rng = np.random.default_rng(2)
    d, p = SLEMMA_SYS, np.diag([1.0, 0.1])
    z = np.zeros((2, 2))
    hits = 0
    for _ in range(200):
        w = _random_w(rng)
        _, dec = build_slemma_eqlf(d, p, z, w, w)
        if not is_negative_definite(dec):
            continue
        hits += 1
        pts = _sample_relaxed_cone(rng, d, 1000, hat=True)
        assert np.all(np.einsum("ij,jk,ik->i", pts, build_Mhat(d, p), pts) < 0)
    assert hits > 0


def test_validate_examples():
    rep = validate_certificate(SCALAR, [[1.0]], n_traj=10, horizon=20)
    assert rep.passed and rep.decay_ratio == pytest.approx(0.25)
    assert not validate_certificate(SCALAR, [[0.0]], n_traj=5, horizon=5).passed
    assert not validate_certificate(Dlcs(1.1, 0, 1, 1), [[1.0]], n_traj=5, horizon=5).passed
    with pytest.raises(DimensionError):
        validate_certificate(SCALAR, np.eye(3))


def test_validate_is_seeded():
    d = discretize(registry.get("cam31"), 0.1, 0.0)
    a = validate_certificate(d, [[1.0]], n_traj=5, horizon=10, seed=4)
    b = validate_certificate(d, [[1.0]], n_traj=5, horizon=10, seed=4, jobs=2)
    assert a.to_dict() == b.to_dict()
