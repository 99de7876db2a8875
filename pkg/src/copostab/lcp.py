"""Linear complementarity problems ``0 <= lam _|_ M lam + q >= 0``.

Solutions are found by enumerating complementarity patterns, so everything
here is exact up to floating point but exponential in ``n_c``.
"""
import logging
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._validation import as_vector, check_square
from .exceptions import DimensionError, PartitionError, SingularError
from .numkit import FEAS_TOL, PD_TOL, LpStatus, Polytope, lu_factor, lu_solve, lp_solve

logger = logging.getLogger(__name__)

MAX_ENUM_DIM = 12
COMP_TOL = 1e-8
DEDUP_TOL = 1e-8


@dataclass(frozen=True)
class LcpInstance:
    q: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        m = check_square(self.M, "M")
        object.__setattr__(self, "M", m)
        object.__setattr__(self, "q", as_vector(self.q, "q", m.shape[0]))

    @property
    def n(self):
        return self.q.size


@dataclass(frozen=True)
class LcpSolution:
    lam: np.ndarray
    slack: np.ndarray
    partition: tuple
    pattern: frozenset

    @property
    def is_strict(self):
        return not self.partition[1]


def index_partition(lam, w, tol=FEAS_TOL):
    """Split indices into (alpha, beta, gamma): lam > 0 = w, both zero,
    lam = 0 < w.  Indices are 0-based."""
    lam = as_vector(lam, "lam")
    w = as_vector(w, "w", lam.size)
    alpha, beta, gamma = [], [], []
    for i, (li, wi) in enumerate(zip(lam, w)):
        if li > tol and abs(wi) <= tol:
            alpha.append(i)
        elif abs(li) <= tol and abs(wi) <= tol:
            beta.append(i)
        elif abs(li) <= tol and wi > tol:
            gamma.append(i)
        else:
            raise PartitionError(f"index {i}: lam={li:.3e}, w={wi:.3e} is not complementary")
    return frozenset(alpha), frozenset(beta), frozenset(gamma)


def _patterns(n):
    """All supports in a fixed order: by size, then lexicographically."""
    for k in range(n + 1):
        for sub in combinations(range(n), k):
            yield sub


def _scale(q):
    # SOL(q, M) is a cone in q, so tolerances are relative to |q|
    s = np.max(np.abs(q), initial=0.0)
    return s if s > 0 else 1.0


def _pattern_point(q, m, sub, strict_rep=True):
    """A point of {lam_S >= 0, lam_Sbar = 0, w_S = 0, w_Sbar >= 0} or None."""
    n = q.size
    s = list(sub)
    sbar = [i for i in range(n) if i not in sub]
    lam = np.zeros(n)
    if s:
        try:
            lu, perm = lu_factor(m[np.ix_(s, s)])
        except SingularError:
            return _pattern_point_lp(q, m, s, sbar, strict_rep)
        lam[s] = lu_solve(lu, perm, -q[s])
    w = m @ lam + q
    scale = _scale(q)
    if np.all(lam[s] >= -FEAS_TOL * scale) and np.all(w[sbar] >= -FEAS_TOL * scale):
        lam[s] = np.maximum(lam[s], 0.0)
        return lam
    return None


def _pattern_point_lp(q, m, s, sbar, strict_rep):
    # singular principal block: the pattern set may be a polyhedron, not a
    # point. Variables are (lam_S, t); t is the smallest strict margin.
    ns = len(s)
    msub = m[:, s]
    nv = ns + 1
    e = np.zeros((ns, nv))
    e[:, :ns] = msub[s]
    e0 = -q[s]
    rows, rhs = [], []
    for j in range(ns):
        r = np.zeros(nv)
        r[j] = 1.0
        rows.append(r)
        rhs.append(0.0)
    for i in sbar:
        r = np.zeros(nv)
        r[:ns] = msub[i]
        rows.append(r)
        rhs.append(-q[i])
    poly = Polytope(e, e0, np.array(rows), np.array(rhs))
    # phase 1 with t pinned at 0
    pinned = Polytope(
        np.vstack([e, np.eye(nv)[ns:]]), np.concatenate([e0, [0.0]]), poly.ineq_lhs, poly.ineq_rhs
    )
    res = lp_solve(pinned, np.zeros(nv))
    if res.status is not LpStatus.OPTIMAL:
        return None
    point = res.x
    if strict_rep:
        # maximize t s.t. lam_S >= t, w_Sbar >= t, t <= 1
        g = np.array(rows)
        g[:, ns] = -1.0
        cap = np.zeros(nv)
        cap[ns] = -1.0
        strict = Polytope(e, e0, np.vstack([g, cap]), np.concatenate([rhs, [-1.0]]))
        c = np.zeros(nv)
        c[ns] = 1.0
        res2 = lp_solve(strict, c)
        if res2.status is LpStatus.OPTIMAL and res2.value > 0:
            point = res2.x
        else:
            # no strict point: prefer the largest support mass, sum(lam_S) <= 1
            cap = np.zeros(nv)
            cap[:ns] = -1.0
            pinned_cap = Polytope(
                pinned.eq_lhs, pinned.eq_rhs,
                np.vstack([poly.ineq_lhs, cap]), np.concatenate([poly.ineq_rhs, [-1.0]]),
            )
            c = np.zeros(nv)
            c[:ns] = 1.0
            res3 = lp_solve(pinned_cap, c)
            if res3.status is LpStatus.OPTIMAL and res3.value > FEAS_TOL:
                point = res3.x
    lam = np.zeros(q.size)
    lam[s] = np.maximum(point[:ns], 0.0)
    return lam


def lcp_solve_all(inst, M=None, max_dim=MAX_ENUM_DIM):
    """Every solution pattern of LCP(q, M), one representative per pattern.

    ``inst`` is an :class:`LcpInstance` or the vector ``q`` with ``M`` given.
    Representatives closer than ``DEDUP_TOL`` (inf-norm) are merged.
    """
    if not isinstance(inst, LcpInstance):
        inst = LcpInstance(inst, M)
    q, m = inst.q, inst.M
    if q.size > max_dim:
        raise DimensionError(f"n_c={q.size} exceeds enumeration limit {max_dim}")
    out = []
    for sub in _patterns(q.size):
        lam = _pattern_point(q, m, sub)
        if lam is None:
            continue
        if any(np.max(np.abs(lam - sol.lam), initial=0.0) <= DEDUP_TOL for sol in out):
            continue
        w = m @ lam + q
        tol = COMP_TOL * _scale(q)
        part = index_partition(lam, np.where(np.abs(w) <= tol, 0.0, w), tol)
        out.append(LcpSolution(lam, w, part, frozenset(sub)))
    return out


def principal_minor(m, idx):
    """Determinant of ``m[idx, idx]`` by fraction-free (Bareiss) elimination."""
    a = np.array(m, dtype=float)[np.ix_(idx, idx)]
    n = a.shape[0]
    if n == 0:
        return 1.0
    sign = 1.0
    prev = 1.0
    for k in range(n - 1):
        if a[k, k] == 0.0:
            swap = np.nonzero(a[k + 1:, k])[0]
            if swap.size == 0:
                return 0.0
            p = k + 1 + int(swap[0])
            a[[k, p]] = a[[p, k]]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i, j] = (a[i, j] * a[k, k] - a[i, k] * a[k, j]) / prev
        prev = a[k, k]
    return sign * a[n - 1, n - 1]


def is_P_matrix(m, tol=PD_TOL):
    m = check_square(m, "M")
    n = m.shape[0]
    if n > MAX_ENUM_DIM:
        raise DimensionError(f"dimension {n} exceeds enumeration limit {MAX_ENUM_DIM}")
    return all(
        principal_minor(m, list(sub)) > tol for sub in _patterns(n) if sub
    )


def is_R0_matrix(m):
    """True iff LCP(0, M) has only the trivial solution."""
    m = check_square(m, "M")
    n = m.shape[0]
    if n > MAX_ENUM_DIM:
        raise DimensionError(f"dimension {n} exceeds enumeration limit {MAX_ENUM_DIM}")
    for sub in _patterns(n):
        if not sub:
            continue
        s = list(sub)
        sbar = [i for i in range(n) if i not in sub]
        ns = len(s)
        e = m[np.ix_(s, s)]
        g = np.vstack([np.eye(ns), m[np.ix_(sbar, s)], -np.ones((1, ns))])
        g0 = np.concatenate([np.zeros(ns + len(sbar)), [-1.0]])
        res = lp_solve(Polytope(e, np.zeros(ns), g, g0), np.ones(ns))
        if res.status is LpStatus.OPTIMAL and res.value > FEAS_TOL:
            return False
    return True


@dataclass(frozen=True)
class SolvabilityClass:
    is_p: bool
    is_r0: bool
    q_matrix_certified: bool


def assert_solvability_class(m):
    """Classify ``M``; Q-membership is only certified through the P test."""
    is_p = is_P_matrix(m)
    is_r0 = True if is_p else is_R0_matrix(m)
    if not is_p and is_r0:
        logger.warning("F is R0 but not P; Q-matrix property is assumed, not certified")
    return SolvabilityClass(is_p, is_r0, is_p)
