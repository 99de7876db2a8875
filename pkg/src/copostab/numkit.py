"""Dense linear algebra, a Bland-rule simplex solver and an exact global
minimizer of indefinite quadratics over bounded polytopes."""
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np

from ._validation import as_matrix, as_vector, check_square, check_symmetric
from .exceptions import DimensionError, EmptyFeasible, SingularError

LIN_TOL = 1e-10
PIVOT_TOL = 1e-12
PD_TOL = 1e-10
FEAS_TOL = 1e-9
SYM_TOL = 1e-9

# simplex internals
_ENTER_TOL = 1e-10
_RATIO_TOL = 1e-11
_MAX_PIVOTS = 100_000
_PIV_TOL = 1e-9
_HARRIS_TOL = 1e-11
_REINVERT_EVERY = 50


def lu_factor(a):
    """LU factorization with partial pivoting.

    Returns ``(lu, perm)`` with ``a[perm] = L @ U``.  Raises SingularError when
    a pivot magnitude drops below ``PIVOT_TOL``.
    """
    lu = check_square(a).copy()
    n = lu.shape[0]
    perm = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) < PIVOT_TOL:
            raise SingularError(f"pivot {k} has magnitude {abs(lu[p, k]):.3e}")
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm


def lu_solve(lu, perm, b):
    n = lu.shape[0]
    y = np.array(b, dtype=float)[perm]
    for i in range(n):
        y[i] -= lu[i, :i] @ y[:i]
    for i in range(n - 1, -1, -1):
        y[i] = (y[i] - lu[i, i + 1:] @ y[i + 1:]) / lu[i, i]
    return y


def solve_linear(a, b):
    """Solve ``a x = b`` by Gaussian elimination with partial pivoting."""
    a = check_square(a, "a")
    b = as_vector(b, "b")
    if b.size != a.shape[0]:
        raise DimensionError(f"b has length {b.size}, expected {a.shape[0]}")
    if a.shape[0] == 0:
        return np.zeros(0)
    lu, perm = lu_factor(a)
    return lu_solve(lu, perm, b)


def is_positive_definite(s, tol=PD_TOL):
    """True iff every pivot of a diagonally pivoted symmetric factorization
    exceeds ``tol``."""
    work = check_symmetric(s, "s", SYM_TOL).copy()
    n = work.shape[0]
    for k in range(n):
        p = k + int(np.argmax(np.diag(work)[k:]))
        if work[p, p] <= tol:
            return False
        if p != k:
            work[[k, p]] = work[[p, k]]
            work[:, [k, p]] = work[:, [p, k]]
        piv = work[k, k]
        col = work[k + 1:, k].copy()
        work[k + 1:, k + 1:] -= np.outer(col, col) / piv
    return True


def spectral_norm(a, tol=1e-10, max_iter=10_000):
    """Largest singular value of ``a`` by power iteration on ``a.T @ a``."""
    a = as_matrix(a, "a")
    if a.size == 0 or not np.any(a):
        return 0.0
    ata = a.T @ a
    # deterministic start that is not orthogonal to the dominant direction
    v = np.ones(ata.shape[0]) + np.linspace(0.0, 0.5, ata.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = ata @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new_lam = float(v @ w)
        v = w / nw
        if abs(new_lam - lam) <= tol * max(1.0, abs(new_lam)):
            lam = new_lam
            break
        lam = new_lam
    return float(np.sqrt(max(lam, 0.0)))


@dataclass(frozen=True)
class Polytope:
    """The set ``{v : E v = e0, G v >= g0}``."""

    eq_lhs: np.ndarray
    eq_rhs: np.ndarray
    ineq_lhs: np.ndarray
    ineq_rhs: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.eq_lhs, dtype=float)
        g = np.asarray(self.ineq_lhs, dtype=float)
        ne = e.shape[1] if e.ndim == 2 else None
        ng = g.shape[1] if g.ndim == 2 else None
        if ne is not None and ng is not None and ne != ng:
            raise DimensionError("equality and inequality blocks disagree on columns")
        n = ne if ne is not None else (ng if ng is not None else 0)
        e = e.reshape(-1, n) if e.size else np.zeros((0, n))
        g = g.reshape(-1, n) if g.size else np.zeros((0, n))
        object.__setattr__(self, "eq_lhs", e)
        object.__setattr__(self, "ineq_lhs", g)
        object.__setattr__(self, "eq_rhs", as_vector(self.eq_rhs, "eq_rhs", e.shape[0]))
        object.__setattr__(self, "ineq_rhs", as_vector(self.ineq_rhs, "ineq_rhs", g.shape[0]))

    @property
    def n_vars(self):
        return self.eq_lhs.shape[1]

    def contains(self, v, tol=FEAS_TOL):
        v = np.asarray(v, dtype=float)
        scale = 1.0 + np.max(np.abs(v), initial=0.0)
        ok_eq = np.all(np.abs(self.eq_lhs @ v - self.eq_rhs) <= tol * scale)
        ok_in = np.all(self.ineq_lhs @ v - self.ineq_rhs >= -tol * scale)
        return bool(ok_eq and ok_in)


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class LpProblem:
    """Maximize ``objective @ v`` over ``constraints`` (variables are free)."""

    objective: np.ndarray
    constraints: Polytope


@dataclass(frozen=True)
class LpResult:
    status: LpStatus
    x: np.ndarray = None
    value: float = None
    pivots: int = 0


def _pivot(t, r, c):
    t[r] /= t[r, c]
    col = t[:, c].copy()
    col[r] = 0.0
    nz = np.nonzero(col)[0]
    if nz.size:
        t[nz] -= np.outer(col[nz], t[r])


def _reinvert(t, a, b, cost, basis):
    """Rebuild the tableau from the original data for the current basis."""
    m = len(basis)
    bmat = a[:, basis]
    try:
        t[:m, :-1] = np.linalg.solve(bmat, a)
        t[:m, -1] = np.linalg.solve(bmat, b)
    except np.linalg.LinAlgError:
        return False
    t[m, :-1] = cost - cost[basis] @ t[:m, :-1]
    t[m, -1] = -(cost[basis] @ t[:m, -1])
    return True


def _run_simplex(t, basis, allowed, a, b, cost):
    """Primal simplex on a canonical tableau ``[B^-1 A | B^-1 b]`` whose last
    row holds the reduced costs (maximization).

    Dantzig pricing with a Bland fallback while degenerate pivots stall, a
    Harris ratio test preferring large pivots, and periodic reinversion from
    ``(a, b, cost)``.  Returns ``(bounded, pivots)``.
    """
    m = t.shape[0] - 1
    pivots = 0
    stall = 0
    since = 0
    while True:
        red = t[m, :-1]
        cand = np.nonzero((red > _ENTER_TOL) & allowed)[0]
        if cand.size == 0:
            # confirm optimality on a freshly inverted tableau
            if since and _reinvert(t, a, b, cost, basis):
                t[:m, -1] = np.maximum(t[:m, -1], 0.0)
                since = 0
                continue
            return True, pivots
        if stall > 50:
            j = int(cand[0])
        else:
            j = int(cand[np.argmax(red[cand])])
        colj = t[:m, j]
        rows = np.nonzero(colj > _PIV_TOL)[0]
        if rows.size == 0:
            rows = np.nonzero(colj > _RATIO_TOL)[0]
            if rows.size == 0:
                return False, pivots
        rhs = np.maximum(t[rows, -1], 0.0)
        bound = ((rhs + _HARRIS_TOL) / colj[rows]).min()
        ok = rows[rhs / colj[rows] <= bound]
        if stall > 50:
            r = int(min(ok, key=lambda i: basis[i]))
        else:
            r = int(ok[np.argmax(colj[ok])])
        stall = stall + 1 if t[r, -1] <= _HARRIS_TOL else 0
        _pivot(t, r, j)
        basis[r] = j
        pivots += 1
        since += 1
        if since >= _REINVERT_EVERY:
            if _reinvert(t, a, b, cost, basis):
                t[:m, -1] = np.maximum(t[:m, -1], 0.0)
            since = 0
        if pivots > _MAX_PIVOTS:
            raise RuntimeError("simplex pivot limit exceeded")


def lp_solve(problem, c=None):
    """Two-phase dense-tableau simplex.

    Accepts an :class:`LpProblem`, or a :class:`Polytope` together with the
    objective ``c``.  Variables are free; they are split internally.
    """
    if isinstance(problem, LpProblem):
        poly, c = problem.constraints, problem.objective
    else:
        poly = problem
    c = as_vector(c, "objective", poly.n_vars)
    e, e0, g, g0 = poly.eq_lhs, poly.eq_rhs, poly.ineq_lhs, poly.ineq_rhs
    n = poly.n_vars
    me, mi = e.shape[0], g.shape[0]
    m = me + mi
    if m == 0:
        if np.any(c != 0):
            return LpResult(LpStatus.UNBOUNDED)
        return LpResult(LpStatus.OPTIMAL, np.zeros(n), 0.0)

    # standard form columns: [v+ (n) | v- (n) | slack (mi)]
    nstd = 2 * n + mi
    a = np.zeros((m, nstd))
    a[:me, :n] = e
    a[:me, n:2 * n] = -e
    a[me:, :n] = g
    a[me:, n:2 * n] = -g
    b = np.concatenate([e0, g0]).astype(float)
    # equilibrate rows before adding the slacks
    rs = np.max(np.abs(a), axis=1)
    rs[rs == 0] = 1.0
    a /= rs[:, None]
    b /= rs
    a[me:, 2 * n:] = -np.eye(mi)
    flip = b < 0
    a[flip] *= -1.0
    b = np.where(flip, -b, b)
    cstd = np.concatenate([c, -c, np.zeros(mi)])

    # phase 1 with one artificial per row
    a1 = np.hstack([a, np.eye(m)])
    c1 = np.concatenate([np.zeros(nstd), -np.ones(m)])
    t = np.zeros((m + 1, nstd + m + 1))
    basis = list(range(nstd, nstd + m))
    _reinvert(t, a1, b, c1, basis)
    allowed = np.ones(nstd + m, dtype=bool)
    _, piv1 = _run_simplex(t, basis, allowed, a1, b, c1)
    scale = 1.0 + np.max(np.abs(b), initial=0.0)
    if t[m, -1] > FEAS_TOL * scale:
        return LpResult(LpStatus.INFEASIBLE, pivots=piv1)

    # drive zero-level artificials out of the basis, drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= nstd:
            row = np.abs(t[i, :nstd])
            k = int(np.argmax(row)) if nstd else 0
            if nstd and row[k] > 1e-9:
                _pivot(t, i, k)
                basis[i] = k
                keep.append(i)
        else:
            keep.append(i)
    rows = keep
    basis = [basis[i] for i in rows]
    a2, b2 = a[rows], b[rows]
    t2 = np.zeros((len(rows) + 1, nstd + 1))
    if not _reinvert(t2, a2, b2, cstd, basis):
        t2[:-1, :nstd] = t[rows, :nstd]
        t2[:-1, -1] = t[rows, -1]
        cb = cstd[basis]
        t2[-1, :nstd] = cstd - cb @ t2[:-1, :nstd]
        t2[-1, -1] = -(cb @ t2[:-1, -1])
    t2[:-1, -1] = np.maximum(t2[:-1, -1], 0.0)
    ok, piv2 = _run_simplex(t2, basis, np.ones(nstd, dtype=bool), a2, b2, cstd)
    pivots = piv1 + piv2
    if not ok:
        return LpResult(LpStatus.UNBOUNDED, pivots=pivots)

    xb = np.maximum(t2[:-1, -1], 0.0)
    y = np.zeros(nstd)
    y[basis] = xb
    v = y[:n] - y[n:2 * n]
    return LpResult(LpStatus.OPTIMAL, v, float(c @ v), pivots)


def lp_feasible_point(poly):
    """Phase-1 only: a point of ``poly`` or ``None`` when it is empty."""
    res = lp_solve(poly, np.zeros(poly.n_vars))
    if res.status is LpStatus.INFEASIBLE:
        return None
    return res.x


def _nullspace(a, n, rtol=1e-10):
    """Orthonormal nullspace basis of ``a`` (rows x n) and its rank."""
    if a.shape[0] == 0:
        return np.eye(n), 0
    _, s, vt = np.linalg.svd(a)
    thresh = rtol * max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > thresh))
    return vt[rank:].T.copy(), rank


@dataclass
class FaceSet:
    """Affine hulls of the faces of one or more polytopes.

    Every face is stored as ``origin + basis @ t`` in the polytope's own
    coordinates.  The structure does not depend on the quadratic being
    minimized, so it is built once and reused across objectives.
    """

    n_vars: int
    polytopes: list
    origins: np.ndarray = None
    owners: np.ndarray = None
    groups: dict = field(default_factory=dict)
    g_pad: np.ndarray = None
    h_pad: np.ndarray = None

    @classmethod
    def build(cls, polytopes):
        polytopes = list(polytopes)
        n = polytopes[0].n_vars if polytopes else 0
        origins, owners, bases = [], [], []
        m_max = max((p.ineq_lhs.shape[0] for p in polytopes), default=0)
        g_pad = np.zeros((len(polytopes), m_max, n))
        h_pad = np.zeros((len(polytopes), m_max))
        for k, poly in enumerate(polytopes):
            if poly.n_vars != n:
                raise DimensionError("polytopes must share the variable count")
            mk = poly.ineq_lhs.shape[0]
            g_pad[k, :mk] = poly.ineq_lhs
            h_pad[k, :mk] = poly.ineq_rhs
            for origin, basis in _enumerate_faces(poly):
                origins.append(origin)
                owners.append(k)
                bases.append(basis)
        fs = cls(n, polytopes)
        fs.g_pad, fs.h_pad = g_pad, h_pad
        fs.origins = np.array(origins).reshape(-1, n)
        fs.owners = np.array(owners, dtype=int)
        dims = np.array([b.shape[1] for b in bases], dtype=int)
        for f in np.unique(dims):
            idx = np.nonzero(dims == f)[0]
            fs.groups[int(f)] = (idx, np.stack([bases[i] for i in idx]).reshape(idx.size, n, int(f)))
        return fs

    def candidates(self, q):
        """KKT candidates of ``v'Qv`` on every face: (points, values, owners),
        restricted to points feasible for their owning polytope."""
        q = np.asarray(q, dtype=float)
        pts = []
        idxs = []
        for f, (idx, b) in self.groups.items():
            w0 = self.origins[idx]
            if f == 0:
                pts.append(w0)
                idxs.append(idx)
                continue
            h = np.einsum("kni,nm,kmj->kij", b, q, b)
            h = 0.5 * (h + np.transpose(h, (0, 2, 1)))
            grad = np.einsum("kni,nm,km->ki", b, q, w0)
            w, vecs = np.linalg.eigh(h)
            scale = np.maximum(1.0, np.max(np.abs(w), axis=1))
            regular = np.min(np.abs(w), axis=1) > PIVOT_TOL * 1e2 * scale
            if not np.any(regular):
                continue
            w, vecs, grad, b, w0 = w[regular], vecs[regular], grad[regular], b[regular], w0[regular]
            coef = np.einsum("kji,kj->ki", vecs, grad) / w
            tstar = -np.einsum("kij,kj->ki", vecs, coef)
            pts.append(w0 + np.einsum("kni,ki->kn", b, tstar))
            idxs.append(idx[regular])
        if not pts:
            return np.zeros((0, self.n_vars)), np.zeros(0), np.zeros(0, dtype=int)
        pts = np.concatenate(pts)
        idx = np.concatenate(idxs)
        order = np.argsort(idx, kind="stable")
        pts, idx = pts[order], idx[order]
        owners = self.owners[idx]
        slack = np.einsum("kmn,kn->km", self.g_pad[owners], pts) - self.h_pad[owners]
        scale = 1.0 + np.max(np.abs(pts), axis=1)
        ok = np.all(slack >= -FEAS_TOL * scale[:, None], axis=1)
        pts, owners = pts[ok], owners[ok]
        vals = np.einsum("kn,nm,km->k", pts, q, pts)
        return pts, vals, owners

    def minimize(self, q):
        """Global minimum of ``v'Qv`` over the union of the polytopes.

        Returns ``(value, argmin, owner)``; ties resolve to the lowest owner
        index, then to enumeration order.
        """
        pts, vals, owners = self.candidates(q)
        if vals.size == 0:
            raise EmptyFeasible("no feasible KKT candidate")
        # lexicographic (value, owner); owners are already sorted ascending
        best = float(vals.min())
        k = int(np.nonzero(vals == best)[0][0])
        return best, pts[k].copy(), int(owners[k])

    def minimize_per_owner(self, q):
        """Per-polytope minima as an array (``inf`` where no candidate)."""
        pts, vals, owners = self.candidates(q)
        out = np.full(len(self.polytopes), np.inf)
        arg = np.zeros((len(self.polytopes), self.n_vars))
        for k in range(vals.size):
            if vals[k] < out[owners[k]]:
                out[owners[k]] = vals[k]
                arg[owners[k]] = pts[k]
        return out, arg


def _enumerate_faces(poly):
    """Yield ``(origin, basis)`` for every linearly independent active subset
    of inequality rows.  Vertices are pre-filtered for feasibility."""
    n = poly.n_vars
    e, e0, g, g0 = poly.eq_lhs, poly.eq_rhs, poly.ineq_lhs, poly.ineq_rhs
    if e.shape[0]:
        vp = np.linalg.lstsq(e, e0, rcond=None)[0]
        if np.max(np.abs(e @ vp - e0)) > FEAS_TOL * (1.0 + np.max(np.abs(e0))):
            return
        nb, _ = _nullspace(e, n)
    else:
        vp, nb = np.zeros(n), np.eye(n)
    d = nb.shape[1]
    gr = g @ nb
    hr = g0 - g @ vp
    m = g.shape[0]
    for k in range(0, min(d, m) + 1):
        for sub in combinations(range(m), k):
            sub = list(sub)
            if k:
                rows = gr[sub]
                z, rank = _nullspace(rows, d)
                if rank < k:
                    continue
                y0 = np.linalg.lstsq(rows, hr[sub], rcond=None)[0]
            else:
                z, y0 = np.eye(d), np.zeros(d)
            origin = vp + nb @ y0
            basis = nb @ z
            if basis.shape[1] == 0 and not poly.contains(origin):
                continue
            yield origin, basis


def qp_global_min(q, poly):
    """Global minimum of ``v'Qv`` over a bounded polytope.

    Returns ``(min_value, argmin)``.  Raises EmptyFeasible when the polytope
    is empty.
    """
    q = check_symmetric(q, "Q")
    if q.shape[0] != poly.n_vars:
        raise DimensionError("Q does not match the polytope dimension")
    if lp_feasible_point(poly) is None:
        raise EmptyFeasible("polytope is empty")
    value, arg, _ = FaceSet.build([poly]).minimize(q)
    return value, arg
