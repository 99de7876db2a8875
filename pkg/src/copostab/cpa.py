"""Exact cutting-plane search for CQLF/EQLF certificates.

The semi-infinite program ``max mu s.t. u'Pu >= mu (u in U), -v'M(P)v >= mu
(v in V)`` is attacked by alternating a master LP over finitely many cuts
with exact separation over the nonconvex cones.  Separation enumerates the
complementarity pieces of the cone and minimizes the quadratic form over each
piece exactly (KKT points of every face), which gives the same optimum as the
mixed-integer formulation with binaries y, z, w.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from itertools import product

import numpy as np

from ._validation import check_random_state, check_symmetric
from .exceptions import BudgetError, DimensionError
from .lcp import assert_solvability_class, lcp_solve_all
from .lyapunov import build_M, build_Mhat
from .numkit import FEAS_TOL, FaceSet, LpStatus, Polytope, lp_feasible_point, lp_solve

logger = logging.getLogger(__name__)

ENUM_BUDGET = 14
DUP_TOL = 1e-9
DEFAULT_EPS = 1e-6
DEFAULT_MAX_ITER = 500


class Mode(str, Enum):
    CQLF = "cqlf"
    EQLF = "eqlf"


class Status(str, Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class ConePattern:
    """One piece of a cone: orthant ``sigma`` of x, support ``z`` of lam and,
    for the extended cone, support ``w`` of lam_hat."""

    mode: str
    sigma: tuple
    z: frozenset = frozenset()
    w: frozenset = frozenset()


def _subsets(n):
    for mask in range(2 ** n):
        yield frozenset(i for i in range(n) if mask >> i & 1)


def _piece_polytope(dlcs, mode, sigma, z, w):
    nx, nc = dlcs.n_x, dlcs.n_c
    d, f = dlcs.d, dlcs.f
    if mode == "orthant":
        nv = nx
    elif mode == "K":
        nv = nx + nc
    else:
        nv = nx + 2 * nc
    eq, eq_rhs, ineq = [], [], []

    def row():
        return np.zeros(nv)

    for i, s in enumerate(sigma):
        r = row()
        r[i] = s
        ineq.append(r)
    if mode in ("K", "K_hat"):
        for i in range(nc):
            r = row()
            r[nx + i] = 1.0
            comp = row()
            comp[:nx] = d[i]
            comp[nx:nx + nc] = f[i]
            if i in z:
                ineq.append(r)
                eq.append(comp)
            else:
                eq.append(r)
                ineq.append(comp)
            eq_rhs.append(0.0)
    if mode == "K_hat":
        da, dc = d @ dlcs.a, d @ dlcs.c
        off = nx + nc
        for i in range(nc):
            r = row()
            r[off + i] = 1.0
            comp = row()
            comp[:nx] = da[i]
            comp[nx:off] = dc[i]
            comp[off:] = f[i]
            if i in w:
                ineq.append(r)
                eq.append(comp)
            else:
                eq.append(r)
                ineq.append(comp)
            eq_rhs.append(0.0)
    norm = row()
    norm[:nx] = sigma
    norm[nx:] = 1.0
    eq.append(norm)
    eq_rhs.append(1.0)
    return Polytope(np.array(eq), np.array(eq_rhs), np.array(ineq), np.zeros(len(ineq)))


def enumerate_pieces(dlcs, mode):
    """Nonempty pieces of the 1-norm slice of a cone.

    ``mode`` is ``"orthant"`` (all of R^{n_x}), ``"K"`` (graph of SOL(Dx, F))
    or ``"K_hat"`` (K extended by lam_hat in SOL(D(Ax + C lam), F)).
    Returns a list of ``(ConePattern, Polytope)`` in enumeration order.
    """
    nx, nc = dlcs.n_x, dlcs.n_c
    binaries = {"orthant": nx, "K": nx + nc, "K_hat": nx + 2 * nc}
    if mode not in binaries:
        raise ValueError(f"unknown cone {mode!r}")
    if binaries[mode] > ENUM_BUDGET:
        raise BudgetError(f"{binaries[mode]} binaries exceed the budget of {ENUM_BUDGET}")
    zs = list(_subsets(nc)) if mode in ("K", "K_hat") else [frozenset()]
    ws = list(_subsets(nc)) if mode == "K_hat" else [frozenset()]
    out = []
    for sigma in product((1.0, -1.0), repeat=nx):
        for z in zs:
            for w in ws:
                poly = _piece_polytope(dlcs, mode, sigma, z, w)
                if lp_feasible_point(poly) is None:
                    continue
                out.append((ConePattern(mode, tuple(int(s) for s in sigma), z, w), poly))
    return out


@dataclass
class CutSet:
    u_cuts: list = field(default_factory=list)
    v_cuts: list = field(default_factory=list)

    def copy(self):
        return CutSet([u.copy() for u in self.u_cuts], [v.copy() for v in self.v_cuts])


def _sym_basis(n):
    idx = [(i, j) for i in range(n) for j in range(i, n)]
    basis = []
    for i, j in idx:
        e = np.zeros((n, n))
        e[i, j] = e[j, i] = 1.0
        basis.append(e)
    return idx, basis


def _unpack(p_vec, n, idx):
    p = np.zeros((n, n))
    for val, (i, j) in zip(p_vec, idx):
        p[i, j] = p[j, i] = val
    return p


class CertificateProblem:
    """Cones, matrix maps and piece enumerations for one (system, mode)."""

    def __init__(self, dlcs, mode):
        self.dlcs = dlcs
        self.mode = Mode(mode)
        nx, nc = dlcs.n_x, dlcs.n_c
        if self.mode is Mode.CQLF:
            self.n = nx
            self.k1, self.k2 = "orthant", "K"
            self.m_map = lambda p: build_M(dlcs, p)
        else:
            self.n = nx + nc
            self.k1, self.k2 = "K", "K_hat"
            self.m_map = lambda p: build_Mhat(dlcs, p)
        self.idx, basis = _sym_basis(self.n)
        self.m_basis = [self.m_map(e) for e in basis]
        self._pieces = {}
        self._faces = {}

    def pieces(self, which):
        cone = self.k1 if which == "pos" else self.k2
        if cone not in self._pieces:
            self._pieces[cone] = enumerate_pieces(self.dlcs, cone)
        return self._pieces[cone]

    def faces(self, which):
        cone = self.k1 if which == "pos" else self.k2
        if cone not in self._faces:
            self._faces[cone] = FaceSet.build([poly for _, poly in self.pieces(which)])
        return self._faces[cone]

    def u_coef(self, u):
        return np.array([u[i] * u[j] * (1.0 if i == j else 2.0) for i, j in self.idx])

    def v_coef(self, v):
        return np.array([-(v @ mb @ v) for mb in self.m_basis])


def master_solve(cuts, problem):
    """Maximize mu subject to the cut inequalities and ``|P_ij| <= 1``.

    Returns ``(mu, P)``.  ``problem`` is a :class:`CertificateProblem`.
    """
    npar = len(problem.idx)
    nv = 1 + npar
    rows, rhs = [], []
    for u in cuts.u_cuts:
        rows.append(np.concatenate([[-1.0], problem.u_coef(u)]))
        rhs.append(0.0)
    for v in cuts.v_cuts:
        rows.append(np.concatenate([[-1.0], problem.v_coef(v)]))
        rhs.append(0.0)
    box = np.zeros((2 * npar, nv))
    box[:npar, 1:] = np.eye(npar)
    box[npar:, 1:] = -np.eye(npar)
    rows.extend(box)
    rhs.extend([-1.0] * (2 * npar))
    # mu <= n is implied once U is nonempty; it keeps the LP bounded otherwise
    cap = np.zeros(nv)
    cap[0] = -1.0
    rows.append(cap)
    rhs.append(-float(problem.n))
    c = np.zeros(nv)
    c[0] = 1.0
    res = lp_solve(Polytope(np.zeros((0, nv)), [], np.array(rows), np.array(rhs)), c)
    if res.status is not LpStatus.OPTIMAL:
        raise RuntimeError(f"master LP returned {res.status}")
    return float(res.x[0]), _unpack(res.x[1:], problem.n, problem.idx)


def _normalize(v):
    s = np.abs(v).sum()
    return v / s if s > 0 else v


def _separate(faces, q, fast):
    if not fast:
        return faces.minimize(q)
    per, arg = faces.minimize_per_owner(q)
    hits = np.nonzero(per <= 0.0)[0]
    if hits.size:
        k = int(hits[0])
        return float(per[k]), arg[k].copy(), k
    return faces.minimize(q)


def separate_pos(p, faces, fast=False):
    """``(nu1, u*)``: global minimum of ``u'Pu`` over the pieces of K1."""
    p = check_symmetric(p, "P")
    val, arg, _ = _separate(faces, p, fast)
    return val, _normalize(arg)


def separate_decrease(p, problem, faces=None, fast=False):
    """``(nu2, v*)``: global minimum of ``-v'M(P)v`` over the pieces of K2."""
    p = check_symmetric(p, "P")
    faces = faces if faces is not None else problem.faces("dec")
    val, arg, _ = _separate(faces, -problem.m_map(p), fast)
    return val, _normalize(arg)


@dataclass
class IterationRecord:
    iteration: int
    mu: float
    nu1: float = None
    nu2: float = None
    added_u: list = None
    added_v: list = None


@dataclass
class Verdict:
    status: Status
    mode: Mode
    certificate: np.ndarray
    mu: float
    margin: float
    iterations: int
    trace: list
    cuts: CutSet
    eps: float
    events: list = field(default_factory=list)
    solvability: object = None
    elapsed: float = 0.0
    n_pieces: dict = field(default_factory=dict)


def seed_cuts(problem, seed=0):
    """Initial cut set: coordinate directions for the CQLF, normalized LCP
    solutions at random states for the EQLF.  V starts empty."""
    dlcs = problem.dlcs
    nx = dlcs.n_x
    cuts = CutSet()
    if problem.mode is Mode.CQLF:
        for i in range(nx):
            for s in (1.0, -1.0):
                e = np.zeros(nx)
                e[i] = s
                cuts.u_cuts.append(e)
        return cuts
    rng = check_random_state(seed)
    for _ in range(2 * nx):
        x = rng.standard_normal(nx)
        for sol in lcp_solve_all(dlcs.d @ x, dlcs.f):
            cuts.u_cuts.append(_normalize(np.concatenate([x, sol.lam])))
    return cuts


def _is_duplicate(v, pool):
    return any(np.max(np.abs(v - c)) <= DUP_TOL for c in pool)


def _pick_cut(faces, q, witness, pool, eps):
    """Replace a duplicate witness by the most violated fresh candidate."""
    if not _is_duplicate(witness, pool):
        return witness
    pts, vals, _ = faces.candidates(q)
    order = np.argsort(vals, kind="stable")
    for k in order:
        if vals[k] >= eps:
            break
        cand = _normalize(pts[k])
        if not _is_duplicate(cand, pool):
            return cand
    return None


def run_cutting_plane(
    dlcs,
    mode="cqlf",
    eps=DEFAULT_EPS,
    max_iter=DEFAULT_MAX_ITER,
    seed=0,
    fast_sep=False,
    cuts=None,
    check_class=True,
):
    """Alternate master LP and exact separations until a certificate with
    margin ``eps`` is found, ruled out, or ``max_iter`` is reached."""
    t0 = time.perf_counter()
    problem = CertificateProblem(dlcs, mode)
    solv = None
    if check_class and dlcs.n_c:
        solv = assert_solvability_class(dlcs.f)
        if not solv.is_r0:
            raise ValueError("F must be an R0-matrix for the stability conditions to apply")
    cuts = cuts.copy() if cuts is not None else seed_cuts(problem, seed)
    faces_pos, faces_dec = problem.faces("pos"), problem.faces("dec")
    trace, events = [], []
    status, cert, mu, margin = Status.ITERATION_LIMIT, None, None, None
    it = 0
    while it < max_iter:
        mu, p = master_solve(cuts, problem)
        rec = IterationRecord(it, mu)
        trace.append(rec)
        it += 1
        if mu < eps:
            status, cert, margin = Status.INFEASIBLE, p, mu
            break
        nu1, u = separate_pos(p, faces_pos, fast_sep)
        q_dec = -problem.m_map(p)
        nu2, v = separate_decrease(p, problem, faces_dec, fast_sep)
        rec.nu1, rec.nu2 = nu1, nu2
        if min(nu1, nu2) >= eps:
            status, cert, margin = Status.FEASIBLE, p, min(nu1, nu2)
            break
        if nu1 < eps:
            cut = _pick_cut(faces_pos, p, u, cuts.u_cuts, eps)
            if cut is None:
                events.append(f"DegenerateCut(iteration={it - 1}, set=U)")
                logger.warning("duplicate U cut at iteration %d", it - 1)
            else:
                cuts.u_cuts.append(cut)
                rec.added_u = cut.tolist()
        if nu2 < eps:
            cut = _pick_cut(faces_dec, q_dec, v, cuts.v_cuts, eps)
            if cut is None:
                events.append(f"DegenerateCut(iteration={it - 1}, set=V)")
                logger.warning("duplicate V cut at iteration %d", it - 1)
            else:
                cuts.v_cuts.append(cut)
                rec.added_v = cut.tolist()
    else:
        cert = p if trace else None
        margin = mu
    return Verdict(
        status,
        problem.mode,
        cert,
        mu,
        margin,
        it,
        trace,
        cuts,
        eps,
        events,
        solv,
        time.perf_counter() - t0,
        {"pos": len(problem.pieces("pos")), "dec": len(problem.pieces("dec"))},
    )


def recheck_feasible(dlcs, verdict):
    """Fresh exact separations on the certificate: ``min(nu1, nu2)``."""
    problem = CertificateProblem(dlcs, verdict.mode)
    nu1, _ = separate_pos(verdict.certificate, problem.faces("pos"))
    nu2, _ = separate_decrease(verdict.certificate, problem)
    return min(nu1, nu2)


def recheck_infeasible(dlcs, verdict):
    """Master optimum over the final cut set (below eps for a refutation)."""
    problem = CertificateProblem(dlcs, verdict.mode)
    mu, _ = master_solve(verdict.cuts, problem)
    return mu


def in_cone(dlcs, v, cone, tol=1e-7):
    """Membership of ``v`` in the orthant/K/K_hat cone (any scale)."""
    nx, nc = dlcs.n_x, dlcs.n_c
    v = np.asarray(v, dtype=float)
    if cone == "orthant":
        return v.size == nx
    x, lam = v[:nx], v[nx:nx + nc]
    scale = tol * max(1.0, np.abs(v).max())

    def comp(l, w):
        return np.all(l >= -scale) and np.all(w >= -scale) and np.all(np.abs(l * w) <= scale)

    ok = comp(lam, dlcs.d @ x + dlcs.f @ lam)
    if cone == "K_hat":
        lh = v[nx + nc:]
        ok = ok and comp(lh, dlcs.d @ (dlcs.a @ x + dlcs.c @ lam) + dlcs.f @ lh)
    return bool(ok)


# -- MIQCP export -------------------------------------------------------------

MIQCP_SCHEMA = "copostab.miqcp/1"


def big_m_theta(dlcs):
    """Row bounds for ``Dx + F lam`` on the unit 1-norm ball."""
    d, f = dlcs.d, dlcs.f
    return [
        float(max(np.max(np.abs(d[i]), initial=-np.inf), np.max(f[i], initial=-np.inf)))
        for i in range(dlcs.n_c)
    ]


def big_m_Theta(dlcs):
    """Row bounds for ``DAx + DC lam + F lam_hat``."""
    da, dc, f = dlcs.d @ dlcs.a, dlcs.d @ dlcs.c, dlcs.f
    return [
        float(
            max(
                np.max(np.abs(da[i]), initial=-np.inf),
                np.max(f[i], initial=-np.inf),
                np.max(dc[i], initial=-np.inf),
            )
        )
        for i in range(dlcs.n_c)
    ]


def export_separation_miqcp(p, dlcs, mode, which):
    """A self-contained JSON-ready dict describing one separation MIQCP."""
    mode = Mode(mode)
    if which not in ("pos", "dec"):
        raise ValueError("which must be 'pos' or 'dec'")
    nx, nc = dlcs.n_x, dlcs.n_c
    p = check_symmetric(p, "P")
    expect = nx if mode is Mode.CQLF else nx + nc
    if p.shape[0] != expect:
        raise DimensionError(f"P must be {expect}x{expect}")
    with_lam = not (mode is Mode.CQLF and which == "pos")
    with_hat = mode is Mode.EQLF and which == "dec"

    variables = []

    def var(name, lb=0.0, ub=None, vtype="continuous"):
        variables.append({"name": name, "type": vtype, "lb": lb, "ub": ub})
        return name

    xp = [var(f"xp[{i}]") for i in range(nx)]
    xm = [var(f"xm[{i}]") for i in range(nx)]
    lam = [var(f"lam[{i}]") for i in range(nc)] if with_lam else []
    lamh = [var(f"lamhat[{i}]") for i in range(nc)] if with_hat else []
    nu = var("nu", lb=None)
    y = [var(f"y[{i}]", 0.0, 1.0, "binary") for i in range(nx)]
    z = [var(f"z[{i}]", 0.0, 1.0, "binary") for i in range(nc)] if with_lam else []
    w = [var(f"w[{i}]", 0.0, 1.0, "binary") for i in range(nc)] if with_hat else []

    # quadratic form over (x, lam, lam_hat) expressed in x = xp - xm
    if which == "pos":
        qmat = p
    else:
        qmat = -(build_M(dlcs, p) if mode is Mode.CQLF else build_Mhat(dlcs, p))
    dim = qmat.shape[0]
    terms = []  # (name, sign) per coordinate of the stacked vector
    coords = [[(xp[i], 1.0), (xm[i], -1.0)] for i in range(nx)]
    coords += [[(name, 1.0)] for name in lam + lamh]
    coords = coords[:dim]
    quad = {}
    for a in range(dim):
        for b in range(dim):
            if qmat[a, b] == 0.0:
                continue
            for na, sa in coords[a]:
                for nb, sb in coords[b]:
                    key = (na, nb)
                    quad[key] = quad.get(key, 0.0) + qmat[a, b] * sa * sb
    terms = [[a, b, float(v)] for (a, b), v in sorted(quad.items()) if v != 0.0]

    cons = []

    def row(name, coeffs, sense, rhs):
        cons.append(
            {"name": name, "coeffs": {k: float(v) for k, v in coeffs.items() if v != 0.0},
             "sense": sense, "rhs": float(rhs)}
        )

    norm = {n_: 1.0 for n_ in xp + xm + lam + lamh}
    row("one_norm", norm, "==", 1.0)
    for i in range(nx):
        row(f"split_pos[{i}]", {xp[i]: 1.0, y[i]: -1.0}, "<=", 0.0)
        row(f"split_neg[{i}]", {xm[i]: 1.0, y[i]: 1.0}, "<=", 1.0)
    big_m = {}
    if with_lam:
        theta = big_m_theta(dlcs)
        big_m["theta"] = theta
        for i in range(nc):
            row(f"lam_support[{i}]", {lam[i]: 1.0, z[i]: -1.0}, "<=", 0.0)
            coeffs = {}
            for j in range(nx):
                coeffs[xp[j]] = coeffs.get(xp[j], 0.0) + dlcs.d[i, j]
                coeffs[xm[j]] = coeffs.get(xm[j], 0.0) - dlcs.d[i, j]
            for k in range(nc):
                coeffs[lam[k]] = coeffs.get(lam[k], 0.0) + dlcs.f[i, k]
            row(f"comp_lo[{i}]", coeffs, ">=", 0.0)
            row(f"comp_hi[{i}]", {**coeffs, z[i]: theta[i]}, "<=", theta[i])
    if with_hat:
        big_theta = big_m_Theta(dlcs)
        big_m["Theta"] = big_theta
        da, dc = dlcs.d @ dlcs.a, dlcs.d @ dlcs.c
        for i in range(nc):
            row(f"lamhat_support[{i}]", {lamh[i]: 1.0, w[i]: -1.0}, "<=", 0.0)
            coeffs = {}
            for j in range(nx):
                coeffs[xp[j]] = coeffs.get(xp[j], 0.0) + da[i, j]
                coeffs[xm[j]] = coeffs.get(xm[j], 0.0) - da[i, j]
            for k in range(nc):
                coeffs[lam[k]] = coeffs.get(lam[k], 0.0) + dc[i, k]
                coeffs[lamh[k]] = coeffs.get(lamh[k], 0.0) + dlcs.f[i, k]
            row(f"comp_hat_lo[{i}]", coeffs, ">=", 0.0)
            row(f"comp_hat_hi[{i}]", {**coeffs, w[i]: big_theta[i]}, "<=", big_theta[i])

    return {
        "schema": MIQCP_SCHEMA,
        "mode": mode.value,
        "which": which,
        "variables": variables,
        "binaries": y + z + w,
        "objective": {
            "sense": "minimize",
            "linear": {nu: 1.0},
            # epigraph row: sum(coef * a * b) - nu <= 0
            "quadratic": terms,
            "epigraph_variable": nu,
        },
        "constraints": cons,
        "big_m": big_m,
    }
