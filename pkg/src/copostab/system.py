"""LCS/DLCS models, theta-scheme discretization, equilibria and simulation."""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._validation import as_matrix, as_vector, check_random_state
from .exceptions import (
    DimensionError,
    EmptyResult,
    NoSolutionError,
    PreconditionError,
    SingularError,
    StepSizeError,
)
from .lcp import index_partition, is_P_matrix, lcp_solve_all
from .numkit import FEAS_TOL, lu_factor, lu_solve, solve_linear, spectral_norm

EQ_DEDUP_TOL = 1e-8
BRANCH_BUDGET = 256


def _conform(a, c, d, f):
    a = as_matrix(a, "A")
    nx = a.shape[0]
    if a.shape != (nx, nx):
        raise DimensionError(f"A must be square, got {a.shape}")
    f = as_matrix(f, "F")
    nc = f.shape[0]
    if f.shape != (nc, nc):
        raise DimensionError(f"F must be square, got {f.shape}")
    c = as_matrix(c, "C", (nx, nc))
    d = as_matrix(d, "D", (nc, nx))
    return a, c, d, f


@dataclass(frozen=True)
class Dlcs:
    """x_{k+1} = A x_k + C lam_{k+1},  0 <= lam_{k+1} _|_ D x_k + F lam_{k+1} >= 0."""

    a: np.ndarray
    c: np.ndarray
    d: np.ndarray
    f: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        a, c, d, f = _conform(self.a, self.c, self.d, self.f)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "f", f)

    @property
    def n_x(self):
        return self.a.shape[0]

    @property
    def n_c(self):
        return self.f.shape[0]


@dataclass(frozen=True)
class Lcs:
    """dx/dt = A~ x + C~ lam,  0 <= lam _|_ D~ x + F~ lam >= 0."""

    a_tilde: np.ndarray
    c_tilde: np.ndarray
    d_tilde: np.ndarray
    f_tilde: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        a, c, d, f = _conform(self.a_tilde, self.c_tilde, self.d_tilde, self.f_tilde)
        object.__setattr__(self, "a_tilde", a)
        object.__setattr__(self, "c_tilde", c)
        object.__setattr__(self, "d_tilde", d)
        object.__setattr__(self, "f_tilde", f)

    @property
    def n_x(self):
        return self.a_tilde.shape[0]

    @property
    def n_c(self):
        return self.f_tilde.shape[0]


@dataclass(frozen=True)
class InhomogeneousDlcs:
    base: Dlcs
    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g", as_vector(self.g, "g", self.base.n_x))
        object.__setattr__(self, "h", as_vector(self.h, "h", self.base.n_c))


@dataclass
class Trajectory:
    states: list
    multipliers: list = field(default_factory=list)
    branch_log: list = field(default_factory=list)

    @property
    def steps(self):
        return len(self.states) - 1

    def complementarity_residual(self, dlcs):
        """Worst violation of sign and complementarity over all steps."""
        worst = 0.0
        for x, lam in zip(self.states[:-1], self.multipliers):
            w = dlcs.d @ x + dlcs.f @ lam
            worst = max(worst, -lam.min(initial=0.0), -w.min(initial=0.0), abs(lam @ w))
        return worst


@dataclass(frozen=True)
class StepSizeCheck:
    theta_norm: float
    resolvent_norm: float
    ok: bool


def check_step_size(lcs, dt, theta):
    """Both time-step bounds: dt*theta*||A~|| < 1 and dt*||R A~|| < 1."""
    nx = lcs.n_x
    t1 = dt * theta * spectral_norm(lcs.a_tilde)
    if t1 >= 1.0:
        return StepSizeCheck(t1, float("nan"), False)
    r = np.linalg.inv(np.eye(nx) - theta * dt * lcs.a_tilde) if nx else np.zeros((0, 0))
    t2 = dt * spectral_norm(r @ lcs.a_tilde)
    return StepSizeCheck(t1, t2, t2 < 1.0)


def discretize(lcs, dt, theta):
    """Theta-scheme time stepping of an LCS written as a DLCS.

    With ``R = (I - theta dt A~)^-1``: ``A = I + dt R A~``, ``C = dt R C~``,
    ``D = D~ A`` and ``F = F~ + dt D~ R C~``.
    """
    if dt <= 0:
        raise StepSizeError(f"dt must be positive, got {dt}")
    if not 0.0 <= theta <= 1.0:
        raise StepSizeError(f"theta must lie in [0, 1], got {theta}")
    check = check_step_size(lcs, dt, theta)
    if not check.ok:
        raise StepSizeError(
            f"dt={dt}, theta={theta} violates the step bounds "
            f"({check.theta_norm:.4g}, {check.resolvent_norm:.4g})"
        )
    nx = lcs.n_x
    lu, perm = lu_factor(np.eye(nx) - theta * dt * lcs.a_tilde)
    r_a = np.column_stack([lu_solve(lu, perm, col) for col in lcs.a_tilde.T]) if nx else lcs.a_tilde
    r_c = (
        np.column_stack([lu_solve(lu, perm, col) for col in lcs.c_tilde.T])
        if lcs.n_c
        else np.zeros((nx, 0))
    )
    a = np.eye(nx) + dt * r_a
    c = dt * r_c
    d = lcs.d_tilde @ a
    f = lcs.f_tilde + dt * lcs.d_tilde @ r_c
    return Dlcs(a, c, d, f, name=lcs.name)


class BranchPolicy:
    """Selects one LCP solution when several exist."""

    def __init__(self, kind="lex", seed=None):
        if kind not in ("lex", "random"):
            raise ValueError(f"unknown branch policy {kind!r}")
        self.kind = kind
        self.rng = check_random_state(seed)

    def choose(self, solutions):
        if self.kind == "lex" or len(solutions) == 1:
            return solutions[0]
        return solutions[int(self.rng.integers(len(solutions)))]


def _as_policy(policy, seed=None):
    if isinstance(policy, BranchPolicy):
        return policy
    return BranchPolicy(policy or "lex", seed)


def step(dlcs, x, policy="lex"):
    """One DLCS step: returns ``(x_next, lam_next, pattern)``."""
    x = as_vector(x, "x", dlcs.n_x)
    sols = lcp_solve_all(dlcs.d @ x, dlcs.f)
    if not sols:
        raise NoSolutionError(f"LCP(Dx, F) has no solution at x={x}")
    sol = _as_policy(policy).choose(sols)
    return dlcs.a @ x + dlcs.c @ sol.lam, sol.lam, sol.pattern


def simulate(dlcs, x0, steps, policy="lex", seed=None):
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    pol = _as_policy(policy, seed)
    x = as_vector(x0, "x0", dlcs.n_x)
    traj = Trajectory([x])
    for k in range(steps):
        try:
            x, lam, pattern = step(dlcs, x, pol)
        except NoSolutionError as exc:
            raise NoSolutionError(str(exc), step=k) from exc
        traj.states.append(x)
        traj.multipliers.append(lam)
        traj.branch_log.append(tuple(sorted(pattern)))
    return traj


def explore_branches(dlcs, x0, steps, budget=BRANCH_BUDGET):
    """Breadth-first enumeration of every LCP branch, capped at ``budget``
    live trajectories.  Branches are kept in lexicographic pattern order."""
    x0 = as_vector(x0, "x0", dlcs.n_x)
    frontier = [Trajectory([x0])]
    truncated = False
    for k in range(steps):
        nxt = []
        for traj in frontier:
            x = traj.states[-1]
            sols = lcp_solve_all(dlcs.d @ x, dlcs.f)
            if not sols:
                raise NoSolutionError(f"LCP(Dx, F) has no solution at x={x}", step=k)
            for sol in sols:
                if len(nxt) >= budget:
                    truncated = True
                    break
                nxt.append(
                    Trajectory(
                        traj.states + [dlcs.a @ x + dlcs.c @ sol.lam],
                        traj.multipliers + [sol.lam],
                        traj.branch_log + [tuple(sorted(sol.pattern))],
                    )
                )
        frontier = nxt
    return frontier, truncated


def find_equilibrium(sys):
    """All equilibria ``(x_e, lam_e)`` of an inhomogeneous DLCS by pattern
    enumeration.  Raises EmptyResult when no pattern admits one."""
    base = sys.base
    a, c, d, f = base.a, base.c, base.d, base.f
    nx, nc = base.n_x, base.n_c
    found = []
    for k in range(nc + 1):
        for sub in combinations(range(nc), k):
            s = list(sub)
            sbar = [i for i in range(nc) if i not in sub]
            # unknowns (x, lam_S)
            top = np.hstack([np.eye(nx) - a, -c[:, s]])
            bottom = np.hstack([d[s], f[np.ix_(s, s)]])
            lhs = np.vstack([top, bottom])
            rhs = np.concatenate([sys.g, -sys.h[s]])
            try:
                sol = solve_linear(lhs, rhs)
            except SingularError:
                continue
            x = sol[:nx]
            lam = np.zeros(nc)
            lam[s] = sol[nx:]
            w = d @ x + f @ lam + sys.h
            if np.any(lam[s] < -FEAS_TOL) or np.any(w[sbar] < -FEAS_TOL):
                continue
            lam[s] = np.maximum(lam[s], 0.0)
            z = np.concatenate([x, lam])
            if any(np.max(np.abs(z - np.concatenate(e))) <= EQ_DEDUP_TOL for e in found):
                continue
            found.append((x, lam))
    if not found:
        raise EmptyResult("no complementarity pattern admits an equilibrium")
    return found


def reduce_inhomogeneous(sys, eq):
    """Homogeneous DLCS in (dx, dlam_beta) around the equilibrium ``eq``."""
    base = sys.base
    if not is_P_matrix(base.f):
        raise PreconditionError("reduction requires F to be a P-matrix")
    x_e, lam_e = eq
    x_e = as_vector(x_e, "x_e", base.n_x)
    lam_e = as_vector(lam_e, "lam_e", base.n_c)
    w = base.d @ x_e + base.f @ lam_e + sys.h
    alpha, beta, _ = index_partition(lam_e, np.where(np.abs(w) <= 1e-8, 0.0, w), 1e-8)
    al, be = sorted(alpha), sorted(beta)
    a, c, d, f = base.a, base.c, base.d, base.f
    if al:
        lu, perm = lu_factor(f[np.ix_(al, al)])

        def finv(m):
            return np.column_stack([lu_solve(lu, perm, col) for col in m.T]) if m.shape[1] else m

        k_d = finv(d[al])
        k_f = finv(f[np.ix_(al, be)])
        a_hat = a - c[:, al] @ k_d
        c_hat = c[:, be] - c[:, al] @ k_f
        d_hat = d[be] - f[np.ix_(be, al)] @ k_d
        f_hat = f[np.ix_(be, be)] - f[np.ix_(be, al)] @ k_f
    else:
        a_hat, c_hat, d_hat, f_hat = a.copy(), c[:, be], d[be], f[np.ix_(be, be)]
    return Dlcs(a_hat, c_hat, d_hat, f_hat, name=base.name)
