"""Quadratic-form matrices for CQLF/EQLF certificates and their validation."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._validation import as_matrix, as_vector, check_random_state, check_symmetric
from .exceptions import DimensionError, NegativityError, NoSolutionError
from .lcp import lcp_solve_all
from .numkit import is_positive_definite
from .system import Dlcs, simulate

DECREASE_SLACK = 1e-8


def _check_p(dlcs, p, size, name="P"):
    p = check_symmetric(p, name)
    if p.shape[0] != size:
        raise DimensionError(f"{name} is {p.shape}, expected size {size}")
    return p


def split_blocks(p, n_x):
    """(P_xx, P_xlam, P_lamlam) of a full EQLF matrix."""
    return p[:n_x, :n_x], p[:n_x, n_x:], p[n_x:, n_x:]


def build_M(dlcs, p_xx):
    """[[A'PA - P, A'PC], [C'PA, C'PC]]."""
    p = _check_p(dlcs, p_xx, dlcs.n_x, "P_xx")
    a, c = dlcs.a, dlcs.c
    pa, pc = p @ a, p @ c
    top = np.hstack([a.T @ pa - p, a.T @ pc])
    bot = np.hstack([c.T @ pa, c.T @ pc])
    m = np.vstack([top, bot])
    return 0.5 * (m + m.T)


def build_Mhat(dlcs, p):
    """The (n_x + 2 n_c) decrease matrix of an extended quadratic form."""
    nx, nc = dlcs.n_x, dlcs.n_c
    p = _check_p(dlcs, p, nx + nc)
    pxx, pxl, pll = split_blocks(p, nx)
    a, c = dlcs.a, dlcs.c
    m = np.zeros((nx + 2 * nc, nx + 2 * nc))
    x, l, lh = slice(0, nx), slice(nx, nx + nc), slice(nx + nc, nx + 2 * nc)
    m[x, x] = a.T @ pxx @ a - pxx
    m[x, l] = a.T @ pxx @ c - pxl
    m[x, lh] = a.T @ pxl
    m[l, x] = c.T @ pxx @ a - pxl.T
    m[l, l] = c.T @ pxx @ c - pll
    m[l, lh] = c.T @ pxl
    m[lh, x] = pxl.T @ a
    m[lh, l] = pxl.T @ c
    m[lh, lh] = pll
    return 0.5 * (m + m.T)


def build_Q_cqlf(lcs, p_xx):
    """Continuous-time decrease matrix [[A~'P + PA~, PC~], [C~'P, 0]]."""
    p = check_symmetric(p_xx, "P_xx")
    if p.shape[0] != lcs.n_x:
        raise DimensionError("P_xx does not match n_x")
    a, c = lcs.a_tilde, lcs.c_tilde
    nc = lcs.n_c
    q = np.block([[a.T @ p + p @ a, p @ c], [c.T @ p, np.zeros((nc, nc))]])
    return 0.5 * (q + q.T)


def lemma_residual(lcs, p_xx, dt, theta):
    """inf-norm of ``M(P) - dt N'Q(P)N`` for the discretized system; this is
    second order in ``dt``."""
    from .system import discretize

    dlcs = discretize(lcs, dt, theta)
    nx, nc = dlcs.n_x, dlcs.n_c
    n = np.block([[dlcs.a, dlcs.c], [np.zeros((nc, nx)), np.eye(nc)]])
    r = build_M(dlcs, p_xx) - dt * n.T @ build_Q_cqlf(lcs, p_xx) @ n
    return float(np.max(np.abs(r)))


def lyapunov_value(p, z):
    z = np.asarray(z, dtype=float)
    return float(z @ p @ z)


def eval_decrease_identity(dlcs, p, x, lam, lam_hat=None):
    """Both sides of ``psi = V(next) - V(now)``.

    CQLF mode when ``p`` is n_x-square; EQLF mode (``lam_hat`` required)
    when it is (n_x + n_c)-square.
    """
    x = as_vector(x, "x", dlcs.n_x)
    lam = as_vector(lam, "lam", dlcs.n_c)
    p = as_matrix(p, "P")
    x_next = dlcs.a @ x + dlcs.c @ lam
    if p.shape[0] == dlcs.n_x:
        z = np.concatenate([x, lam])
        lhs = lyapunov_value(build_M(dlcs, p), z)
        rhs = lyapunov_value(p, x_next) - lyapunov_value(p, x)
        return lhs, rhs
    if lam_hat is None:
        raise DimensionError("EQLF mode needs lam_hat")
    lam_hat = as_vector(lam_hat, "lam_hat", dlcs.n_c)
    z = np.concatenate([x, lam, lam_hat])
    lhs = lyapunov_value(build_Mhat(dlcs, p), z)
    rhs = lyapunov_value(p, np.concatenate([x_next, lam_hat])) - lyapunov_value(
        p, np.concatenate([x, lam])
    )
    return lhs, rhs


def _h_matrix(dlcs):
    nx, nc = dlcs.n_x, dlcs.n_c
    return np.block([[dlcs.d, dlcs.f], [np.zeros((nc, nx)), np.eye(nc)]])


def _check_multiplier(w, size, name):
    w = check_symmetric(w, name)
    if w.shape[0] != size:
        raise DimensionError(f"{name} is {w.shape}, expected {size}x{size}")
    if np.any(w < 0):
        raise NegativityError(f"{name} has negative entries")
    return w


def build_slemma_cqlf(dlcs, p_xx, w):
    """``M(P) + H'WH`` with ``H = [[D, F], [0, I]]``; W is 2n_c-square."""
    w = _check_multiplier(w, 2 * dlcs.n_c, "W")
    h = _h_matrix(dlcs)
    return build_M(dlcs, p_xx) + h.T @ w @ h


def build_slemma_eqlf(dlcs, p, w1, w2, w3):
    """(P - H'W1 H, M^(P) + J'W2 J + J''W3 J') for the extended form."""
    nx, nc = dlcs.n_x, dlcs.n_c
    w1 = _check_multiplier(w1, 2 * nc, "W1")
    w2 = _check_multiplier(w2, 2 * nc, "W2")
    w3 = _check_multiplier(w3, 2 * nc, "W3")
    p = _check_p(dlcs, p, nx + nc)
    h = _h_matrix(dlcs)
    z = np.zeros((nc, nc))
    j = np.block([[dlcs.d, dlcs.f, z], [np.zeros((nc, nx)), np.eye(nc), z]])
    jp = np.block(
        [[dlcs.d @ dlcs.a, dlcs.d @ dlcs.c, dlcs.f], [np.zeros((nc, nx)), z, np.eye(nc)]]
    )
    pos = p - h.T @ w1 @ h
    dec = build_Mhat(dlcs, p) + j.T @ w2 @ j + jp.T @ w3 @ jp
    return pos, dec


def is_negative_definite(m):
    m = check_symmetric(m, "matrix")
    return is_positive_definite(-m)


@dataclass
class ValidationReport:
    mode: str
    n_traj: int
    horizon: int
    seed: int
    positive: bool
    max_increase: float
    decay_ratio: float
    passed: bool
    per_trajectory_max: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _fit_ratio(values):
    v = np.asarray(values, dtype=float)
    k = np.arange(v.size)
    ok = v > 1e-280
    if ok.sum() < 2:
        return 0.0
    slope = np.polyfit(k[ok], np.log(v[ok]), 1)[0]
    return float(np.exp(slope))


def _one_trajectory(dlcs, p, eqlf, x0, horizon):
    # EQLF needs lam_{k+1} for V(x_k, lam_{k+1}); simulate one extra step
    traj = simulate(dlcs, x0, horizon + (1 if eqlf else 0), "lex")
    if eqlf:
        vals = [
            lyapunov_value(p, np.concatenate([x, lam]))
            for x, lam in zip(traj.states[:-1], traj.multipliers)
        ]
    else:
        vals = [lyapunov_value(p, x) for x in traj.states]
    vals = np.array(vals)
    diffs = np.diff(vals)
    positive = bool(np.all(vals[np.array([np.any(x != 0) for x in traj.states[: vals.size]])] > 0))
    return vals, float(diffs.max(initial=-np.inf)), positive


def validate_certificate(dlcs, cert, n_traj=100, horizon=200, seed=0, jobs=1):
    """Simulate trajectories from seeded unit-sphere initial states and check
    that the certificate decreases along every one of them."""
    p = check_symmetric(cert, "certificate")
    eqlf = p.shape[0] == dlcs.n_x + dlcs.n_c and dlcs.n_c > 0
    if not eqlf and p.shape[0] != dlcs.n_x:
        raise DimensionError("certificate size matches neither CQLF nor EQLF")
    rng = check_random_state(seed)
    x0s = rng.standard_normal((n_traj, dlcs.n_x))
    x0s /= np.linalg.norm(x0s, axis=1, keepdims=True)

    def run(i):
        try:
            return _one_trajectory(dlcs, p, eqlf, x0s[i], horizon)
        except NoSolutionError as exc:
            raise NoSolutionError(str(exc), step=exc.step, trajectory=i) from exc

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run, range(n_traj)))
    else:
        results = [run(i) for i in range(n_traj)]

    if eqlf:
        # every branch of the graph of SOL at the sampled states
        positive = all(
            lyapunov_value(p, np.concatenate([x, sol.lam])) > 0
            for x in x0s
            for sol in lcp_solve_all(dlcs.d @ x, dlcs.f)
        )
    else:
        positive = is_positive_definite(p)
    per_max, ratios = [], []
    for vals, dmax, pos in results:
        positive = positive and pos
        per_max.append(dmax)
        ratios.append(_fit_ratio(vals))
    max_inc = max(per_max) if per_max else -np.inf
    ratio = max(ratios) if ratios else 0.0
    passed = bool(positive and max_inc <= DECREASE_SLACK)
    return ValidationReport(
        "eqlf" if eqlf else "cqlf",
        n_traj,
        horizon,
        seed if isinstance(seed, int) else -1,
        bool(positive),
        float(max_inc),
        float(ratio),
        passed,
        [float(v) for v in per_max],
    )
