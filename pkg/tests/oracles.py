"""Independent sampling oracles for cone minimization.

Nothing here uses copostab internals: LCPs are solved by vectorized support
enumeration and local refinement is done by scipy's SLSQP.
"""
from itertools import combinations

import numpy as np
from scipy.optimize import minimize


def quad_M(a, c, p):
    return np.block([[a.T @ p @ a - p, a.T @ p @ c], [c.T @ p @ a, c.T @ p @ c]])


def quad_Mhat(a, c, p):
    nx = a.shape[0]
    pxx, pxl, pll = p[:nx, :nx], p[:nx, nx:], p[nx:, nx:]
    return np.block([
        [a.T @ pxx @ a - pxx, a.T @ pxx @ c - pxl, a.T @ pxl],
        [c.T @ pxx @ a - pxl.T, c.T @ pxx @ c - pll, c.T @ pxl],
        [pxl.T @ a, pxl.T @ c, pll],
    ])


def batch_lcp(q, f):
    """All support-pattern solutions of LCP(q_k, F) for a batch of q.

    Returns ``(idx, lam)``: row k of ``lam`` solves the LCP for ``q[idx[k]]``.
    F is assumed to have nonsingular principal submatrices.
    """
    n_s, nc = q.shape
    idx, out = [], []
    for k in range(nc + 1):
        for sub in combinations(range(nc), k):
            s = list(sub)
            lam = np.zeros((n_s, nc))
            if s:
                lam[:, s] = np.linalg.solve(f[np.ix_(s, s)], -q[:, s].T).T
            w = lam @ f.T + q
            # LCP solutions scale with q, so the tolerance does too
            tol = 1e-12 * np.abs(q).max(axis=1)
            ok = np.all(lam >= -tol[:, None], axis=1) & np.all(w >= -tol[:, None], axis=1)
            idx.append(np.nonzero(ok)[0])
            out.append(np.maximum(lam[ok], 0.0))
    return np.concatenate(idx), np.vstack(out)


def _normalize(v):
    return v / np.abs(v).sum(axis=1, keepdims=True)


def sample_cone(rng, sys_, cone, n):
    """``n`` (or a few more) points of the cone on the unit 1-norm sphere."""
    a, c, d, f = sys_
    nx = a.shape[0]
    x = rng.standard_normal((n, nx)) * rng.exponential(size=(n, nx)) ** 2
    x[rng.random((n, nx)) < 0.15] = 0.0
    x[np.all(x == 0, axis=1), 0] = 1.0
    if cone == "orthant":
        return _normalize(x)
    i, lam = batch_lcp(x @ d.T, f)
    pts = np.hstack([x[i], lam])
    if cone == "K":
        return _normalize(pts)
    j, lh = batch_lcp((x[i] @ a.T + lam @ c.T) @ d.T, f)
    return _normalize(np.hstack([pts[j], lh]))


def _piece_constraints(sys_, cone, v, tol=1e-9):
    """Linear constraints of the piece containing the sample ``v``."""
    a, c, d, f = sys_
    nx, nc = a.shape[0], f.shape[0]
    n = v.size
    sigma = np.where(v[:nx] >= 0, 1.0, -1.0)
    eq, ineq = [], []
    norm = np.ones(n)
    norm[:nx] = sigma
    eq.append((norm, 1.0))
    for i in range(nx):
        r = np.zeros(n)
        r[i] = sigma[i]
        ineq.append(r)
    blocks = []
    if cone in ("K", "K_hat"):
        blocks.append((slice(nx, nx + nc), np.hstack([d, f, np.zeros((nc, n - nx - nc))])))
    if cone == "K_hat":
        blocks.append((slice(nx + nc, n), np.hstack([d @ a, d @ c, f])))
    for sl, rows in blocks:
        lam = v[sl]
        for i in range(nc):
            e = np.zeros(n)
            e[sl.start + i] = 1.0
            if lam[i] > tol:
                ineq.append(e)
                eq.append((rows[i], 0.0))
            else:
                eq.append((e, 0.0))
                ineq.append(rows[i])
    return eq, ineq, sigma


def polish(q, sys_, cone, v):
    eq, ineq, _ = _piece_constraints(sys_, cone, v)
    e = np.array([r for r, _ in eq])
    e0 = np.array([b for _, b in eq])
    g = np.array(ineq)
    res = minimize(
        lambda z: z @ q @ z,
        v,
        jac=lambda z: 2 * q @ z,
        constraints=[
            {"type": "eq", "fun": lambda z: e @ z - e0, "jac": lambda z: e},
            {"type": "ineq", "fun": lambda z: g @ z, "jac": lambda z: g},
        ],
        method="SLSQP",
        options={"ftol": 1e-14, "maxiter": 500},
    )
    z = res.x
    if np.max(np.abs(e @ z - e0)) > 1e-8 or np.min(g @ z) < -1e-8:
        return np.inf
    return float(z @ q @ z)


def cone_minimum(rng, q, sys_, cone, n_samples=10_000, starts_per_piece=4):
    """``(sampled_min, polished_min)`` of ``v'Qv`` over the cone slice."""
    pts = sample_cone(rng, sys_, cone, n_samples)
    vals = np.einsum("ij,jk,ik->i", pts, q, pts)
    sampled = float(vals.min())
    nx = sys_[0].shape[0]
    keys = [
        (tuple(p[:nx] >= 0), tuple(p[nx:] > 1e-9)) for p in pts
    ]
    by_piece = {}
    for k, key in enumerate(keys):
        by_piece.setdefault(key, []).append(k)
    best = sampled
    for members in by_piece.values():
        members = sorted(members, key=lambda k: vals[k])[:starts_per_piece]
        for k in members:
            best = min(best, polish(q, sys_, cone, pts[k]))
    return sampled, best
