"""Independent reference computations used by the test-suite.

Nothing here imports the code paths it is used to check, except for plain
problem data containers.
"""

from __future__ import annotations

import numpy as np


# -- planted SDP instances ---------------------------------------------------

def planted_sdp(rng: np.random.Generator, sizes, diag_sizes=(), m=None):
    """Random SDP whose optimum ``y*`` is known by construction.

    A strictly complementary pair ``(S*, X*)`` is drawn per block, random
    symmetric ``F_i`` are drawn, and ``F0``/``b`` are chosen so that the
    KKT conditions hold at ``y*``.  The number of variables is capped so the
    optimum is generically unique and isolated to first order.

    Returns ``(b, blocks, y_star)`` where ``blocks`` is a list of
    ``(F0, F, diagonal)`` tuples.
    """
    specs = []
    # y* is pinned to first order only if delta -> N'(sum delta_i F_i)N is
    # injective, N spanning ker S*; that needs m <= sum t(d - r).
    cap = 0
    for d in sizes:
        r = int(rng.integers(1, d)) if d > 1 else 0
        specs.append((d, r, False))
        cap += (d - r) * (d - r + 1) // 2
    for d in diag_sizes:
        r = int(rng.integers(0, d))
        specs.append((d, r, True))
        cap += d - r
    if m is None:
        m = int(rng.integers(1, cap + 1))
    m = max(1, min(m, cap))
    y_star = rng.normal(size=m)
    b = np.zeros(m)
    blocks = []
    for d, r, diagonal in specs:
        if diagonal:
            perm = rng.permutation(d)
            s_star = np.zeros(d)
            x_star = np.zeros(d)
            s_star[perm[:r]] = rng.uniform(0.5, 2.0, r)
            x_star[perm[r:]] = rng.uniform(0.5, 2.0, d - r)
            F = rng.normal(size=(m, d))
            F0 = s_star - y_star @ F
            b -= F @ x_star
        else:
            Q, _ = np.linalg.qr(rng.normal(size=(d, d)))
            S_star = (Q[:, :r] * rng.uniform(0.5, 2.0, r)) @ Q[:, :r].T
            X_star = (Q[:, r:] * rng.uniform(0.5, 2.0, d - r)) @ Q[:, r:].T
            G = rng.normal(size=(m, d, d))
            F = 0.5 * (G + G.transpose(0, 2, 1))
            F0 = S_star - np.tensordot(y_star, F, axes=1)
            F0 = 0.5 * (F0 + F0.T)
            b -= np.einsum("iab,ab->i", F, X_star)
        blocks.append((F0, F, diagonal))
    return b, blocks, y_star


# -- grid value iteration for scalar problems --------------------------------

def value_iteration_1d(a, b_u, q, r, gamma, u_lo, u_hi, x_max=30.0, n_x=2001,
                       n_u=401, tol=1e-11, max_iter=5000):
    """Optimal value of ``x+ = a x + b_u u`` with cost ``q x^2 + r u^2``.

    Piecewise-linear interpolation on a uniform grid; the input set is a
    uniform grid over ``[u_lo, u_hi]``.  Both discretisations only remove
    options or over-estimate a convex value function, so the result sits
    above the true optimum up to the iteration tolerance.
    Returns ``(grid, values, policy)``.
    """
    xs = np.linspace(-x_max, x_max, n_x)
    us = np.linspace(u_lo, u_hi, n_u)
    nxt = a * xs[:, None] + b_u * us[None, :]
    stage = q * xs[:, None] ** 2 + r * us[None, :] ** 2
    # linear weights, computed once
    h = xs[1] - xs[0]
    pos = np.clip((nxt - xs[0]) / h, 0, n_x - 1)
    lo = np.minimum(np.floor(pos).astype(int), n_x - 2)
    w = pos - lo
    V = np.zeros(n_x)
    for _ in range(max_iter):
        Vn = (1 - w) * V[lo] + w * V[lo + 1]
        Q = stage + gamma * Vn
        V_new = Q.min(axis=1)
        delta = np.abs(V_new - V).max()
        V = V_new
        if delta <= tol * (1 - gamma):
            break
    Vn = (1 - w) * V[lo] + w * V[lo + 1]
    policy = us[np.argmin(stage + gamma * Vn, axis=1)]
    return xs, V, policy


def unconstrained_value_iteration_1d(a, b_u, q, r, gamma, x_max=5.0, n_x=4001, n_u=4001,
                                     u_max=20.0):
    """Grid value iteration with a wide input range (effectively unconstrained)."""
    return value_iteration_1d(a, b_u, q, r, gamma, -u_max, u_max, x_max=x_max, n_x=n_x, n_u=n_u)


# -- quadratic basis written out longhand ------------------------------------

def monomials(x):
    """``(1, x_1..x_n, x_i x_j for i <= j)`` in row-major upper-triangular order."""
    x = np.asarray(x, dtype=float)
    n = x.size
    out = [1.0] + list(x)
    for i in range(n):
        for j in range(i, n):
            out.append(x[i] * x[j])
    return np.array(out)


def quadratic_longhand(P, p, s, x):
    x = np.asarray(x, dtype=float)
    total = s
    for i in range(x.size):
        total += p[i] * x[i]
        for j in range(x.size):
            total += P[i][j] * x[i] * x[j]
    return total


# -- single Bellman inequality for the scalar example, by hand ---------------

def single_bi_1d(a, b_u, q, r, gamma, u_max, x0_var, n_grid=200_001):
    """Best ``P x^2 + s`` with ``V <= l + gamma V(x+)`` for all ``x`` and ``|u| <= u_max``.

    For fixed ``P`` the constraint reduces to ``(1 - gamma) s <= min_u c(P) u^2``
    after minimising over ``x`` in closed form, so the optimum is a scalar
    search over ``P``.  Returns ``(P, s, objective)`` with the objective
    ``x0_var * P + s``.
    """
    P = np.linspace(0.0, (q / (1 - gamma * a * a)) * (1 - 1e-9), n_grid)
    curv = q + gamma * P * a * a - P                      # coefficient of x^2
    cross = gamma * P * a * b_u                           # x u coefficient / 2
    quad_u = r + gamma * P * b_u * b_u
    c = quad_u - cross ** 2 / curv
    s = np.minimum(0.0, c) * u_max ** 2 / (1 - gamma)
    obj = x0_var * P + s
    k = int(np.argmax(obj))
    # refine with a golden-section search around the grid optimum
    lo, hi = P[max(k - 1, 0)], P[min(k + 1, n_grid - 1)]

    def f(p):
        cv = q + gamma * p * a * a - p
        cc = r + gamma * p * b_u * b_u - (gamma * p * a * b_u) ** 2 / cv
        return x0_var * p + min(0.0, cc) * u_max ** 2 / (1 - gamma)

    g = (np.sqrt(5) - 1) / 2
    for _ in range(200):
        m1, m2 = hi - g * (hi - lo), lo + g * (hi - lo)
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    p = 0.5 * (lo + hi)
    cv = q + gamma * p * a * a - p
    cc = r + gamma * p * b_u * b_u - (gamma * p * a * b_u) ** 2 / cv
    return p, min(0.0, cc) * u_max ** 2 / (1 - gamma), f(p)
