"""Policies and Monte-Carlo sub-optimality certificates."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .lmi import lifted_basis
from .lq_model import LQProblem, discounted_riccati, horizon_for, rollout_costs
from .quad_value import VFFamily, eval_pwm

__all__ = [
    "Policy",
    "clipped_lqr_policy",
    "greedy_policy",
    "GapReport",
    "certify",
]


class Policy:
    """Callable state-feedback map; accepts one state or stacked rows."""

    def __init__(self, prob: LQProblem, fn, name: str):
        self.prob = prob
        self._fn = fn
        self.name = name

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        X = x.reshape(-1, self.prob.n_x)
        U = self._fn(X)
        return U[0] if single else U

    def __repr__(self) -> str:
        return f"Policy({self.name})"


def clipped_lqr_policy(prob: LQProblem, **riccati_kw) -> Policy:
    """``u = clip(-K x, u_lo, u_hi)`` with the discounted LQR gain."""
    _, K, _ = discounted_riccati(prob, **riccati_kw)

    def fn(X):
        return np.clip(-X @ K.T, prob.u_lo, prob.u_hi)

    pol = Policy(prob, fn, "clipped_lqr")
    pol.K = K
    return pol


def greedy_policy(prob: LQProblem, family: VFFamily, iters: int = 200) -> Policy:
    """One-step lookahead on the point-wise maximum.

    Minimises ``l(x,u) + gamma * max_j E V_j(x+)`` over the box by projected
    gradient: step ``1/Lip`` from the largest input curvature, halved
    whenever the objective goes up, and the best iterate is returned.  With
    convex members the problem is convex and the output is always feasible.
    """
    n_x, n_u = prob.n_x, prob.n_u
    _, Vn = lifted_basis(prob)
    M = np.tensordot(family.coefficients, Vn, axes=1)
    L = prob.L
    # split z'Mz = u'H u + 2 u'(Gx x + g1) + const(x)
    ix = slice(0, n_x)
    iu = slice(n_x, n_x + n_u)
    H = M[:, iu, iu]
    Gx = M[:, iu, ix]
    g1 = M[:, iu, -1]
    Cxx = M[:, ix, ix]
    cx = M[:, ix, -1]
    c1 = M[:, -1, -1]
    Huu = L[iu, iu]
    Lux = L[iu, ix]
    lu1 = L[iu, -1]
    g = prob.gamma
    curv = np.linalg.eigvalsh(Huu)[-1] + g * max(float(np.linalg.eigvalsh(h)[-1]) for h in H)
    lip = 2.0 * max(curv, 1e-12)

    def fn(X):
        N = X.shape[0]
        cu = X @ Lux.T + lu1                                      # (N, n_u)
        cst = np.einsum("ni,ij,nj->n", X, L[ix, ix], X) + 2 * X @ L[ix, -1] + L[-1, -1]
        gj = np.einsum("jab,nb->nja", Gx, X) + g1[None]            # (N, J, n_u)
        kj = np.einsum("ni,jik,nk->nj", X, Cxx, X) + 2 * X @ cx.T + c1[None]

        def objective(U):
            member = np.einsum("na,jab,nb->nj", U, H, U) + 2 * np.einsum("nja,na->nj", gj, U) + kj
            j = np.argmax(member, axis=1)
            val = np.einsum("na,ab,nb->n", U, Huu, U) + 2 * np.einsum("na,na->n", U, cu) + cst \
                + g * member[np.arange(N), j]
            return val, j

        def gradient(U, j):
            return 2 * (U @ Huu + cu) + g * 2 * (np.einsum("nab,nb->na", H[j], U) + gj[np.arange(N), j])

        U = np.clip(np.zeros((N, n_u)), prob.u_lo, prob.u_hi)
        val, j = objective(U)
        best_U, best_val = U.copy(), val.copy()
        step = np.full(N, 1.0 / lip)
        for _ in range(iters):
            U_new = np.clip(U - step[:, None] * gradient(U, j), prob.u_lo, prob.u_hi)
            v_new, j_new = objective(U_new)
            worse = v_new > val
            step = np.where(worse, 0.5 * step, step)
            keep = ~worse
            U = np.where(keep[:, None], U_new, U)
            val = np.where(keep, v_new, val)
            j = np.where(keep, j_new, j)
            better = val < best_val
            best_U[better] = U[better]
            best_val[better] = val[better]
        return best_U

    return Policy(prob, fn, "greedy")


@dataclass
class GapReport:
    lower_bound: float
    policy_cost: float
    stderr: float
    gap_fraction: float
    n_rollouts: int
    horizon: int
    seed: int
    policy: str = ""

    @property
    def consistent(self) -> bool:
        """The lower bound does not exceed the cost beyond three standard errors."""
        return self.lower_bound <= self.policy_cost + 3.0 * self.stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d["consistent"] = self.consistent
        return d

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def certify(prob: LQProblem, family: VFFamily, policy, n_rollouts: int = 1000, horizon: int | None = None,
            seed: int = 0) -> GapReport:
    """Compare a policy's simulated cost with the family's lower bound.

    Initial states are drawn from the problem's Gaussian; both the bound
    ``mean max(0, V_pwm(x0))`` and the discounted cost use the same draws.
    Any non-negative under-estimator family stays valid after the clamp, as
    the optimal cost is non-negative.
    """
    if horizon is None:
        horizon = horizon_for(prob.gamma)
    rng = np.random.default_rng(seed)
    w, U = np.linalg.eigh(prob.x0_cov)
    root = U * np.sqrt(np.clip(w, 0.0, None))
    X0 = prob.x0_mean + rng.standard_normal((n_rollouts, prob.n_x)) @ root.T
    lb_vals = np.maximum(0.0, eval_pwm(family, X0)[0])
    noise_seed = int(rng.integers(2**63 - 1))
    costs = rollout_costs(prob, policy, X0, horizon, rng_seed=noise_seed)
    cost = float(np.mean(costs))
    stderr = float(np.std(costs, ddof=1) / np.sqrt(n_rollouts)) if n_rollouts > 1 else float("inf")
    lb = float(np.mean(lb_vals))
    gap = (cost - lb) / cost if cost > 0 else float("nan")
    return GapReport(lb, cost, stderr, gap, n_rollouts, horizon, seed, getattr(policy, "name", ""))
