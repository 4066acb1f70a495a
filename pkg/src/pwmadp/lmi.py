"""Bellman-inequality LMIs over quadratic value functions.

Decision vector layout: ``y = [alpha (K), lambda_con (J), lambda_box (n_u)]``.
The main block, of size ``n_x + n_u + 2``, is

    [ L - Vhat(alpha) + sum_j lam_j Vnext_j - sum_i lam_i G_i      0              ]
    [ 0                                                            gamma - sum lam ]  >= 0

where ``Vnext_j`` lifts the expected next value of the ``j``-th fixed member
and ``G_i`` encodes ``(u_i - lo_i)(hi_i - u_i) >= 0``.  Any feasible ``alpha``
satisfies ``V(x) <= l(x,u) + gamma * max(0, max_j E V_j(x+))`` on the box.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import sdp as sdpmod
from .lq_model import LQProblem, stage_cost
from .moments import MomentPair, lift_current, lift_next
from .quad_value import QuadraticVF, VFFamily, evaluate, n_basis

__all__ = [
    "Layout",
    "BellmanSdp",
    "SolverFailure",
    "assemble",
    "assemble_single_bi",
    "solve_bellman",
    "feasibility_audit",
    "audit_family",
    "box_scales",
    "lifted_basis",
]

DEFAULT_MARGIN = 1e-7


class SolverFailure(RuntimeError):
    """An SDP did not return a usable solution."""

    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


@dataclass(frozen=True)
class Layout:
    n_x: int
    n_u: int
    n_con: int
    self_referential: bool = False

    @property
    def K(self) -> int:
        return n_basis(self.n_x)

    @property
    def alpha(self) -> slice:
        return slice(0, self.K)

    @property
    def lam_con(self) -> slice:
        return slice(self.K, self.K + self.n_con)

    @property
    def lam_box(self) -> slice:
        return slice(self.K + self.n_con, self.K + self.n_con + self.n_u)

    @property
    def m(self) -> int:
        return self.K + self.n_con + self.n_u


@dataclass
class BellmanSdp:
    """An assembled SDP plus the bookkeeping to read its solution."""

    problem: sdpmod.SdpProblem
    layout: Layout
    box_scale: np.ndarray
    objective: np.ndarray
    block_names: list = field(default_factory=list)

    @property
    def main_size(self) -> int:
        return self.problem.blocks[0].size

    def decode(self, y):
        """``(vf, lambda_con, lambda_box)``; multipliers in original units."""
        y = np.asarray(y, dtype=float)
        lay = self.layout
        vf = QuadraticVF.from_alpha(y[lay.alpha], lay.n_x)
        lam_con = np.maximum(y[lay.lam_con], 0.0)
        lam_box = np.maximum(y[lay.lam_box], 0.0) * self.box_scale
        return vf, lam_con, lam_box

    def encode(self, vf: QuadraticVF, lam_con=None, lam_box=None) -> np.ndarray:
        lay = self.layout
        y = np.zeros(lay.m)
        y[lay.alpha] = vf.alpha
        if lam_con is not None:
            y[lay.lam_con] = lam_con
        if lam_box is not None:
            y[lay.lam_box] = np.asarray(lam_box, dtype=float) / self.box_scale
        return y

    def objective_value(self, y) -> float:
        return float(self.objective @ np.asarray(y)[: self.objective.size])

    def to_sdpa(self, fh=None) -> str:
        return sdpmod.write_sdpa(self.problem, fh)


def box_scales(prob: LQProblem) -> np.ndarray:
    """Per-coordinate scaling of the box multipliers.

    The box term is quadratic in the bounds, so wide boxes would otherwise
    put entries of order ``hi**2`` into the LMI.
    """
    return 1.0 / (1.0 + np.maximum(np.abs(prob.u_lo), np.abs(prob.u_hi)) ** 2)


def _box_matrices(prob: LQProblem) -> np.ndarray:
    n_x, n_u = prob.n_x, prob.n_u
    n = n_x + n_u + 1
    G = np.zeros((n_u, n, n))
    c = box_scales(prob)
    for i in range(n_u):
        lo, hi = prob.u_lo[i], prob.u_hi[i]
        k = n_x + i
        G[i, k, k] = -1.0
        G[i, k, -1] = G[i, -1, k] = 0.5 * (lo + hi)
        G[i, -1, -1] = -lo * hi
        G[i] *= c[i]
    return G


def lifted_basis(prob: LQProblem):
    """``(Vhat_k, Vnext_k)`` for every unit coefficient vector ``e_k``.

    Both lifts are linear in ``alpha``, so any member's matrices are
    ``tensordot(alpha, basis, 1)``.
    """
    K = n_basis(prob.n_x)
    n = prob.n_x + prob.n_u + 1
    Vh = np.zeros((K, n, n))
    Vn = np.zeros((K, n, n))
    for k in range(K):
        e = np.zeros(K)
        e[k] = 1.0
        vf = QuadraticVF.from_alpha(e, prob.n_x)
        Vh[k] = lift_current(vf, prob.n_u).M
        Vn[k] = lift_next(prob, vf).M
    return Vh, Vn


def _objective_vector(objective, K: int) -> np.ndarray:
    if isinstance(objective, MomentPair):
        c = objective.packed()
    else:
        c = np.asarray(objective, dtype=float).ravel()
    if c.size != K:
        raise ValueError(f"objective has length {c.size}, expected {K}")
    return c


def _psd_block(n_x: int, m: int, offset: int = 0) -> sdpmod.Block:
    """``P >= 0`` written over the packed quadratic coordinates."""
    K = n_basis(n_x)
    F = np.zeros((m, n_x, n_x))
    for k in range(1 + n_x, K):
        e = np.zeros(K)
        e[k] = 1.0
        F[offset + k] = QuadraticVF.from_alpha(e, n_x).P
    return sdpmod.Block(np.zeros((n_x, n_x)), F)


def _norm_cap_block(K: int, m: int, radius: float) -> sdpmod.Block:
    """``||alpha|| <= radius`` as ``[[r, alpha'], [alpha, r I]] >= 0``."""
    F0 = radius * np.eye(K + 1)
    F = np.zeros((m, K + 1, K + 1))
    for k in range(K):
        F[k, 0, k + 1] = F[k, k + 1, 0] = 1.0
    return sdpmod.Block(F0, F)


def assemble(prob: LQProblem, a_con: VFFamily, objective, convex_P: bool = True,
             norm_cap: float | None = None, margin: float = DEFAULT_MARGIN, basis=None) -> BellmanSdp:
    """Bellman-inequality SDP ``max c'alpha s.t. alpha in BI(a_con)``.

    Parameters
    ----------
    prob : LQProblem
    a_con : VFFamily
        Fixed members whose expected next values bound the right-hand side.
    objective : MomentPair or array_like
        Linear objective over ``alpha``; a moment pair contributes
        ``weight*s + p'mu + tr(P sigma)``.
    convex_P : bool
        Add the ``P >= 0`` block.
    norm_cap : float, optional
        Radius of a Euclidean ball on ``alpha`` (guarantees attainment).
    margin : float
        The main LMI is required to be ``>= margin * I`` so that solutions
        within solver tolerance remain feasible for the unshifted LMI.
    basis : tuple, optional
        Precomputed ``lifted_basis(prob)``.
    """
    if len(a_con) == 0:
        raise ValueError("constraint family must be non-empty")
    if a_con.n_x != prob.n_x:
        raise ValueError("family and problem dimensions differ")
    if not 0.0 <= prob.gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    n_x, n_u = prob.n_x, prob.n_u
    K = n_basis(n_x)
    J = len(a_con)
    lay = Layout(n_x, n_u, J)
    m = lay.m
    n = n_x + n_u + 1
    Vh, Vn = basis if basis is not None else lifted_basis(prob)

    F0 = np.zeros((n + 1, n + 1))
    F0[:n, :n] = prob.L
    F0[n, n] = prob.gamma
    F0 -= margin * np.eye(n + 1)
    F = np.zeros((m, n + 1, n + 1))
    F[lay.alpha, :n, :n] = -Vh
    F[lay.lam_con, :n, :n] = np.tensordot(a_con.coefficients, Vn, axes=1)
    F[lay.lam_con, n, n] = -1.0
    F[lay.lam_box, :n, :n] = -_box_matrices(prob)
    blocks = [sdpmod.Block(F0, F)]
    names = ["bellman"]
    if convex_P:
        blocks.append(_psd_block(n_x, m))
        names.append("convex")
    lam_rows = np.zeros((m, J + n_u))
    lam_rows[K:, :] = np.eye(J + n_u)
    blocks.append(sdpmod.Block(np.zeros(J + n_u), lam_rows, diagonal=True))
    names.append("multipliers")
    if norm_cap is not None:
        blocks.append(_norm_cap_block(K, m, float(norm_cap)))
        names.append("norm_cap")
    c = _objective_vector(objective, K)
    b = np.zeros(m)
    b[:K] = c
    return BellmanSdp(sdpmod.SdpProblem(b, blocks), lay, box_scales(prob), c, names)


def assemble_single_bi(prob: LQProblem, objective, convex_P: bool = True, norm_cap: float | None = None,
                       margin: float = DEFAULT_MARGIN) -> BellmanSdp:
    """Self-referential constraint ``V <= l + gamma E V(x+)`` on the box.

    The decision function enters both sides, so the LMI is
    ``L - Vhat(alpha) + gamma Vnext(alpha) - sum lam_i G_i >= 0``.
    """
    n_x, n_u = prob.n_x, prob.n_u
    K = n_basis(n_x)
    lay = Layout(n_x, n_u, 0, self_referential=True)
    m = lay.m
    n = n_x + n_u + 1
    Vh, Vn = lifted_basis(prob)
    F0 = prob.L - margin * np.eye(n)
    F = np.zeros((m, n, n))
    F[lay.alpha] = -Vh + prob.gamma * Vn
    F[lay.lam_box] = -_box_matrices(prob)
    blocks = [sdpmod.Block(F0, F)]
    names = ["bellman"]
    if convex_P:
        blocks.append(_psd_block(n_x, m))
        names.append("convex")
    lam_rows = np.zeros((m, n_u))
    lam_rows[lay.lam_box, :] = np.eye(n_u)
    blocks.append(sdpmod.Block(np.zeros(n_u), lam_rows, diagonal=True))
    names.append("multipliers")
    if norm_cap is not None:
        blocks.append(_norm_cap_block(K, m, float(norm_cap)))
        names.append("norm_cap")
    c = _objective_vector(objective, K)
    b = np.zeros(m)
    b[:K] = c
    return BellmanSdp(sdpmod.SdpProblem(b, blocks), lay, box_scales(prob), c, names)


def solve_bellman(bsdp: BellmanSdp, opts: sdpmod.SolverOptions | None = None, accept_tol: float = 1e-7):
    """Solve and decode; returns ``(vf, solution)``.

    An iteration-limited result is accepted when its iterate is feasible to
    ``accept_tol`` (the bound stays valid; only optimality is approximate).
    """
    sol = sdpmod.solve(bsdp.problem, opts)
    if sol.status is sdpmod.SdpStatus.OPTIMAL:
        pass
    elif sol.status is sdpmod.SdpStatus.MAX_ITER and sol.min_eig >= -accept_tol:
        pass
    else:
        raise SolverFailure(f"SDP returned {sol.status.value} after {sol.iterations} iterations", sol)
    vf, _, _ = bsdp.decode(sol.y)
    return vf, sol


# -- empirical audit -------------------------------------------------------

def _audit_points(prob: LQProblem, n_samples: int, rng, x_spread: float = 2.0, u_cap: float = 1e3):
    L = np.linalg.cholesky(prob.x0_cov + 1e-12 * np.eye(prob.n_x))
    X = prob.x0_mean + x_spread * rng.standard_normal((n_samples, prob.n_x)) @ L.T
    lo = np.maximum(prob.u_lo, -u_cap)
    hi = np.minimum(prob.u_hi, u_cap)
    U = lo + (hi - lo) * rng.random((n_samples, prob.n_u))
    return X, U


def feasibility_audit(prob: LQProblem, a_con: VFFamily | None, vf: QuadraticVF, n_samples: int = 10_000,
                      rng_seed=0, points=None) -> float:
    """Largest sampled violation of the Bellman inequality for ``vf``.

    Evaluates ``vf(x) - [l(x,u) + gamma * max(0, max_k E V_k(x+))]`` over
    ``k`` in ``a_con`` plus ``vf`` itself, at random ``(x, u)`` with ``u`` in
    the box and ``x`` drawn from the initial distribution with doubled
    standard deviation.  A non-positive result certifies the inequality at
    those points.  The clamp at zero reflects that the value function being
    bounded is non-negative.
    """
    rng = np.random.default_rng(rng_seed)
    if points is None:
        X, U = _audit_points(prob, n_samples, rng)
    else:
        X, U = (np.asarray(p, dtype=float) for p in points)
        X = X.reshape(-1, prob.n_x)
        U = U.reshape(-1, prob.n_u)
    Z = np.concatenate([X, U, np.ones((X.shape[0], 1))], axis=1)
    coefs = [vf.alpha[None, :]]
    if a_con is not None and len(a_con):
        coefs.insert(0, a_con.coefficients)
    coef = np.vstack(coefs)
    _, Vn = lifted_basis(prob)
    M = np.tensordot(coef, Vn, axes=1)
    nxt = np.einsum("ni,jik,nk->nj", Z, M, Z, optimize=True)
    rhs = stage_cost(prob, X, U) + prob.gamma * np.maximum(0.0, nxt.max(axis=1))
    return float(np.max(evaluate(vf, X) - rhs))


def audit_family(prob: LQProblem, family: VFFamily, n_samples: int = 10_000, rng_seed=0) -> np.ndarray:
    """Audit every member against the members listed before it.

    This is the situation of a family grown one function at a time, where
    member ``j`` was fitted with ``members[:j]`` as constraint family (the
    first member is checked on its own).  All members share one set of
    sample points, so the cost is linear in the family size.  Returns the
    per-member maximum violation.
    """
    rng = np.random.default_rng(rng_seed)
    X, U = _audit_points(prob, n_samples, rng)
    Z = np.concatenate([X, U, np.ones((X.shape[0], 1))], axis=1)
    _, Vn = lifted_basis(prob)
    M = np.tensordot(family.coefficients, Vn, axes=1)
    cost = stage_cost(prob, X, U)
    running = np.full(X.shape[0], -np.inf)
    out = np.empty(len(family))
    for j, vf in enumerate(family):
        running = np.maximum(running, np.einsum("ni,ij,nj->n", Z, M[j], Z))
        rhs = cost + prob.gamma * np.maximum(0.0, running)
        out[j] = np.max(evaluate(vf, X) - rhs)
    return out
