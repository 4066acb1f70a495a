"""Dense primal-dual interior-point solver for small block-diagonal SDPs.

The problem handled here is the linear-matrix-inequality form

    maximize    b'y
    subject to  F0_k + sum_i y_i F_ik  >= 0     for every block k

together with its conic dual

    minimize    sum_k <F0_k, X_k>
    subject to  sum_k <F_ik, X_k> = -b_i,   X_k >= 0.

Blocks come in two flavours: dense symmetric blocks and *diagonal* blocks
(a stack of 1x1 blocks, i.e. plain linear inequalities).  The method is an
infeasible-start path-following scheme with Nesterov-Todd scaling and a
Mehrotra predictor-corrector.  The Schur complement is never formed
densely: it is written as ``D + V V'`` with ``D`` diagonal (from singleton
linear inequalities) and ``V`` low rank (from the small dense blocks), and
solved by a partitioned Woodbury elimination.  That keeps the cost linear in
the number of multiplier variables, which grows with every generated
value function.
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "Block",
    "SdpProblem",
    "SdpSolution",
    "SdpStatus",
    "SolverOptions",
    "SdpError",
    "solve",
    "write_sdpa",
    "read_sdpa",
]


class SdpError(ValueError):
    """Raised for malformed SDP data."""


class SdpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITER = "MaxIter"


@dataclass
class Block:
    """One block of the LMI ``F0 + sum_i y_i F[i] >= 0``.

    For a dense block ``F0`` is ``(d, d)`` and ``F`` is ``(m, d, d)``.
    For a diagonal block ``F0`` is ``(d,)`` and ``F`` is an ``(m, d)`` array
    or scipy sparse matrix; row ``i`` holds the coefficients of ``y_i``.
    """

    F0: np.ndarray
    F: object
    diagonal: bool = False

    @property
    def size(self) -> int:
        return int(np.shape(self.F0)[0])


@dataclass
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.98
    # objective magnitude treated as divergence for the unboundedness heuristic
    unbounded_threshold: float = 1e12


@dataclass
class SdpProblem:
    b: np.ndarray
    blocks: list[Block]

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).ravel()
        m = self.b.size
        if m < 1:
            raise SdpError("need at least one decision variable")
        for k, blk in enumerate(self.blocks):
            if blk.diagonal:
                blk.F0 = np.asarray(blk.F0, dtype=float).ravel()
                if sp.issparse(blk.F):
                    blk.F = sp.csr_matrix(blk.F, dtype=float)
                else:
                    blk.F = np.asarray(blk.F, dtype=float).reshape(m, -1)
                if blk.F.shape != (m, blk.F0.size):
                    raise SdpError(f"block {k}: F has shape {blk.F.shape}, expected {(m, blk.F0.size)}")
            else:
                blk.F0 = np.atleast_2d(np.asarray(blk.F0, dtype=float))
                d = blk.F0.shape[0]
                blk.F = np.asarray(blk.F, dtype=float).reshape(m, d, d)
                scale = 1.0 + np.abs(blk.F0).max() + np.abs(blk.F).max(initial=0.0)
                if (np.abs(blk.F0 - blk.F0.T).max() > 1e-12 * scale
                        or np.abs(blk.F - blk.F.transpose(0, 2, 1)).max(initial=0.0) > 1e-12 * scale):
                    raise SdpError(f"block {k} is not symmetric")

    @property
    def m(self) -> int:
        return self.b.size

    def slack(self, y: np.ndarray) -> list[np.ndarray]:
        """Evaluate ``F0 + sum_i y_i F_i`` block by block."""
        out = []
        for blk in self.blocks:
            if blk.diagonal:
                out.append(blk.F0 + np.asarray(blk.F.T @ y).ravel())
            else:
                out.append(blk.F0 + np.tensordot(y, blk.F, axes=1))
        return out

    def min_eig(self, y: np.ndarray) -> float:
        vals = []
        for blk, S in zip(self.blocks, self.slack(y)):
            if S.size == 0:
                continue
            vals.append(S.min() if blk.diagonal else np.linalg.eigvalsh(S)[0])
        return float(min(vals)) if vals else np.inf


@dataclass
class SdpSolution:
    y: np.ndarray
    X: list[np.ndarray]
    status: SdpStatus
    primal_obj: float
    dual_obj: float
    iterations: int
    mu_history: list[float] = field(default_factory=list)
    min_eig: float = np.nan
    # indices k where the step from mu_history[k] used the common-step safeguard
    safeguard_steps: list[int] = field(default_factory=list)

    @property
    def gap(self) -> float:
        return abs(self.primal_obj - self.dual_obj)


# -- small dense helpers ---------------------------------------------------

def _max_step(L: np.ndarray, dX: np.ndarray) -> float:
    """Largest t with X + t dX >= 0 given X = L L'."""
    T = sla.solve_triangular(L, dX, lower=True)
    T = sla.solve_triangular(L, T.T, lower=True)
    lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not neg.any():
        return np.inf
    return float(np.min(-x[neg] / dx[neg]))


def _chol(A: np.ndarray) -> np.ndarray:
    return np.linalg.cholesky(0.5 * (A + A.T))


def _svec_index(d: int):
    iu = np.triu_indices(d)
    w = np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    return iu, w


class _DenseState:
    """Iterate and scaling data for one dense block."""

    def __init__(self, blk: Block):
        self.blk = blk
        d = blk.size
        self.iu, self.w = _svec_index(d)
        # variables that actually touch this block
        nz = np.abs(blk.F).reshape(blk.F.shape[0], -1).max(axis=1) > 0
        self.rows = np.flatnonzero(nz)
        self.Fr = blk.F[self.rows]

    def scale(self, X, Z):
        Lx, Lz = _chol(X), _chol(Z)
        U, s, Vt = np.linalg.svd(Lz.T @ Lx)
        self.Lx, self.Lz = Lx, Lz
        self.v = s
        self.G = Lx @ Vt.T / np.sqrt(s)
        self.Ginv = (np.sqrt(s)[:, None] * Vt) @ sla.solve_triangular(Lx, np.eye(len(s)), lower=True)
        self.W = self.G @ self.G.T

    def factor_rows(self) -> np.ndarray:
        """Rows ``svec(G' F_i G)`` so that this block's Schur part is ``V V'``."""
        T = np.einsum("ab,iac,cd->ibd", self.G, self.Fr, self.G, optimize=True)
        return T[:, self.iu[0], self.iu[1]] * self.w


class _DiagState:
    def __init__(self, blk: Block):
        self.blk = blk
        F = sp.csc_matrix(blk.F) if sp.issparse(blk.F) else sp.csc_matrix(np.asarray(blk.F))
        F.eliminate_zeros()
        self.F = F
        self.Ft = F.T.tocsr()
        nnz = np.diff(F.indptr)
        single = np.flatnonzero(nnz == 1)
        self.single_cols = single
        self.single_rows = F.indices[F.indptr[single]]
        self.single_vals = F.data[F.indptr[single]]
        self.multi_cols = np.flatnonzero(nnz > 1)
        self.Fmulti = F[:, self.multi_cols].toarray() if self.multi_cols.size else None


# -- the solver ------------------------------------------------------------

def _initial_point(prob: SdpProblem, dense, diag):
    """SDPT3-style scaled identity start."""
    b = prob.b
    X, Z, x, z = [], [], [], []
    for st in dense:
        blk = st.blk
        d = blk.size
        fn = np.sqrt((blk.F ** 2).sum(axis=(1, 2)))
        xi = max(10.0, np.sqrt(d), d * np.max((1 + np.abs(b)) / (1 + fn)))
        eta = max(10.0, np.sqrt(d), fn.max(initial=0.0), np.linalg.norm(blk.F0)) / np.sqrt(d)
        X.append(xi * np.eye(d))
        Z.append(eta * np.eye(d))
    for st in diag:
        blk = st.blk
        d = blk.size
        fn = np.sqrt(np.asarray(st.F.multiply(st.F).sum(axis=1)).ravel())
        xi = max(10.0, np.sqrt(d), d * np.max((1 + np.abs(b)) / (1 + fn)))
        eta = max(10.0, np.sqrt(d), fn.max(initial=0.0), np.linalg.norm(blk.F0)) / np.sqrt(d)
        x.append(np.full(d, xi))
        z.append(np.full(d, eta))
    return X, Z, x, z


def _solve_schur(D, V, h, tau=1e-2):
    """Solve ``(diag(D) + V V') u = h`` for one or more right-hand sides.

    Rows whose diagonal entry dominates go through Woodbury; the rest are
    eliminated densely.
    """
    rn = (V * V).sum(axis=1)
    dense = D <= tau * np.maximum(rn, 1e-300)
    n_idx = np.flatnonzero(~dense)
    z_idx = np.flatnonzero(dense)
    R = V.shape[1]
    h = np.atleast_2d(h.T).T
    out = np.empty_like(h)

    Dn = D[n_idx]
    Vn = V[n_idx]
    Vz = V[z_idx]
    DinvVn = Vn / Dn[:, None]
    Wm = np.eye(R) + Vn.T @ DinvVn
    Wc = sla.cho_factor(Wm)

    def apply_nn_inv(r):
        t = r / Dn[:, None]
        return t - DinvVn @ sla.cho_solve(Wc, Vn.T @ t)

    if z_idx.size:
        Sz = np.diag(D[z_idx]) + Vz @ sla.cho_solve(Wc, Vz.T)
        Sz = 0.5 * (Sz + Sz.T)
        hn = h[n_idx]
        hz = h[z_idx]
        tn = apply_nn_inv(hn)
        rhs = hz - Vz @ (Vn.T @ tn)
        try:
            uz = sla.cho_solve(sla.cho_factor(Sz), rhs)
        except np.linalg.LinAlgError:
            uz = np.linalg.lstsq(Sz, rhs, rcond=None)[0]
        un = apply_nn_inv(hn - Vn @ (Vz.T @ uz))
        out[z_idx] = uz
        out[n_idx] = un
    else:
        out[n_idx] = apply_nn_inv(h[n_idx])
    return out


def solve(prob: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``max b'y s.t. F0 + sum y_i F_i >= 0`` blockwise.

    Returns an :class:`SdpSolution`; ``primal_obj`` is ``b'y`` and
    ``dual_obj`` is ``sum <F0, X>`` (an upper bound at any dual-feasible X).
    Numerical breakdown is reported as ``MaxIter`` with the best iterate.
    """
    opts = opts or SolverOptions()
    m = prob.m
    b = prob.b
    dense = [_DenseState(blk) for blk in prob.blocks if not blk.diagonal and blk.size > 0]
    diag = [_DiagState(blk) for blk in prob.blocks if blk.diagonal and blk.size > 0]
    N = sum(st.blk.size for st in dense) + sum(st.blk.size for st in diag)
    normF0 = 1.0 + max([np.linalg.norm(st.blk.F0) for st in dense + diag] or [0.0])
    normb = 1.0 + np.linalg.norm(b)

    X, Z, x, z = _initial_point(prob, dense, diag)
    y = np.zeros(m)
    mu_hist: list[float] = []
    safeguard: list[int] = []
    best = None
    since_best = 0
    status = SdpStatus.MAX_ITER
    it = 0

    def residuals():
        FX = np.zeros(m)
        for st, Xk in zip(dense, X):
            FX[st.rows] += np.einsum("iab,ab->i", st.Fr, Xk)
        for st, xk in zip(diag, x):
            FX += st.F @ xk
        rp = b + FX
        Rd = [st.blk.F0 + np.tensordot(y[st.rows], st.Fr, axes=1) - Zk for st, Zk in zip(dense, Z)]
        rd = [st.blk.F0 + st.Ft @ y - zk for st, zk in zip(diag, z)]
        return rp, Rd, rd

    def objectives():
        pobj = float(b @ y)
        dobj = sum(float(np.vdot(st.blk.F0, Xk)) for st, Xk in zip(dense, X))
        dobj += sum(float(st.blk.F0 @ xk) for st, xk in zip(diag, x))
        return pobj, dobj

    for it in range(1, opts.max_iter + 1):
        rp, Rd, rd = residuals()
        pobj, dobj = objectives()
        gap_c = sum(float(np.vdot(Xk, Zk)) for Xk, Zk in zip(X, Z)) + sum(float(xk @ zk) for xk, zk in zip(x, z))
        mu = gap_c / N
        mu_hist.append(mu)
        pinf = np.linalg.norm(rp) / normb
        dinf = max([np.linalg.norm(R) for R in Rd] + [np.linalg.norm(r) for r in rd] + [0.0]) / normF0
        relgap = abs(pobj - dobj) / (1.0 + abs(pobj))
        score = max(pinf, dinf, relgap)
        # iterates with a usable y rank ahead of the rest
        y_ok = dinf <= opts.feas_tol and relgap <= opts.gap_tol
        key = (not y_ok, pinf if y_ok else score)
        if best is None or key <= best[0]:
            best = (key, y.copy(), [Xk.copy() for Xk in X], [xk.copy() for xk in x])
            since_best = 0
        else:
            since_best += 1
        if pinf <= opts.feas_tol and dinf <= opts.feas_tol and relgap <= opts.gap_tol:
            status = SdpStatus.OPTIMAL
            break
        if not best[0][0] and since_best >= 8:
            break
        # divergence heuristics
        if pobj > opts.unbounded_threshold * normb and dinf <= 1e-6:
            status = SdpStatus.UNBOUNDED
            break
        Fx_norm = np.linalg.norm(rp - b)
        if dobj < 0 and Fx_norm <= 1e-8 * (-dobj) and -dobj > opts.unbounded_threshold ** 0.5:
            status = SdpStatus.INFEASIBLE
            break

        try:
            for st, Xk, Zk in zip(dense, X, Z):
                st.scale(Xk, Zk)
        except np.linalg.LinAlgError:
            break
        D = np.zeros(m)
        Vparts = []
        for st in dense:
            Vb = np.zeros((m, st.iu[0].size))
            Vb[st.rows] = st.factor_rows()
            Vparts.append(Vb)
        for st, xk, zk in zip(diag, x, z):
            wdiag = xk / zk
            np.add.at(D, st.single_rows, wdiag[st.single_cols] * st.single_vals ** 2)
            if st.multi_cols.size:
                Vparts.append(st.Fmulti * np.sqrt(wdiag[st.multi_cols]))
        V = np.hstack(Vparts) if Vparts else np.zeros((m, 0))
        if V.shape[1] == 0:
            V = np.zeros((m, 1))
        WRdW = [st.W @ R @ st.W for st, R in zip(dense, Rd)]

        def apply_schur(v):
            out = np.zeros(m)
            for st in dense:
                T = st.W @ np.tensordot(v[st.rows], st.Fr, axes=1) @ st.W
                out[st.rows] += np.einsum("iab,ab->i", st.Fr, T)
            for st, xk, zk in zip(diag, x, z):
                out += st.F @ ((xk / zk) * (st.Ft @ v))
            return out

        def direction(Rc, rc):
            h = rp.copy()
            for st, Rck, Tk in zip(dense, Rc, WRdW):
                h[st.rows] += np.einsum("iab,ab->i", st.Fr, Rck - Tk)
            for st, rck, xk, zk, rdk in zip(diag, rc, x, z, rd):
                h += st.F @ (rck - (xk / zk) * rdk)
            dy = _solve_schur(D, V, h).ravel()
            # iterative refinement against the exact operator; the Schur
            # matrix is often close to singular, so keep only improvements
            r = h - apply_schur(dy)
            rn = np.linalg.norm(r)
            for _ in range(2):
                if rn <= 1e-15 * (1.0 + np.linalg.norm(h)):
                    break
                cand = dy + _solve_schur(D, V, r).ravel()
                r_c = h - apply_schur(cand)
                rn_c = np.linalg.norm(r_c)
                if rn_c >= rn:
                    break
                dy, r, rn = cand, r_c, rn_c
            dZ = [R + np.tensordot(dy[st.rows], st.Fr, axes=1) for st, R in zip(dense, Rd)]
            dX = [Rck - st.W @ dZk @ st.W for st, Rck, dZk in zip(dense, Rc, dZ)]
            dX = [0.5 * (A + A.T) for A in dX]
            dz = [rdk + st.Ft @ dy for st, rdk in zip(diag, rd)]
            dx = [rck - (xk / zk) * dzk for rck, xk, zk, dzk in zip(rc, x, z, dz)]
            return dy, dX, dZ, dx, dz

        def steps(dX, dZ, dx, dz):
            ap = min([_max_step(st.Lx, dXk) for st, dXk in zip(dense, dX)]
                     + [_max_step_lp(xk, dxk) for xk, dxk in zip(x, dx)] + [np.inf])
            ad = min([_max_step(st.Lz, dZk) for st, dZk in zip(dense, dZ)]
                     + [_max_step_lp(zk, dzk) for zk, dzk in zip(z, dz)] + [np.inf])
            return ap, ad

        try:
            # predictor
            Rc = [-Xk for Xk in X]
            rc = [-xk for xk in x]
            dy_a, dX_a, dZ_a, dx_a, dz_a = direction(Rc, rc)
            ap, ad = steps(dX_a, dZ_a, dx_a, dz_a)
            ap, ad = min(1.0, ap), min(1.0, ad)
            mu_aff = (sum(float(np.vdot(Xk + ap * dXk, Zk + ad * dZk)) for Xk, dXk, Zk, dZk in zip(X, dX_a, Z, dZ_a))
                      + sum(float((xk + ap * dxk) @ (zk + ad * dzk)) for xk, dxk, zk, dzk in zip(x, dx_a, z, dz_a))) / N
            sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0
            # corrector
            Rc = []
            for st, dXk, dZk in zip(dense, dX_a, dZ_a):
                Xt = st.Ginv @ dXk @ st.Ginv.T
                Zt = st.G.T @ dZk @ st.G
                Q = sigma * mu * np.eye(len(st.v)) - np.diag(st.v ** 2) - 0.5 * (Xt @ Zt + Zt @ Xt)
                T = 2.0 * Q / (st.v[:, None] + st.v[None, :])
                Rc.append(st.G @ T @ st.G.T)
            rc = [(sigma * mu - xk * zk - dxk * dzk) / zk for xk, zk, dxk, dzk in zip(x, z, dx_a, dz_a)]
            dy, dX, dZ, dx, dz = direction(Rc, rc)
            ap, ad = steps(dX, dZ, dx, dz)
        except (np.linalg.LinAlgError, ValueError, FloatingPointError):
            break
        ap = min(1.0, opts.step_fraction * ap)
        ad = min(1.0, opts.step_fraction * ad)
        if ap < 1e-12 and ad < 1e-12:
            break

        def mu_at(a_p, a_d):
            c = sum(float(np.vdot(Xk + a_p * dXk, Zk + a_d * dZk)) for Xk, dXk, Zk, dZk in zip(X, dX, Z, dZ))
            c += sum(float((xk + a_p * dxk) @ (zk + a_d * dzk)) for xk, dxk, zk, dzk in zip(x, dx, z, dz))
            return c / N

        # safeguard: unequal step lengths can raise mu; retry with a common step
        if ap != ad and mu_at(ap, ad) > mu:
            ap = ad = min(ap, ad)
            safeguard.append(it - 1)
        X = [Xk + ap * dXk for Xk, dXk in zip(X, dX)]
        x = [xk + ap * dxk for xk, dxk in zip(x, dx)]
        y = y + ad * dy
        Z = [Zk + ad * dZk for Zk, dZk in zip(Z, dZ)]
        z = [zk + ad * dzk for zk, dzk in zip(z, dz)]
        if not all(np.all(np.isfinite(v)) for v in [y] + X + Z + x + z):
            break

    if status is SdpStatus.MAX_ITER and best is not None:
        key, y, X, x = best
        # stalled on a degenerate primal: y is feasible and the gap is met,
        # while X satisfies its equalities only to sqrt(feas_tol)
        if not key[0] and key[1] <= np.sqrt(opts.feas_tol):
            status = SdpStatus.OPTIMAL
    Xall = []
    di = iter(X)
    li = iter(x)
    for blk in prob.blocks:
        if blk.size == 0:
            Xall.append(np.zeros((0,)) if blk.diagonal else np.zeros((0, 0)))
        elif blk.diagonal:
            Xall.append(next(li))
        else:
            Xall.append(next(di))
    pobj = float(b @ y)
    dobj = sum(float(np.vdot(blk.F0, Xk)) for blk, Xk in zip(prob.blocks, Xall))
    return SdpSolution(y=y, X=Xall, status=status, primal_obj=pobj, dual_obj=dobj,
                       iterations=it, mu_history=mu_hist, min_eig=prob.min_eig(y),
                       safeguard_steps=safeguard)


# -- SDPA sparse text format -----------------------------------------------
# SDPA solves  min c'x  s.t.  sum_i x_i F_i - F_0 >= 0.  Our problem maps to
# it with c = -b and F_0 -> -F0, so exported files load unchanged in SDPA,
# CSDP or any reader of the format.

def write_sdpa(prob: SdpProblem, fh=None) -> str:
    buf = io.StringIO()
    buf.write('"max b\'y s.t. F0 + sum y_i F_i >= 0, stored as SDPA with c=-b, F0->-F0"\n')
    buf.write(f"{prob.m}\n{len(prob.blocks)}\n")
    buf.write(" ".join(str(-blk.size if blk.diagonal else blk.size) for blk in prob.blocks) + "\n")
    buf.write(" ".join(repr(float(-v)) for v in prob.b) + "\n")

    def entries(k, blk, mats, sign):
        if blk.diagonal:
            for mat, vec in mats:
                nz = np.flatnonzero(vec)
                for j in nz:
                    buf.write(f"{mat} {k} {j + 1} {j + 1} {float(sign(mat) * vec[j])!r}\n")
        else:
            for mat, A in mats:
                ii, jj = np.nonzero(np.triu(A))
                for i, j in zip(ii, jj):
                    buf.write(f"{mat} {k} {i + 1} {j + 1} {float(sign(mat) * A[i, j])!r}\n")

    def sign(mat):
        return -1.0 if mat == 0 else 1.0

    for k, blk in enumerate(prob.blocks, start=1):
        if blk.diagonal:
            Fd = blk.F.toarray() if sp.issparse(blk.F) else blk.F
            mats = [(0, blk.F0)] + [(i + 1, Fd[i]) for i in range(prob.m)]
        else:
            mats = [(0, blk.F0)] + [(i + 1, blk.F[i]) for i in range(prob.m)]
        entries(k, blk, mats, sign)
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def read_sdpa(text: str) -> SdpProblem:
    lines = []
    for raw in text.splitlines():
        raw = raw.strip()
        if not raw or raw[0] in '"*':
            continue
        lines.append(raw.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " "))
    m = int(lines[0].split()[0])
    nblocks = int(lines[1].split()[0])
    sizes = [int(float(t)) for t in lines[2].split()[:nblocks]]
    c = np.array([float(t) for t in lines[3].split()[:m]])
    F0s, Fs = [], []
    for s in sizes:
        d = abs(s)
        if s < 0:
            F0s.append(np.zeros(d))
            Fs.append(np.zeros((m, d)))
        else:
            F0s.append(np.zeros((d, d)))
            Fs.append(np.zeros((m, d, d)))
    for ln in lines[4:]:
        tok = ln.split()
        mat, k, i, j, v = int(tok[0]), int(tok[1]) - 1, int(tok[2]) - 1, int(tok[3]) - 1, float(tok[4])
        if mat == 0:
            v = -v
        if sizes[k] < 0:
            if mat == 0:
                F0s[k][i] = v
            else:
                Fs[k][mat - 1, i] = v
        else:
            tgt = F0s[k] if mat == 0 else Fs[k][mat - 1]
            tgt[i, j] = v
            tgt[j, i] = v
    blocks = [Block(F0=F0, F=F, diagonal=s < 0) for F0, F, s in zip(F0s, Fs, sizes)]
    return SdpProblem(b=-c, blocks=blocks)
