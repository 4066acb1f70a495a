"""Discounted, input-constrained linear-quadratic control problems.

The dynamics are ``x+ = A x + B_u u + B_xi xi`` and the stage cost is the
quadratic form ``l(x, u) = z' L z`` with ``z = [x; u; 1]``.  The input set is
the box ``u_lo <= u <= u_hi``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "LQProblem",
    "LQProblemError",
    "RiccatiError",
    "PolicyError",
    "Trajectory",
    "step",
    "stage_cost",
    "discounted_riccati",
    "simulate",
    "rollout_costs",
    "horizon_for",
    "noise_sqrt_cov",
]


class LQProblemError(ValueError):
    """Invalid problem data."""


class RiccatiError(RuntimeError):
    """The discounted Riccati iteration failed."""


class PolicyError(ValueError):
    """A policy returned an input outside the box."""


def _mat(a, shape=None, name="matrix") -> np.ndarray:
    out = np.array(a, dtype=float)
    if shape is not None:
        out = out.reshape(shape) if out.size == int(np.prod(shape)) else out
        if out.shape != tuple(shape):
            raise LQProblemError(f"{name}: expected shape {tuple(shape)}, got {np.shape(a)}")
    out.setflags(write=False)
    return out


def _is_psd(M: np.ndarray, tol: float = 1e-9) -> bool:
    if M.size == 0:
        return True
    scale = 1.0 + np.abs(M).max()
    return bool(np.linalg.eigvalsh(0.5 * (M + M.T))[0] >= -tol * scale)


@dataclass(frozen=True, eq=False)
class LQProblem:
    """Problem data; arrays are stored read-only.

    Parameters
    ----------
    A, B_u, B_xi : array_like
        Dynamics. ``B_xi`` may have zero columns or be all zero.
    L : array_like
        Symmetric PSD stage-cost matrix of size ``n_x + n_u + 1``.
    gamma : float
        Discount factor in ``[0, 1)``.
    u_lo, u_hi : array_like
        Input box, ``u_lo < u_hi`` component-wise.
    xi_mean, xi_second : array_like
        ``E[xi]`` and ``E[xi xi']``.
    x0_mean, x0_cov : array_like
        Gaussian initial-state distribution.
    """

    A: np.ndarray
    B_u: np.ndarray
    B_xi: np.ndarray
    L: np.ndarray
    gamma: float
    u_lo: np.ndarray
    u_hi: np.ndarray
    xi_mean: np.ndarray
    xi_second: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray
    notes: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n_x = A.shape[0]
        if A.shape != (n_x, n_x):
            raise LQProblemError(f"A must be square, got {A.shape}")
        B_u = np.asarray(self.B_u, dtype=float)
        if B_u.ndim < 2:
            B_u = B_u.reshape(n_x, -1)
        n_u = B_u.shape[1]
        if B_u.shape[0] != n_x or n_u < 1:
            raise LQProblemError(f"B_u must be {n_x} x n_u, got {B_u.shape}")
        B_xi = np.asarray(self.B_xi, dtype=float)
        if B_xi.ndim < 2:
            B_xi = B_xi.reshape(n_x, -1)
        if B_xi.shape[0] != n_x:
            raise LQProblemError(f"B_xi must have {n_x} rows, got {B_xi.shape}")
        n_xi = B_xi.shape[1]
        n_z = n_x + n_u + 1
        set_ = object.__setattr__
        set_(self, "A", _mat(A))
        set_(self, "B_u", _mat(B_u))
        set_(self, "B_xi", _mat(B_xi))
        set_(self, "L", _mat(self.L, (n_z, n_z), "L"))
        set_(self, "u_lo", _mat(self.u_lo, (n_u,), "u_lo"))
        set_(self, "u_hi", _mat(self.u_hi, (n_u,), "u_hi"))
        set_(self, "xi_mean", _mat(self.xi_mean, (n_xi,), "xi_mean"))
        set_(self, "xi_second", _mat(self.xi_second, (n_xi, n_xi), "xi_second"))
        set_(self, "x0_mean", _mat(self.x0_mean, (n_x,), "x0_mean"))
        set_(self, "x0_cov", _mat(self.x0_cov, (n_x, n_x), "x0_cov"))
        set_(self, "gamma", float(self.gamma))

        if not np.all(np.isfinite(np.concatenate([self.A.ravel(), self.B_u.ravel(), self.B_xi.ravel(),
                                                  self.L.ravel()]))):
            raise LQProblemError("non-finite problem data")
        if np.abs(self.L - self.L.T).max() > 1e-12 * (1.0 + np.abs(self.L).max()):
            raise LQProblemError("L must be symmetric")
        if not _is_psd(self.L):
            raise LQProblemError("L must be positive semidefinite")
        if not 0.0 <= self.gamma < 1.0:
            raise LQProblemError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not np.all(self.u_lo < self.u_hi):
            raise LQProblemError("need u_lo < u_hi component-wise")
        if not _is_psd(self.xi_second - np.outer(self.xi_mean, self.xi_mean)):
            raise LQProblemError("noise covariance xi_second - xi_mean xi_mean' is not PSD")
        if not _is_psd(self.x0_cov):
            raise LQProblemError("x0_cov must be positive semidefinite")

    # -- sizes and cost blocks ---------------------------------------------
    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B_u.shape[1]

    @property
    def n_xi(self) -> int:
        return self.B_xi.shape[1]

    @property
    def Q(self) -> np.ndarray:
        return self.L[: self.n_x, : self.n_x]

    @property
    def R(self) -> np.ndarray:
        n = self.n_x
        return self.L[n: n + self.n_u, n: n + self.n_u]

    @property
    def S(self) -> np.ndarray:
        """State-input cross block (``n_x x n_u``)."""
        n = self.n_x
        return self.L[:n, n: n + self.n_u]

    @property
    def has_noise(self) -> bool:
        return bool(np.any(self.B_xi != 0))

    @classmethod
    def from_blocks(cls, A, B_u, Q, R, gamma, u_lo, u_hi, *, S=None, B_xi=None, xi_mean=None,
                    xi_second=None, x0_mean=None, x0_cov=None, notes=None) -> "LQProblem":
        """Build a problem from the usual ``Q``, ``R`` (and cross ``S``) cost blocks."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        n_x = A.shape[0]
        B_u = np.asarray(B_u, dtype=float).reshape(n_x, -1)
        n_u = B_u.shape[1]
        L = np.zeros((n_x + n_u + 1,) * 2)
        L[:n_x, :n_x] = np.atleast_2d(Q)
        L[n_x:n_x + n_u, n_x:n_x + n_u] = np.atleast_2d(R)
        if S is not None:
            S = np.asarray(S, dtype=float).reshape(n_x, n_u)
            L[:n_x, n_x:n_x + n_u] = S
            L[n_x:n_x + n_u, :n_x] = S.T
        if B_xi is None:
            B_xi = np.zeros((n_x, 1))
        B_xi = np.asarray(B_xi, dtype=float).reshape(n_x, -1)
        n_xi = B_xi.shape[1]
        xi_mean = np.zeros(n_xi) if xi_mean is None else xi_mean
        xi_second = np.eye(n_xi) if xi_second is None else xi_second
        x0_mean = np.zeros(n_x) if x0_mean is None else x0_mean
        x0_cov = np.eye(n_x) if x0_cov is None else x0_cov
        u_lo = np.broadcast_to(np.asarray(u_lo, dtype=float), (n_u,))
        u_hi = np.broadcast_to(np.asarray(u_hi, dtype=float), (n_u,))
        return cls(A=A, B_u=B_u, B_xi=B_xi, L=L, gamma=gamma, u_lo=u_lo, u_hi=u_hi,
                   xi_mean=xi_mean, xi_second=xi_second, x0_mean=x0_mean, x0_cov=x0_cov,
                   notes=dict(notes or {}))

    # -- serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        out = {k: getattr(self, k).tolist() for k in
               ("A", "B_u", "B_xi", "L", "u_lo", "u_hi", "xi_mean", "xi_second", "x0_mean", "x0_cov")}
        out["gamma"] = self.gamma
        if self.notes:
            out["notes"] = dict(self.notes)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "LQProblem":
        required = ("A", "B_u", "L", "gamma", "u_lo", "u_hi")
        missing = [k for k in required if k not in d]
        if missing:
            raise LQProblemError(f"missing fields: {', '.join(missing)}")
        unknown = set(d) - {"A", "B_u", "B_xi", "L", "gamma", "u_lo", "u_hi", "xi_mean", "xi_second",
                            "x0_mean", "x0_cov", "notes"}
        if unknown:
            raise LQProblemError(f"unknown fields: {', '.join(sorted(unknown))}")
        A = np.atleast_2d(np.asarray(d["A"], dtype=float))
        n_x = A.shape[0]
        B_xi = d.get("B_xi", np.zeros((n_x, 1)))
        B_xi = np.asarray(B_xi, dtype=float).reshape(n_x, -1)
        n_xi = B_xi.shape[1]
        return cls(A=A, B_u=d["B_u"], B_xi=B_xi, L=d["L"], gamma=d["gamma"], u_lo=d["u_lo"],
                   u_hi=d["u_hi"], xi_mean=d.get("xi_mean", np.zeros(n_xi)),
                   xi_second=d.get("xi_second", np.eye(n_xi)),
                   x0_mean=d.get("x0_mean", np.zeros(n_x)), x0_cov=d.get("x0_cov", np.eye(n_x)),
                   notes=dict(d.get("notes", {})))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "LQProblem":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise LQProblemError(f"{path}: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class Trajectory:
    states: list
    inputs: list
    discounted_cost: float


# -- elementary maps ---------------------------------------------------------

def _check_last(arr: np.ndarray, n: int, name: str):
    if arr.shape[-1:] != (n,):
        raise LQProblemError(f"{name} has trailing dimension {arr.shape[-1:] or ()}, expected {n}")


def step(prob: LQProblem, x, u, xi=None) -> np.ndarray:
    """Next state ``A x + B_u u + B_xi xi``; accepts stacked rows."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if prob.n_x == 1 and x.ndim == 0:
        x = x.reshape(1)
    if prob.n_u == 1 and u.ndim == 0:
        u = u.reshape(1)
    _check_last(x, prob.n_x, "x")
    _check_last(u, prob.n_u, "u")
    out = x @ prob.A.T + u @ prob.B_u.T
    if xi is not None:
        xi = np.asarray(xi, dtype=float)
        if prob.n_xi == 1 and xi.ndim == 0:
            xi = xi.reshape(1)
        _check_last(xi, prob.n_xi, "xi")
        out = out + xi @ prob.B_xi.T
    return out


def stage_cost(prob: LQProblem, x, u):
    """``[x; u; 1]' L [x; u; 1]``; a scalar, or one value per stacked row."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if prob.n_x == 1 and x.ndim == 0:
        x = x.reshape(1)
    if prob.n_u == 1 and u.ndim == 0:
        u = u.reshape(1)
    _check_last(x, prob.n_x, "x")
    _check_last(u, prob.n_u, "u")
    lead = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
    x = np.broadcast_to(x, lead + x.shape[-1:])
    u = np.broadcast_to(u, lead + u.shape[-1:])
    z = np.concatenate([x, u, np.ones(lead + (1,))], axis=-1)
    val = np.einsum("...i,ij,...j->...", z, prob.L, z)
    # clip rounding below zero; L is PSD
    val = np.maximum(val, 0.0)
    return float(val) if val.ndim == 0 else val


# -- discounted Riccati ------------------------------------------------------

def discounted_riccati(prob: LQProblem, tol: float = 1e-12, max_iter: int = 100_000):
    """Fixed point of the discounted Riccati recursion.

    Iterates ``P <- Q + g A'PA - (S + g A'PB)(R + g B'PB)^-1 (S' + g B'PA)``
    from ``P = Q`` until the relative Frobenius change drops below ``tol``.

    Returns
    -------
    P : (n_x, n_x) ndarray
    K : (n_u, n_x) ndarray
        Gain of the unconstrained optimal input ``u = -K x``.
    offset : float
        Constant term ``g tr(B_xi'P B_xi E[xi xi']) / (1 - g)`` of the value.

    Raises
    ------
    RiccatiError
        On non-convergence, a singular input Hessian, or affine problem data
        (linear cost terms or mean noise) which make the value non-homogeneous.
    """
    n_x, n_u = prob.n_x, prob.n_u
    lin = prob.L[:-1, -1]
    if np.any(lin != 0) or (prob.has_noise and np.any(prob.B_xi @ prob.xi_mean != 0)):
        raise RiccatiError("affine terms present; the homogeneous Riccati solution does not apply")
    g = prob.gamma
    A, B, Q, R, S = prob.A, prob.B_u, prob.Q, prob.R, prob.S
    P = Q.copy()
    converged = False
    for _ in range(max_iter):
        H = R + g * B.T @ P @ B
        H = 0.5 * (H + H.T)
        try:
            c, low = _cho(H)
        except np.linalg.LinAlgError as exc:
            raise RiccatiError("R + gamma B_u' P B_u is singular") from exc
        N = S.T + g * B.T @ P @ A
        K = _cho_solve(c, low, N)
        P_new = Q + g * A.T @ P @ A - N.T @ K
        P_new = 0.5 * (P_new + P_new.T)
        if not np.all(np.isfinite(P_new)):
            raise RiccatiError("Riccati iteration diverged")
        change = np.linalg.norm(P_new - P) / (1.0 + np.linalg.norm(P_new))
        P = P_new
        if change <= tol:
            converged = True
            break
    if not converged:
        raise RiccatiError(f"no convergence in {max_iter} iterations")
    H = R + g * B.T @ P @ B
    c, low = _cho(0.5 * (H + H.T))
    K = _cho_solve(c, low, S.T + g * B.T @ P @ A)
    offset = 0.0
    if prob.has_noise and g > 0:
        offset = g * float(np.trace(prob.B_xi.T @ P @ prob.B_xi @ prob.xi_second)) / (1.0 - g)
    return P, K.reshape(n_u, n_x), offset


def _cho(H):
    import scipy.linalg as sla

    if np.linalg.cond(H) > 1e14:
        raise np.linalg.LinAlgError("ill-conditioned")
    return sla.cho_factor(H)


def _cho_solve(c, low, rhs):
    import scipy.linalg as sla

    return sla.cho_solve((c, low), rhs)


# -- simulation --------------------------------------------------------------

def noise_sqrt_cov(prob: LQProblem) -> np.ndarray:
    """Symmetric square root of the noise covariance (Gaussian sampling)."""
    C = prob.xi_second - np.outer(prob.xi_mean, prob.xi_mean)
    w, U = np.linalg.eigh(0.5 * (C + C.T))
    return (U * np.sqrt(np.clip(w, 0.0, None))) @ U.T


def _check_box(prob: LQProblem, u: np.ndarray, tol: float = 1e-9):
    scale = 1.0 + np.maximum(np.abs(prob.u_lo), np.abs(prob.u_hi))
    if np.any(u < prob.u_lo - tol * scale) or np.any(u > prob.u_hi + tol * scale) or not np.all(np.isfinite(u)):
        raise PolicyError("policy returned an input outside the box")


def horizon_for(gamma: float, rel: float = 1e-6) -> int:
    """Smallest ``T >= 1`` with ``gamma**T <= rel``."""
    if gamma <= 0.0:
        return 1
    return max(1, int(np.ceil(np.log(rel) / np.log(gamma) - 1e-12)))


def simulate(prob: LQProblem, policy: Callable, x0, horizon: int, rng_seed=0) -> Trajectory:
    """Roll out ``policy`` for ``horizon`` steps with Gaussian noise draws.

    Noise is drawn from the Gaussian with moments ``xi_mean``/``xi_second``;
    the draws are made whether or not ``B_xi`` is zero, so a seed always
    produces the same random stream.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    rng = np.random.default_rng(rng_seed)
    Ch = noise_sqrt_cov(prob)
    x = np.asarray(x0, dtype=float).reshape(prob.n_x)
    states = [x.copy()]
    inputs = []
    cost = 0.0
    disc = 1.0
    for _ in range(horizon):
        u = np.asarray(policy(x), dtype=float).reshape(prob.n_u)
        _check_box(prob, u)
        cost += disc * stage_cost(prob, x, u)
        xi = prob.xi_mean + Ch @ rng.standard_normal(prob.n_xi)
        x = step(prob, x, u, xi)
        states.append(x.copy())
        inputs.append(u.copy())
        disc *= prob.gamma
    return Trajectory(states=states, inputs=inputs, discounted_cost=float(cost))


def rollout_costs(prob: LQProblem, policy: Callable, x0s: Sequence, horizon: int, rng_seed=0) -> np.ndarray:
    """Discounted costs of many rollouts at once.

    ``policy`` must accept an ``(N, n_x)`` array and return ``(N, n_u)``.
    """
    rng = np.random.default_rng(rng_seed)
    Ch = noise_sqrt_cov(prob)
    X = np.array(x0s, dtype=float).reshape(-1, prob.n_x)
    costs = np.zeros(X.shape[0])
    disc = 1.0
    for _ in range(horizon):
        U = np.asarray(policy(X), dtype=float).reshape(X.shape[0], prob.n_u)
        _check_box(prob, U)
        costs += disc * stage_cost(prob, X, U)
        Xi = prob.xi_mean + rng.standard_normal((X.shape[0], prob.n_xi)) @ Ch.T
        X = step(prob, X, U, Xi)
        disc *= prob.gamma
    return costs
