"""Lifted quadratic forms in ``z = [x; u; 1]`` and sample moments.

``lift_current`` writes ``V(x)`` as ``z' Vhat z`` and ``lift_next`` writes
``E[V(A x + B_u u + B_xi xi)]`` as ``z' Vnext z``.  Only the first two noise
moments enter, which is exact for quadratics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .lq_model import LQProblem
from .quad_value import QuadraticVF, VFFamily, basis_vector, member_values

__all__ = [
    "LiftedQuadratic",
    "MomentPair",
    "lift_current",
    "lift_next",
    "dominating_moments",
    "sample_moments",
    "estimate_noise_moments",
    "with_noise_moments",
]


@dataclass(frozen=True, eq=False)
class LiftedQuadratic:
    """Symmetric ``M`` representing ``z' M z`` with ``z = [x; u; 1]``."""

    M: np.ndarray
    n_x: int
    n_u: int

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        if M.shape != (self.n_x + self.n_u + 1,) * 2:
            raise ValueError(f"M has shape {M.shape}, expected size {self.n_x + self.n_u + 1}")
        if np.abs(M - M.T).max() > 1e-12 * (1.0 + np.abs(M).max()):
            raise ValueError("M must be symmetric")
        M = 0.5 * (M + M.T)
        M.setflags(write=False)
        object.__setattr__(self, "M", M)

    def evaluate(self, x, u):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = np.atleast_1d(np.asarray(u, dtype=float))
        single = x.ndim == 1 and x.size == self.n_x
        X = x.reshape(-1, self.n_x)
        U = u.reshape(-1, self.n_u)
        Z = np.concatenate([X, U, np.ones((X.shape[0], 1))], axis=1)
        val = np.einsum("ni,ij,nj->n", Z, self.M, Z)
        return float(val[0]) if single else val


@dataclass(frozen=True, eq=False)
class MomentPair:
    """Scaled moments ``(weight, mu, sigma)`` of a set of points.

    With ``N`` samples in total and ``D`` of them selected, ``weight = |D|/N``,
    ``mu = sum_D x / N`` and ``sigma = sum_D x x' / N``; so ``packed()`` is the
    average basis vector restricted to ``D``.
    """

    mu: np.ndarray
    sigma: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float).ravel()
        sigma = np.array(self.sigma, dtype=float).reshape(mu.size, mu.size)
        sigma = 0.5 * (sigma + sigma.T)
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "weight", float(self.weight))
        if self.weight < 0:
            raise ValueError("weight must be non-negative")

    @property
    def n_x(self) -> int:
        return self.mu.size

    @classmethod
    def dirac(cls, x) -> "MomentPair":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return cls(x, np.outer(x, x), 1.0)

    @classmethod
    def gaussian(cls, mean, cov) -> "MomentPair":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls(mean, np.asarray(cov, dtype=float) + np.outer(mean, mean), 1.0)

    @classmethod
    def from_packed(cls, d, n_x: int) -> "MomentPair":
        d = np.asarray(d, dtype=float)
        iu = np.triu_indices(n_x)
        S = np.zeros((n_x, n_x))
        S[iu] = d[1 + n_x:]
        S = S + np.triu(S, 1).T
        return cls(d[1:1 + n_x], S, d[0])

    def packed(self) -> np.ndarray:
        """Vector ``c`` with ``c' alpha = weight*s + p'mu + tr(P sigma)``."""
        iu = np.triu_indices(self.n_x)
        return np.concatenate([[self.weight], self.mu, self.sigma[iu]])

    def scaled(self, c: float) -> "MomentPair":
        return MomentPair(c * self.mu, c * self.sigma, c * self.weight)


def lift_current(vf: QuadraticVF, n_u: int) -> LiftedQuadratic:
    """``[[P, 0, p/2], [0, 0, 0], [p'/2, 0, s]]``."""
    n_x = vf.n_x
    n = n_x + n_u + 1
    M = np.zeros((n, n))
    M[:n_x, :n_x] = vf.P
    M[:n_x, -1] = 0.5 * vf.p
    M[-1, :n_x] = 0.5 * vf.p
    M[-1, -1] = vf.s
    return LiftedQuadratic(M, n_x, n_u)


def next_state_map(prob: LQProblem) -> np.ndarray:
    """``T`` with ``A x + B_u u + B_xi E[xi] = T z``."""
    return np.hstack([prob.A, prob.B_u, (prob.B_xi @ prob.xi_mean)[:, None]])


def lift_next(prob: LQProblem, vf: QuadraticVF) -> LiftedQuadratic:
    """Expected next value as a lifted quadratic.

    With ``T z`` the mean next state and ``w = B_xi (xi - E xi)``,
    ``E V(next) = z'T'PTz + p'Tz + s + tr(P Cov w)``.  Written this way it
    also covers a non-zero noise mean, including the ``p' B_xi E[xi]`` term.
    """
    if vf.n_x != prob.n_x:
        raise ValueError("dimension mismatch between problem and value function")
    T = next_state_map(prob)
    M = T.T @ vf.P @ T
    lin = 0.5 * (T.T @ vf.p)
    M[:, -1] += lin
    M[-1, :] += lin
    cov = prob.xi_second - np.outer(prob.xi_mean, prob.xi_mean)
    M[-1, -1] += vf.s + float(np.trace(prob.B_xi.T @ vf.P @ prob.B_xi @ cov))
    return LiftedQuadratic(0.5 * (M + M.T), prob.n_x, prob.n_u)


def lift_next_many(prob: LQProblem, coef: np.ndarray) -> np.ndarray:
    """Stack of ``lift_next`` matrices for rows of ``coef`` (``(J, n, n)``)."""
    n_x = prob.n_x
    out = np.empty((coef.shape[0], n_x + prob.n_u + 1, n_x + prob.n_u + 1))
    for j, a in enumerate(coef):
        out[j] = lift_next(prob, QuadraticVF.from_alpha(a, n_x)).M
    return out


# -- sample moments ----------------------------------------------------------

def _sample_arrays(samples, family: VFFamily | None):
    """``(phi, vbar)`` for either a raw point array or a cached sample set."""
    if hasattr(samples, "phi"):
        phi = samples.phi
        vbar = samples.objective_values(family) if family is not None else None
        return phi, vbar
    X = np.asarray(samples, dtype=float)
    if X.ndim < 2:
        n_x = family.n_x if family is not None else 1
        X = X.reshape(-1, n_x)
    phi = basis_vector(X)
    vbar = None
    if family is not None:
        vbar = member_values(phi, family.coefficients).max(axis=1)
    return phi, vbar


def sample_moments(samples) -> MomentPair:
    phi, _ = _sample_arrays(samples, None)
    return moments_from_phi(phi, np.ones(phi.shape[0], dtype=bool), _n_x_of(phi))


def _n_x_of(phi: np.ndarray) -> int:
    K = phi.shape[1]
    n = int(round((-3 + np.sqrt(1 + 8 * K)) / 2))
    return n


def moments_from_phi(phi: np.ndarray, mask: np.ndarray, n_x: int) -> MomentPair:
    """Average of ``phi`` over the rows in ``mask``, divided by the total count.

    Summation runs sequentially in storage order so the result does not depend
    on how the work might otherwise be split.
    """
    N = phi.shape[0]
    d = np.add.reduce(phi[mask], axis=0) / N if mask.any() else np.zeros(phi.shape[1])
    return MomentPair.from_packed(d, n_x)


def dominating_moments(samples, candidate: QuadraticVF, family: VFFamily) -> MomentPair:
    """Moments of the samples where ``candidate >= max(family)``.

    Ties count as dominating.  No dominating sample gives the zero pair with
    ``weight = 0``.
    """
    phi, vbar = _sample_arrays(samples, family)
    cand = member_values(phi, candidate.alpha[None, :])[:, 0]
    mask = cand >= vbar
    return moments_from_phi(phi, mask, candidate.n_x)


# -- noise moments by sampling ----------------------------------------------

def estimate_noise_moments(sampler: Callable, n: int, seed=0):
    """Monte-Carlo ``(E[xi], E[xi xi'])`` from ``sampler(rng, n) -> (n, n_xi)``."""
    rng = np.random.default_rng(seed)
    draws = np.asarray(sampler(rng, n), dtype=float)
    draws = draws.reshape(n, -1)
    mean = draws.mean(axis=0)
    second = draws.T @ draws / n
    return mean, 0.5 * (second + second.T)


def with_noise_moments(prob: LQProblem, sampler: Callable, n: int, seed=0) -> LQProblem:
    """Copy of ``prob`` whose noise moments are estimated once by sampling."""
    mean, second = estimate_noise_moments(sampler, n, seed)
    if mean.size != prob.n_xi:
        raise ValueError(f"sampler returned dimension {mean.size}, expected {prob.n_xi}")
    return replace(prob, xi_mean=mean, xi_second=second)
