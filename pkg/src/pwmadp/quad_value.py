"""Quadratic value-function candidates and their point-wise maximum.

A quadratic ``V(x) = x'Px + p'x + s`` is identified with a coefficient
vector ``alpha`` over the monomials ``phi(x) = (1, x_1..x_n, x_i x_j, i<=j)``.
Off-diagonal monomials appear once, so their coefficient is ``2 P_ij``; the
order of the quadratic part is the row-major upper triangle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "QuadraticVF",
    "VFFamily",
    "n_basis",
    "basis_vector",
    "evaluate",
    "eval_pwm",
    "member_values",
    "OBJECTIVE",
    "CONSTRAINT",
]

OBJECTIVE = "objective"
CONSTRAINT = "constraint"


def n_basis(n_x: int) -> int:
    return 1 + n_x + n_x * (n_x + 1) // 2


def _as_points(x, n_x: int | None = None):
    """Return ``(X, single)`` with ``X`` of shape ``(N, n_x)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
        single = True
    elif x.ndim == 1:
        if n_x is not None and n_x == 1 and x.size != 1:
            x = x.reshape(-1, 1)
            single = False
        else:
            x = x.reshape(1, -1)
            single = True
    else:
        single = False
    if n_x is not None and x.shape[1] != n_x:
        raise ValueError(f"expected points of dimension {n_x}, got {x.shape[1]}")
    return x, single


def basis_vector(x) -> np.ndarray:
    """Monomials ``(1, x, x_i x_j for i <= j)``; rows for stacked points."""
    X, single = _as_points(x)
    n = X.shape[1]
    iu = np.triu_indices(n)
    out = np.concatenate([np.ones((X.shape[0], 1)), X, X[:, iu[0]] * X[:, iu[1]]], axis=1)
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class QuadraticVF:
    """``V(x) = x'Px + p'x + s``."""

    s: float
    p: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float).ravel()
        P = np.array(self.P, dtype=float).reshape(p.size, p.size)
        if np.abs(P - P.T).max(initial=0.0) > 1e-12 * (1.0 + np.abs(P).max(initial=0.0)):
            raise ValueError("P must be symmetric")
        P = 0.5 * (P + P.T)
        p.setflags(write=False)
        P.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "s", float(self.s))

    @property
    def n_x(self) -> int:
        return self.p.size

    @classmethod
    def zero(cls, n_x: int) -> "QuadraticVF":
        return cls(0.0, np.zeros(n_x), np.zeros((n_x, n_x)))

    @classmethod
    def from_alpha(cls, alpha, n_x: int) -> "QuadraticVF":
        alpha = np.asarray(alpha, dtype=float).ravel()
        if alpha.size != n_basis(n_x):
            raise ValueError(f"alpha has length {alpha.size}, expected {n_basis(n_x)}")
        iu = np.triu_indices(n_x)
        q = alpha[1 + n_x:]
        P = np.zeros((n_x, n_x))
        P[iu] = np.where(iu[0] == iu[1], q, 0.5 * q)
        P = P + np.triu(P, 1).T
        return cls(alpha[0], alpha[1:1 + n_x], P)

    @property
    def alpha(self) -> np.ndarray:
        iu = np.triu_indices(self.n_x)
        q = np.where(iu[0] == iu[1], 1.0, 2.0) * self.P[iu]
        return np.concatenate([[self.s], self.p, q])

    def __call__(self, x):
        return evaluate(self, x)

    def is_convex(self, tol: float = 1e-9) -> bool:
        return bool(np.linalg.eigvalsh(self.P)[0] >= -tol * (1.0 + np.abs(self.P).max()))

    def to_dict(self) -> dict:
        return {"s": self.s, "p": self.p.tolist(), "P": self.P.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticVF":
        return cls(d["s"], d["p"], d["P"])

    def __repr__(self) -> str:
        return f"QuadraticVF(s={self.s!r}, p={self.p.tolist()!r}, P={self.P.tolist()!r})"


def evaluate(vf: QuadraticVF, x):
    """Exact quadratic evaluation; scalar for one point, array for rows."""
    X, single = _as_points(x, vf.n_x)
    val = np.einsum("ni,ij,nj->n", X, vf.P, X) + X @ vf.p + vf.s
    return float(val[0]) if single else val


class VFFamily:
    """Ordered, immutable collection of quadratics with a role tag.

    ``extend`` returns a new family; the coefficient matrix used for
    vectorised evaluation is shared copy-on-extend.
    """

    def __init__(self, members: Iterable[QuadraticVF], role: str = OBJECTIVE, n_x: int | None = None):
        members = tuple(members)
        if role not in (OBJECTIVE, CONSTRAINT):
            raise ValueError(f"role must be {OBJECTIVE!r} or {CONSTRAINT!r}")
        if n_x is None:
            if not members:
                raise ValueError("n_x is required for an empty family")
            n_x = members[0].n_x
        if any(m.n_x != n_x for m in members):
            raise ValueError("members have inconsistent dimensions")
        self._members = members
        self.role = role
        self.n_x = n_x
        self._coef = np.array([m.alpha for m in members]).reshape(len(members), n_basis(n_x))
        self._coef.setflags(write=False)

    @classmethod
    def zero(cls, n_x: int, role: str = OBJECTIVE) -> "VFFamily":
        return cls([QuadraticVF.zero(n_x)], role)

    @property
    def members(self) -> tuple:
        return self._members

    @property
    def coefficients(self) -> np.ndarray:
        """``(J, K)`` matrix of stacked ``alpha`` vectors."""
        return self._coef

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self):
        return iter(self._members)

    def __getitem__(self, i) -> QuadraticVF:
        return self._members[i]

    def extend(self, *vfs: QuadraticVF) -> "VFFamily":
        new = VFFamily.__new__(VFFamily)
        new._members = self._members + tuple(vfs)
        new.role = self.role
        new.n_x = self.n_x
        if any(v.n_x != self.n_x for v in vfs):
            raise ValueError("members have inconsistent dimensions")
        coef = np.vstack([self._coef] + [v.alpha[None, :] for v in vfs])
        coef.setflags(write=False)
        new._coef = coef
        return new

    def with_role(self, role: str) -> "VFFamily":
        return VFFamily(self._members, role, self.n_x)

    def values(self, x) -> np.ndarray:
        """``(N, J)`` member values at stacked points."""
        X, _ = _as_points(x, self.n_x)
        return member_values(basis_vector(X), self._coef)

    def eval_pwm(self, x):
        return eval_pwm(self, x)

    # -- serialisation ------------------------------------------------------
    def to_dict(self) -> dict:
        return {"role": self.role, "n_x": self.n_x, "members": [m.to_dict() for m in self._members]}

    @classmethod
    def from_dict(cls, d: dict) -> "VFFamily":
        return cls([QuadraticVF.from_dict(m) for m in d["members"]], d.get("role", OBJECTIVE), d.get("n_x"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "VFFamily":
        return cls.from_dict(json.loads(Path(path).read_text()))


def eval_pwm(family: VFFamily, x):
    """Point-wise maximum and the lowest index attaining it.

    Returns ``(value, index)`` for a single point, or two arrays for rows.
    """
    if len(family) == 0:
        raise ValueError("point-wise maximum of an empty family")
    X, single = _as_points(x, family.n_x)
    vals = family.values(X)
    idx = np.argmax(vals, axis=1)
    best = vals[np.arange(vals.shape[0]), idx]
    if single:
        return float(best[0]), int(idx[0])
    return best, idx


def member_values(phi: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """``phi @ coef.T`` summed in a fixed order.

    Each entry depends only on its own row and member, never on how many
    other members are present, so maxima over nested families are exactly
    monotone.
    """
    phi = np.atleast_2d(phi)
    coef = np.atleast_2d(coef)
    out = np.zeros((phi.shape[0], coef.shape[0]))
    for k in range(phi.shape[1]):
        out += phi[:, k, None] * coef[None, :, k]
    return out
