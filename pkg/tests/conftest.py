import numpy as np
import pytest

from pwmadp.lq_model import LQProblem


def one_d(u_bound=1.0, gamma=0.95, x0_var=10.0):
    return LQProblem.from_blocks(1.0, -0.5, 1.0, 0.1, gamma, -u_bound, u_bound, x0_cov=x0_var)


def random_problem(seed, n_x=2, n_u=1, n_xi=0, gamma=0.9, u_bound=1.0):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n_x, n_x))
    A *= 0.95 / max(np.abs(np.linalg.eigvals(A)))
    B = rng.normal(size=(n_x, n_u))
    G = rng.normal(size=(n_x, n_x))
    Q = G @ G.T / n_x + 0.1 * np.eye(n_x)
    kw = {}
    if n_xi:
        kw = dict(B_xi=0.3 * rng.normal(size=(n_x, n_xi)), xi_mean=0.1 * rng.normal(size=n_xi),
                  xi_second=np.eye(n_xi) + 0.01 * np.ones((n_xi, n_xi)))
        kw["xi_second"] = kw["xi_second"] + np.outer(kw["xi_mean"], kw["xi_mean"])
    return LQProblem.from_blocks(A, B, Q, 0.5 * np.eye(n_u), gamma, -u_bound, u_bound,
                                 x0_cov=4.0 * np.eye(n_x), **kw)


@pytest.fixture
def prob1d():
    return one_d()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
