import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pwmadp.algorithms import SampleSet, outer_problem, single_bellman_lp
from pwmadp.lmi import lifted_basis
from pwmadp.lq_model import LQProblem, discounted_riccati, rollout_costs
from pwmadp.policy import certify, clipped_lqr_policy, greedy_policy
from pwmadp.quad_value import QuadraticVF, VFFamily

from .conftest import one_d, random_problem


class TestClippedLqr:
    def test_unconstrained_region(self, prob1d):
        pol = clipped_lqr_policy(prob1d)
        assert pol(np.array([0.2]))[0] == -pol.K[0, 0] * 0.2

    @pytest.mark.parametrize("x,u", [(50.0, 1.0), (-50.0, -1.0)])
    def test_saturates(self, prob1d, x, u):
        # K < 0 here, so large positive x asks for a large positive input
        assert clipped_lqr_policy(prob1d)(np.array([x]))[0] == u

    def test_origin(self, prob1d):
        assert clipped_lqr_policy(prob1d)(np.array([0.0]))[0] == 0.0


class TestGreedy:
    def test_zero_family_origin(self, prob1d):
        assert greedy_policy(prob1d, VFFamily.zero(1))(np.array([0.0]))[0] == pytest.approx(0.0, abs=1e-12)

    def test_zero_family_one_step(self):
        # l = x^2 + 0.4 x u + 0.1 u^2: argmin_u = -2x, clipped to the box
        p = LQProblem.from_blocks(1.0, -0.5, 1.0, 0.1, 0.9, -1.0, 1.0, S=0.2)
        pol = greedy_policy(p, VFFamily.zero(1))
        for x in (-3.0, -0.2, 0.1, 0.4, 2.0):
            assert pol(np.array([x]))[0] == pytest.approx(np.clip(-2 * x, -1, 1), abs=1e-6)

    @pytest.mark.parametrize("seed", range(3))
    def test_closed_form_unconstrained(self, seed):
        p = random_problem(seed, n_x=3, n_u=2, u_bound=1e4)
        P, _, _ = discounted_riccati(p)
        vf = QuadraticVF(0.3, np.random.default_rng(seed).normal(size=3), P)
        pol = greedy_policy(p, VFFamily([vf]))
        _, Vn = lifted_basis(p)
        M = np.tensordot(vf.alpha, Vn, axes=1) * p.gamma + p.L
        n = p.n_x
        H = M[n:n + 2, n:n + 2]
        X = np.random.default_rng(seed).normal(size=(5, 3)) * 2
        for x in X:
            g = M[n:n + 2, :n] @ x + M[n:n + 2, -1]
            np.testing.assert_allclose(pol(x), -np.linalg.solve(H, g), atol=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31 - 1))
    def test_box_respected(self, seed):
        r = np.random.default_rng(seed)
        p = random_problem(seed % 50, n_x=2, n_u=2, u_bound=float(r.uniform(0.1, 3)))
        members = []
        for _ in range(3):
            G = r.normal(size=(2, 2))
            members.append(QuadraticVF(r.normal(), r.normal(size=2), G @ G.T))
        U = greedy_policy(p, VFFamily(members))(r.normal(size=(20, 2)) * 10)
        assert np.all(U >= p.u_lo) and np.all(U <= p.u_hi)

    def test_converged_family_matches_clipped_lqr(self):
        prob = one_d()
        s = SampleSet.from_problem(prob, 1000, 0)
        fam = VFFamily([single_bellman_lp(prob)])
        a_obj, _, _ = outer_problem(prob, fam, fam, s, max_functions=30)
        x0 = np.random.default_rng(1).normal(size=(200, 1)) * np.sqrt(10)
        greedy = rollout_costs(prob, greedy_policy(prob, a_obj), x0, 150)
        lqr = rollout_costs(prob, clipped_lqr_policy(prob), x0, 150)
        diff = greedy - lqr
        se = diff.std(ddof=1) / np.sqrt(diff.size)
        assert abs(diff.mean()) <= 3 * se + 0.01 * lqr.mean()


class TestCertify:
    def test_riccati_family_is_tight(self):
        p = LQProblem.from_blocks(0.9, 1.0, 1.0, 0.5, 0.95, -1e6, 1e6, x0_cov=4.0)
        P, _, off = discounted_riccati(p)
        fam = VFFamily([QuadraticVF(off, [0.0], P)])
        rep = certify(p, fam, clipped_lqr_policy(p), 2000, seed=3)
        assert rep.gap_fraction <= 0.01
        assert rep.consistent

    def test_zero_family(self, prob1d):
        rep = certify(prob1d, VFFamily.zero(1), clipped_lqr_policy(prob1d), 100, seed=0)
        assert rep.lower_bound == 0.0
        assert rep.gap_fraction == 1.0

    def test_deterministic(self, prob1d):
        fam = VFFamily([single_bellman_lp(prob1d)])
        a = certify(prob1d, fam, clipped_lqr_policy(prob1d), 200, seed=4)
        b = certify(prob1d, fam, clipped_lqr_policy(prob1d), 200, seed=4)
        assert a.to_dict() == b.to_dict()

    def test_stderr_shrinks(self, prob1d):
        fam = VFFamily.zero(1)
        errs = [certify(prob1d, fam, clipped_lqr_policy(prob1d), n, seed=2).stderr for n in (250, 500, 1000, 2000)]
        assert all(b < a for a, b in zip(errs, errs[1:]))

    def test_single_bi_is_consistent(self, prob1d):
        fam = VFFamily([single_bellman_lp(prob1d)])
        rep = certify(prob1d, fam, clipped_lqr_policy(prob1d), 500, seed=5)
        assert rep.consistent
        assert 0 < rep.gap_fraction < 1

    def test_json(self, tmp_path, prob1d):
        rep = certify(prob1d, VFFamily.zero(1), clipped_lqr_policy(prob1d), 10, seed=1)
        rep.save(tmp_path / "gap.json")
        d = json.loads((tmp_path / "gap.json").read_text())
        assert set(d) >= {"lower_bound", "policy_cost", "stderr", "gap_fraction", "n_rollouts", "horizon", "seed"}
