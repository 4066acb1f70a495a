import numpy as np
import pytest

from pwmadp.algorithms import single_bellman_lp
from pwmadp.lmi import assemble, assemble_single_bi, feasibility_audit, solve_bellman
from pwmadp.lq_model import discounted_riccati
from pwmadp.moments import MomentPair
from pwmadp.quad_value import QuadraticVF, VFFamily, basis_vector
from pwmadp.sdp import read_sdpa, solve

from .conftest import one_d, random_problem
from .oracles import single_bi_1d, value_iteration_1d


def grow_family(prob, n, seed):
    """Family built by Dirac-objective solves at random points (each member BI-feasible)."""
    rng = np.random.default_rng(seed)
    fam = VFFamily([single_bellman_lp(prob)])
    root = np.linalg.cholesky(prob.x0_cov)
    for _ in range(n):
        x = prob.x0_mean + root @ rng.standard_normal(prob.n_x)
        vf, _ = solve_bellman(assemble(prob, fam, basis_vector(x)))
        fam = fam.extend(vf)
    return fam


class TestLayout:
    def test_one_d_sizes(self, prob1d):
        bsdp = assemble(prob1d, VFFamily.zero(1), MomentPair.dirac([1.0]))
        assert bsdp.main_size == 4
        assert bsdp.problem.m == 5
        assert bsdp.layout.lam_con == slice(3, 4)

    @pytest.mark.parametrize("n_x,n_u,J", [(1, 1, 1), (2, 1, 3), (3, 2, 2)])
    def test_sizes(self, n_x, n_u, J):
        p = random_problem(0, n_x=n_x, n_u=n_u)
        fam = VFFamily([QuadraticVF.zero(n_x)] * J)
        bsdp = assemble(p, fam, np.zeros(1 + n_x + n_x * (n_x + 1) // 2))
        assert bsdp.main_size == n_x + n_u + 2
        assert bsdp.problem.m == bsdp.layout.K + J + n_u

    def test_dirac_objective(self, prob1d):
        bsdp = assemble(prob1d, VFFamily.zero(1), MomentPair.dirac([2.5]))
        np.testing.assert_array_equal(bsdp.objective, basis_vector(2.5))

    def test_empty_family(self, prob1d):
        with pytest.raises(ValueError):
            assemble(prob1d, VFFamily([], n_x=1), MomentPair.dirac([1.0]))

    def test_encode_decode(self, prob1d):
        bsdp = assemble(prob1d, VFFamily.zero(1), MomentPair.dirac([1.0]))
        vf = QuadraticVF(1.0, [2.0], [[3.0]])
        back, lc, lb = bsdp.decode(bsdp.encode(vf, [0.5], [0.25]))
        np.testing.assert_array_equal(back.alpha, vf.alpha)
        assert lc[0] == 0.5 and lb[0] == pytest.approx(0.25)

    def test_sdpa_export(self, prob1d):
        bsdp = assemble(prob1d, VFFamily.zero(1), MomentPair.dirac([3.0]))
        sol_a = solve(bsdp.problem)
        sol_b = solve(read_sdpa(bsdp.to_sdpa()))
        assert sol_a.primal_obj == pytest.approx(sol_b.primal_obj, rel=1e-7)


class TestFeasibility:
    def test_zero_vf(self, prob1d):
        assert feasibility_audit(prob1d, VFFamily.zero(1), QuadraticVF.zero(1)) <= 0.0

    @pytest.mark.parametrize("seed", range(4))
    def test_solver_output_passes_audit(self, seed):
        p = random_problem(seed, n_x=2, n_u=1, n_xi=1 if seed % 2 else 0)
        fam = grow_family(p, 5, seed)
        for j, vf in enumerate(fam):
            prior = VFFamily(fam.members[:j], n_x=2) if j else None
            assert feasibility_audit(p, prior, vf, 10_000, rng_seed=seed) <= 1e-6

    def test_random_objective_solutions_pass(self, prob1d, rng):
        fam = VFFamily.zero(1)
        for _ in range(5):
            obj = MomentPair(rng.normal(size=1), [[rng.uniform(0.5, 5)]], 1.0)
            vf, _ = solve_bellman(assemble(prob1d, fam, obj))
            assert feasibility_audit(prob1d, fam, vf, 1000) <= 1e-6

    def test_value_plus_one_violates(self, prob1d):
        xs, V, _ = value_iteration_1d(1.0, -0.5, 1.0, 0.1, 0.95, -1.0, 1.0)
        near = np.abs(xs) <= 3
        c2, c1, c0 = np.polyfit(xs[near], V[near], 2)
        vf = QuadraticVF(c0 + 1.0, [c1], [[c2]])
        assert feasibility_audit(prob1d, VFFamily.zero(1), vf) > 0.0


class TestMonotonicity:
    def test_enlarging_family(self):
        p = random_problem(2)
        fam = grow_family(p, 4, 2)
        obj = MomentPair.gaussian(p.x0_mean, p.x0_cov)
        vals = [solve_bellman(assemble(p, VFFamily(fam.members[:k]), obj))[1].primal_obj
                for k in range(1, len(fam) + 1)]
        assert all(b >= a - 1e-6 * (1 + abs(a)) for a, b in zip(vals, vals[1:]))

    @pytest.mark.parametrize("scale", [0.1, 3.0, 50.0])
    def test_objective_scaling(self, prob1d, scale):
        fam = VFFamily.zero(1)
        obj = MomentPair.gaussian([0.0], [[10.0]])
        vf1, s1 = solve_bellman(assemble(prob1d, fam, obj))
        vf2, s2 = solve_bellman(assemble(prob1d, fam, obj.scaled(scale)))
        assert s2.primal_obj == pytest.approx(scale * s1.primal_obj, rel=1e-6)
        np.testing.assert_allclose(vf2.alpha, vf1.alpha, rtol=1e-5, atol=1e-6)


class TestSingleBellman:
    def test_riccati_equivalence(self):
        p = one_d(u_bound=1e6)
        P, _, off = discounted_riccati(p)
        vf = single_bellman_lp(p)
        np.testing.assert_allclose(vf.alpha, [off, 0.0, P[0, 0]], atol=1e-4)

    def test_matches_closed_form(self, prob1d):
        P, s, obj = single_bi_1d(1.0, -0.5, 1.0, 0.1, 0.95, 1.0, 10.0)
        vf = single_bellman_lp(prob1d)
        assert vf.P[0, 0] == pytest.approx(P, abs=1e-4)
        assert vf.s == pytest.approx(s, abs=1e-4)
        assert vf.is_convex()
        value = MomentPair.gaussian([0.0], [[10.0]]).packed() @ vf.alpha
        # frozen from the first verified run; the closed form above is 13.158709
        assert value == pytest.approx(13.158703818351261, rel=1e-6)
        assert value == pytest.approx(obj, rel=1e-5)

    def test_zero_discount(self):
        p = one_d(gamma=0.0)
        vf = single_bellman_lp(p)
        # min_u l(x, u) = x^2, itself quadratic
        np.testing.assert_allclose(vf.alpha, [0.0, 0.0, 1.0], atol=1e-5)

    def test_noisy_passes_audit(self):
        p = random_problem(8, n_x=2, n_u=1, n_xi=2)
        vf = single_bellman_lp(p)
        assert feasibility_audit(p, None, vf) <= 1e-6

    def test_self_referential_layout(self, prob1d):
        bsdp = assemble_single_bi(prob1d, MomentPair.gaussian([0.0], [[10.0]]))
        assert bsdp.layout.n_con == 0
        assert bsdp.problem.m == 4
