import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from siadmm.exact import exact_admm_step, random_quadratic
from siadmm.harness import distreg_algorithm_config, lasso_algorithm_config, stream_for
from siadmm.problems import (
    Iterate,
    ProblemConstants,
    StochasticProblem,
    aug_lagrangian_grad_x,
    aug_lagrangian_grad_y,
    g_norm_sq,
    iterate_from_kkt,
    zero_iterate,
)
from siadmm.sa import sa_iterate
from siadmm.solver import (
    AlgorithmConfig,
    derive_constants,
    sample_schedule,
    si_admm_step,
    si_admm_step_exact_y,
    solve,
)
from siadmm.synthetic import gen_distreg


def noiseless_quadratic_problem(inst, v=1e-12):
    wf = np.linalg.eigvalsh(inst.H_f)
    wg = np.linalg.eigvalsh(inst.H_g)
    u_star = inst.kkt_solution()
    return StochasticProblem(
        A=inst.A, B=inst.B, b=inst.b,
        oracle_f=lambda x, rng: inst.grad_f(x),
        oracle_g=lambda y, rng: inst.grad_g(y),
        exact_grad_f=inst.grad_f,
        exact_grad_g=inst.grad_g,
        constants=ProblemConstants(
            mu_f=float(wf[0]), L_f=float(wf[-1]),
            sigma_g=float(wg[0]), L_g=float(wg[-1]),
            v1_x=v, v2_x=v, v1_y=v, v2_y=v,
        ),
        known_kkt=None if u_star is None else
        __import__("siadmm").problems.KKTPoint(u_star.x, u_star.y, u_star.lam),
    )


class TestDeriveConstants:
    def test_lasso_moduli(self, lasso10):
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, None)
        consts = derive_constants(prob, cfg)
        evs = np.linalg.eigvalsh(np.asarray(lasso10.Sigma))
        assert consts.c_x == pytest.approx(2.0 * evs[0] + 20.0, rel=1e-12)
        assert consts.L_x == pytest.approx(2.0 * evs[-1] + 20.0, rel=1e-12)
        assert consts.K_y is None and consts.sa_y is None

    def test_distreg_y_moduli(self, distreg8):
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 20.0, None)
        consts = derive_constants(prob, cfg)
        evs = np.linalg.eigvalsh(np.asarray(distreg8.Sigma))
        # B = -I and Q = rho I give c_y = 2 lam_min(Sigma) + 2 rho
        assert consts.c_y == pytest.approx(2.0 * evs[0] + 40.0, rel=1e-12)
        assert consts.L_y == pytest.approx(2.0 * evs[-1] + 40.0, rel=1e-12)
        assert consts.K_x >= 2 and consts.K_y >= 2

    def test_decoupled_x_block(self):
        # A = 0 with P = I and mu_f = 1 gives c_x = 2 regardless of rho
        n = 2
        prob = StochasticProblem(
            A=np.zeros((n, n)), B=np.eye(n), b=np.zeros(n),
            oracle_f=lambda x, rng: x,
            oracle_g=lambda y, rng: y,
            constants=ProblemConstants(mu_f=1.0, L_f=1.0, sigma_g=1.0, L_g=1.0,
                                       v1_x=0.5, v2_x=0.5, v1_y=0.5, v2_y=0.5),
        )
        cfg = AlgorithmConfig(rho=37.0, P=np.eye(n), Q=np.eye(n), eta=0.9)
        consts = derive_constants(prob, cfg)
        assert consts.c_x == pytest.approx(2.0, rel=1e-14)

    def test_default_eta_strictly_feasible(self, lasso10):
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, None)
        consts = derive_constants(prob, cfg)
        assert consts.delta is not None
        assert consts.eta == pytest.approx(
            (1.0 + consts.delta / 2.0) / (1.0 + consts.delta), rel=1e-14)
        assert consts.eta > 1.0 / (1.0 + consts.delta)

    def test_boundary_eta_warns(self, distreg8):
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 20.0, None, eta_boundary=True)
        with pytest.warns(UserWarning, match="1/\\(1\\+delta\\)"):
            derive_constants(prob, cfg)


class TestSampleSchedule:
    def test_burn_in_dominates(self):
        assert sample_schedule(5, 3.0, 0.5, 0) == 5

    def test_growth_formula(self):
        assert sample_schedule(5, 3.0, 0.5, 4) == 48

    def test_overflow_guard(self):
        with pytest.raises(OverflowError):
            sample_schedule(5, 1000.0, 0.5, 10_000)

    @settings(max_examples=100, deadline=None)
    @given(K=st.integers(1, 500),
           T=st.floats(0.5, 5000.0),
           eta=st.floats(0.55, 0.99))  # keeps T/eta^50 below the overflow cap
    def test_nondecreasing_in_k(self, K, T, eta):
        vals = [sample_schedule(K, T, eta, k) for k in range(51)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def make_quad_setup(seed=2, n=4, v=1e-12):
    rng = np.random.default_rng(seed)
    inst = random_quadratic(rng, n, n, n, eig_hi=10.0)
    prob = noiseless_quadratic_problem(inst, v=v)
    wf = np.linalg.eigvalsh(inst.H_f)
    rho = float(np.sqrt(wf[0] * wf[-1]))
    cfg = AlgorithmConfig(rho=rho, P=np.zeros((n, n)), Q=np.zeros((n, n)),
                          T=50.0, eta=0.9)
    return inst, prob, cfg


class TestSiAdmmStep:
    def test_matches_exact_step_with_many_inner_steps(self):
        inst, prob, cfg = make_quad_setup()
        consts = derive_constants(prob, cfg)
        rng = np.random.default_rng(0)
        u = Iterate(rng.standard_normal(4), rng.standard_normal(4), rng.standard_normal(4))
        u_next = si_admm_step(prob, cfg, consts, u, 1_000_000, 1_000_000,
                              np.random.default_rng(1))
        u_exact = exact_admm_step(inst, cfg, u)
        metric = consts.metric
        gap = g_norm_sq(metric, u_next - u_exact)
        assert gap <= 1e-3

    def test_fixed_point_zero_noise(self):
        inst, prob, cfg = make_quad_setup()
        consts = derive_constants(prob, cfg)
        u_star = inst.kkt_solution()
        u_next = si_admm_step(prob, cfg, consts, u_star, 500, 500,
                              np.random.default_rng(3))
        scale = 1.0 + float(np.abs(u_star.x).max())
        assert np.abs(u_next.x - u_star.x).max() <= 1e-10 * scale
        assert np.abs(u_next.y - u_star.y).max() <= 1e-10 * scale
        assert np.abs(u_next.lam - u_star.lam).max() <= 1e-10 * scale

    def test_matches_public_gradient_composition(self, distreg8):
        # the fused inner closures must reproduce the documented anchored
        # gradients step for step when replaying the same stream
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 10.0, None)
        consts = derive_constants(prob, cfg)
        rng = np.random.default_rng(8)
        u = Iterate(rng.standard_normal(distreg8.n), rng.standard_normal(distreg8.n),
                    rng.standard_normal(distreg8.n))
        T_y, T_x = 40, 30
        got = si_admm_step(prob, cfg, consts, u, T_y, T_x, np.random.default_rng(55))

        replay = np.random.default_rng(55)
        y_new = sa_iterate(
            lambda y, r: aug_lagrangian_grad_y(prob, cfg.rho, cfg.Q, u.x, y, u.lam, u.y, r),
            u.y, consts.gamma_y, T_y, replay)
        x_new = sa_iterate(
            lambda x, r: aug_lagrangian_grad_x(prob, cfg.rho, cfg.P, x, y_new, u.lam, u.x, r),
            u.x, consts.gamma_x, T_x, replay)
        lam_new = u.lam - cfg.gamma * cfg.rho * (prob.A @ x_new + prob.B @ y_new - prob.b)
        assert np.allclose(got.y, y_new, rtol=1e-12, atol=1e-12)
        assert np.allclose(got.x, x_new, rtol=1e-12, atol=1e-12)
        assert np.allclose(got.lam, lam_new, rtol=1e-12, atol=1e-12)

    def test_oracle_call_accounting(self, distreg8):
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 10.0, None)
        consts = derive_constants(prob, cfg)
        counts = {"x": 0, "y": 0}
        import dataclasses as dc
        ox, oy = prob.oracle_f, prob.oracle_g

        def fx(x, rng):
            counts["x"] += 1
            return ox(x, rng)

        def fy(y, rng):
            counts["y"] += 1
            return oy(y, rng)

        counted = dc.replace(prob, oracle_f=fx, oracle_g=fy)
        u = zero_iterate(distreg8.n, distreg8.n, distreg8.n)
        si_admm_step(counted, cfg, consts, u, 17, 23, np.random.default_rng(0))
        assert counts == {"x": 22, "y": 16}

    def test_replay_is_bit_exact(self, lasso10):
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, None)
        consts = derive_constants(prob, cfg)
        u = zero_iterate(10, 10, 10)
        a = si_admm_step_exact_y(prob, cfg, consts, u, 200, np.random.default_rng(5))
        b = si_admm_step_exact_y(prob, cfg, consts, u, 200, np.random.default_rng(5))
        assert np.array_equal(a.x, b.x) and np.array_equal(a.lam, b.lam)


class TestExactYStep:
    def test_soft_threshold_values(self, lasso10):
        # with rho = 1, gamma_bar = 0.1 and x - lam = (0.5, -0.05, ...) the
        # y-update soft-thresholds at 0.1
        inst = lasso10
        prob = inst.to_problem()
        cfg = lasso_algorithm_config(inst, 1.0, None)
        assert inst.gamma_bar == 0.1
        consts = derive_constants(prob, cfg)
        x = np.zeros(10)
        x[0], x[1] = 0.5, -0.05
        u = Iterate(x, np.zeros(10), np.zeros(10))
        out = si_admm_step_exact_y(prob, cfg, consts, u, 1, np.random.default_rng(0))
        assert out.y[0] == pytest.approx(0.4, abs=1e-14)
        assert out.y[1] == 0.0

    def test_fixed_point_zero_noise(self, lasso10):
        # replace the sampled oracle by the exact gradient: the solution is
        # then a fixed point of the whole sweep
        import dataclasses as dc
        inst = lasso10
        prob = dc.replace(inst.to_problem(),
                          oracle_f=lambda x, rng: inst.exact_grad(x))
        cfg = lasso_algorithm_config(inst, 20.0, None)
        consts = derive_constants(prob, cfg)
        u_star = iterate_from_kkt(prob.known_kkt)
        out = si_admm_step_exact_y(prob, cfg, consts, u_star, 2000, np.random.default_rng(0))
        assert np.abs(out.x - u_star.x).max() <= 1e-8
        assert np.abs(out.y - u_star.y).max() <= 1e-8
        assert np.abs(out.lam - u_star.lam).max() <= 1e-8

    def test_prox_subproblem_optimality(self, lasso10):
        # subgradient inclusion for the y-subproblem the prox must solve
        inst = lasso10
        prob = inst.to_problem()
        cfg = lasso_algorithm_config(inst, 7.0, None)
        consts = derive_constants(prob, cfg)
        rng = np.random.default_rng(13)
        for _ in range(25):
            u = Iterate(rng.standard_normal(10), rng.standard_normal(10),
                        rng.standard_normal(10))
            out = si_admm_step_exact_y(prob, cfg, consts, u, 1, rng)
            y = out.y
            # 0 in gamma_bar d|y|_1 + lam + rho (y - (x - b')) for B = -I
            grad_smooth = u.lam + cfg.rho * (y - (prob.A @ u.x - prob.b))
            on = np.abs(y) > 1e-12
            assert np.abs(grad_smooth[on] + inst.gamma_bar * np.sign(y[on])).max() <= 1e-8
            assert np.all(np.abs(grad_smooth[~on]) <= inst.gamma_bar + 1e-8)

    def test_requires_prox_variant(self, distreg8):
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 10.0, None)
        consts = derive_constants(prob, cfg)
        u = zero_iterate(distreg8.n, distreg8.n, distreg8.n)
        with pytest.raises(ValueError, match="proximal"):
            si_admm_step_exact_y(prob, cfg, consts, u, 5, np.random.default_rng(0))


class TestSolve:
    def test_zero_outer_iterations(self, lasso10):
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, None, max_outer=0)
        rec = solve(prob, cfg, rng=np.random.default_rng(0))
        assert len(rec) == 1
        assert rec.samples_total[-1] == 0
        assert np.array_equal(rec.final.x, np.zeros(10))

    def test_budget_stops_after_inflight_iteration(self, lasso10):
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, budget=5000)
        rec = solve(prob, cfg, rng=np.random.default_rng(0))
        assert rec.samples_total[-1] >= 5000
        assert rec.samples_total[-2] < 5000

    def test_budget_smaller_than_first_iteration(self, lasso10):
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, budget=10)
        with pytest.raises(ValueError, match="budget"):
            solve(prob, cfg, rng=np.random.default_rng(0))

    def test_multiplier_update_identity(self, distreg8):
        # lam_k - lam_{k+1} = gamma rho (A x_{k+1} + B y_{k+1} - b) exactly
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 10.0, None, max_outer=6, T=40.0)
        rec = solve(prob, cfg, rng=np.random.default_rng(4))
        for prev, cur in zip(rec.iterates, rec.iterates[1:]):
            resid = prob.A @ cur.x + prob.B @ cur.y - prob.b
            assert np.allclose(prev.lam - cur.lam, cfg.gamma * cfg.rho * resid,
                               rtol=0, atol=1e-12)

    def test_sample_accounting_matches_schedule(self, distreg8):
        prob = distreg8.to_problem()
        cfg = distreg_algorithm_config(distreg8, 10.0, None, max_outer=7, T=30.0)
        consts = derive_constants(prob, cfg)
        rec = solve(prob, cfg, rng=np.random.default_rng(4))
        expect_x = np.cumsum([0] + [
            sample_schedule(consts.K_x, cfg.T, consts.eta, k) - 1 for k in range(7)])
        expect_y = np.cumsum([0] + [
            sample_schedule(consts.K_y, cfg.T, consts.eta, k) - 1 for k in range(7)])
        assert np.array_equal(rec.samples_x, expect_x)
        assert np.array_equal(rec.samples_y, expect_y)

    def test_schedule_reciprocal_sums_converge(self):
        # geometric schedules satisfy sum 1/T_k < inf: partial sums are
        # bounded by the closed-form geometric series limit
        K, T, eta = 7, 100.0, 0.9
        partial = 0.0
        limit = (1.0 / T) / (1.0 - eta) + K * (1.0 / K)  # crude but finite cap
        for k in range(2000):
            partial += 1.0 / sample_schedule(K, T, eta, k)
            assert partial <= limit
        tail = sum(eta ** k / T for k in range(2000, 100_000))
        assert partial + tail < limit

    def test_median_error_trend(self, lasso10):
        # 10-seed median of the G-error is nonincreasing after the first
        # three outer iterations, allowing one violation
        prob = lasso10.to_problem()
        cfg = lasso_algorithm_config(lasso10, 20.0, None, max_outer=12, T=300.0)
        errs = []
        for rep in range(10):
            rec = solve(prob, cfg, rng=stream_for(1234, "trend", rep))
            errs.append(rec.err_u_G)
        med = np.median(np.vstack(errs), axis=0)
        violations = int(np.sum(np.diff(med[3:]) > 0))
        assert violations <= 1

    def test_distreg_full_loop_converges(self):
        inst = gen_distreg(6, stream=np.random.default_rng(2))
        prob = inst.to_problem()
        cfg = distreg_algorithm_config(inst, 10.0, None, max_outer=25, T=200.0)
        rec = solve(prob, cfg, rng=np.random.default_rng(0))
        assert rec.err_u_G[-1] < 1e-2 * rec.err_u_G[0]
