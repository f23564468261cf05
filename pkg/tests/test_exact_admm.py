import numpy as np
import pytest

from siadmm.bounds import delta_simple, delta_strongly_convex_g
from siadmm.exact import (
    QuadraticInstance,
    contraction_check,
    exact_admm_step,
    random_quadratic,
    validate_step_conditions,
)
from siadmm.problems import Iterate, g_norm_sq
from siadmm.solver import AlgorithmConfig


def scalar_instance():
    return QuadraticInstance(
        H_f=np.array([[2.0]]), c_f=np.zeros(1),
        H_g=np.array([[2.0]]), c_g=np.zeros(1),
        A=np.array([[1.0]]), B=np.array([[1.0]]), b=np.zeros(1),
    )


def cfg_for(n, rho=1.0, gamma=1.0, q=0.0):
    return AlgorithmConfig(rho=rho, gamma=gamma, P=np.zeros((n, n)),
                           Q=q * np.eye(n), eta=0.5)


class TestExactStep:
    def test_hand_computed_sweep(self):
        # n = m = p = 1, H_f = H_g = 2, A = B = 1, b = 0, rho = gamma = 1,
        # from (1, 1, 0): y = -1/3, x = 1/9, lam = 2/9
        inst = scalar_instance()
        u1 = exact_admm_step(inst, cfg_for(1), Iterate(np.ones(1), np.ones(1), np.zeros(1)))
        assert u1.y[0] == pytest.approx(-1.0 / 3.0, rel=1e-14)
        assert u1.x[0] == pytest.approx(1.0 / 9.0, rel=1e-14)
        assert u1.lam[0] == pytest.approx(2.0 / 9.0, rel=1e-14)

    def test_fixed_point(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            inst = random_quadratic(rng, 6, 6, 6)
            cfg = cfg_for(6, rho=float(rng.uniform(0.5, 5.0)))
            u_star = inst.kkt_solution()
            u1 = exact_admm_step(inst, cfg, u_star)
            scale = max(1.0, np.abs(u_star.x).max(), np.abs(u_star.lam).max())
            assert np.abs(u1.x - u_star.x).max() <= 1e-12 * scale
            assert np.abs(u1.y - u_star.y).max() <= 1e-12 * scale
            assert np.abs(u1.lam - u_star.lam).max() <= 1e-12 * scale

    def test_converges_and_monotone(self):
        # 100 random well-conditioned instances reach the dense-solve optimum,
        # with monotone G-distance along the way; the penalty balances the
        # two contraction terms so 500 sweeps always suffice
        rng = np.random.default_rng(11)
        for i in range(100):
            n = int(rng.integers(2, 9))
            inst = random_quadratic(rng, n, n, n, identity_A=bool(rng.random() < 0.5),
                                    eig_hi=20.0, s_lo=0.8, s_hi=1.25)
            wf = np.linalg.eigvalsh(inst.H_f)
            wa = np.linalg.eigvalsh(inst.A @ inst.A.T)
            rho = float(np.sqrt(wf[0] * wf[-1] / (wa[0] * wa[-1])))
            cfg = cfg_for(n, rho=rho)
            metric = inst.metric(cfg)
            u_star = inst.kkt_solution()
            u = Iterate(rng.standard_normal(n), rng.standard_normal(n),
                        rng.standard_normal(n))
            prev = g_norm_sq(metric, u - u_star)
            for _ in range(500):
                u = exact_admm_step(inst, cfg, u)
                cur = g_norm_sq(metric, u - u_star)
                assert cur <= prev * (1.0 + 1e-9) + 1e-300
                prev = cur
                if np.sqrt(cur) <= 1e-8:
                    break
            assert np.sqrt(prev) <= 1e-8, f"instance {i} did not converge"

    def test_singular_subproblem_errors(self):
        inst = QuadraticInstance(
            H_f=np.array([[1.0]]), c_f=np.zeros(1),
            H_g=np.zeros((1, 1)), c_g=np.zeros(1),
            A=np.array([[1.0]]), B=np.zeros((1, 1)), b=np.zeros(1),
        )
        # H_g + rho B'B + Q is exactly zero: the Cholesky solve must fail
        with pytest.raises(np.linalg.LinAlgError):
            exact_admm_step(inst, cfg_for(1), Iterate(np.ones(1), np.ones(1), np.ones(1)))


class TestStepConditions:
    def test_p_zero_needs_unit_gamma(self):
        inst = scalar_instance()
        with pytest.raises(ValueError, match="gamma"):
            validate_step_conditions(inst, cfg_for(1, gamma=1.5))

    def test_nonzero_p_window(self):
        inst = scalar_instance()
        ok = AlgorithmConfig(rho=1.0, gamma=1.0, P=np.eye(1), Q=np.zeros((1, 1)), eta=0.5)
        validate_step_conditions(inst, ok)
        # gamma = 2 makes (2 - gamma) P vanish while (gamma - 1) rho A'A > 0
        bad = AlgorithmConfig(rho=1.0, gamma=2.0, P=np.eye(1), Q=np.zeros((1, 1)), eta=0.5)
        with pytest.raises(ValueError, match="dominate"):
            validate_step_conditions(inst, bad)


class TestContractionCheck:
    def test_simple_gap_contracts(self):
        rng = np.random.default_rng(23)
        for i in range(25):
            n = int(rng.integers(2, 9))
            inst = random_quadratic(rng, n, n, n, identity_A=(i % 2 == 0))
            wf = np.linalg.eigvalsh(inst.H_f)
            rho = float(np.exp(rng.uniform(np.log(0.5), np.log(20.0))))
            delta = delta_simple(float(wf[0]), float(wf[-1]), rho, inst.A)
            u0 = Iterate(rng.standard_normal(n), rng.standard_normal(n),
                         rng.standard_normal(n))
            report = contraction_check(inst, cfg_for(n, rho=rho), delta, u0, 60)
            assert report.passed, f"instance {i}: max ratio {np.nanmax(report.ratios)}"

    def test_strongly_convex_g_gap_contracts(self):
        rng = np.random.default_rng(29)
        for i in range(25):
            n = int(rng.integers(2, 9))
            inst = random_quadratic(rng, n, n, n)
            wf = np.linalg.eigvalsh(inst.H_f)
            wg = np.linalg.eigvalsh(inst.H_g)
            rho = float(np.exp(rng.uniform(np.log(0.5), np.log(10.0))))
            q = float(rng.uniform(0.5, 4.0))
            Q = q * np.eye(n)
            delta = delta_strongly_convex_g(float(wf[0]), float(wf[-1]),
                                            float(wg[0]), rho, inst.A, Q)
            u0 = Iterate(rng.standard_normal(n), rng.standard_normal(n),
                         rng.standard_normal(n))
            report = contraction_check(inst, cfg_for(n, rho=rho, q=q), delta, u0, 60)
            assert report.passed, f"instance {i}: max ratio {np.nanmax(report.ratios)}"

    def test_inflated_delta_fails_somewhere(self):
        # sanity that the check can fail: a tenfold gap must be refuted
        rng = np.random.default_rng(31)
        failures = 0
        for i in range(20):
            n = int(rng.integers(2, 7))
            inst = random_quadratic(rng, n, n, n)
            wf = np.linalg.eigvalsh(inst.H_f)
            rho = 2.0
            delta = delta_simple(float(wf[0]), float(wf[-1]), rho, inst.A)
            u0 = Iterate(rng.standard_normal(n), rng.standard_normal(n),
                         rng.standard_normal(n))
            report = contraction_check(inst, cfg_for(n, rho=rho), 10.0 * delta, u0, 60)
            failures += not report.passed
        assert failures >= 1

    def test_vacuous_pass_at_solution(self):
        rng = np.random.default_rng(37)
        inst = random_quadratic(rng, 3, 3, 3)
        wf = np.linalg.eigvalsh(inst.H_f)
        delta = delta_simple(float(wf[0]), float(wf[-1]), 1.0, inst.A)
        report = contraction_check(inst, cfg_for(3), delta, inst.kkt_solution(), 10)
        assert report.passed
        assert report.num_vacuous == 10

    def test_validates_before_running(self):
        inst = scalar_instance()
        with pytest.raises(ValueError):
            contraction_check(inst, cfg_for(1, gamma=1.5), 0.1,
                              Iterate(np.ones(1), np.ones(1), np.ones(1)), 5)
