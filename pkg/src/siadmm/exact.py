"""Deterministic splitting with exact quadratic subproblem solves.

Both blocks are quadratics, so every subproblem minimizer is a linear
solve and "exact update" is actually achievable; this makes the module
the reference point for contraction checks and for measuring the
inexactness of the sampled solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problems import GMetric, Iterate, g_norm_sq, require_psd, _frozen
from .solver import AlgorithmConfig

RATIO_SLACK = 1e-10  # absolute slack on top of 1/(1+delta) for ratio checks


@dataclass(frozen=True)
class QuadraticInstance:
    """f(x) = x'H_f x / 2 + c_f'x and g(y) = y'H_g y / 2 + c_g'y coupled by Ax + By = b."""

    H_f: np.ndarray
    c_f: np.ndarray
    H_g: np.ndarray
    c_g: np.ndarray
    A: np.ndarray
    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("H_f", "c_f", "H_g", "c_g", "A", "B", "b"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        wf = require_psd(self.H_f, "H_f")
        if wf[0] <= 0:
            raise ValueError("H_f must be positive definite")
        require_psd(self.H_g, "H_g")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.A.shape[1], self.B.shape[1], self.A.shape[0]

    def grad_f(self, x: np.ndarray) -> np.ndarray:
        return self.H_f @ x + self.c_f

    def grad_g(self, y: np.ndarray) -> np.ndarray:
        return self.H_g @ y + self.c_g

    def kkt_solution(self) -> Iterate:
        """Primal-dual solution from the dense stationarity system
        H_f x + c_f = A'lam,  H_g y + c_g = B'lam,  Ax + By = b."""
        n, m, p = self.dims
        M = np.zeros((n + m + p, n + m + p))
        M[:n, :n] = self.H_f
        M[:n, n + m:] = -self.A.T
        M[n:n + m, n:n + m] = self.H_g
        M[n:n + m, n + m:] = -self.B.T
        M[n + m:, :n] = self.A
        M[n + m:, n:n + m] = self.B
        rhs = np.concatenate([-self.c_f, -self.c_g, self.b])
        sol = np.linalg.solve(M, rhs)
        return Iterate(sol[:n], sol[n:n + m], sol[n + m:])

    def metric(self, cfg: AlgorithmConfig) -> GMetric:
        return GMetric(cfg.P + cfg.rho * (self.A.T @ self.A), cfg.Q, cfg.rho * cfg.gamma)


def exact_admm_step(inst: QuadraticInstance, cfg: AlgorithmConfig, u: Iterate) -> Iterate:
    """One y -> x -> multiplier sweep with exact subproblem minimizers.

    y_{k+1} solves (H_g + rho B'B + Q) y = B'lam - c_g - rho B'(A x_k - b) + Q y_k,
    and the x-update mirrors it using y_{k+1}; both via Cholesky solves.
    """
    A, B, b, rho = inst.A, inst.B, inst.b, cfg.rho
    H_y = inst.H_g + rho * (B.T @ B) + cfg.Q
    rhs_y = B.T @ u.lam - inst.c_g - rho * (B.T @ (A @ u.x - b)) + cfg.Q @ u.y
    y_new = cho_solve(cho_factor(H_y), rhs_y)

    H_x = inst.H_f + rho * (A.T @ A) + cfg.P
    rhs_x = A.T @ u.lam - inst.c_f - rho * (A.T @ (B @ y_new - b)) + cfg.P @ u.x
    x_new = cho_solve(cho_factor(H_x), rhs_x)

    lam_new = u.lam - cfg.gamma * rho * (A @ x_new + B @ y_new - b)
    return Iterate(x_new, y_new, lam_new)


def validate_step_conditions(inst: QuadraticInstance, cfg: AlgorithmConfig) -> None:
    """The contraction theory needs either P = 0 with gamma = 1, or P != 0
    with (2 - gamma) P - (gamma - 1) rho A'A positive definite."""
    if float(np.abs(cfg.P).max()) == 0.0:
        if cfg.gamma != 1.0:
            raise ValueError("with P = 0 the multiplier step gamma must equal 1")
        return
    gap = (2.0 - cfg.gamma) * cfg.P - (cfg.gamma - 1.0) * cfg.rho * (inst.A.T @ inst.A)
    if np.linalg.eigvalsh(gap)[0] <= 0:
        raise ValueError("(2 - gamma) P must dominate (gamma - 1) rho A'A")


@dataclass(frozen=True)
class ContractionReport:
    """Per-iteration squared-error ratios against the contraction threshold.

    Ratios are NaN where the previous error vanished (0/0); those
    iterations are a vacuous pass and counted in num_vacuous.
    """

    delta: float
    threshold: float
    ratios: np.ndarray
    errors: np.ndarray
    passed: bool
    num_vacuous: int

    def rows(self) -> list[dict]:
        return [
            {"k": k, "error_sq": float(self.errors[k + 1]), "ratio": float(r),
             "threshold": self.threshold}
            for k, r in enumerate(self.ratios)
        ]


def contraction_check(inst: QuadraticInstance, cfg: AlgorithmConfig, delta: float,
                      u0: Iterate, num_iters: int) -> ContractionReport:
    """Run exact sweeps and test |u_{k+1}-u*|_G^2 <= |u_k-u*|_G^2 / (1+delta).

    The threshold carries a 1e-10 absolute slack for floating point; step
    conditions are validated before anything runs.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    validate_step_conditions(inst, cfg)
    metric = inst.metric(cfg)
    u_star = inst.kkt_solution()
    # squared errors at roundoff scale are 0/0 for ratio purposes
    floor = 1e-26 * (1.0 + g_norm_sq(metric, u_star))
    errors = np.empty(num_iters + 1)
    ratios = np.full(num_iters, np.nan)
    u = u0
    errors[0] = g_norm_sq(metric, u - u_star)
    for k in range(num_iters):
        u = exact_admm_step(inst, cfg, u)
        errors[k + 1] = g_norm_sq(metric, u - u_star)
        if errors[k] > floor:
            ratios[k] = errors[k + 1] / errors[k]
    threshold = 1.0 / (1.0 + delta) + RATIO_SLACK
    finite = ratios[np.isfinite(ratios)]
    passed = bool(np.all(finite <= threshold))
    return ContractionReport(
        delta=delta, threshold=threshold, ratios=ratios, errors=errors,
        passed=passed, num_vacuous=int(np.isnan(ratios).sum()),
    )


def _random_spd(rng: np.random.Generator, n: int, eig_lo: float, eig_hi: float) -> np.ndarray:
    """SPD matrix with eigenvalues log-uniform in [eig_lo, eig_hi]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = np.exp(rng.uniform(np.log(eig_lo), np.log(eig_hi), size=n))
    M = (q * eigs) @ q.T
    return 0.5 * (M + M.T)


def _random_full_rank(rng: np.random.Generator, p: int, cols: int,
                      s_lo: float = 0.5, s_hi: float = 2.0) -> np.ndarray:
    """p x cols matrix with full row rank and singular values in [s_lo, s_hi]."""
    u, _ = np.linalg.qr(rng.standard_normal((p, p)))
    v, _ = np.linalg.qr(rng.standard_normal((cols, cols)))
    s = rng.uniform(s_lo, s_hi, size=min(p, cols))
    return u @ np.diag(s) @ v[:p, :] if p <= cols else (u[:, :cols] * s) @ v.T


def random_quadratic(rng: np.random.Generator, n: int, m: Optional[int] = None,
                     p: Optional[int] = None, identity_A: bool = False,
                     eig_lo: float = 1.0, eig_hi: float = 100.0,
                     s_lo: float = 0.5, s_hi: float = 2.0) -> QuadraticInstance:
    """Well-conditioned random instance; eigenvalues log-uniform in [eig_lo, eig_hi]
    keep the contraction constants numerically meaningful.  A is either the
    identity or a random full-row-rank matrix with singular values in
    [s_lo, s_hi]; B has full column rank."""
    m = n if m is None else m
    p = n if p is None else p
    if p > n + m:
        raise ValueError("p must not exceed n + m")
    H_f = _random_spd(rng, n, eig_lo, eig_hi)
    H_g = _random_spd(rng, m, eig_lo, eig_hi)
    if identity_A:
        if p != n:
            raise ValueError("identity A needs p == n")
        A = np.eye(n)
    else:
        A = _random_full_rank(rng, p, n, s_lo, s_hi)
    B = _random_full_rank(rng, m, p, s_lo, s_hi).T if m <= p \
        else _random_full_rank(rng, p, m, s_lo, s_hi)
    return QuadraticInstance(
        H_f=H_f, c_f=rng.standard_normal(n),
        H_g=H_g, c_g=rng.standard_normal(m),
        A=A, B=B, b=rng.standard_normal(p),
    )
