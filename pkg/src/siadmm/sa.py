"""Stochastic approximation with diminishing steps for strongly convex problems.

The iteration is x_{j+1} = x_j - (gamma0/j) * g(x_j) with a stochastic
gradient oracle g whose noise obeys a quadratic growth law.  Alongside the
runner, this module carries the mean-squared-error rate machinery: the
burn-in index K after which e_k <= Q/k holds, and the product/sum constants
that bound e_K in terms of e_1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problems import Oracle


@dataclass(frozen=True)
class SAProblem:
    """Unconstrained strongly convex problem seen through a noisy oracle.

    c and L are the strong-convexity and gradient-Lipschitz moduli of the
    expectation; (v1, v2) bound the oracle noise as E||w||^2 <= v1||x||^2 + v2.
    R is the splitting scalar used when folding v1 into the step constant M.
    """

    grad_oracle: Oracle
    c: float
    L: float
    v1: float = 0.0
    v2: float = 0.0
    R: float = 1.0

    def __post_init__(self):
        if not (0 < self.c <= self.L):
            raise ValueError("need 0 < c <= L")
        if self.v1 < 0 or self.v2 < 0:
            raise ValueError("variance coefficients must be nonnegative")
        if not self.R > 0:
            raise ValueError("R must be positive")


def sa_iterate(grad, x_init: np.ndarray, gamma0: float, num_steps: int,
               rng: np.random.Generator) -> np.ndarray:
    """Core loop shared by sa_run and the outer solver's inner updates.

    Performs exactly num_steps - 1 oracle calls; step j uses gamma0/j with
    j starting at 1 (the first step takes the full gamma0).
    """
    x = np.array(x_init, dtype=float)
    isfinite = math.isfinite
    for j in range(1, int(num_steps)):
        g = grad(x, rng)
        if not isfinite(g @ g):
            raise ArithmeticError(f"non-finite gradient at inner step j={j}")
        x -= (gamma0 / j) * g
    return x


def sa_run(problem: SAProblem, x_init: np.ndarray, gamma0: float,
           num_steps: int, rng: np.random.Generator) -> np.ndarray:
    """Run num_steps - 1 diminishing-step gradient steps; num_steps = 1 is a no-op."""
    if not gamma0 > 0:
        raise ValueError("gamma0 must be positive")
    if num_steps < 1:
        raise ValueError("num_steps must be >= 1")
    return sa_iterate(problem.grad_oracle, x_init, gamma0, num_steps, rng)


@dataclass(frozen=True)
class SARateConstants:
    """Constants entering the 1/k mean-squared-error tail bound.

    M folds the gradient Lipschitz constant and the state-dependent noise,
    K is the first index the tail bound is valid from, and (a_hat, b_hat)
    bound the burn-in error: e_K <= a_hat * e_1 + b_hat * C.
    """

    c: float
    L: float
    v1: float
    v2: float
    R: float
    gamma0: float
    M: float
    K: int
    a_hat: float
    b_hat: float

    def C_of(self, x_star_norm_sq: float) -> float:
        """Noise level at the solution: v1 (1 + R) ||x*||^2 + v2."""
        return self.v1 * (1.0 + self.R) * x_star_norm_sq + self.v2


def compute_rate_constants(c: float, L: float, v1: float, v2: float,
                           R: float, gamma0: float) -> SARateConstants:
    """Evaluate M, the burn-in index K, and the burn-in products a_hat, b_hat.

    Requires gamma0 > 1/(2c); every per-step factor
    a_i = 1 - 2 c gamma0 / i + (gamma0/i)^2 M must be strictly positive
    (guaranteed when M > c^2 and gamma0 <= 1/c, checked regardless).
    """
    if not (0 < c <= L):
        raise ValueError("need 0 < c <= L")
    if v1 < 0 or v2 < 0 or R <= 0:
        raise ValueError("invalid variance coefficients or splitting scalar")
    if not gamma0 > 1.0 / (2.0 * c):
        raise ValueError(f"rate regime violated: gamma0 must exceed 1/(2c) = {1.0 / (2 * c):.6g}")
    M = L * L + v1 * (1.0 + 1.0 / R)
    K = math.ceil(gamma0 * gamma0 * M / (2.0 * c * gamma0 - 1.0)) + 1
    steps = gamma0 / np.arange(1, K)
    a = 1.0 - 2.0 * c * steps + steps * steps * M
    if np.any(a <= 0):
        i = int(np.argmax(a <= 0)) + 1
        raise ValueError(f"per-step factor a_{i} = {a[i - 1]:.6g} is not positive")
    a_hat = float(np.prod(a))
    if K == 2:
        b_hat = float(steps[0] ** 2)
    else:
        # b_hat = sum_{i=1}^{K-2} gamma_i^2 a_{i+1} ... a_{K-1} + gamma_{K-1}^2,
        # accumulated with backward suffix products.
        b_hat = float(steps[K - 2] ** 2)
        suffix = 1.0
        for i in range(K - 3, -1, -1):
            suffix *= a[i + 1]
            b_hat += float(steps[i] ** 2) * suffix
    if not (np.isfinite(a_hat) and np.isfinite(b_hat)):
        raise ArithmeticError("burn-in products overflowed")
    return SARateConstants(c=c, L=L, v1=v1, v2=v2, R=R, gamma0=gamma0,
                           M=M, K=K, a_hat=a_hat, b_hat=b_hat)


class QBound:
    """Decreasing tail bound k -> Q/k on the mean-squared error, valid for k >= K.

    Q uses the conservative burn-in substitution e_K <- a_hat e_1 + b_hat C,
    so the bound is computable from e_1 alone.
    """

    def __init__(self, consts: SARateConstants, e1: float, x_star_norm_sq: float):
        if e1 < 0 or x_star_norm_sq < 0:
            raise ValueError("e1 and ||x*||^2 must be nonnegative")
        g0 = consts.gamma0
        C = consts.C_of(x_star_norm_sq)
        e_K = consts.a_hat * e1 + consts.b_hat * C
        denom = 2.0 * consts.c * g0 - g0 * g0 * consts.M / consts.K - 1.0
        # denom > 0 by construction of K; guard against inconsistent inputs.
        if denom <= 0:
            raise ValueError("tail-bound denominator is not positive")
        self.K = consts.K
        self.Q = max(g0 * g0 * C / denom, consts.K * e_K)

    def __call__(self, k: int) -> float:
        if k < self.K:
            raise ValueError(f"bound is only valid for k >= K = {self.K}")
        return self.Q / k


def q_bound(consts: SARateConstants, e1: float, x_star_norm_sq: float) -> QBound:
    """Build the k -> Q(gamma0, K)/k tail bound from the rate constants."""
    return QBound(consts, e1, x_star_norm_sq)
