"""Synthetic problem families with closed-form moments and known solutions.

Both generators draw Gaussian regressor data with the banded covariance
sigma_l^2 * 0.5^|i-j| and build sparse ground-truth coefficient vectors by
truncating uniform draws.  Fourth-moment matrices E[(ll' - Sigma)^2] come
from Gaussian moment factorization, which yields the oracle variance
constants in closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .baselines import prox_grad_reference, soft_threshold
from .problems import (
    GProx,
    KKTPoint,
    ProblemConstants,
    StochasticProblem,
    _frozen,
    require_symmetric,
)

TRUNCATION_BOUND = 5.0  # |coefficient| above this truncates to zero
UNIFORM_HALF_WIDTH = 50.0


def banded_covariance(dim: int, sigma_l2: float) -> np.ndarray:
    idx = np.arange(dim)
    return sigma_l2 * 0.5 ** np.abs(idx[:, None] - idx[None, :])


def truncated_uniform(rng: np.random.Generator, size: int) -> np.ndarray:
    raw = rng.uniform(-UNIFORM_HALF_WIDTH, UNIFORM_HALF_WIDTH, size=size)
    return np.where(np.abs(raw) <= TRUNCATION_BOUND, raw, 0.0)


def isserlis_V_affine(Sigma_l: np.ndarray) -> np.ndarray:
    """E[(ll' - Sigma)^2] for l = (l_tilde; 1), l_tilde ~ N(0, Sigma_l).

    With Sigma_l = (s_ij) of size (n-1) the entries are
        v_ij = s_ij tr(Sigma_l) + (Sigma_l^2)_ij + s_ij   for i, j < n,
        v_in = v_nj = 0 off the corner,  v_nn = tr(Sigma_l).
    """
    require_symmetric(Sigma_l, "Sigma_l")
    d = Sigma_l.shape[0]
    tr = float(np.trace(Sigma_l))
    V = np.zeros((d + 1, d + 1))
    V[:d, :d] = Sigma_l * tr + Sigma_l @ Sigma_l + Sigma_l
    V[d, d] = tr
    return V


def isserlis_V_centered(Sigma: np.ndarray) -> np.ndarray:
    """E[(ll' - Sigma)^2] = Sigma tr(Sigma) + Sigma^2 for l ~ N(0, Sigma)."""
    require_symmetric(Sigma, "Sigma")
    return Sigma * float(np.trace(Sigma)) + Sigma @ Sigma


# ---------------------------------------------------------------------------
# l1-regularized regression


@dataclass(frozen=True)
class LassoInstance:
    """min E[(l'x - s)^2] + gamma_bar |x|_1 with l = (l_tilde; 1) and
    s = l'x_true + noise; deterministic form (x - x_true)' Sigma (x - x_true)
    + sigma_s^2 + gamma_bar |x|_1."""

    n: int
    sigma_l2: float
    sigma_s2: float
    gamma_bar: float
    bernoulli_p: float
    Sigma_l: np.ndarray
    Sigma: np.ndarray
    chol_l: np.ndarray
    x_true: np.ndarray
    V: np.ndarray
    v1_x: float
    v2_x: float
    x_star: np.ndarray
    F_star: float
    mu_f: float
    L_f: float

    @cached_property
    def _embed(self) -> np.ndarray:
        # maps n normals to the regressor's random part; last row zero so the
        # trailing normal is reserved for the response noise
        E = np.zeros((self.n, self.n))
        E[:-1, :-1] = self.chol_l
        return E

    @cached_property
    def _affine_one(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[-1] = 1.0
        return e

    @cached_property
    def _sigma_s(self) -> float:
        return float(np.sqrt(self.sigma_s2))

    def sample(self, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        """Draw one (l, s) pair; consumes exactly n standard normals."""
        z = rng.standard_normal(self.n)
        l = self._embed @ z + self._affine_one
        s = l @ self.x_true + self._sigma_s * z[-1]
        return l, float(s)

    def oracle_x(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        l, s = self.sample(rng)
        return 2.0 * (l @ x - s) * l

    def exact_grad(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (self.Sigma @ (x - self.x_true))

    def objective(self, x: np.ndarray) -> float:
        d = x - self.x_true
        return float(d @ self.Sigma @ d + self.sigma_s2
                     + self.gamma_bar * np.abs(x).sum())

    @property
    def lambda_star(self) -> np.ndarray:
        return self.exact_grad(self.x_star)

    def known_kkt(self) -> KKTPoint:
        return KKTPoint(self.x_star, self.x_star, self.lambda_star)

    def to_problem(self) -> StochasticProblem:
        n = self.n
        gamma_bar = self.gamma_bar
        return StochasticProblem(
            A=np.eye(n),
            B=-np.eye(n),
            b=np.zeros(n),
            oracle_f=self.oracle_x,
            prox_g=GProx(prox=lambda v, t: soft_threshold(v, gamma_bar * t)),
            exact_grad_f=self.exact_grad,
            constants=ProblemConstants(
                mu_f=self.mu_f, L_f=self.L_f, sigma_g=0.0, L_g=0.0,
                v1_x=self.v1_x, v2_x=self.v2_x,
            ),
            known_kkt=self.known_kkt(),
        )

    def describe(self) -> dict:
        return {
            "generator": "lasso",
            "n": self.n,
            "sigma_l2": self.sigma_l2,
            "sigma_s2": self.sigma_s2,
            "gamma_bar": self.gamma_bar,
            "bernoulli_p": self.bernoulli_p,
        }


def variance_constants_lasso(inst: LassoInstance) -> tuple[float, float]:
    """Quadratic-growth coefficients of the sampled x-gradient:

        v1 = 8 lam_max(V),
        v2 = 8 x_true' V x_true + 4 sigma_s^2 (tr(Sigma_l) + 1),

    with V = E[(ll' - Sigma)^2].
    """
    return _lasso_variance(inst.V, inst.x_true, inst.sigma_s2,
                           float(np.trace(inst.Sigma_l)))


def _lasso_variance(V: np.ndarray, x_true: np.ndarray, sigma_s2: float,
                    trace_sigma_l: float) -> tuple[float, float]:
    v1 = 8.0 * float(np.linalg.eigvalsh(V)[-1])
    v2 = 8.0 * float(x_true @ V @ x_true) + 4.0 * sigma_s2 * (trace_sigma_l + 1.0)
    return v1, v2


def gen_lasso(n: int, sigma_l2: float = 5.0, sigma_s2: float = 5.0,
              gamma_bar: float = 0.1, bernoulli_p: float = 0.5,
              stream: Optional[np.random.Generator] = None,
              x_star_tol: float = 1e-10) -> LassoInstance:
    """Generate an instance: banded covariance, sparse x_true by truncation
    of U[-50, 50] draws (last coordinate Bernoulli), reference solution from
    the deterministic proximal-gradient solver.

    Stream consumption: n - 1 uniforms for x_true, then one uniform for the
    Bernoulli coordinate.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = stream if stream is not None else np.random.default_rng()
    Sigma_l = banded_covariance(n - 1, sigma_l2)
    Sigma = np.zeros((n, n))
    Sigma[:-1, :-1] = Sigma_l
    Sigma[-1, -1] = 1.0
    x_true = np.empty(n)
    x_true[:-1] = truncated_uniform(rng, n - 1)
    x_true[-1] = 1.0 if rng.random() < bernoulli_p else 0.0
    V = isserlis_V_affine(Sigma_l)
    v1, v2 = _lasso_variance(V, x_true, sigma_s2, float(np.trace(Sigma_l)))
    x_star = prox_grad_reference(Sigma, x_true, gamma_bar, tol=x_star_tol)
    d = x_star - x_true
    F_star = float(d @ Sigma @ d + sigma_s2 + gamma_bar * np.abs(x_star).sum())
    w = np.linalg.eigvalsh(Sigma)
    inst = LassoInstance(
        n=n, sigma_l2=sigma_l2, sigma_s2=sigma_s2, gamma_bar=gamma_bar,
        bernoulli_p=bernoulli_p,
        Sigma_l=_frozen(Sigma_l), Sigma=_frozen(Sigma),
        chol_l=_frozen(np.linalg.cholesky(Sigma_l)),
        x_true=_frozen(x_true), V=_frozen(V), v1_x=v1, v2_x=v2,
        x_star=_frozen(x_star), F_star=F_star,
        mu_f=2.0 * float(w[0]), L_f=2.0 * float(w[-1]),
    )
    _assert_l1_stationarity(inst)
    return inst


def _assert_l1_stationarity(inst: LassoInstance) -> None:
    # -lambda* must be a subgradient of gamma_bar |.|_1 at y* = x*.
    lam = inst.lambda_star
    on = np.abs(inst.x_star) > 1e-12
    if np.any(np.abs(-lam[on] - inst.gamma_bar * np.sign(inst.x_star[on])) > 1e-7):
        raise ArithmeticError("reference solution violates l1 stationarity on the support")
    if np.any(np.abs(lam[~on]) > inst.gamma_bar + 1e-7):
        raise ArithmeticError("reference solution violates l1 stationarity off the support")


# ---------------------------------------------------------------------------
# distributed regression


@dataclass(frozen=True)
class DistRegInstance:
    """Two agents estimating coupled coefficients: f(x) = E[(l1'x - s1)^2],
    g(y) = E[(l2'y - s2)^2] subject to Ax - y = 0, where beta2 = A beta1."""

    n: int
    sigma_l2: float
    sigma_s2: float
    Sigma: np.ndarray
    A: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    chol: np.ndarray
    V: np.ndarray
    v1: float
    v2_x: float
    v2_y: float
    F_star: float
    mu: float  # strong convexity of either block, 2 lam_min(Sigma)
    L: float   # gradient Lipschitz modulus, 2 lam_max(Sigma)

    @property
    def z_star(self) -> np.ndarray:
        return np.concatenate([self.beta1, self.beta2])

    @cached_property
    def _sigma_s(self) -> float:
        return float(np.sqrt(self.sigma_s2))

    def _sample(self, beta: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        z = rng.standard_normal(self.n + 1)
        l = self.chol @ z[:-1]
        s = l @ beta + self._sigma_s * z[-1]
        return l, float(s)

    def sample_x(self, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        return self._sample(self.beta1, rng)

    def sample_y(self, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        return self._sample(self.beta2, rng)

    def oracle_x(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        l, s = self.sample_x(rng)
        return 2.0 * (l @ x - s) * l

    def oracle_y(self, y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        l, s = self.sample_y(rng)
        return 2.0 * (l @ y - s) * l

    def exact_grad_x(self, x: np.ndarray) -> np.ndarray:
        return 2.0 * (self.Sigma @ (x - self.beta1))

    def exact_grad_y(self, y: np.ndarray) -> np.ndarray:
        return 2.0 * (self.Sigma @ (y - self.beta2))

    def objective(self, x: np.ndarray, y: np.ndarray) -> float:
        dx = x - self.beta1
        dy = y - self.beta2
        return float(dx @ self.Sigma @ dx + dy @ self.Sigma @ dy + 2.0 * self.sigma_s2)

    def known_kkt(self) -> KKTPoint:
        # Stationarity gives A'lam = 0 and -lam = 0 at (beta1, beta2);
        # solve the stacked system by least squares for robustness.
        M = np.vstack([self.A.T, -np.eye(self.n)])
        rhs = np.concatenate([self.exact_grad_x(self.beta1),
                              self.exact_grad_y(self.beta2)])
        lam, *_ = np.linalg.lstsq(M, rhs, rcond=None)
        return KKTPoint(self.beta1, self.beta2, lam)

    def to_problem(self) -> StochasticProblem:
        return StochasticProblem(
            A=self.A,
            B=-np.eye(self.n),
            b=np.zeros(self.n),
            oracle_f=self.oracle_x,
            oracle_g=self.oracle_y,
            exact_grad_f=self.exact_grad_x,
            exact_grad_g=self.exact_grad_y,
            constants=ProblemConstants(
                mu_f=self.mu, L_f=self.L, sigma_g=self.mu, L_g=self.L,
                v1_x=self.v1, v2_x=self.v2_x, v1_y=self.v1, v2_y=self.v2_y,
            ),
            known_kkt=self.known_kkt(),
        )

    def describe(self) -> dict:
        return {
            "generator": "distreg",
            "n": self.n,
            "sigma_l2": self.sigma_l2,
            "sigma_s2": self.sigma_s2,
        }


def gen_distreg(n: int, sigma_l2: float = 5.0, sigma_s2: float = 5.0,
                stream: Optional[np.random.Generator] = None,
                max_retries: int = 8) -> DistRegInstance:
    """Generate an instance: upper-triangular coupling A (diagonal 3, strict
    upper N(0, 0.01)), beta2 by truncation, beta1 = A^{-1} beta2.

    Stream consumption per attempt: n(n-1)/2 normals (strict upper triangle,
    row-major), then n uniforms.  A numerically ill-conditioned draw is
    retried with fresh draws; the objective value at the solution is
    2 sigma_s^2 by construction.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = stream if stream is not None else np.random.default_rng()
    Sigma = banded_covariance(n, sigma_l2)
    for _ in range(max_retries):
        A = 3.0 * np.eye(n)
        iu = np.triu_indices(n, k=1)
        A[iu] = 0.1 * rng.standard_normal(iu[0].size)
        beta2 = truncated_uniform(rng, n)
        cond = np.linalg.cond(A)
        if np.isfinite(cond) and cond < 1e12:
            break
    else:
        raise ArithmeticError(f"coupling matrix stayed ill-conditioned after {max_retries} draws")
    beta1 = np.linalg.solve(A, beta2)
    V = isserlis_V_centered(Sigma)
    v1 = 8.0 * float(np.linalg.eigvalsh(V)[-1])
    # Closing-form variance offsets; tr(Sigma) enters through E|l|^2.
    tr = float(np.trace(Sigma))
    v2_x = float(beta1 @ V @ beta1) + 4.0 * sigma_s2 * tr
    v2_y = float(beta2 @ V @ beta2) + 4.0 * sigma_s2 * tr
    w = np.linalg.eigvalsh(Sigma)
    return DistRegInstance(
        n=n, sigma_l2=sigma_l2, sigma_s2=sigma_s2,
        Sigma=_frozen(Sigma), A=_frozen(A),
        beta1=_frozen(beta1), beta2=_frozen(beta2),
        chol=_frozen(np.linalg.cholesky(Sigma)),
        V=_frozen(V), v1=v1, v2_x=v2_x, v2_y=v2_y,
        F_star=2.0 * sigma_s2,
        mu=2.0 * float(w[0]), L=2.0 * float(w[-1]),
    )
