"""Structured stochastic convex programs with a single affine coupling.

A problem couples two strongly convex expectation-valued blocks through
``A x + B y = b``.  Gradients of either block are only available through
stochastic first-order oracles; alternatively the y-block may expose an
exact proximal map (the LASSO regularizer case).

Everything here is immutable after construction and oracles are pure
functions of ``(point, rng)``, so problems can be shared across threads
and replications need only disjoint random streams.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Stochastic first-order oracle: (point, rng) -> sampled gradient.
Oracle = Callable[[np.ndarray, np.random.Generator], np.ndarray]
GradFn = Callable[[np.ndarray], np.ndarray]

# Relative tolerance for rank / symmetry / PSD checks.  Synthetic problems
# are well conditioned; a relative threshold keeps the checks scale-free.
CHECK_RTOL = 1e-10


def _frozen(a) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


def require_symmetric(M: np.ndarray, name: str) -> None:
    scale = float(np.abs(M).max()) if M.size else 0.0
    if not np.allclose(M, M.T, rtol=0.0, atol=CHECK_RTOL * max(scale, 1.0)):
        raise ValueError(f"{name} must be symmetric")


def require_psd(M: np.ndarray, name: str) -> np.ndarray:
    """Check symmetry and eigenvalues >= -CHECK_RTOL * ||M||; return eigenvalues."""
    require_symmetric(M, name)
    w = np.linalg.eigvalsh(M)
    norm = max(abs(float(w[0])), abs(float(w[-1])))
    if w[0] < -CHECK_RTOL * max(norm, 1.0):
        raise ValueError(f"{name} must be positive semidefinite (min eigenvalue {w[0]:.3e})")
    return w


@dataclass(frozen=True)
class ProblemConstants:
    """Convexity, smoothness and oracle-variance constants of the two blocks.

    The variance coefficients bound the sampled-gradient noise through the
    quadratic growth law  E||w||^2 <= v1 ||point||^2 + v2.  They are supplied
    by the problem builder, never estimated: every derived quantity (burn-in
    indices, contraction gaps, certificates) is algebraic in them.
    """

    mu_f: float
    L_f: float
    sigma_g: float = 0.0
    L_g: float = 0.0
    v1_x: float = 0.0
    v2_x: float = 0.0
    v1_y: Optional[float] = None
    v2_y: Optional[float] = None

    def __post_init__(self):
        if not self.mu_f > 0:
            raise ValueError("mu_f must be positive")
        if self.L_f < self.mu_f:
            raise ValueError("L_f must be >= mu_f")
        if self.sigma_g < 0 or self.L_g < 0:
            raise ValueError("sigma_g and L_g must be nonnegative")
        for name in ("v1_x", "v2_x", "v1_y", "v2_y"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class KKTPoint:
    x_star: np.ndarray
    y_star: np.ndarray
    lambda_star: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_star", _frozen(self.x_star))
        object.__setattr__(self, "y_star", _frozen(self.y_star))
        object.__setattr__(self, "lambda_star", _frozen(self.lambda_star))


@dataclass(frozen=True)
class Iterate:
    """The primal-dual triple (x, y, lambda) the outer loop operates on."""

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "y", _frozen(self.y))
        object.__setattr__(self, "lam", _frozen(self.lam))

    def __sub__(self, other: "Iterate") -> "Iterate":
        return Iterate(self.x - other.x, self.y - other.y, self.lam - other.lam)


def zero_iterate(n: int, m: int, p: int) -> Iterate:
    return Iterate(np.zeros(n), np.zeros(m), np.zeros(p))


def iterate_from_kkt(point: KKTPoint) -> Iterate:
    return Iterate(point.x_star, point.y_star, point.lambda_star)


@dataclass(frozen=True)
class GProx:
    """Exact-minimizer variant of the y-block.

    ``prox(v, t)`` must return argmin_y g(y) + ||y - v||^2 / (2 t).  The
    outer loop reduces its y-subproblem to this map, which requires the
    coupling to satisfy B = -I (and Q a scalar multiple of I).
    """

    prox: Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class StochasticProblem:
    """min E[f(x)] + E[g(y)]  subject to  A x + B y = b.

    Exactly one of ``oracle_g`` (stochastic gradients for g) and ``prox_g``
    (exact proximal map for g) must be supplied.  Exact gradients are
    optional and only needed by reference solvers and KKT residuals.
    """

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    oracle_f: Oracle
    constants: ProblemConstants
    oracle_g: Optional[Oracle] = None
    prox_g: Optional[GProx] = None
    exact_grad_f: Optional[GradFn] = None
    exact_grad_g: Optional[GradFn] = None
    known_kkt: Optional[KKTPoint] = None

    def __post_init__(self):
        A = _frozen(self.A)
        B = _frozen(self.B)
        b = _frozen(self.b)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        if A.ndim != 2 or B.ndim != 2 or b.ndim != 1:
            raise ValueError("A, B must be matrices and b a vector")
        p, n = A.shape
        pb, m = B.shape
        if pb != p or b.shape[0] != p:
            raise ValueError(
                f"inconsistent constraint dimensions: A is {A.shape}, B is {B.shape}, b has {b.shape[0]}"
            )
        if min(n, m, p) < 1:
            raise ValueError("dimensions must be positive")
        AB = np.hstack([A, B])
        smax = float(np.linalg.norm(AB, 2))
        if np.linalg.matrix_rank(AB, tol=CHECK_RTOL * max(smax, 1.0)) < p:
            raise ValueError("[A B] must have full row rank")
        if (self.oracle_g is None) == (self.prox_g is None):
            raise ValueError("exactly one of oracle_g and prox_g must be given")
        if self.oracle_g is not None and self.constants.sigma_g <= 0:
            raise ValueError("a stochastic y-oracle requires sigma_g > 0")
        if self.oracle_g is not None and (
            self.constants.v1_y is None or self.constants.v2_y is None
        ):
            raise ValueError("a stochastic y-oracle requires v1_y and v2_y")
        if self.known_kkt is not None:
            self._check_kkt(self.known_kkt)

    def _check_kkt(self, pt: KKTPoint, tol: float = 1e-6) -> None:
        if pt.x_star.shape[0] != self.dim_x or pt.y_star.shape[0] != self.dim_y:
            raise ValueError("KKT point dimensions do not match the problem")
        feas = self.A @ pt.x_star + self.B @ pt.y_star - self.b
        if np.abs(feas).max() > tol * (1.0 + np.abs(self.b).max()):
            raise ValueError("known KKT point violates the coupling constraint")
        if self.exact_grad_f is not None:
            r = self.A.T @ pt.lambda_star - self.exact_grad_f(pt.x_star)
            if np.abs(r).max() > tol * (1.0 + np.abs(pt.lambda_star).max()):
                raise ValueError("known KKT point violates x-stationarity")
        if self.exact_grad_g is not None:
            r = self.B.T @ pt.lambda_star - self.exact_grad_g(pt.y_star)
            if np.abs(r).max() > tol * (1.0 + np.abs(pt.lambda_star).max()):
                raise ValueError("known KKT point violates y-stationarity")

    @property
    def dim_x(self) -> int:
        return self.A.shape[1]

    @property
    def dim_y(self) -> int:
        return self.B.shape[1]

    @property
    def dim_c(self) -> int:
        return self.A.shape[0]

    def coupling_residual(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.A @ x + self.B @ y - self.b


@dataclass(frozen=True)
class GMetric:
    """Quadratic form measuring iterate error:

        |u|_G^2 = x' P_hat x + y' Q y + |lambda|^2 / (rho gamma),

    with P_hat = P + rho A'A.  A seminorm in general; a norm when both
    blocks are positive definite.
    """

    P_hat: np.ndarray
    Q: np.ndarray
    rho_gamma: float

    def __post_init__(self):
        object.__setattr__(self, "P_hat", _frozen(self.P_hat))
        object.__setattr__(self, "Q", _frozen(self.Q))
        if not self.rho_gamma > 0:
            raise ValueError("rho * gamma must be positive")
        require_psd(self.P_hat, "P_hat")
        require_psd(self.Q, "Q")

    @classmethod
    def from_problem(cls, prob: StochasticProblem, rho: float, gamma: float,
                     P: np.ndarray, Q: np.ndarray) -> "GMetric":
        return cls(P + rho * (prob.A.T @ prob.A), Q, rho * gamma)


def g_norm_sq(metric: GMetric, u: Iterate) -> float:
    """Evaluate |u|_G^2.  Raises on dimension mismatch."""
    if u.x.shape[0] != metric.P_hat.shape[0] or u.y.shape[0] != metric.Q.shape[0]:
        raise ValueError("iterate dimensions do not match the metric")
    return float(
        u.x @ metric.P_hat @ u.x
        + u.y @ metric.Q @ u.y
        + (u.lam @ u.lam) / metric.rho_gamma
    )


def aug_lagrangian_grad_x(prob: StochasticProblem, rho: float, P: np.ndarray,
                          x: np.ndarray, y: np.ndarray, lam: np.ndarray,
                          x_anchor: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sampled x-gradient of the augmented Lagrangian plus the proximal anchor:

        oracle_f(x) - A'lam + rho A'(Ax + By - b) + P (x - x_anchor).

    The y-block contributes nothing to the x-gradient and is never evaluated.
    """
    r = prob.coupling_residual(x, y)
    return (
        prob.oracle_f(x, rng)
        - prob.A.T @ lam
        + rho * (prob.A.T @ r)
        + P @ (x - x_anchor)
    )


def aug_lagrangian_grad_y(prob: StochasticProblem, rho: float, Q: np.ndarray,
                          x: np.ndarray, y: np.ndarray, lam: np.ndarray,
                          y_anchor: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Mirror of :func:`aug_lagrangian_grad_x` for the y-block."""
    if prob.oracle_g is None:
        raise ValueError("problem has no stochastic y-oracle")
    r = prob.coupling_residual(x, y)
    return (
        prob.oracle_g(y, rng)
        - prob.B.T @ lam
        + rho * (prob.B.T @ r)
        + Q @ (y - y_anchor)
    )


def kkt_residual(prob: StochasticProblem, u: Iterate) -> float:
    """Max infinity-norm of the three KKT defects at u.

    Requires exact gradients of both blocks (stationarity is checked as
    A'lam = grad f(x) and B'lam = grad g(y)).
    """
    if prob.exact_grad_f is None or prob.exact_grad_g is None:
        raise ValueError("kkt_residual requires exact gradients for both blocks")
    r_x = prob.A.T @ u.lam - prob.exact_grad_f(u.x)
    r_y = prob.B.T @ u.lam - prob.exact_grad_g(u.y)
    r_c = prob.coupling_residual(u.x, u.y)
    return float(max(np.abs(r_x).max(), np.abs(r_y).max(), np.abs(r_c).max()))
