"""Competitor schemes and shared primitives.

Two single-sample splitting baselines for the l1-regularized regression
problem (one with a root-k damping schedule, one with triangular-weight
averaging), a projected two-agent stochastic-gradient baseline for the
distributed regression problem, the soft-threshold operator, and the
deterministic proximal-gradient reference solver that defines ground
truth for every error column.

All step functions are deterministic given (state, sample) and mutate the
passed state in place for speed; a run replays exactly from a fresh state
and the same sample stream.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def soft_threshold(v: np.ndarray, alpha: float) -> np.ndarray:
    """Componentwise shrinkage sign(v) max(|v| - alpha, 0), the prox of alpha |.|_1."""
    if alpha < 0:
        raise ValueError("threshold must be nonnegative")
    return np.sign(v) * np.maximum(np.abs(v) - alpha, 0.0)


@dataclass
class AveragedIterate:
    """Current triple plus weighted running averages of x and y.

    The x-average starts from x_0; the y-average deliberately starts from
    y_1 (the first updated value), so its weight accumulator is zero until
    the first step.
    """

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    x_sum: np.ndarray = field(init=False)
    y_sum: np.ndarray = field(init=False)
    x_weight: float = field(init=False)
    y_weight: float = field(init=False)

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.y = np.array(self.y, dtype=float)
        self.lam = np.array(self.lam, dtype=float)
        self.x_sum = self.x.copy()  # x_0 enters with weight 1
        self.y_sum = np.zeros_like(self.y)
        self.x_weight = 1.0
        self.y_weight = 0.0

    @property
    def x_bar(self) -> np.ndarray:
        return self.x_sum / self.x_weight

    @property
    def y_bar(self) -> np.ndarray:
        if self.y_weight <= 0:
            raise ValueError("y-average is undefined before the first update")
        return self.y_sum / self.y_weight


def _l1_splitting_update(state: AveragedIterate, l: np.ndarray, s: float,
                         rho: float, gamma_bar: float, damping: float,
                         wx: float, wy: float) -> AveragedIterate:
    """Shared core of both l1 baselines: damped single-sample x-step,
    soft-threshold y-step, unit multiplier step, weighted averaging."""
    x_next = (-2.0 * (l @ state.x - s) * l + state.lam + rho * state.y
              + damping * state.x) / (rho + damping)
    y_next = soft_threshold(x_next - state.lam / rho, gamma_bar / rho)
    state.lam -= rho * (x_next - y_next)
    state.x = x_next
    state.y = y_next
    state.x_sum += wx * x_next
    state.x_weight += wx
    state.y_sum += wy * y_next
    state.y_weight += wy
    return state


def sadm0_step(state: AveragedIterate, sample: tuple[np.ndarray, float], k: int,
               rho: float, gamma_bar: float, eta_k: float) -> AveragedIterate:
    """Root-k-damped splitting step (damping eta_k supplied by the caller,
    e.g. 1000 sqrt(k) or mu k) with uniform averaging."""
    if not eta_k > 0:
        raise ValueError("eta_k must be positive")
    l, s = sample
    return _l1_splitting_update(state, l, s, rho, gamma_bar, eta_k, wx=1.0, wy=1.0)


def sadm0_damping_sqrt(k: int) -> float:
    return 1000.0 * np.sqrt(k)


def sadm1_step(state: AveragedIterate, sample: tuple[np.ndarray, float], k: int,
               rho: float, gamma_bar: float, mu_f: float) -> AveragedIterate:
    """Strong-convexity-damped step with triangular-weight averaging:

        x_bar_{k+1} = 2/((k+2)(k+3)) sum_{j=0}^{k+1} (j+1) x_j,
        y_bar_{k+1} = 2/((k+1)(k+2)) sum_{j=1}^{k+1} j y_j.

    The (j+1)-vs-j weight asymmetry between the two averages is intentional
    and preserved.
    """
    l, s = sample
    damping = (k + 2) / 2.0 * mu_f
    return _l1_splitting_update(state, l, s, rho, gamma_bar, damping,
                                wx=float(k + 2), wy=float(k + 1))


@dataclass
class DsaState:
    """Two-agent projected stochastic-gradient state.

    Holds the Cholesky factor of I + A'A so the subspace projection is a
    pair of triangular solves per step.
    """

    x: np.ndarray
    y: np.ndarray
    A: np.ndarray
    cho: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.y = np.array(self.y, dtype=float)
        self.A = np.array(self.A, dtype=float)
        self.cho = cho_factor(np.eye(self.A.shape[1]) + self.A.T @ self.A)


def dsa_step(state: DsaState, sample_x: tuple[np.ndarray, float],
             sample_y: tuple[np.ndarray, float], k: int,
             mu_f: float, sigma_g: float, Gamma: float,
             z_star_norm_sq: float) -> DsaState:
    """One distributed step: local gradient moves with steps 1/(mu k) and
    1/(sigma k), projection onto the coupling subspace y = Ax via the
    prefactored normal equations, then Euclidean projection onto the ball
    |z|^2 <= Gamma |z*|^2 (radial scaling; Gamma = inf disables it)."""
    if k < 1:
        raise ValueError("step index starts at 1")
    if not Gamma > 0:
        raise ValueError("Gamma must be positive")
    lx, sx = sample_x
    ly, sy = sample_y
    x_t = state.x - (2.0 * (lx @ state.x - sx) / (mu_f * k)) * lx
    y_t = state.y - (2.0 * (ly @ state.y - sy) / (sigma_g * k)) * ly
    x_bar = cho_solve(state.cho, x_t + state.A.T @ y_t)
    y_bar = state.A @ x_bar
    if np.isfinite(Gamma):
        radius_sq = Gamma * z_star_norm_sq
        norm_sq = float(x_bar @ x_bar + y_bar @ y_bar)
        if norm_sq > radius_sq:
            scale = np.sqrt(radius_sq / norm_sq)
            x_bar *= scale
            y_bar *= scale
    state.x = x_bar
    state.y = y_bar
    return state


def prox_grad_reference(Sigma: np.ndarray, x_true: np.ndarray, gamma_bar: float,
                        tol: float = 1e-10, max_iters: int = 200_000,
                        callback: Optional[Callable[[np.ndarray], None]] = None) -> np.ndarray:
    """Minimize (x - x_true)' Sigma (x - x_true) + gamma_bar |x|_1 by
    proximal gradient with the fixed step 1/(2 lam_max(Sigma)).

    Stops when the prox-gradient fixed-point residual drops below tol in
    the infinity norm.  This defines ground truth for every error column,
    so the default tolerance dominates all compared errors.
    """
    w = np.linalg.eigvalsh(Sigma)
    if w[0] < -1e-10 * max(float(w[-1]), 1.0):
        raise ValueError("Sigma must be positive semidefinite")
    lam_max = float(w[-1])
    if lam_max <= 0:
        return np.zeros_like(np.asarray(x_true, dtype=float))
    t = 1.0 / (2.0 * lam_max)
    x = np.array(x_true, dtype=float)
    for _ in range(max_iters):
        x_next = soft_threshold(x - t * 2.0 * (Sigma @ (x - x_true)), gamma_bar * t)
        residual = float(np.abs(x_next - x).max())
        x = x_next
        if callback is not None:
            callback(x)
        if residual <= tol:
            return x
    raise ArithmeticError(
        f"proximal gradient did not reach tol={tol:.1e} in {max_iters} iterations "
        f"(last residual {residual:.3e})"
    )
