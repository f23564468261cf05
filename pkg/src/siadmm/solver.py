"""Inexact splitting outer loop with geometrically growing inner sample counts.

Each outer iteration solves the y- then the x-subproblem of the augmented
Lagrangian by finitely many diminishing-step stochastic gradient steps
(anchored at the current outer iterate), then takes the multiplier step
lambda <- lambda - gamma rho (Ax + By - b).  When the y-block carries an
exact proximal map the y-subproblem is solved in closed form instead.
"""
from __future__ import annotations

import hashlib
import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds as _bounds
from .problems import (
    GMetric,
    Iterate,
    StochasticProblem,
    g_norm_sq,
    require_psd,
    zero_iterate,
)
from .sa import SARateConstants, compute_rate_constants, sa_iterate

# Largest admissible per-iteration batch; beyond this the geometric schedule
# has outgrown anything a run could consume and eta**-k risks overflow.
SCHEDULE_CAP = 2 ** 62


@dataclass(frozen=True)
class AlgorithmConfig:
    """Penalty, proximal weights, multiplier step and the batch schedule.

    eta, gamma_x and gamma_y may be left None: the step scales default to
    1/c for the respective subproblem modulus and eta defaults to
    (1 + delta/2)/(1 + delta), which strictly satisfies the geometric-rate
    requirement eta > 1/(1 + delta).
    """

    rho: float
    P: np.ndarray
    Q: np.ndarray
    gamma: float = 1.0
    R: float = 1.0
    T: float = 1000.0
    eta: Optional[float] = None
    gamma_x: Optional[float] = None
    gamma_y: Optional[float] = None
    max_outer: int = 100
    sample_budget: Optional[int] = None

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        Q = np.array(self.Q, dtype=float)
        P.setflags(write=False)
        Q.setflags(write=False)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)
        if not (self.rho > 0 and self.gamma > 0 and self.R > 0 and self.T > 0):
            raise ValueError("rho, gamma, R and T must be positive")
        if self.eta is not None and not (0.0 < self.eta < 1.0):
            raise ValueError("eta must lie in (0, 1)")
        if self.max_outer < 0:
            raise ValueError("max_outer must be nonnegative")
        if self.sample_budget is not None and self.sample_budget < 0:
            raise ValueError("sample_budget must be nonnegative")
        require_psd(P, "P")
        require_psd(Q, "Q")

    def digest(self) -> str:
        h = hashlib.sha256()
        for part in (self.rho, self.gamma, self.R, self.T, self.eta,
                     self.gamma_x, self.gamma_y, self.max_outer, self.sample_budget):
            h.update(repr(part).encode())
        h.update(np.ascontiguousarray(self.P).tobytes())
        h.update(np.ascontiguousarray(self.Q).tobytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class DerivedConstants:
    """Subproblem moduli, burn-in indices and the resolved schedule ratio."""

    c_x: float
    L_x: float
    gamma_x: float
    M_x: float
    K_x: int
    sa_x: SARateConstants
    eta: float
    metric: GMetric
    quad_x: np.ndarray  # rho A'A + P
    quad_y: np.ndarray  # rho B'B + Q
    delta: Optional[float] = None
    c_y: Optional[float] = None
    L_y: Optional[float] = None
    gamma_y: Optional[float] = None
    M_y: Optional[float] = None
    K_y: Optional[int] = None
    sa_y: Optional[SARateConstants] = None
    prox_scale_q: Optional[float] = None  # Q = q I when the exact y-update is used


def _contraction_gap(prob: StochasticProblem, cfg: AlgorithmConfig) -> Optional[float]:
    """Closed-form gap when P = 0 and gamma = 1; None otherwise."""
    if np.abs(cfg.P).max() > 0 or cfg.gamma != 1.0:
        return None
    k = prob.constants
    wq = np.linalg.eigvalsh(cfg.Q)
    q_zero = float(np.abs(cfg.Q).max()) == 0.0
    if q_zero or k.sigma_g <= 0:
        return _bounds.delta_simple(k.mu_f, k.L_f, cfg.rho, prob.A)
    if wq[0] > 0:
        return _bounds.delta_strongly_convex_g(k.mu_f, k.L_f, k.sigma_g, cfg.rho, prob.A, cfg.Q)
    return None


def derive_constants(prob: StochasticProblem, cfg: AlgorithmConfig) -> DerivedConstants:
    """Resolve subproblem moduli c, L from the quadratic penalty spectra:

        c_x = mu_f + lam_min(rho A'A + P),   L_x = L_f + lam_max(rho A'A + P),

    and symmetrically for y, then the burn-in machinery for each sampled
    subproblem.  Errors out when the y-block is sampled without strong
    convexity (sigma_g = 0) since the inner rate theory needs it.
    """
    k = prob.constants
    quad_x = cfg.rho * (prob.A.T @ prob.A) + cfg.P
    wx = np.linalg.eigvalsh(quad_x)
    if wx[0] <= 0:
        raise ValueError("P + rho A'A must be positive definite")
    c_x = k.mu_f + float(wx[0])
    L_x = k.L_f + float(wx[-1])
    gamma_x = cfg.gamma_x if cfg.gamma_x is not None else 1.0 / c_x
    sa_x = compute_rate_constants(c_x, L_x, k.v1_x, k.v2_x, cfg.R, gamma_x)

    quad_y = cfg.rho * (prob.B.T @ prob.B) + cfg.Q
    delta = _contraction_gap(prob, cfg)
    eta = _resolve_eta(cfg, delta)

    prox_scale_q = None
    if prob.prox_g is not None:
        prox_scale_q = _prox_structure(prob, cfg)
        return DerivedConstants(
            c_x=c_x, L_x=L_x, gamma_x=gamma_x, M_x=sa_x.M, K_x=sa_x.K, sa_x=sa_x,
            eta=eta, metric=GMetric(quad_x, cfg.Q, cfg.rho * cfg.gamma),
            quad_x=quad_x, quad_y=quad_y, delta=delta, prox_scale_q=prox_scale_q,
        )

    if k.sigma_g <= 0:
        raise ValueError("a sampled y-update requires sigma_g > 0")
    wy = np.linalg.eigvalsh(quad_y)
    c_y = k.sigma_g + float(wy[0])
    L_y = k.L_g + float(wy[-1])
    gamma_y = cfg.gamma_y if cfg.gamma_y is not None else 1.0 / c_y
    sa_y = compute_rate_constants(c_y, L_y, k.v1_y, k.v2_y, cfg.R, gamma_y)
    return DerivedConstants(
        c_x=c_x, L_x=L_x, gamma_x=gamma_x, M_x=sa_x.M, K_x=sa_x.K, sa_x=sa_x,
        eta=eta, metric=GMetric(quad_x, cfg.Q, cfg.rho * cfg.gamma),
        quad_x=quad_x, quad_y=quad_y, delta=delta,
        c_y=c_y, L_y=L_y, gamma_y=gamma_y, M_y=sa_y.M, K_y=sa_y.K, sa_y=sa_y,
    )


def _resolve_eta(cfg: AlgorithmConfig, delta: Optional[float]) -> float:
    if cfg.eta is not None:
        if delta is not None and cfg.eta <= 1.0 / (1.0 + delta):
            warnings.warn(
                f"eta = {cfg.eta:.6g} does not exceed 1/(1+delta) = {1.0 / (1.0 + delta):.6g}; "
                "the geometric mean-squared-error rate is not certified",
                stacklevel=3,
            )
        return cfg.eta
    if delta is None:
        raise ValueError("eta must be given when no closed-form contraction gap applies")
    return (1.0 + delta / 2.0) / (1.0 + delta)


def _prox_structure(prob: StochasticProblem, cfg: AlgorithmConfig) -> float:
    """The exact y-update reduces to a proximal map only for B = -I and
    Q = q I; returns q."""
    m = prob.dim_y
    if prob.dim_c != m or not np.allclose(prob.B, -np.eye(m), atol=1e-12):
        raise ValueError("the exact y-update requires B = -I")
    q = float(cfg.Q[0, 0]) if m else 0.0
    if not np.allclose(cfg.Q, q * np.eye(m), atol=1e-12):
        raise ValueError("the exact y-update requires Q to be a scalar multiple of I")
    return q


def sample_schedule(K: int, T: float, eta: float, k: int) -> int:
    """Per-iteration batch size max(K, ceil(T / eta**k)) at outer index k >= 0."""
    if k < 0:
        raise ValueError("outer index must be nonnegative")
    if not (0.0 < eta < 1.0 and T > 0):
        raise ValueError("need T > 0 and eta in (0, 1)")
    if math.log(T) - k * math.log(eta) > math.log(SCHEDULE_CAP):
        raise OverflowError(
            f"schedule value T/eta^k exceeds {SCHEDULE_CAP:.3g} at k={k}; "
            "cap max_outer below log(cap/T)/log(1/eta)"
        )
    return max(int(K), math.ceil(T / eta ** k))


def si_admm_step(prob: StochasticProblem, cfg: AlgorithmConfig,
                 consts: DerivedConstants, u: Iterate,
                 T_y: int, T_x: int, rng: np.random.Generator) -> Iterate:
    """One outer iteration with sampled y- and x-updates.

    Consumes exactly (T_y - 1) + (T_x - 1) oracle calls.  Inner gradients
    are the sampled augmented-Lagrangian gradients re-anchored at the
    incoming iterate; both inner loops start from the incoming block value.
    """
    if T_y < 1 or T_x < 1:
        raise ValueError("inner sample counts must be >= 1")
    if prob.oracle_g is None:
        raise ValueError("sampled y-update needs a stochastic y-oracle")
    A, B, b, rho = prob.A, prob.B, prob.b, cfg.rho

    # oracle(y) + (rho B'B + Q) y + const reproduces the anchored gradient
    const_y = -B.T @ u.lam + rho * (B.T @ (A @ u.x - b)) - cfg.Q @ u.y
    quad_y, oracle_g = consts.quad_y, prob.oracle_g
    y_new = sa_iterate(
        lambda y, r: oracle_g(y, r) + quad_y @ y + const_y,
        u.y, consts.gamma_y, T_y, rng,
    )

    const_x = -A.T @ u.lam + rho * (A.T @ (B @ y_new - b)) - cfg.P @ u.x
    quad_x, oracle_f = consts.quad_x, prob.oracle_f
    x_new = sa_iterate(
        lambda x, r: oracle_f(x, r) + quad_x @ x + const_x,
        u.x, consts.gamma_x, T_x, rng,
    )

    lam_new = u.lam - cfg.gamma * rho * (A @ x_new + B @ y_new - b)
    return Iterate(x_new, y_new, lam_new)


def si_admm_step_exact_y(prob: StochasticProblem, cfg: AlgorithmConfig,
                         consts: DerivedConstants, u: Iterate,
                         T_x: int, rng: np.random.Generator) -> Iterate:
    """One outer iteration with the y-subproblem solved exactly via prox_g.

    With B = -I and Q = q I the y-update is
    prox_{g/(rho+q)}( (rho (A x - b) - lam + q y) / (rho + q) ); for the
    l1 regularizer with q = 0 this is soft-thresholding of x - lam/rho.
    Consumes exactly T_x - 1 oracle calls.
    """
    if prob.prox_g is None:
        raise ValueError("problem does not carry an exact proximal map for g")
    if T_x < 1:
        raise ValueError("inner sample count must be >= 1")
    q = consts.prox_scale_q if consts.prox_scale_q is not None else _prox_structure(prob, cfg)
    A, B, b, rho = prob.A, prob.B, prob.b, cfg.rho
    t = 1.0 / (rho + q)
    y_new = prob.prox_g.prox((rho * (A @ u.x - b) - u.lam + q * u.y) * t, t)

    const_x = -A.T @ u.lam + rho * (A.T @ (B @ y_new - b)) - cfg.P @ u.x
    quad_x, oracle_f = consts.quad_x, prob.oracle_f
    x_new = sa_iterate(
        lambda x, r: oracle_f(x, r) + quad_x @ x + const_x,
        u.x, consts.gamma_x, T_x, rng,
    )

    lam_new = u.lam - cfg.gamma * rho * (A @ x_new + B @ y_new - b)
    return Iterate(x_new, y_new, lam_new)


@dataclass
class RunRecord:
    """Per-outer-iteration trajectory of one run (columnar storage).

    samples_x / samples_y are cumulative oracle-call counts; error columns
    are None when the quantity is unavailable (no known KKT point, or no
    metric for a baseline run).  wall_ms is cumulative wall-clock time per
    row and is the only nondeterministic column.
    """

    algorithm: str
    config_hash: str
    seed: str
    prng: str
    ks: np.ndarray
    samples_x: np.ndarray
    samples_y: np.ndarray
    wall_ms: np.ndarray
    err_u_G: Optional[np.ndarray] = None
    err_x: Optional[np.ndarray] = None
    err_y: Optional[np.ndarray] = None
    iterates: Optional[list] = None
    final: Optional[Iterate] = None
    total_wall_ms: float = 0.0

    def __post_init__(self):
        if np.any(np.diff(self.samples_x) < 0) or np.any(np.diff(self.samples_y) < 0):
            raise ValueError("cumulative sample counts must be nondecreasing")

    @property
    def samples_total(self) -> np.ndarray:
        return self.samples_x + self.samples_y

    def __len__(self) -> int:
        return len(self.ks)


def solve(prob: StochasticProblem, cfg: AlgorithmConfig,
          u0: Optional[Iterate] = None, rng: Optional[np.random.Generator] = None,
          algorithm: str = "si-admm", seed_label: str = "",
          prng_label: str = "numpy-PCG64") -> RunRecord:
    """Run the outer loop until max_outer or until the sample budget is met.

    The budget is checked after each completed outer iteration, so the run
    finishes the iteration in flight; a budget smaller than the first
    iteration's cost is rejected up front.  u0 defaults to the origin.
    """
    if rng is None:
        rng = np.random.default_rng()
    consts = derive_constants(prob, cfg)
    n, m, p = prob.dim_x, prob.dim_y, prob.dim_c
    u = u0 if u0 is not None else zero_iterate(n, m, p)
    exact_y = prob.prox_g is not None

    kkt = prob.known_kkt
    u_star = Iterate(kkt.x_star, kkt.y_star, kkt.lambda_star) if kkt else None

    ks = [0]
    sx, sy = [0], [0]
    wall = [0.0]
    err_g, err_x, err_y = [], [], []
    iterates = [u]

    def push_errors(it: Iterate) -> None:
        if u_star is None:
            return
        d = it - u_star
        err_g.append(g_norm_sq(consts.metric, d))
        err_x.append(float(d.x @ d.x))
        err_y.append(float(d.y @ d.y))

    push_errors(u)

    budget = cfg.sample_budget
    if cfg.max_outer > 0 and budget is not None:
        first_cost = sample_schedule(consts.K_x, cfg.T, consts.eta, 0) - 1
        if not exact_y:
            first_cost += sample_schedule(consts.K_y, cfg.T, consts.eta, 0) - 1
        if budget < first_cost:
            raise ValueError(
                f"sample budget {budget} is smaller than the first outer iteration ({first_cost})"
            )

    consumed_x = consumed_y = 0
    t0 = time.perf_counter()
    for k in range(cfg.max_outer):
        T_x = sample_schedule(consts.K_x, cfg.T, consts.eta, k)
        if exact_y:
            u = si_admm_step_exact_y(prob, cfg, consts, u, T_x, rng)
        else:
            T_y = sample_schedule(consts.K_y, cfg.T, consts.eta, k)
            u = si_admm_step(prob, cfg, consts, u, T_y, T_x, rng)
            consumed_y += T_y - 1
        consumed_x += T_x - 1
        ks.append(k + 1)
        sx.append(consumed_x)
        sy.append(consumed_y)
        wall.append((time.perf_counter() - t0) * 1e3)
        iterates.append(u)
        push_errors(u)
        if budget is not None and consumed_x + consumed_y >= budget:
            break

    total_ms = (time.perf_counter() - t0) * 1e3
    has_err = u_star is not None
    return RunRecord(
        algorithm=algorithm,
        config_hash=cfg.digest(),
        seed=seed_label,
        prng=prng_label,
        ks=np.array(ks, dtype=np.int64),
        samples_x=np.array(sx, dtype=np.int64),
        samples_y=np.array(sy, dtype=np.int64),
        wall_ms=np.array(wall),
        err_u_G=np.array(err_g) if has_err else None,
        err_x=np.array(err_x) if has_err else None,
        err_y=np.array(err_y) if has_err else None,
        iterates=iterates,
        final=u,
        total_wall_ms=total_ms,
    )
