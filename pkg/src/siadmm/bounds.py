"""Closed-form certificate algebra for the inexact splitting scheme.

Everything in this module is pure arithmetic on problem and algorithm
constants: the contraction gap delta of the exact method, the zeta
constants that price inner-solve inexactness, the recursive upper-bound
curve on E|u_k - u*|_G^2, and the closed-form sample-complexity bound
N(eps).  No sampling happens here; certificates built from the
`certified` recursion are therefore reproducible bounds, while the
`empirical` mode consumes a measured error sequence the way the
experiment figures do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .problems import CHECK_RTOL, StochasticProblem, require_psd
from .sa import SARateConstants

if TYPE_CHECKING:  # pragma: no cover
    from .solver import AlgorithmConfig, DerivedConstants


# ---------------------------------------------------------------------------
# contraction gap of the exact method


def delta_simple(mu_f: float, L_f: float, rho: float, A: np.ndarray) -> float:
    """Contraction gap for P = 0, gamma = 1, Q = 0:

        delta = 2 / ( rho ||A||^2 / mu_f + L_f / (rho lam_min(A A')) ).

    ||A|| is the spectral norm; A must have full row rank.
    """
    if not (mu_f > 0 and L_f >= mu_f and rho > 0):
        raise ValueError("need mu_f > 0, L_f >= mu_f, rho > 0")
    w = np.linalg.eigvalsh(A @ A.T)
    lam_min = float(w[0])
    lam_max = float(w[-1])
    if lam_min <= CHECK_RTOL * max(lam_max, 1.0):
        raise ValueError("A A' is rank deficient; the gap formula needs full row rank")
    return 2.0 / (rho * lam_max / mu_f + L_f / (rho * lam_min))


def delta_strongly_convex_g(mu_f: float, L_f: float, sigma_g: float,
                            rho: float, A: np.ndarray, Q: np.ndarray) -> float:
    """Contraction gap when the y-block is sigma_g-strongly convex and Q > 0:

        delta = min( delta_simple, 2 sigma_g / ||Q|| ).
    """
    if not sigma_g > 0:
        raise ValueError("sigma_g must be positive")
    wq = require_psd(Q, "Q")
    if wq[0] <= CHECK_RTOL * max(float(wq[-1]), 1.0):
        raise ValueError("Q must be positive definite")
    delta0 = delta_simple(mu_f, L_f, rho, A)
    return min(delta0, 2.0 * sigma_g / float(wq[-1]))


# ---------------------------------------------------------------------------
# zeta constants


def _tail_coeff(sa: SARateConstants) -> float:
    """gamma^2 / (2 c gamma - 1 - gamma^2 M / K) + K b_hat, the coefficient
    multiplying the noise level in every inner-solve error bound."""
    g = sa.gamma0
    denom = 2.0 * sa.c * g - 1.0 - g * g * sa.M / sa.K
    if denom <= 0:
        raise ValueError("inner-rate denominator 2 c gamma - 1 - gamma^2 M / K is not positive")
    return g * g / denom + sa.K * sa.b_hat


def _spectral_sq(M: np.ndarray) -> float:
    return float(np.linalg.norm(M, 2)) ** 2


def zeta_simple(consts: "DerivedConstants", prob: StochasticProblem,
                cfg: "AlgorithmConfig", sa_x: SARateConstants,
                delta: float, x_star_norm_sq: float) -> tuple[float, float]:
    """(zeta1, zeta2) for the exact-y regime.  See `simple_constants` for the
    intermediate products."""
    c = simple_constants(consts, prob, cfg, sa_x, delta, x_star_norm_sq)
    return c["zeta1"], c["zeta2"]


def simple_constants(consts: "DerivedConstants", prob: StochasticProblem,
                     cfg: "AlgorithmConfig", sa_x: SARateConstants,
                     delta: float, x_star_norm_sq: float) -> dict:
    """Intermediate products of the exact-y certificate:

        C12_x = tail v1x (1+R) 2 / (lam_min(P_hat)(1+delta))
                + K_x a_x (2 / lam_min(P_hat)) (1 + 1/(1+delta))
        C11_x = tail ( v1x (1+R) 2 ||x*||^2 + v2x )
        zeta2 = (lam_max(P_hat) + rho gamma ||A||^2) C12_x,   zeta1 likewise with C11_x.
    """
    tail = _tail_coeff(sa_x)
    P_hat = consts.metric.P_hat
    w = np.linalg.eigvalsh(P_hat)
    lam_min, lam_max = float(w[0]), float(w[-1])
    if lam_min <= 0:
        raise ValueError("P + rho A'A must be positive definite")
    v1, v2, R = sa_x.v1, sa_x.v2, sa_x.R
    Kx, ax = sa_x.K, sa_x.a_hat
    C12_x = (
        tail * v1 * (1.0 + R) * 2.0 / (lam_min * (1.0 + delta))
        + Kx * ax * (2.0 / lam_min) * (1.0 + 1.0 / (1.0 + delta))
    )
    C11_x = tail * (v1 * (1.0 + R) * 2.0 * x_star_norm_sq + v2)
    front = lam_max + cfg.rho * cfg.gamma * _spectral_sq(prob.A)
    out = {
        "C12_x": C12_x,
        "C11_x": C11_x,
        "zeta2": front * C12_x,
        "zeta1": front * C11_x,
    }
    _require_finite_nonneg(out)
    return out


def zeta_full(prob: StochasticProblem, cfg: "AlgorithmConfig",
              consts: "DerivedConstants", sa_x: SARateConstants,
              sa_y: SARateConstants, delta: float,
              x_star: np.ndarray, y_star: np.ndarray) -> dict:
    """Full ledger of the doubly stochastic regime.

    Returns every intermediate constant plus the six zeta products
    (zeta1_x, zeta1_y, zeta1_xy, zeta2_x, zeta2_y, zeta2_xy) entering

        E|u_{k+1}-u*|_G^2 <= [ (1+R0)( z2x/Tx + z2y/Ty + z2xy/(Tx Ty) )
                               + (1+1/R0)/(1+delta) ] |u_k-u*|_G^2
                             + (1+R0)( z1x/Tx + z1y/Ty + z1xy/(Tx Ty) ).
    """
    tail_x = _tail_coeff(sa_x)
    tail_y = _tail_coeff(sa_y)
    P_hat = consts.metric.P_hat
    wp = np.linalg.eigvalsh(P_hat)
    lam_min_P, lam_max_P = float(wp[0]), float(wp[-1])
    wq = np.linalg.eigvalsh(cfg.Q)
    lam_min_Q, lam_max_Q = float(wq[0]), float(wq[-1])
    if lam_min_P <= 0:
        raise ValueError("constant C_bar12_x needs lam_min(P + rho A'A) > 0")
    if lam_min_Q <= 0:
        raise ValueError("constant C12_y needs lam_min(Q) > 0")
    rho, gamma, R = cfg.rho, cfg.gamma, cfg.R
    lmax_AtA = float(np.linalg.eigvalsh(prob.A.T @ prob.A)[-1])
    lmax_BtB = float(np.linalg.eigvalsh(prob.B.T @ prob.B)[-1])
    cross = (rho * np.linalg.norm(prob.A.T @ prob.B, 2) / sa_x.c) ** 2
    v1x, v2x = sa_x.v1, sa_x.v2
    v1y, v2y = sa_y.v1, sa_y.v2
    Kx, ax = sa_x.K, sa_x.a_hat
    Ky, ay = sa_y.K, sa_y.a_hat
    one = 1.0 + 1.0 / (1.0 + delta)

    C2_x = C1_x = 2.0 * lam_max_P + 4.0 * rho * gamma * lmax_AtA
    Cbar12_x = (
        tail_x * v1x * (1.0 + R) * 3.0 / (lam_min_P * (1.0 + delta))
        + Kx * ax * (3.0 / lam_min_P) * one
    )
    Chat12_x = Chat11_x = tail_x * v1x * 3.0 * (1.0 + R) * cross + 3.0 * Kx * ax * cross
    C12_y = (
        tail_y * v1y * (1.0 + R) * 2.0 / (lam_min_Q * (1.0 + delta))
        + Ky * ay * (2.0 / lam_min_Q) * one
    )
    C2_y = C1_y = (
        2.0 * lam_max_P * cross
        + lam_max_Q
        + 4.0 * cross * rho * gamma * lmax_AtA
        + 2.0 * rho * gamma * lmax_BtB
    )
    Cbar11_x = tail_x * (v1x * (1.0 + R) * 3.0 * float(x_star @ x_star) + v2x)
    C11_y = tail_y * (v1y * (1.0 + R) * 2.0 * float(y_star @ y_star) + v2y)

    out = {
        "C1_x": C1_x, "C2_x": C2_x,
        "Cbar12_x": Cbar12_x, "Chat12_x": Chat12_x, "Chat11_x": Chat11_x,
        "C12_y": C12_y, "C1_y": C1_y, "C2_y": C2_y,
        "Cbar11_x": Cbar11_x, "C11_y": C11_y,
        "zeta2_x": C2_x * Cbar12_x,
        "zeta2_y": C2_y * C12_y,
        "zeta2_xy": C2_x * Chat12_x * C12_y,
        "zeta1_x": C1_x * Cbar11_x,
        "zeta1_y": C1_y * C11_y,
        "zeta1_xy": C1_x * Chat11_x * C11_y,
    }
    _require_finite_nonneg(out)
    return out


def _require_finite_nonneg(values: dict) -> None:
    for name, v in values.items():
        if not np.isfinite(v):
            raise ArithmeticError(f"certificate constant {name} is not finite")
        if v < 0:
            raise ArithmeticError(f"certificate constant {name} is negative: {v:.3e}")


# ---------------------------------------------------------------------------
# certificates and the recursive bound curve


@dataclass(frozen=True)
class BoundCertificate:
    """All named constants of an error-bound certificate.

    regime is "simple" (exact y-update; a single sampled stream) or "full"
    (both subproblems sampled).  iterate_divisor converts G-norm bounds to
    iterate-error bounds: rho in the simple case, min(lam_min(Q),
    lam_min(P_hat)) in the full case.
    """

    regime: str
    delta: float
    T: float
    eta: float
    K_x: int
    a_x: float
    b_x: float
    iterate_divisor: float
    K_y: Optional[int] = None
    a_y: Optional[float] = None
    b_y: Optional[float] = None
    # simple regime
    C12_x: Optional[float] = None
    C11_x: Optional[float] = None
    zeta1: Optional[float] = None
    zeta2: Optional[float] = None
    # full regime (constant ledger)
    C1_x: Optional[float] = None
    C2_x: Optional[float] = None
    Cbar12_x: Optional[float] = None
    Chat12_x: Optional[float] = None
    Chat11_x: Optional[float] = None
    C12_y: Optional[float] = None
    C1_y: Optional[float] = None
    C2_y: Optional[float] = None
    Cbar11_x: Optional[float] = None
    C11_y: Optional[float] = None
    zeta1_x: Optional[float] = None
    zeta1_y: Optional[float] = None
    zeta1_xy: Optional[float] = None
    zeta2_x: Optional[float] = None
    zeta2_y: Optional[float] = None
    zeta2_xy: Optional[float] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def certificate_simple(prob: StochasticProblem, cfg: "AlgorithmConfig",
                       consts: "DerivedConstants",
                       x_star_norm_sq: Optional[float] = None) -> BoundCertificate:
    """Certificate for the exact-y regime; ||x*||^2 defaults to the known KKT point."""
    if x_star_norm_sq is None:
        if prob.known_kkt is None:
            raise ValueError("x_star_norm_sq is required when the problem has no known KKT point")
        x_star_norm_sq = float(prob.known_kkt.x_star @ prob.known_kkt.x_star)
    delta = _require_delta(consts)
    c = simple_constants(consts, prob, cfg, consts.sa_x, delta, x_star_norm_sq)
    return BoundCertificate(
        regime="simple", delta=delta, T=cfg.T, eta=consts.eta,
        K_x=consts.K_x, a_x=consts.sa_x.a_hat, b_x=consts.sa_x.b_hat,
        iterate_divisor=cfg.rho,
        C12_x=c["C12_x"], C11_x=c["C11_x"], zeta1=c["zeta1"], zeta2=c["zeta2"],
    )


def certificate_full(prob: StochasticProblem, cfg: "AlgorithmConfig",
                     consts: "DerivedConstants") -> BoundCertificate:
    """Certificate for the doubly stochastic regime, from the known KKT point."""
    if prob.known_kkt is None:
        raise ValueError("the full certificate needs the problem's KKT point")
    if consts.sa_y is None:
        raise ValueError("the full certificate needs y-side rate constants")
    delta = _require_delta(consts)
    z = zeta_full(prob, cfg, consts, consts.sa_x, consts.sa_y, delta,
                  prob.known_kkt.x_star, prob.known_kkt.y_star)
    wq = np.linalg.eigvalsh(cfg.Q)
    wp = np.linalg.eigvalsh(consts.metric.P_hat)
    divisor = min(float(wq[0]), float(wp[0]))
    return BoundCertificate(
        regime="full", delta=delta, T=cfg.T, eta=consts.eta,
        K_x=consts.K_x, a_x=consts.sa_x.a_hat, b_x=consts.sa_x.b_hat,
        K_y=consts.K_y, a_y=consts.sa_y.a_hat, b_y=consts.sa_y.b_hat,
        iterate_divisor=divisor,
        **z,
    )


def _require_delta(consts: "DerivedConstants") -> float:
    if consts.delta is None:
        raise ValueError("no closed-form contraction gap for this configuration")
    return consts.delta


@dataclass(frozen=True)
class BoundCurve:
    """Recursive upper bounds per outer iteration, in G-norm and iterate error."""

    g_bounds: np.ndarray
    iterate_bounds: np.ndarray


def _noise_level(cert: BoundCertificate, k: int, r: float) -> float:
    """The additive-vs-multiplicative noise split D_k of the recursion at
    outer index k given the current error value r."""
    scale = (cert.eta ** k) / cert.T
    if cert.regime == "simple":
        return (cert.zeta2 * r + cert.zeta1) * scale
    z2 = cert.zeta2_x + cert.zeta2_y + cert.zeta2_xy * scale
    z1 = cert.zeta1_x + cert.zeta1_y + cert.zeta1_xy * scale
    return (z2 * r + z1) * scale


def bound_curve(cert: BoundCertificate, r0: float, num_outer: int,
                measured: Optional[Sequence[float]] = None) -> BoundCurve:
    """Iterate the recursive error bound for num_outer outer iterations.

    In certified mode (measured=None) the bound value itself is substituted
    for the unknown expected error.  In empirical mode, ``measured[k]`` (a
    measured mean G-error sequence) feeds the k -> k+1 step instead, which
    is how the experiment figures are produced.

    Each step uses the variance-balancing split

        bound_{k+1} = ( sqrt(D_k) + sqrt(r_k / (1 + delta)) )^2,

    which equals the recursion evaluated at the error-adaptive splitting
    weight R_{0,k} = sqrt(r_k / (1+delta) / D_k), covering the D_k -> 0
    limit (pure contraction) continuously.
    """
    if r0 < 0:
        raise ValueError("r0 must be nonnegative")
    if measured is not None and len(measured) < num_outer:
        raise ValueError("measured error sequence is shorter than num_outer")
    shrink = 1.0 / (1.0 + cert.delta)
    out = np.empty(num_outer + 1)
    out[0] = r0
    for k in range(num_outer):
        r = out[k] if measured is None else float(measured[k])
        D = _noise_level(cert, k, r)
        out[k + 1] = (math.sqrt(D) + math.sqrt(r * shrink)) ** 2
        if not np.isfinite(out[k + 1]):
            raise ArithmeticError(f"bound recursion overflowed at outer iteration {k + 1}")
    return BoundCurve(g_bounds=out, iterate_bounds=out / cert.iterate_divisor)


# ---------------------------------------------------------------------------
# sample-complexity bound


@dataclass(frozen=True)
class ComplexityBound:
    """Closed-form complexity certificate for mean G-error <= eps.

    N_bound may overflow to inf for loose certificates; log10_N_bound is
    always finite and is the faithful representation.
    """

    K_bar: int
    N_bound: float
    log10_N_bound: float
    L_ratio: float
    R0: float


def complexity_bound(cert: BoundCertificate, r0: float,
                     L_ratio: Optional[float] = 2.0,
                     epsilon: float = 1e-2) -> ComplexityBound:
    """Outer-iteration bound K_bar and total sampled-gradient bound N(eps).

    Requires eta > 1/(1 + delta) and eps <= 1/e.  The free ratio L must lie
    in (1, eta (1 + delta)); passing None picks 2 when feasible and the
    geometric midpoint of the feasible interval otherwise.  The envelope

        r_k <= eta^k D,   D = e^alpha r0 / L + C34 e^beta / (eta (1 - 1/L)),

    gives K_bar = ceil(log_eta(eps / D)) and

        N(eps) <= [ s T / (1-eta) D ] / eps
                  + [ (1 - log_eta D) K + K / log(1/eta) ] log(1/eps),

    where s and K count the sampled streams (s = 1, K = K_x when the
    y-update is exact; s = 2, K = K_x + K_y otherwise).  Computed in log
    space; see log10_N_bound.
    """
    if r0 < 0:
        raise ValueError("r0 must be nonnegative")
    if not 0 < epsilon <= 1.0 / math.e:
        raise ValueError("epsilon must lie in (0, 1/e]")
    eta, delta = cert.eta, cert.delta
    if eta <= 1.0 / (1.0 + delta):
        raise ValueError("complexity bound needs eta > 1/(1 + delta)")
    upper = eta * (1.0 + delta)
    if L_ratio is None:
        L_ratio = 2.0 if 2.0 < upper else math.sqrt(upper)
    if not 1.0 < L_ratio < upper:
        raise ValueError(f"L_ratio must lie in (1, eta (1 + delta)) = (1, {upper:.6g})")
    a = eta / L_ratio
    R0 = 1.0 / (a * (1.0 + delta) - 1.0)
    if cert.regime == "simple":
        z2x, z2y, z2xy = cert.zeta2, 0.0, 0.0
        z1x, z1y, z1xy = cert.zeta1, 0.0, 0.0
        streams, K_lead = 1.0, cert.K_x
    else:
        z2x, z2y, z2xy = cert.zeta2_x, cert.zeta2_y, cert.zeta2_xy
        z1x, z1y, z1xy = cert.zeta1_x, cert.zeta1_y, cert.zeta1_xy
        streams, K_lead = 2.0, cert.K_x + cert.K_y
    T = cert.T
    C1 = (1.0 + R0) * (z2x + z2y) / T
    C2 = (1.0 + R0) * z2xy / (T * T)
    C3 = (1.0 + R0) * (z1x + z1y) / T
    C4 = (1.0 + R0) * z1xy / (T * T)
    alpha = (C1 * (1.0 + eta) + C2) / (a * (1.0 - eta * eta))
    beta = (C1 + C2) * eta / (a * (1.0 - eta))
    C34 = C3 + C4

    # log D via a stable two-term log-sum-exp
    terms = []
    if r0 > 0:
        terms.append(alpha + math.log(r0 / L_ratio))
    if C34 > 0:
        terms.append(beta + math.log(C34 / (eta * (1.0 - 1.0 / L_ratio))))
    if not terms:
        return ComplexityBound(K_bar=0, N_bound=0.0, log10_N_bound=-math.inf,
                               L_ratio=L_ratio, R0=R0)
    logD = terms[0] if len(terms) == 1 else float(np.logaddexp(terms[0], terms[1]))

    K_bar = max(math.ceil((math.log(epsilon) - logD) / math.log(eta)), 0)
    log_lead = math.log(streams * T / (1.0 - eta)) + logD - math.log(epsilon)
    tail = (1.0 - logD / math.log(eta)) * K_lead + K_lead / math.log(1.0 / eta)
    log_tail = math.log(tail * math.log(1.0 / epsilon)) if tail > 0 else -math.inf
    logN = float(np.logaddexp(log_lead, log_tail))
    N = math.exp(logN) if logN < 700 else math.inf
    return ComplexityBound(K_bar=K_bar, N_bound=N, log10_N_bound=logN / math.log(10.0),
                           L_ratio=L_ratio, R0=R0)
