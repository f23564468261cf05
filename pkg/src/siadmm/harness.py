"""Seeded replication runner, error curves, experiment configs and file IO.

Randomness is derived hierarchically from a single master seed with string
keys hashed into SeedSequence entropy, so every run is reproducible and no
two phases share a stream.  Within one replication of a comparison, all
algorithms receive generators built from the *same* per-replication sample
key: algorithms that draw equal-length streams therefore consume identical
samples.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import bounds as bnd
from .baselines import (
    AveragedIterate,
    DsaState,
    dsa_step,
    sadm0_damping_sqrt,
    sadm0_step,
    sadm1_step,
)
from .exact import contraction_check, random_quadratic
from .problems import Iterate, StochasticProblem, g_norm_sq, zero_iterate
from .sa import SAProblem, compute_rate_constants, q_bound, sa_run
from .solver import (
    AlgorithmConfig,
    RunRecord,
    derive_constants,
    solve,
)
from .synthetic import DistRegInstance, LassoInstance, gen_distreg, gen_lasso

SCHEMA_VERSION = 1
PRNG_DESC = "numpy-PCG64/SeedSequence-sha256keys-v1"

KINDS = ("lasso-compare", "distreg-compare", "sa-rate", "contraction-test",
         "bounds", "complexity-sweep")
VALID_ALGORITHMS = {
    "lasso-compare": ("si-admm", "sadm0", "sadm1"),
    "distreg-compare": ("si-admm", "dsa", "dsa-pf"),
}


class ConfigError(ValueError):
    """Invalid experiment configuration (maps to CLI exit code 2)."""


# ---------------------------------------------------------------------------
# stream derivation


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    digest = hashlib.sha256(str(key).encode()).digest()
    return int.from_bytes(digest[:8], "big")


def seed_sequence(master: int, *keys) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master)] + [_key_int(k) for k in keys])


def stream_for(master: int, *keys) -> np.random.Generator:
    """Derive an isolated generator from (master, *keys); strings are hashed."""
    return np.random.default_rng(seed_sequence(master, *keys))


class CountingOracle:
    """Wraps an oracle and counts calls; used to audit sample accounting."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = 0

    def __call__(self, x, rng):
        self.calls += 1
        return self.fn(x, rng)


# ---------------------------------------------------------------------------
# error curves


@dataclass
class ErrorCurve:
    """Replication-wise error values over a common abscissa.

    values has shape (num_replications, num_points); the abscissa must be
    strictly increasing.
    """

    abscissa_kind: str  # "samples" or "outer"
    abscissa: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa)
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if np.any(np.diff(self.abscissa) <= 0):
            raise ValueError("abscissa must be strictly increasing")
        if self.values.shape[1] != self.abscissa.shape[0]:
            raise ValueError("values and abscissa lengths disagree")

    @property
    def mean(self) -> np.ndarray:
        return self.values.mean(axis=0)

    @property
    def stderr(self) -> np.ndarray:
        r = self.values.shape[0]
        if r < 2:
            return np.zeros(self.values.shape[1])
        return self.values.std(axis=0, ddof=1) / np.sqrt(r)


def decimate_indices(length: int, max_points: int) -> np.ndarray:
    """Uniform-stride index subset of range(length) with both endpoints pinned."""
    if length <= max_points:
        return np.arange(length)
    stride = int(np.ceil((length - 1) / (max_points - 1)))
    idx = np.arange(0, length, stride)
    if idx[-1] != length - 1:
        idx = np.append(idx, length - 1)
    return idx


def align_by_samples(records: Sequence[RunRecord], column: str = "err_x",
                     max_points: int = 2000) -> ErrorCurve:
    """Error-versus-cumulative-samples curve for replications of one algorithm.

    Single-sample baselines produce one point per step and are decimated to
    at most max_points by uniform stride (first and last points preserved);
    outer-loop records keep one point per outer iteration.
    """
    if not records:
        raise ValueError("no records to align")
    algos = {r.algorithm for r in records}
    if len(algos) > 1:
        raise ValueError(f"records mix algorithms: {sorted(algos)}")
    ref = records[0].samples_total
    for r in records[1:]:
        if len(r.samples_total) != len(ref) or np.any(r.samples_total != ref):
            raise ValueError("replications disagree on the sample abscissa")
    # drop a duplicated origin (row 0 has zero samples when row 1 may too)
    keep = np.concatenate([[True], np.diff(ref) > 0])
    idx = np.flatnonzero(keep)
    idx = idx[decimate_indices(len(idx), max_points)]
    vals = []
    for r in records:
        col = getattr(r, column)
        if col is None:
            raise ValueError(f"record has no column {column}")
        vals.append(np.asarray(col)[idx])
    return ErrorCurve("samples", ref[idx], np.vstack(vals))


def curve_by_outer(records: Sequence[RunRecord], column: str = "err_u_G") -> ErrorCurve:
    """Error-versus-outer-iteration curve (no decimation)."""
    if not records:
        raise ValueError("no records to align")
    ref = records[0].ks
    for r in records[1:]:
        if len(r.ks) != len(ref) or np.any(r.ks != ref):
            raise ValueError("replications disagree on outer iteration counts")
    vals = [np.asarray(getattr(r, column)) for r in records]
    # ks start at 0; shift by one for a strictly increasing positive axis
    return ErrorCurve("outer", ref + 1, np.vstack(vals))


# ---------------------------------------------------------------------------
# configs


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment.

    instance holds generator parameters, algorithms maps algorithm ids to
    per-algorithm overrides, options carries experiment-specific knobs
    (rho, T, eta, Gamma, epsilons, ...).
    """

    kind: str
    seed: int = 0
    replications: int = 10
    out_dir: Optional[str] = None
    instance: dict = field(default_factory=dict)
    algorithms: dict = field(default_factory=dict)
    budget: Optional[int] = None
    max_outer: Optional[int] = None
    options: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        valid = VALID_ALGORITHMS.get(self.kind)
        if valid is not None:
            if not self.algorithms:
                self.algorithms = {a: {} for a in valid}
            for a in self.algorithms:
                if a not in valid:
                    raise ConfigError(f"algorithm {a!r} is not valid for {self.kind}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        if not isinstance(raw, dict) or "kind" not in raw:
            raise ConfigError("config must be a JSON object with a 'kind' field")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    def digest(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: dict            # algorithm -> list[RunRecord]
    curves: dict             # name -> ErrorCurve
    summary: dict
    instance: object = None
    all_passed: bool = True


# ---------------------------------------------------------------------------
# instance / problem assembly


def build_instance(cfg: ExperimentConfig):
    params = dict(cfg.instance)
    rng = stream_for(cfg.seed, cfg.kind, "instance")
    if cfg.kind.startswith("lasso") or params.get("generator") == "lasso":
        params.pop("generator", None)
        params.setdefault("n", 10)
        return gen_lasso(stream=rng, **params)
    params.pop("generator", None)
    params.setdefault("n", 50)
    return gen_distreg(stream=rng, **params)


def _counting_problem(prob: StochasticProblem):
    """Wrap the problem's oracles in counters; returns (problem, counters)."""
    counters = {}
    changes = {}
    if prob.oracle_f is not None:
        counters["x"] = CountingOracle(prob.oracle_f)
        changes["oracle_f"] = counters["x"]
    if prob.oracle_g is not None:
        counters["y"] = CountingOracle(prob.oracle_g)
        changes["oracle_g"] = counters["y"]
    return dataclasses.replace(prob, **changes), counters


def _audit_counts(record: RunRecord, counters: dict) -> None:
    got_x = counters["x"].calls if "x" in counters else 0
    got_y = counters["y"].calls if "y" in counters else 0
    if got_x != int(record.samples_x[-1]) or got_y != int(record.samples_y[-1]):
        raise RuntimeError(
            "sample accounting mismatch: oracle counters "
            f"({got_x}, {got_y}) vs record ({record.samples_x[-1]}, {record.samples_y[-1]})"
        )


def lasso_algorithm_config(inst: LassoInstance, rho: float, budget: Optional[int],
                           max_outer: int = 10_000, **overrides) -> AlgorithmConfig:
    n = inst.n
    return AlgorithmConfig(
        rho=rho, P=np.zeros((n, n)), Q=np.zeros((n, n)),
        sample_budget=budget, max_outer=max_outer, **overrides,
    )


def distreg_algorithm_config(inst: DistRegInstance, rho: float, budget: Optional[int],
                             max_outer: int = 10_000, eta_boundary: bool = False,
                             **overrides) -> AlgorithmConfig:
    n = inst.n
    if eta_boundary and "eta" not in overrides:
        # the boundary ratio 1/(1+delta); resolved against the strong-g gap
        probe = AlgorithmConfig(rho=rho, P=np.zeros((n, n)), Q=rho * np.eye(n), eta=0.5)
        delta = bnd.delta_strongly_convex_g(inst.mu, inst.L, inst.mu, rho, inst.A, probe.Q)
        overrides["eta"] = 1.0 / (1.0 + delta)
    return AlgorithmConfig(
        rho=rho, P=np.zeros((n, n)), Q=rho * np.eye(n),
        sample_budget=budget, max_outer=max_outer, **overrides,
    )


# ---------------------------------------------------------------------------
# baseline runners (columnar records, decimated rows)


def _baseline_record(algorithm: str, steps: np.ndarray, err_x, err_y,
                     wall: np.ndarray, total_ms: float, seed_label: str,
                     samples_y: Optional[np.ndarray] = None) -> RunRecord:
    return RunRecord(
        algorithm=algorithm, config_hash="", seed=seed_label, prng=PRNG_DESC,
        ks=steps,
        samples_x=steps.astype(np.int64),
        samples_y=steps.astype(np.int64) if samples_y is None else samples_y,
        wall_ms=wall,
        err_x=np.asarray(err_x), err_y=np.asarray(err_y),
    )


def run_sadm0(inst: LassoInstance, rho: float, num_steps: int,
              rng: np.random.Generator, damping=sadm0_damping_sqrt,
              seed_label: str = "", max_rows: int = 2000) -> RunRecord:
    """Single-sample baseline with caller-chosen damping schedule; the
    reported solution is the uniform average."""
    state = AveragedIterate(np.zeros(inst.n), np.zeros(inst.n), np.zeros(inst.n))
    record_at = set(decimate_indices(num_steps + 1, max_rows).tolist())
    steps, errs_x, errs_y, wall = [0], [float(inst.x_star @ inst.x_star)], \
        [float(inst.x_star @ inst.x_star)], [0.0]
    x_star = inst.x_star
    t0 = time.perf_counter()
    for k in range(num_steps):
        sample = inst.sample(rng)
        sadm0_step(state, sample, k + 1, rho, inst.gamma_bar, damping(k + 1))
        if (k + 1) in record_at:
            dx = state.x_bar - x_star
            dy = state.y_bar - x_star
            steps.append(k + 1)
            errs_x.append(float(dx @ dx))
            errs_y.append(float(dy @ dy))
            wall.append((time.perf_counter() - t0) * 1e3)
    rec = _baseline_record("sadm0", np.array(steps, dtype=np.int64), errs_x, errs_y,
                           np.array(wall), (time.perf_counter() - t0) * 1e3, seed_label,
                           samples_y=np.zeros(len(steps), dtype=np.int64))
    rec.final = Iterate(state.x_bar, state.y_bar, state.lam)
    rec.total_wall_ms = (time.perf_counter() - t0) * 1e3
    return rec


def run_sadm1(inst: LassoInstance, rho: float, num_steps: int,
              rng: np.random.Generator, seed_label: str = "",
              max_rows: int = 2000) -> RunRecord:
    """Triangular-weight averaging baseline; reported solution is the
    weighted x-average."""
    state = AveragedIterate(np.zeros(inst.n), np.zeros(inst.n), np.zeros(inst.n))
    record_at = set(decimate_indices(num_steps + 1, max_rows).tolist())
    steps, errs_x, errs_y, wall = [0], [float(inst.x_star @ inst.x_star)], \
        [float(inst.x_star @ inst.x_star)], [0.0]
    x_star = inst.x_star
    mu_f = inst.mu_f
    t0 = time.perf_counter()
    for k in range(num_steps):
        sample = inst.sample(rng)
        sadm1_step(state, sample, k, rho, inst.gamma_bar, mu_f)
        if (k + 1) in record_at:
            dx = state.x_bar - x_star
            dy = state.y_bar - x_star
            steps.append(k + 1)
            errs_x.append(float(dx @ dx))
            errs_y.append(float(dy @ dy))
            wall.append((time.perf_counter() - t0) * 1e3)
    rec = _baseline_record("sadm1", np.array(steps, dtype=np.int64), errs_x, errs_y,
                           np.array(wall), (time.perf_counter() - t0) * 1e3, seed_label,
                           samples_y=np.zeros(len(steps), dtype=np.int64))
    rec.final = Iterate(state.x_bar, state.y_bar, state.lam)
    rec.total_wall_ms = (time.perf_counter() - t0) * 1e3
    return rec


def run_dsa(inst: DistRegInstance, num_steps: int, rng_x: np.random.Generator,
            rng_y: np.random.Generator, Gamma: float, seed_label: str = "",
            max_rows: int = 2000, algorithm: str = "dsa") -> RunRecord:
    """Projected two-agent baseline; one (l, s) pair per agent per step."""
    state = DsaState(np.zeros(inst.n), np.zeros(inst.n), inst.A)
    z_star_sq = float(inst.z_star @ inst.z_star)
    record_at = set(decimate_indices(num_steps + 1, max_rows).tolist())
    steps = [0]
    errs_x = [float(inst.beta1 @ inst.beta1)]
    errs_y = [float(inst.beta2 @ inst.beta2)]
    wall = [0.0]
    t0 = time.perf_counter()
    for k in range(1, num_steps + 1):
        dsa_step(state, inst.sample_x(rng_x), inst.sample_y(rng_y), k,
                 inst.mu, inst.mu, Gamma, z_star_sq)
        if k in record_at:
            dx = state.x - inst.beta1
            dy = state.y - inst.beta2
            steps.append(k)
            errs_x.append(float(dx @ dx))
            errs_y.append(float(dy @ dy))
            wall.append((time.perf_counter() - t0) * 1e3)
    rec = _baseline_record(algorithm, np.array(steps, dtype=np.int64), errs_x, errs_y,
                           np.array(wall), (time.perf_counter() - t0) * 1e3, seed_label)
    rec.final = Iterate(state.x, state.y, np.zeros(inst.n))
    rec.total_wall_ms = (time.perf_counter() - t0) * 1e3
    return rec


# ---------------------------------------------------------------------------
# experiment runners


def _solve_with_audit(prob: StochasticProblem, acfg: AlgorithmConfig,
                      rng: np.random.Generator, seed_label: str) -> RunRecord:
    counted, counters = _counting_problem(prob)
    rec = solve(counted, acfg, rng=rng, seed_label=seed_label, prng_label=PRNG_DESC)
    _audit_counts(rec, counters)
    return rec


def run_lasso_compare(cfg: ExperimentConfig) -> ExperimentResult:
    inst = build_instance(cfg)
    budget = cfg.budget if cfg.budget is not None else 400_000
    rho = float(cfg.options.get("rho", 20.0))
    prob = inst.to_problem()
    records: dict = {a: [] for a in cfg.algorithms}
    for algo, over in cfg.algorithms.items():
        a_rho = float(over.get("rho", rho))
        for rep in range(cfg.replications):
            label = f"seed={cfg.seed}/rep={rep}"
            rng = stream_for(cfg.seed, cfg.kind, "samples", rep)
            if algo == "si-admm":
                acfg = lasso_algorithm_config(
                    inst, a_rho, budget,
                    T=float(over.get("T", cfg.options.get("T", 1000.0))),
                    eta=over.get("eta", cfg.options.get("eta")),
                )
                records[algo].append(_solve_with_audit(prob, acfg, rng, label))
            elif algo == "sadm0":
                mode = over.get("damping", cfg.options.get("sadm0_damping", "sqrt"))
                damping = sadm0_damping_sqrt if mode == "sqrt" else (
                    lambda k, mu=inst.mu_f: mu * k)
                records[algo].append(
                    run_sadm0(inst, a_rho, budget, rng, damping=damping, seed_label=label))
            elif algo == "sadm1":
                records[algo].append(run_sadm1(inst, a_rho, budget, rng, seed_label=label))
    curves = {a: align_by_samples(recs, "err_x") for a, recs in records.items()}
    summary = {
        "instance": inst.describe(),
        "budget": budget,
        "rho": rho,
        "median_final_err_x": {
            a: float(np.median([r.err_x[-1] for r in recs])) for a, recs in records.items()
        },
        "median_wall_ms": {
            a: float(np.median([r.total_wall_ms for r in recs])) for a, recs in records.items()
        },
    }
    return ExperimentResult(cfg, records, curves, summary, instance=inst)


def run_distreg_compare(cfg: ExperimentConfig) -> ExperimentResult:
    inst = build_instance(cfg)
    budget = cfg.budget if cfg.budget is not None else 400_000
    rho = float(cfg.options.get("rho", 20.0))
    prob = inst.to_problem()
    records: dict = {a: [] for a in cfg.algorithms}
    for algo, over in cfg.algorithms.items():
        for rep in range(cfg.replications):
            label = f"seed={cfg.seed}/rep={rep}"
            rng_x = stream_for(cfg.seed, cfg.kind, "samples-x", rep)
            rng_y = stream_for(cfg.seed, cfg.kind, "samples-y", rep)
            if algo == "si-admm":
                acfg = distreg_algorithm_config(
                    inst, float(over.get("rho", rho)), budget,
                    T=float(over.get("T", cfg.options.get("T", 1000.0))),
                    eta=over.get("eta", cfg.options.get("eta")),
                    eta_boundary=bool(over.get("eta_boundary", False)),
                )
                # the solver interleaves y- then x-draws; give each phase its
                # own stream so baselines replay the same per-stream prefixes
                rec = _solve_distreg_two_streams(prob, acfg, rng_x, rng_y, label)
                records[algo].append(rec)
            else:
                Gamma = float(over.get("Gamma", cfg.options.get("Gamma", 500_000.0)))
                if algo == "dsa-pf":
                    Gamma = np.inf
                records[algo].append(
                    run_dsa(inst, budget // 2, rng_x, rng_y, Gamma,
                            seed_label=label, algorithm=algo))
    curves = {}
    for a, recs in records.items():
        combined = [
            dataclasses.replace(r) for r in recs
        ]
        curves[a] = align_by_samples(recs, "err_x")
    summary = {
        "instance": inst.describe(),
        "budget": budget,
        "rho": rho,
        "median_final_err_z": {
            a: float(np.median([r.err_x[-1] + r.err_y[-1] for r in recs]))
            for a, recs in records.items()
        },
        "median_wall_ms": {
            a: float(np.median([r.total_wall_ms for r in recs])) for a, recs in records.items()
        },
    }
    return ExperimentResult(cfg, records, curves, summary, instance=inst)


class _TwoStreamOracle:
    """Routes oracle calls to a dedicated stream, ignoring the solver's rng."""

    def __init__(self, fn, rng):
        self.fn = fn
        self.rng = rng
        self.calls = 0

    def __call__(self, x, _rng):
        self.calls += 1
        return self.fn(x, self.rng)


def _solve_distreg_two_streams(prob: StochasticProblem, acfg: AlgorithmConfig,
                               rng_x: np.random.Generator, rng_y: np.random.Generator,
                               seed_label: str) -> RunRecord:
    ox = _TwoStreamOracle(prob.oracle_f, rng_x)
    oy = _TwoStreamOracle(prob.oracle_g, rng_y)
    routed = dataclasses.replace(prob, oracle_f=ox, oracle_g=oy)
    rec = solve(routed, acfg, rng=np.random.default_rng(0), seed_label=seed_label,
                prng_label=PRNG_DESC)
    if ox.calls != int(rec.samples_x[-1]) or oy.calls != int(rec.samples_y[-1]):
        raise RuntimeError("sample accounting mismatch in two-stream solve")
    return rec


def run_sa_rate(cfg: ExperimentConfig) -> ExperimentResult:
    """Tail-bound study: deterministic quadratic plus a noisy scalar quadratic."""
    opts = cfg.options
    n = int(opts.get("dim", 5))
    reps = int(opts.get("noisy_replications", 1000))
    rng = stream_for(cfg.seed, cfg.kind, "instance")
    evals = np.exp(rng.uniform(0.0, np.log(10.0), size=n))
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    H = (q * evals) @ q.T
    H = 0.5 * (H + H.T)
    x_star = rng.standard_normal(n)
    c, L = float(np.min(evals)), float(np.max(evals))

    det = SAProblem(lambda x, r: H @ (x - x_star), c=c, L=L, v1=0.0, v2=0.0)
    g0 = 1.0 / c
    consts = compute_rate_constants(c, L, 1e-12, 0.0, 1.0, g0)
    x0 = x_star + rng.standard_normal(n)
    e1 = float((x0 - x_star) @ (x0 - x_star))
    bound = q_bound(consts, e1, float(x_star @ x_star))
    ks = np.unique(np.geomspace(consts.K, int(opts.get("det_k_max", 10_000)), 40).astype(int))
    det_errors = []
    for k in ks:
        xk = sa_run(det, x0, g0, int(k), stream_for(cfg.seed, cfg.kind, "det"))
        det_errors.append(float((xk - x_star) @ (xk - x_star)))
    det_ok = all(e <= bound(int(k)) for e, k in zip(det_errors, ks))

    # scalar noisy problem with state-dependent noise
    v1, v2 = 0.5, 1.0
    xs = 2.0

    def noisy(x, r):
        w = np.sqrt(v1) * x * r.standard_normal(1) + np.sqrt(v2) * r.standard_normal(1)
        return (x - xs) + w

    nprob = SAProblem(noisy, c=1.0, L=1.0, v1=v1, v2=v2)
    nconsts = compute_rate_constants(1.0, 1.0, v1, v2, 1.0, 1.0)
    nbound = q_bound(nconsts, (0.0 - xs) ** 2, xs ** 2)
    check_ks = [nconsts.K, 10 * nconsts.K, 100 * nconsts.K]
    means = []
    for k in check_ks:
        errs = np.empty(reps)
        for rep in range(reps):
            xk = sa_run(nprob, np.zeros(1), 1.0, k, stream_for(cfg.seed, cfg.kind, "noisy", rep, k))
            errs[rep] = float((xk[0] - xs) ** 2)
        means.append(float(errs.mean()))
    noisy_ok = all(m <= nbound(k) * 1.1 for m, k in zip(means, check_ks))

    curves = {
        "deterministic": ErrorCurve("outer", ks, np.array([det_errors])),
        "noisy": ErrorCurve("outer", np.array(check_ks), np.array([means])),
    }
    summary = {
        "deterministic_bound_holds": det_ok,
        "noisy_bound_holds": noisy_ok,
        "K_det": consts.K,
        "K_noisy": nconsts.K,
        "noisy_means": means,
        "noisy_bounds": [nbound(k) for k in check_ks],
    }
    return ExperimentResult(cfg, {}, curves, summary, all_passed=det_ok and noisy_ok)


def run_contraction(cfg: ExperimentConfig) -> ExperimentResult:
    num = int(cfg.replications)
    rows = []
    all_pass = True
    for i in range(num):
        rng = stream_for(cfg.seed, cfg.kind, i)
        n = int(rng.integers(2, 21))
        identity_A = bool(rng.random() < 0.5)
        inst = random_quadratic(rng, n, identity_A=identity_A)
        mu_f = float(np.linalg.eigvalsh(inst.H_f)[0])
        L_f = float(np.linalg.eigvalsh(inst.H_f)[-1])
        rho = float(np.exp(rng.uniform(np.log(0.5), np.log(50.0))))
        strong_g = bool(rng.random() < 0.5)
        if strong_g:
            Q = float(rng.uniform(0.5, 5.0)) * np.eye(n)
            sigma_g = float(np.linalg.eigvalsh(inst.H_g)[0])
            delta = bnd.delta_strongly_convex_g(mu_f, L_f, sigma_g, rho, inst.A, Q)
        else:
            Q = np.zeros((n, n))
            delta = bnd.delta_simple(mu_f, L_f, rho, inst.A)
        acfg = AlgorithmConfig(rho=rho, P=np.zeros((n, n)), Q=Q, gamma=1.0, eta=0.5)
        u0 = Iterate(rng.standard_normal(n), rng.standard_normal(n), rng.standard_normal(n))
        report = contraction_check(inst, acfg, delta, u0, int(cfg.options.get("iters", 50)))
        finite = report.ratios[np.isfinite(report.ratios)]
        rows.append({
            "instance": i, "n": n, "rho": rho,
            "regime": "strong-g" if strong_g else "simple",
            "delta": delta,
            "max_ratio": float(finite.max()) if finite.size else float("nan"),
            "threshold": report.threshold,
            "passed": report.passed,
        })
        all_pass = all_pass and report.passed
    summary = {"instances": num, "all_passed": all_pass, "rows": rows}
    return ExperimentResult(cfg, {}, {}, summary, all_passed=all_pass)


def _certificate_for(cfg: ExperimentConfig):
    inst = build_instance(cfg)
    rho = float(cfg.options.get("rho", 20.0))
    prob = inst.to_problem()
    if isinstance(inst, LassoInstance):
        acfg = lasso_algorithm_config(inst, rho, None,
                                      T=float(cfg.options.get("T", 1000.0)),
                                      eta=cfg.options.get("eta"))
        consts = derive_constants(prob, acfg)
        cert = bnd.certificate_simple(prob, acfg, consts)
    else:
        acfg = distreg_algorithm_config(inst, rho, None,
                                        T=float(cfg.options.get("T", 1000.0)),
                                        eta=cfg.options.get("eta"))
        consts = derive_constants(prob, acfg)
        cert = bnd.certificate_full(prob, acfg, consts)
    kkt = prob.known_kkt
    u_star = Iterate(kkt.x_star, kkt.y_star, kkt.lambda_star)
    r0 = g_norm_sq(consts.metric, zero_iterate(prob.dim_x, prob.dim_y, prob.dim_c) - u_star)
    return inst, prob, acfg, consts, cert, r0


def run_bounds(cfg: ExperimentConfig) -> ExperimentResult:
    inst, prob, acfg, consts, cert, r0 = _certificate_for(cfg)
    num_outer = int(cfg.options.get("num_outer", 100))
    curve = bnd.bound_curve(cert, r0, num_outer)
    summary = {
        "instance": inst.describe(),
        "certificate": cert.to_dict(),
        "r0": r0,
        "final_g_bound": float(curve.g_bounds[-1]),
    }
    curves = {"bound": ErrorCurve("outer", np.arange(1, num_outer + 2),
                                  np.array([curve.g_bounds]))}
    return ExperimentResult(cfg, {}, curves, summary, instance=inst)


def run_complexity_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    inst, prob, acfg, consts, cert, r0 = _certificate_for(cfg)
    epsilons = cfg.options.get("epsilons", [1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    L_ratio = cfg.options.get("L_ratio")
    rows = []
    for eps in epsilons:
        cb = bnd.complexity_bound(cert, r0, L_ratio=L_ratio, epsilon=float(eps))
        rows.append({"epsilon": float(eps), "K_bar": cb.K_bar,
                     "log10_N_bound": cb.log10_N_bound, "N_bound": cb.N_bound})
    summary = {"instance": inst.describe(), "rows": rows,
               "certificate": cert.to_dict(), "r0": r0}
    return ExperimentResult(cfg, {}, {}, summary, instance=inst)


RUNNERS = {
    "lasso-compare": run_lasso_compare,
    "distreg-compare": run_distreg_compare,
    "sa-rate": run_sa_rate,
    "contraction-test": run_contraction,
    "bounds": run_bounds,
    "complexity-sweep": run_complexity_sweep,
}


def run_replications(cfg: ExperimentConfig) -> ExperimentResult:
    """Dispatch an experiment, then write outputs if an output dir is set."""
    result = RUNNERS[cfg.kind](cfg)
    if cfg.out_dir:
        write_outputs(result, Path(cfg.out_dir))
    return result


# ---------------------------------------------------------------------------
# file emission


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_run_csv(record: RunRecord, path) -> None:
    cols = ("k", "samples_x", "samples_y", "samples_total",
            "err_u_G", "err_x", "err_y", "wall_ms")
    lines = [",".join(cols)]
    total = record.samples_total
    for i in range(len(record)):
        row = [
            _fmt(record.ks[i]), _fmt(record.samples_x[i]), _fmt(record.samples_y[i]),
            _fmt(total[i]),
            _fmt(record.err_u_G[i]) if record.err_u_G is not None else "",
            _fmt(record.err_x[i]) if record.err_x is not None else "",
            _fmt(record.err_y[i]) if record.err_y is not None else "",
            _fmt(record.wall_ms[i]),
        ]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_curve_csv(curve: ErrorCurve, path) -> None:
    reps = curve.values.shape[0]
    cols = [curve.abscissa_kind, "mean", "stderr"] + [f"rep_{i}" for i in range(reps)]
    lines = [",".join(cols)]
    mean, stderr = curve.mean, curve.stderr
    for j in range(len(curve.abscissa)):
        row = [_fmt(curve.abscissa[j]), _fmt(mean[j]), _fmt(stderr[j])]
        row += [_fmt(curve.values[i, j]) for i in range(reps)]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_outputs(result: ExperimentResult, out_dir: Path) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "prng": PRNG_DESC,
        "config": dataclasses.asdict(result.config),
        "config_digest": result.config.digest(),
    }
    (out_dir / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))
    (out_dir / "summary.json").write_text(
        json.dumps(result.summary, indent=2, sort_keys=True, default=str))
    for algo, recs in result.records.items():
        for i, rec in enumerate(recs):
            write_run_csv(rec, out_dir / f"run_{algo}_rep{i}.csv")
    for name, curve in result.curves.items():
        write_curve_csv(curve, out_dir / f"curve_{name}.csv")
