"""Experiment protocols: steady-state measurements, schedule stability,
fixed-population signal traces, control benchmarks, and the brute-force
median-shift experiment.

Every protocol takes either an explicit ``numpy.random.Generator`` or a
master seed from which per-trial streams are derived deterministically via
``spawn_rng(master_seed, *key)``, so identical seeds reproduce identical
results regardless of worker count (aggregation is order-independent).
"""

from __future__ import annotations

import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    CsaVariant,
    DivergenceError,
    EsState,
    csa_params,
    offspring_count,
    run_generation,
)
from .pcs import ControlMethod, PcsController, apply_population_change
from .testbed import (
    Objective,
    ObjectiveKind,
    ObjectiveSpec,
    Outcome,
    TerminationSpec,
    classify_termination,
    init_run,
)
from .theory import RescaleLaw, SphereParams, rescale_factor, second_zero

__all__ = [
    "spawn_rng",
    "ParamSet",
    "TrialConfig",
    "TrialRecord",
    "BenchmarkConfig",
    "BenchmarkResult",
    "GammaMeasurement",
    "ScheduleVerdict",
    "ScheduleResult",
    "SignalTrace",
    "PsaSteadyState",
    "MedianShift",
    "run_pcs_trial",
    "measure_psa_steady_state",
    "run_benchmark",
    "measure_gamma",
    "measure_generation_count",
    "run_schedule",
    "measure_signals_fixed_mu",
    "median_shift_oracle",
    "rastrigin_ladder",
    "rastrigin_n_sweep",
]


def spawn_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent, reproducible stream for (master seed, key...)."""
    return np.random.Generator(
        np.random.SFC64(np.random.SeedSequence((master_seed, *key)))
    )


@dataclass(frozen=True)
class ParamSet:
    """Controller parameters: window length, path constant, growth factor,
    waiting time, and sigma-rescaling law."""

    window: int
    beta: float
    alpha_mu: float
    delta_g: int
    rescale_law: RescaleLaw = RescaleLaw.SQRT

    @classmethod
    def p1(cls, n: int) -> "ParamSet":
        """Dimension-coupled set: L = ceil(sqrt(N)), beta = 1/sqrt(N),
        alpha_mu = 1.05, no waiting."""
        return cls(
            window=math.ceil(math.sqrt(n)),
            beta=1.0 / math.sqrt(n),
            alpha_mu=1.05,
            delta_g=0,
            rescale_law=RescaleLaw.SQRT,
        )

    @classmethod
    def p2(cls) -> "ParamSet":
        """Constant set: L = 10, beta = 0.1, alpha_mu = 2, waiting 10."""
        return cls(window=10, beta=0.1, alpha_mu=2.0, delta_g=10,
                   rescale_law=RescaleLaw.SQRT)


@dataclass(frozen=True)
class TrialConfig:
    """Everything one control trial needs besides its random stream."""

    objective: ObjectiveSpec
    variant: CsaVariant
    method: ControlMethod
    params: ParamSet
    mu0: int = 4
    mu_min: int = 4
    mu_max: int = 1024
    theta: float = 0.5
    term: TerminationSpec = field(default_factory=TerminationSpec)
    record_trace: bool = False


@dataclass(frozen=True)
class TrialRecord:
    """Per-run outcome with population-size percentiles over all generations."""

    outcome: Outcome
    evals: int
    generations: int
    mu_p25: float
    mu_med: float
    mu_p75: float
    trace: dict | None = None


def run_pcs_trial(cfg: TrialConfig, rng: np.random.Generator) -> TrialRecord:
    """Execute one full run of the strategy with population control.

    On the random objective only the budget criteria apply (there is no
    meaningful fitness target).  Divergence is caught and reported as an
    outcome, never raised.
    """
    spec = cfg.objective
    state = init_run(spec, cfg.mu0, cfg.theta)
    csa = csa_params(cfg.variant, spec.n, state.mu)
    ctrl = PcsController(
        method=cfg.method,
        n=spec.n,
        mu_min=cfg.mu_min,
        mu_max=cfg.mu_max,
        alpha_mu=cfg.params.alpha_mu,
        delta_g=cfg.params.delta_g,
        rescale_law=cfg.params.rescale_law,
        theta=cfg.theta,
        window=cfg.params.window,
        beta=cfg.params.beta,
    )
    objective = Objective(spec)
    noisy = spec.kind is ObjectiveKind.RANDOM
    mu_seq = []
    trace: dict[str, list] | None = None
    if cfg.record_trace:
        trace = {k: [] for k in ("g", "f_rec", "f_med", "sigma", "mu", "per", "signal")}

    outcome = Outcome.RUNNING
    while outcome is Outcome.RUNNING:
        mu_seq.append(state.mu)
        try:
            out = run_generation(state, csa, objective, rng)
        except DivergenceError:
            outcome = Outcome.DIVERGED
            break
        per = ctrl.observe(out, state)
        if trace is not None:
            trace["g"].append(state.g)
            trace["f_rec"].append(out.f_rec)
            trace["f_med"].append(out.f_med)
            trace["sigma"].append(state.sigma)
            trace["mu"].append(state.mu)
            trace["per"].append(int(per))
            trace["signal"].append(ctrl.signal)
        csa, _ = apply_population_change(ctrl, per, state, csa)
        if noisy:
            if state.g >= cfg.term.g_max or objective.evaluations >= cfg.term.eval_max:
                outcome = Outcome.BUDGET
        else:
            outcome = classify_termination(state, out.f_rec, objective.evaluations, cfg.term)

    mu_arr = np.asarray(mu_seq, dtype=float)
    p25, p50, p75 = np.percentile(mu_arr, [25.0, 50.0, 75.0])
    if trace is not None:
        trace = {k: np.asarray(v) for k, v in trace.items()}
    return TrialRecord(
        outcome=outcome,
        evals=objective.evaluations,
        generations=state.g,
        mu_p25=float(p25),
        mu_med=float(p50),
        mu_p75=float(p75),
        trace=trace,
    )


@dataclass(frozen=True)
class BenchmarkConfig:
    """A labelled trial configuration within a benchmark suite."""

    label: str
    trial: TrialConfig


@dataclass(frozen=True)
class BenchmarkResult:
    """Aggregate over the trials of one configuration.

    ``e_runtime`` is the expected running time in function evaluations,
    (total evaluations over all runs) / (number of successes); undefined
    (None) when no run succeeded.
    """

    label: str
    trials: int
    p_success: float
    e_runtime: float | None
    f_success_total: int
    f_fail_total: int

    @classmethod
    def from_records(cls, label: str, records: list[TrialRecord]) -> "BenchmarkResult":
        trials = len(records)
        successes = sum(r.outcome is Outcome.SUCCESS for r in records)
        f_s = sum(r.evals for r in records if r.outcome is Outcome.SUCCESS)
        f_u = sum(r.evals for r in records if r.outcome is not Outcome.SUCCESS)
        p_s = successes / trials
        e_r = (f_s + f_u) / successes if successes else None
        return cls(label, trials, p_s, e_r, f_s, f_u)


def _benchmark_job(args):
    cfg_index, trial_index, trial_cfg, master_seed = args
    rng = spawn_rng(master_seed, cfg_index, trial_index)
    return cfg_index, trial_index, run_pcs_trial(trial_cfg, rng)


def run_benchmark(
    suite: list[BenchmarkConfig],
    trials_per_config: int,
    master_seed: int,
    workers: int = 1,
) -> tuple[list[BenchmarkResult], list[list[TrialRecord]]]:
    """Run a suite of configurations, ``trials_per_config`` runs each.

    Per-trial streams derive from (master seed, config index, trial index),
    so results are independent of ``workers``.  Returns the aggregates and
    the underlying records grouped per configuration.
    """
    jobs = [
        (ci, ti, cfg.trial, master_seed)
        for ci, cfg in enumerate(suite)
        for ti in range(trials_per_config)
    ]
    records: list[list[TrialRecord | None]] = [
        [None] * trials_per_config for _ in suite
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for ci, ti, rec in pool.map(_benchmark_job, jobs, chunksize=1):
                records[ci][ti] = rec
    else:
        for job in jobs:
            ci, ti, rec = _benchmark_job(job)
            records[ci][ti] = rec
    results = [
        BenchmarkResult.from_records(cfg.label, records[ci])
        for ci, cfg in enumerate(suite)
    ]
    return results, records


def rastrigin_ladder() -> list[tuple[int, float]]:
    """(N, A) pairs of graded multimodality: large amplitudes at small N."""
    return [(10, 65.0), (30, 33.0), (100, 12.0), (300, 7.0), (1000, 3.0)]


def rastrigin_n_sweep() -> list[tuple[int, float]]:
    """Dimension sweep at constant amplitude A = 3."""
    return [(10, 3.0), (30, 3.0), (100, 3.0), (300, 3.0), (1000, 3.0)]


@dataclass(frozen=True)
class GammaMeasurement:
    """Measured steady-state ratio on the sphere.

    ``sigma_star_trials`` holds the per-trial medians of sigma* after
    burn-in; ``sigma_star_ss`` is their mean and ``gamma`` its ratio to the
    numeric second zero.  Diverged trials are excluded and counted.
    """

    gamma: float
    sigma_star_ss: float
    sigma_star_zero: float
    sigma_star_trials: np.ndarray
    excluded_trials: int


def measure_gamma(
    variant: CsaVariant,
    n: int,
    mu: int,
    trials: int,
    rng: np.random.Generator,
    burn_in: int = 500,
    horizon: int = 2500,
    theta: float = 0.5,
) -> GammaMeasurement:
    """Fixed-population sphere runs measuring sigma*_ss / sigma*_0.

    Each trial records sigma*(g) = sigma N / R at every generation, drops the
    first ``burn_in`` generations, and takes the median; trial medians are
    averaged and normalized by the numeric second zero.
    """
    if not 0 <= burn_in < horizon:
        raise ValueError("need 0 <= burn_in < horizon")
    spec = ObjectiveSpec(ObjectiveKind.SPHERE, n)
    zero = second_zero(SphereParams(n=n, mu=mu, theta=theta), mode="numeric")
    medians = []
    excluded = 0
    for _ in range(trials):
        state = init_run(spec, mu, theta)
        csa = csa_params(variant, n, mu)
        objective = Objective(spec)
        sig_stars = np.empty(horizon)
        try:
            for g in range(horizon):
                radius = float(np.linalg.norm(state.y))
                sig_stars[g] = state.sigma * n / radius
                run_generation(state, csa, objective, rng)
        except DivergenceError:
            excluded += 1
            continue
        medians.append(float(np.median(sig_stars[burn_in:])))
    if not medians:
        raise DivergenceError("every trial diverged")
    if excluded:
        warnings.warn(f"{excluded} of {trials} trials diverged and were excluded")
    sigma_star_ss = float(np.mean(medians))
    return GammaMeasurement(
        gamma=sigma_star_ss / zero,
        sigma_star_ss=sigma_star_ss,
        sigma_star_zero=zero,
        sigma_star_trials=np.asarray(medians),
        excluded_trials=excluded,
    )


def measure_generation_count(
    variant: CsaVariant,
    n: int,
    mu: int,
    target_ratio: float,
    runs: int,
    rng: np.random.Generator,
    theta: float = 0.5,
    g_cap: int = 200_000,
) -> np.ndarray:
    """Generations to shrink the sphere distance by ``target_ratio``.

    Runs fixed-population trials from R = 1 until R <= target_ratio and
    returns the per-run generation counts.
    """
    if not 0.0 < target_ratio < 1.0:
        raise ValueError("target_ratio must be in (0, 1)")
    spec = ObjectiveSpec(ObjectiveKind.SPHERE, n)
    counts = np.empty(runs)
    for run in range(runs):
        state = init_run(spec, mu, theta)
        csa = csa_params(variant, n, mu)
        objective = Objective(spec)
        for g in range(1, g_cap + 1):
            run_generation(state, csa, objective, rng)
            if float(np.linalg.norm(state.y)) <= target_ratio:
                counts[run] = g
                break
        else:
            raise RuntimeError(f"target ratio not reached within {g_cap} generations")
    return counts


class ScheduleVerdict(str, enum.Enum):
    CONVERGED = "converged"
    DIVERGED = "diverged"
    BUDGET = "budget"


@dataclass(frozen=True)
class ScheduleResult:
    verdict: ScheduleVerdict
    generations: int
    radius: np.ndarray  # R(g)
    mu: np.ndarray      # mu(g)
    sigma: np.ndarray   # sigma(g)


def run_schedule(
    variant: CsaVariant,
    rescale_law: RescaleLaw,
    n: int,
    alpha_mu: float,
    delta_g: int,
    mu0: int,
    mu_max: int,
    rng: np.random.Generator,
    r_stop: float = 1e-12,
    r_diverge: float = 1e9,
    g_budget: int = 150_000,
    initial_hold: int = 200,
    theta: float = 0.5,
) -> ScheduleResult:
    """Deterministic population oscillation on the sphere (stability probe).

    The population stays at ``mu0`` for ``initial_hold`` generations, then
    alternates between growing by ceil(alpha_mu mu) up to ``mu_max`` and
    shrinking by floor(mu / alpha_mu) down to ``mu0``, with ``delta_g`` idle
    generations after every change and the chosen sigma rescaling applied at
    each change.  The run ends when R drops below ``r_stop`` (converged), R
    exceeds ``r_diverge`` or the guard rails trip (diverged), or the
    generation budget runs out.
    """
    if alpha_mu <= 1.0:
        raise ValueError("alpha_mu must exceed 1")
    spec = ObjectiveSpec(ObjectiveKind.SPHERE, n)
    state = init_run(spec, mu0, theta)
    csa = csa_params(variant, n, state.mu)
    objective = Objective(spec)
    rescale_law = RescaleLaw(rescale_law)

    radius_hist = np.empty(g_budget)
    mu_hist = np.empty(g_budget, dtype=int)
    sigma_hist = np.empty(g_budget)
    wait = initial_hold
    growing = True
    verdict = ScheduleVerdict.BUDGET
    g = 0
    for g in range(1, g_budget + 1):
        mu_hist[g - 1] = state.mu
        sigma_hist[g - 1] = state.sigma
        try:
            run_generation(state, csa, objective, rng)
        except DivergenceError:
            radius_hist[g - 1] = np.nan
            verdict = ScheduleVerdict.DIVERGED
            break
        radius = float(np.linalg.norm(state.y))
        radius_hist[g - 1] = radius
        if radius < r_stop:
            verdict = ScheduleVerdict.CONVERGED
            break
        if radius > r_diverge:
            verdict = ScheduleVerdict.DIVERGED
            break
        if wait > 0:
            wait -= 1
            continue
        if growing:
            mu_new = min(math.ceil(alpha_mu * state.mu), mu_max)
            if mu_new >= mu_max:
                growing = False
        else:
            mu_new = max(math.floor(state.mu / alpha_mu), mu0)
            if mu_new <= mu0:
                growing = True
        state.sigma *= rescale_factor(state.mu, mu_new, rescale_law)
        state.mu = mu_new
        state.lam = offspring_count(mu_new, theta)
        csa = csa_params(variant, n, mu_new)
        wait = delta_g
    return ScheduleResult(
        verdict=verdict,
        generations=g,
        radius=radius_hist[:g],
        mu=mu_hist[:g],
        sigma=sigma_hist[:g],
    )


@dataclass(frozen=True)
class SignalTrace:
    """Per-generation control signal of an instrumented fixed-mu run.

    ``signal`` is P_f, P_H, or |p_theta|^2 depending on the method (NaN while
    a fitness window is filling); the path components are populated for PSA
    only.
    """

    mu: int
    g: np.ndarray
    signal: np.ndarray
    pm_sq: np.ndarray
    pc_sq: np.ndarray


def measure_signals_fixed_mu(
    method: ControlMethod,
    variant: CsaVariant,
    objective: ObjectiveSpec,
    mu_values: list[int],
    horizon: int,
    rng: np.random.Generator,
    window: int = 10,
    beta: float = 0.1,
    theta: float = 0.5,
) -> dict[int, SignalTrace]:
    """Measure a control signal with population changes disabled.

    For each population size, runs ``horizon`` generations with the selected
    method instrumented (its histories and paths update every generation)
    while mu stays fixed.
    """
    method = ControlMethod(method)
    if method is ControlMethod.NONE:
        raise ValueError("pick a control method to instrument")
    traces: dict[int, SignalTrace] = {}
    for mu in mu_values:
        state = init_run(objective, mu, theta)
        csa = csa_params(variant, objective.n, mu)
        ctrl = PcsController(
            method=method,
            n=objective.n,
            mu_min=mu,
            mu_max=mu,
            alpha_mu=2.0,
            delta_g=0,
            rescale_law=RescaleLaw.NONE,
            theta=theta,
            window=window,
            beta=beta,
        )
        obj = Objective(objective)
        signal = np.full(horizon, np.nan)
        pm_sq = np.full(horizon, np.nan)
        pc_sq = np.full(horizon, np.nan)
        for g in range(horizon):
            out = run_generation(state, csa, obj, rng)
            ctrl.observe(out, state)
            signal[g] = ctrl.signal
            if method is ControlMethod.PSA:
                pm_sq[g] = float(ctrl.psa.p_m @ ctrl.psa.p_m)
                pc_sq[g] = float(ctrl.psa.p_c @ ctrl.psa.p_c)
        traces[mu] = SignalTrace(
            mu=mu, g=np.arange(1, horizon + 1), signal=signal, pm_sq=pm_sq, pc_sq=pc_sq
        )
    return traces


@dataclass(frozen=True)
class PsaSteadyState:
    """Measured vs predicted path norms of an instrumented fixed-mu run."""

    mu: int
    gamma: float
    pm_sq_measured: float
    pc_sq_measured: float
    pm_sq_predicted: float
    pc_sq_predicted: float


def measure_psa_steady_state(
    variant: CsaVariant,
    n: int,
    mu: int,
    beta: float,
    rng: np.random.Generator,
    horizon: int = 2500,
    burn_in: int = 500,
    theta: float = 0.5,
) -> PsaSteadyState:
    """Fixed-mu sphere run with the PSA paths instrumented.

    Time-averages |p_m|^2 and |p_c|^2 after burn-in, measures gamma from the
    same run (median sigma* over the numeric second zero), and evaluates the
    closed-form predictions at that measured gamma.
    """
    from .pcs import PsaState, psa_update
    from .theory import progress_coefficient, psa_steady_state_prediction

    if not 0 <= burn_in < horizon:
        raise ValueError("need 0 <= burn_in < horizon")
    spec = ObjectiveSpec(ObjectiveKind.SPHERE, n)
    state = init_run(spec, mu, theta)
    csa = csa_params(variant, n, mu)
    objective = Objective(spec)
    psa = PsaState(n, beta)
    sig_stars = np.empty(horizon)
    pm_sq = np.empty(horizon)
    pc_sq = np.empty(horizon)
    for g in range(horizon):
        sig_stars[g] = state.sigma * n / float(np.linalg.norm(state.y))
        out = run_generation(state, csa, objective, rng)
        psa_update(psa, out.z_rec, out.sigma_ratio, mu, n)
        pm_sq[g] = float(psa.p_m @ psa.p_m)
        pc_sq[g] = float(psa.p_c @ psa.p_c)
    zero = second_zero(SphereParams(n=n, mu=mu, theta=theta), mode="numeric")
    gamma = float(np.median(sig_stars[burn_in:])) / zero
    pm_pred, pc_pred = psa_steady_state_prediction(
        beta, mu, n, gamma, progress_coefficient(theta)
    )
    return PsaSteadyState(
        mu=mu,
        gamma=gamma,
        pm_sq_measured=float(pm_sq[burn_in:].mean()),
        pc_sq_measured=float(pc_sq[burn_in:].mean()),
        pm_sq_predicted=pm_pred,
        pc_sq_predicted=pc_pred,
    )


@dataclass(frozen=True)
class MedianShift:
    """Selected-fitness medians of the two-generation rescaling experiment."""

    before: float
    after_rescaled: float
    after_unrescaled: float
    stderr_before: float
    stderr_rescaled: float
    stderr_unrescaled: float


def _selected_median(
    n: int, mu: int, lam: int, radius: float, sigma: float,
    repeats: int, rng: np.random.Generator,
) -> tuple[float, float]:
    """Mean (and standard error) over repeats of the median of the mu best
    offspring fitness values on the sphere."""
    per = np.empty(repeats)
    done = 0
    chunk = max(1, min(repeats, 8_000_000 // (lam * n)))
    while done < repeats:
        m = min(chunk, repeats - done)
        z = rng.standard_normal((m, lam, n))
        # parent at radius * e_1
        f = (
            radius * radius
            + 2.0 * radius * sigma * z[:, :, 0]
            + sigma * sigma * np.einsum("ijk,ijk->ij", z, z)
        )
        f.partition(mu - 1, axis=1)
        per[done:done + m] = np.median(f[:, :mu], axis=1)
        done += m
    return float(per.mean()), float(per.std(ddof=1) / math.sqrt(repeats))


def median_shift_oracle(
    n: int,
    mu: int,
    lam: int,
    radius: float,
    sigma: float,
    alpha_mu: float,
    repeats: int,
    rng: np.random.Generator,
    radius_factor: float = 0.98,
) -> MedianShift:
    """Two-generation offspring-median experiment behind the false-deterioration
    effect of sigma rescaling.

    Generation one sits at ``radius`` with ``sigma``; generation two sits at
    ``radius_factor * radius`` (the expected distance after one step at these
    settings) with sigma either rescaled by sqrt(alpha_mu) or kept.  Returns
    the three selected-median estimates; a rescaled median above the first
    one signals a spurious deterioration despite actual progress.
    """
    m0, s0 = _selected_median(n, mu, lam, radius, sigma, repeats, rng)
    m1, s1 = _selected_median(
        n, mu, lam, radius_factor * radius, sigma * math.sqrt(alpha_mu), repeats, rng
    )
    m2, s2 = _selected_median(
        n, mu, lam, radius_factor * radius, sigma, repeats, rng
    )
    return MedianShift(
        before=m0,
        after_rescaled=m1,
        after_unrescaled=m2,
        stderr_before=s0,
        stderr_rescaled=s1,
        stderr_unrescaled=s2,
    )
