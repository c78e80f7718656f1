"""Command-line front end.

Subcommands map one-to-one onto the experiment protocols; every run writes a
CSV with a fixed header, a JSON summary embedding the fully resolved
configuration (presets expanded), the master seed and the tool version, and,
unless ``--no-plot`` is given, a rendered PNG figure next to them.

Configuration comes from a flat ``key = value`` text file (``--config``)
overridden by command-line flags; flags win.  Exit codes: 0 on success, 1 on
configuration errors, 2 on runtime failures.  The ``CSAES_WORKERS``
environment variable sets the default worker count for trial-parallel
experiments.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .core import CsaVariant, csa_params
from .experiments import (
    BenchmarkConfig,
    ParamSet,
    TrialConfig,
    measure_gamma,
    measure_generation_count,
    measure_psa_steady_state,
    measure_signals_fixed_mu,
    median_shift_oracle,
    rastrigin_ladder,
    rastrigin_n_sweep,
    run_benchmark,
    run_schedule,
    spawn_rng,
)
from .pcs import THETA_F, THETA_H, THETA_THETA, ControlMethod
from .testbed import ObjectiveKind, ObjectiveSpec, TerminationSpec
from .theory import (
    RescaleLaw,
    SphereParams,
    effective_damping,
    gamma_prediction,
    one_generation_oracle,
    progress_rate_full,
)

EXPERIMENTS = (
    "progress-rate",
    "gamma",
    "gen-count",
    "schedule",
    "signals",
    "pcs-table",
    "benchmark",
    "psa-steady",
    "median-shift",
)

BENCHMARK_METHODS = ("apop", "pccsa", "psa", "fixed-sqrtN", "fixed-linN", "fixed-han")


class ConfigError(Exception):
    """Validation failure; carries every violation found."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


def _parse_int_list(text: str) -> list[int]:
    return [int(part) for part in str(text).split(",") if part.strip() != ""]


def _parse_float_list(text: str) -> list[float]:
    return [float(part) for part in str(text).split(",") if part.strip() != ""]


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_str_list(text: str) -> list[str]:
    return [part.strip() for part in str(text).split(",") if part.strip() != ""]


# key -> (converter, default); None defaults are filled per experiment
_SCHEMA: dict = {
    "experiment": (str, None),
    "out": (str, "results"),
    "seed": (int, 1),
    "workers": (int, None),
    "plot": (_parse_bool, True),
    "trace": (_parse_bool, False),
    "n": (_parse_int_list, None),
    "mu": (_parse_int_list, None),
    "mu0": (int, 4),
    "mu_min": (int, 4),
    "mu_max": (int, 1024),
    "theta": (float, 0.5),
    "csa": (str, "sqrtN"),
    "method": (str, "apop"),
    "objective": (str, "sphere"),
    "a": (float, None),
    "alpha": (float, None),
    "preset": (str, "P2"),
    "window": (int, None),
    "beta": (float, None),
    "alpha_mu": (float, None),
    "delta_g": (int, None),
    "rescale": (str, None),
    "trials": (int, None),
    "horizon": (int, None),
    "burn_in": (int, None),
    "repeats": (int, 10_000),
    "runs": (int, 10),
    "sigma_star": (_parse_float_list, None),
    "sigma": (float, 0.42),
    "radius": (float, 1.0),
    "target_ratio": (float, 1e-6),
    "suite": (str, "rastrigin-ladder"),
    "methods": (_parse_str_list, None),
    "max_n": (int, None),
    "f_stop": (float, None),
    "sigma_stop": (float, None),
    "g_max": (int, None),
    "eval_max": (int, 100_000_000),
}


@dataclass
class RunConfig:
    """Fully resolved run configuration (presets already expanded)."""

    experiment: str
    values: dict

    def __getattr__(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise AttributeError(name) from None

    def param_set(self, n: int) -> ParamSet:
        """Controller parameters for dimension n: preset plus explicit
        overrides (explicit keys win over the preset)."""
        v = self.values
        if v["preset"].upper() == "P1":
            base = ParamSet.p1(n)
        else:
            base = ParamSet.p2()
        return ParamSet(
            window=v["window"] if v["window"] is not None else base.window,
            beta=v["beta"] if v["beta"] is not None else base.beta,
            alpha_mu=v["alpha_mu"] if v["alpha_mu"] is not None else base.alpha_mu,
            delta_g=v["delta_g"] if v["delta_g"] is not None else base.delta_g,
            rescale_law=RescaleLaw(v["rescale"]) if v["rescale"] is not None
            else base.rescale_law,
        )

    def objective_spec(self, n: int) -> ObjectiveSpec:
        kind = ObjectiveKind(self.values["objective"])
        if kind is ObjectiveKind.RASTRIGIN:
            a = self.values["a"] if self.values["a"] is not None else 3.0
            alpha = (
                self.values["alpha"]
                if self.values["alpha"] is not None
                else 2.0 * math.pi
            )
            return ObjectiveSpec(kind, n, a=a, alpha=alpha)
        return ObjectiveSpec(kind, n)

    def termination(self, kind: ObjectiveKind) -> TerminationSpec:
        """Per-objective termination defaults, overridable via config keys.

        Sphere runs target f < 1e-9 with the sigma floor disabled (the sphere
        has no local optima); random runs are budget-only with a default
        1000-generation horizon; Rastrigin uses the benchmark convention
        f_stop = sigma_stop = 1e-3.
        """
        v = self.values
        if kind is ObjectiveKind.RASTRIGIN:
            f_stop, sigma_stop, g_max = 1e-3, 1e-3, 100_000
        elif kind is ObjectiveKind.SPHERE:
            f_stop, sigma_stop, g_max = 1e-9, 1e-30, 100_000
        else:
            f_stop, sigma_stop, g_max = 1e-3, 1e-30, 1000
        return TerminationSpec(
            f_stop=v["f_stop"] if v["f_stop"] is not None else f_stop,
            sigma_stop=v["sigma_stop"] if v["sigma_stop"] is not None else sigma_stop,
            g_max=v["g_max"] if v["g_max"] is not None else g_max,
            eval_max=v["eval_max"],
        )

    def as_json_dict(self) -> dict:
        out = {"experiment": self.experiment}
        for key, value in sorted(self.values.items()):
            out[key] = value
        return out


def parse_config(text: str) -> dict:
    """Parse the flat key-value config format into raw values.

    Lines are ``key = value``; blank lines and ``#`` comments are ignored.
    Unknown keys and unparsable values are all collected before failing.
    """
    raw: dict = {}
    violations: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            violations.append(f"line {lineno}: expected 'key = value', got {line!r}")
            continue
        key, _, value = stripped.partition("=")
        key = key.strip().lower().replace("-", "_")
        if key not in _SCHEMA:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        converter = _SCHEMA[key][0]
        try:
            raw[key] = converter(value.strip())
        except ValueError as exc:
            violations.append(f"line {lineno}: bad value for {key!r}: {exc}")
    if violations:
        raise ConfigError(violations)
    return raw


def build_config(experiment: str, file_values: dict, cli_values: dict) -> RunConfig:
    """Merge defaults, config file, and flags (flags win) and validate."""
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    values.update(file_values)
    values.update({k: v for k, v in cli_values.items() if v is not None})
    values.pop("experiment", None)

    violations: list[str] = []
    if values["workers"] is None:
        env = os.environ.get("CSAES_WORKERS", "1")
        try:
            values["workers"] = int(env)
        except ValueError:
            violations.append(f"CSAES_WORKERS must be an integer, got {env!r}")
            values["workers"] = 1

    def check(cond: bool, message: str):
        if not cond:
            violations.append(message)

    check(values["seed"] >= 0, "seed must be >= 0")
    check(values["workers"] >= 1, "workers must be >= 1")
    check(0.0 < values["theta"] < 1.0, "theta must be in (0, 1)")
    check(values["mu0"] >= 1, "mu0 must be >= 1")
    check(
        values["mu_min"] <= values["mu0"] <= values["mu_max"],
        "need mu_min <= mu0 <= mu_max",
    )
    if values["alpha_mu"] is not None:
        check(values["alpha_mu"] > 1.0, "alpha_mu must exceed 1")
    if values["delta_g"] is not None:
        check(values["delta_g"] >= 0, "delta_g must be >= 0")
    if values["window"] is not None:
        check(values["window"] >= 2, "window must be >= 2")
        if values["method"] == "pccsa":
            check(values["window"] >= 3, "the pccsa trend test needs window >= 3")
    if values["beta"] is not None:
        check(0.0 < values["beta"] <= 1.0, "beta must be in (0, 1]")
    check(values["preset"].upper() in ("P1", "P2"), "preset must be P1 or P2")
    try:
        CsaVariant(values["csa"])
    except ValueError:
        violations.append(
            f"csa must be one of {[v.value for v in CsaVariant]}, got {values['csa']!r}"
        )
    try:
        ControlMethod(values["method"])
    except ValueError:
        if experiment != "benchmark":
            violations.append(
                f"method must be one of {[m.value for m in ControlMethod]},"
                f" got {values['method']!r}"
            )
    try:
        ObjectiveKind(values["objective"])
    except ValueError:
        violations.append(f"unknown objective {values['objective']!r}")
    if values["rescale"] is not None:
        try:
            RescaleLaw(values["rescale"])
        except ValueError:
            violations.append(f"unknown rescale law {values['rescale']!r}")
    if values["a"] is not None:
        check(values["a"] > 0.0, "a must be positive")
    if values["alpha"] is not None:
        check(values["alpha"] > 0.0, "alpha must be positive")
    for key in ("trials", "horizon", "repeats", "runs", "g_max"):
        if values[key] is not None:
            check(values[key] >= 1, f"{key} must be >= 1")
    if values["burn_in"] is not None:
        check(values["burn_in"] >= 0, "burn_in must be >= 0")
        if values["horizon"] is not None:
            check(values["burn_in"] < values["horizon"], "burn_in must be < horizon")
    check(values["sigma"] > 0.0, "sigma must be positive")
    check(values["radius"] > 0.0, "radius must be positive")
    check(0.0 < values["target_ratio"] < 1.0, "target_ratio must be in (0, 1)")
    check(
        values["suite"] in ("rastrigin-ladder", "rastrigin-a3"),
        f"suite must be rastrigin-ladder or rastrigin-a3, got {values['suite']!r}",
    )
    if values["methods"] is not None:
        for m in values["methods"]:
            check(
                m in BENCHMARK_METHODS,
                f"benchmark method must be one of {BENCHMARK_METHODS}, got {m!r}",
            )
    if values["n"] is not None:
        check(all(n >= 1 for n in values["n"]), "every n must be >= 1")
    if values["mu"] is not None:
        check(all(m >= 1 for m in values["mu"]), "every mu must be >= 1")
    for key in ("f_stop", "sigma_stop"):
        if values[key] is not None:
            check(values[key] > 0.0, f"{key} must be positive")

    if violations:
        raise ConfigError(violations)
    return RunConfig(experiment=experiment, values=values)


def _require_single(cfg: RunConfig, key: str, fallback=None) -> int:
    lst = cfg.values[key]
    if lst is None:
        if fallback is None:
            raise ConfigError([f"{key} is required for {cfg.experiment}"])
        return fallback
    if len(lst) != 1:
        raise ConfigError([f"{cfg.experiment} takes exactly one value for {key}"])
    return lst[0]


def _format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (np.floating, np.integer)):
        return repr(value.item())
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_value(v) for v in row])


def write_summary(path: Path, cfg: RunConfig, results: dict) -> None:
    payload = {
        "tool": "csaes",
        "version": __version__,
        "master_seed": cfg.values["seed"],
        "config": cfg.as_json_dict(),
        "results": results,
    }
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if dataclasses.is_dataclass(value):
        return dataclasses.asdict(value)
    return str(value)


def _emit(cfg: RunConfig, name: str, header, rows, results, figure=None):
    outdir = Path(cfg.values["out"])
    outdir.mkdir(parents=True, exist_ok=True)
    write_csv(outdir / f"{name}.csv", header, rows)
    write_summary(outdir / f"{name}.json", cfg, results)
    if figure is not None and cfg.values["plot"]:
        figure.savefig(outdir / f"{name}.png", dpi=130)
    print(f"wrote {outdir / name}.csv / .json" + (
        " / .png" if figure is not None and cfg.values["plot"] else ""))


# ---------------------------------------------------------------------------
# subcommand handlers


def cmd_progress_rate(cfg: RunConfig) -> None:
    from . import plotting

    n = _require_single(cfg, "n")
    mus = cfg.values["mu"] or [100, 300, 1000]
    sigma_stars = cfg.values["sigma_star"] or [10.0, 20.0, 30.0, 40.0]
    trials = cfg.values["trials"] or 10_000
    rows = []
    worst = 0.0
    for i, mu in enumerate(mus):
        lam = int(round(mu / cfg.values["theta"]))
        oracle = one_generation_oracle(
            sigma_stars, n, mu, lam, trials, spawn_rng(cfg.values["seed"], i)
        )
        formula = progress_rate_full(np.asarray(sigma_stars), SphereParams(n=n, mu=mu))
        for j, s in enumerate(sigma_stars):
            dev = abs(oracle.mean[j] - formula[j]) / oracle.stderr[j]
            worst = max(worst, dev)
            rows.append((mu, s, float(formula[j]), float(oracle.mean[j]),
                         float(oracle.stderr[j])))
    _emit(
        cfg,
        "progress-rate",
        ["mu", "sigma_star", "phi_formula", "phi_oracle", "stderr"],
        rows,
        {"trials": trials, "worst_deviation_stderr": worst},
        plotting.plot_progress_rate(n, rows),
    )


def cmd_gamma(cfg: RunConfig) -> None:
    from . import plotting

    n = _require_single(cfg, "n")
    mu = _require_single(cfg, "mu")
    trials = cfg.values["trials"] or 10
    horizon = cfg.values["horizon"] or 2500
    burn_in = cfg.values["burn_in"]
    if burn_in is None:
        burn_in = horizon // 5
    variant = CsaVariant(cfg.values["csa"])
    measurement = measure_gamma(
        variant, n, mu, trials, spawn_rng(cfg.values["seed"], 0),
        burn_in=burn_in, horizon=horizon, theta=cfg.values["theta"],
    )
    csa = csa_params(variant, n, mu)
    damping = (
        csa.damping
        if csa.variant is not CsaVariant.HAN
        else effective_damping(csa.c_sigma, csa.damping)
    )
    predicted = gamma_prediction(
        csa.c_sigma, damping, n, SphereParams(n=n, mu=mu).c_theta, mu=mu
    )
    rows = [
        (i, float(med), float(med) / measurement.sigma_star_zero)
        for i, med in enumerate(measurement.sigma_star_trials)
    ]
    _emit(
        cfg,
        "gamma",
        ["trial", "sigma_star_median", "gamma"],
        rows,
        {
            "gamma_measured": measurement.gamma,
            "sigma_star_ss": measurement.sigma_star_ss,
            "sigma_star_zero": measurement.sigma_star_zero,
            "gamma_predicted": predicted.gamma,
            "excluded_trials": measurement.excluded_trials,
        },
        plotting.plot_gamma(rows, measurement.sigma_star_zero, predicted.gamma),
    )


def cmd_gen_count(cfg: RunConfig) -> None:
    from . import plotting

    ns = cfg.values["n"] or [25, 100, 400]
    mu = _require_single(cfg, "mu", fallback=1000)
    runs = cfg.values["runs"]
    ratio = cfg.values["target_ratio"]
    variant = CsaVariant(cfg.values["csa"])
    rows = []
    means = {}
    for i, n in enumerate(ns):
        counts = measure_generation_count(
            variant, n, mu, ratio, runs, spawn_rng(cfg.values["seed"], i),
            theta=cfg.values["theta"],
        )
        means[n] = float(counts.mean())
        rows.extend((n, run, int(c)) for run, c in enumerate(counts))
    _emit(
        cfg,
        "gen-count",
        ["n", "run", "generations"],
        rows,
        {
            "mu": mu,
            "target_ratio": ratio,
            "mean_generations": means,
            "sqrtN_ratio": {n: means[n] / math.sqrt(n) for n in means},
        },
        plotting.plot_generation_count(rows),
    )


def cmd_schedule(cfg: RunConfig) -> None:
    from . import plotting

    n = _require_single(cfg, "n")
    result = run_schedule(
        CsaVariant(cfg.values["csa"]),
        RescaleLaw(cfg.values["rescale"] or "sqrt"),
        n,
        cfg.values["alpha_mu"] or 2.0,
        cfg.values["delta_g"] if cfg.values["delta_g"] is not None else 0,
        cfg.values["mu0"],
        cfg.values["mu_max"],
        spawn_rng(cfg.values["seed"], 0),
        g_budget=cfg.values["g_max"] or 150_000,
        theta=cfg.values["theta"],
    )
    rows = [
        (g + 1, float(result.radius[g]), int(result.mu[g]), float(result.sigma[g]))
        for g in range(result.generations)
    ]
    _emit(
        cfg,
        "schedule",
        ["g", "radius", "mu", "sigma"],
        rows,
        {"verdict": result.verdict.value, "generations": result.generations},
        plotting.plot_schedule(result),
    )


def cmd_signals(cfg: RunConfig) -> None:
    from . import plotting

    n = _require_single(cfg, "n")
    mus = cfg.values["mu"] or [10, 100, 1000]
    horizon = cfg.values["horizon"] or 1500
    method = ControlMethod(cfg.values["method"])
    params = cfg.param_set(n)
    traces = measure_signals_fixed_mu(
        method,
        CsaVariant(cfg.values["csa"]),
        cfg.objective_spec(n),
        mus,
        horizon,
        spawn_rng(cfg.values["seed"], 0),
        window=params.window,
        beta=params.beta,
        theta=cfg.values["theta"],
    )
    rows = []
    averages = {}
    for mu, trace in sorted(traces.items()):
        for g in range(horizon):
            rows.append((mu, int(trace.g[g]), float(trace.signal[g]),
                         float(trace.pm_sq[g]), float(trace.pc_sq[g])))
        averages[mu] = {
            "signal_mean": float(np.nanmean(trace.signal)),
            "pm_sq_mean": float(np.nanmean(trace.pm_sq))
            if method is ControlMethod.PSA else None,
            "pc_sq_mean": float(np.nanmean(trace.pc_sq))
            if method is ControlMethod.PSA else None,
        }
    threshold = {
        ControlMethod.APOP: THETA_F,
        ControlMethod.PCCSA: THETA_H,
        ControlMethod.PSA: THETA_THETA,
    }[method]
    _emit(
        cfg,
        "signals",
        ["mu", "g", "signal", "pm_sq", "pc_sq"],
        rows,
        {"time_averages": averages, "threshold": threshold},
        plotting.plot_signals(traces, threshold, method.value),
    )


def cmd_pcs_table(cfg: RunConfig) -> None:
    from . import plotting

    ns = cfg.values["n"] or [10, 100, 1000]
    trials = cfg.values["trials"] or 10
    method = ControlMethod(cfg.values["method"])
    variant = CsaVariant(cfg.values["csa"])
    suite = []
    for n in ns:
        spec = cfg.objective_spec(n)
        suite.append(
            BenchmarkConfig(
                label=f"{spec.kind.value}-N{n}",
                trial=TrialConfig(
                    objective=spec,
                    variant=variant,
                    method=method,
                    params=cfg.param_set(n),
                    mu0=cfg.values["mu0"],
                    mu_min=cfg.values["mu_min"],
                    mu_max=cfg.values["mu_max"],
                    theta=cfg.values["theta"],
                    term=cfg.termination(spec.kind),
                ),
            )
        )
    _, records = run_benchmark(
        suite, trials, cfg.values["seed"], workers=cfg.values["workers"]
    )
    rows = []
    aggregates = {}
    percentile_rows = []
    for ci, bench in enumerate(suite):
        for ti, rec in enumerate(records[ci]):
            rows.append((
                cfg.values["objective"], ns[ci], ti, rec.outcome.value, rec.evals,
                rec.generations, rec.mu_p25, rec.mu_med, rec.mu_p75,
            ))
        recs = records[ci]
        agg = {
            "mu_p25": float(np.median([r.mu_p25 for r in recs])),
            "mu_med": float(np.median([r.mu_med for r in recs])),
            "mu_p75": float(np.median([r.mu_p75 for r in recs])),
            "evals_mean": float(np.mean([r.evals for r in recs])),
        }
        aggregates[bench.label] = agg
        percentile_rows.append((bench.label, agg["mu_p25"], agg["mu_med"], agg["mu_p75"]))
    _emit(
        cfg,
        "pcs-table",
        ["objective", "n", "trial", "outcome", "evals", "generations",
         "mu_p25", "mu_med", "mu_p75"],
        rows,
        {"aggregates": aggregates, "trials": trials},
        plotting.plot_mu_percentiles(percentile_rows),
    )


_BENCH_SETUPS = {
    "apop": (ControlMethod.APOP, CsaVariant.SQRT_N, False),
    "pccsa": (ControlMethod.PCCSA, CsaVariant.SQRT_N, False),
    "psa": (ControlMethod.PSA, CsaVariant.HAN, False),
    "fixed-sqrtN": (ControlMethod.NONE, CsaVariant.SQRT_N, True),
    "fixed-linN": (ControlMethod.NONE, CsaVariant.LIN_N, True),
    "fixed-han": (ControlMethod.NONE, CsaVariant.HAN, True),
}


def cmd_benchmark(cfg: RunConfig) -> None:
    from . import plotting

    methods = cfg.values["methods"] or ["apop", "pccsa", "psa"]
    trials = cfg.values["trials"] or 50
    grid = rastrigin_ladder() if cfg.values["suite"] == "rastrigin-ladder" \
        else rastrigin_n_sweep()
    if cfg.values["max_n"] is not None:
        grid = [(n, a) for n, a in grid if n <= cfg.values["max_n"]]
    if cfg.values["n"] is not None:
        wanted = set(cfg.values["n"])
        grid = [(n, a) for n, a in grid if n in wanted]
    suite = []
    meta = []
    for n, a in grid:
        spec = ObjectiveSpec(ObjectiveKind.RASTRIGIN, n, a=a, alpha=2.0 * math.pi)
        for name in methods:
            control, variant, fixed = _BENCH_SETUPS[name]
            mu0 = cfg.values["mu_max"] if fixed else cfg.values["mu0"]
            mu_min = cfg.values["mu_max"] if fixed else cfg.values["mu_min"]
            suite.append(
                BenchmarkConfig(
                    label=f"{name}-N{n}-A{a:g}",
                    trial=TrialConfig(
                        objective=spec,
                        variant=variant,
                        method=control,
                        params=cfg.param_set(n),
                        mu0=mu0,
                        mu_min=mu_min,
                        mu_max=cfg.values["mu_max"],
                        theta=cfg.values["theta"],
                        term=cfg.termination(ObjectiveKind.RASTRIGIN),
                    ),
                )
            )
            meta.append((n, a, name))
    results, _ = run_benchmark(
        suite, trials, cfg.values["seed"], workers=cfg.values["workers"]
    )
    rows = [
        (n, a, name, res.trials, res.p_success, res.e_runtime,
         res.f_success_total, res.f_fail_total)
        for (n, a, name), res in zip(meta, results)
    ]
    _emit(
        cfg,
        "benchmark",
        ["n", "a", "method", "trials", "p_success", "e_runtime",
         "f_success_total", "f_fail_total"],
        rows,
        {"suite": cfg.values["suite"], "trials": trials},
        plotting.plot_benchmark(rows),
    )


def cmd_psa_steady(cfg: RunConfig) -> None:
    from . import plotting

    n = _require_single(cfg, "n")
    mus = cfg.values["mu"] or [100, 1000]
    horizon = cfg.values["horizon"] or 2500
    burn_in = cfg.values["burn_in"]
    if burn_in is None:
        burn_in = horizon // 5
    beta = cfg.values["beta"] if cfg.values["beta"] is not None else 0.1
    rows = []
    for i, mu in enumerate(mus):
        res = measure_psa_steady_state(
            CsaVariant(cfg.values["csa"]), n, mu, beta,
            spawn_rng(cfg.values["seed"], i), horizon=horizon, burn_in=burn_in,
            theta=cfg.values["theta"],
        )
        rows.append((mu, res.gamma, res.pm_sq_measured, res.pc_sq_measured,
                     res.pm_sq_predicted, res.pc_sq_predicted))
    _emit(
        cfg,
        "psa-steady",
        ["mu", "gamma", "pm_sq_measured", "pc_sq_measured",
         "pm_sq_predicted", "pc_sq_predicted"],
        rows,
        {"beta": beta, "horizon": horizon},
        plotting.plot_psa_steady(rows),
    )


def cmd_median_shift(cfg: RunConfig) -> None:
    from . import plotting

    n = _require_single(cfg, "n", fallback=100)
    mu = _require_single(cfg, "mu", fallback=100)
    lam = int(round(mu / cfg.values["theta"]))
    shift = median_shift_oracle(
        n, mu, lam,
        cfg.values["radius"], cfg.values["sigma"],
        cfg.values["alpha_mu"] or 1.05,
        cfg.values["repeats"],
        spawn_rng(cfg.values["seed"], 0),
    )
    rows = [
        ("median_before", shift.before, shift.stderr_before),
        ("median_after_rescaled", shift.after_rescaled, shift.stderr_rescaled),
        ("median_after_unrescaled", shift.after_unrescaled, shift.stderr_unrescaled),
    ]
    _emit(
        cfg,
        "median-shift",
        ["quantity", "value", "stderr"],
        rows,
        {"repeats": cfg.values["repeats"]},
        plotting.plot_median_shift(shift),
    )


_HANDLERS = {
    "progress-rate": cmd_progress_rate,
    "gamma": cmd_gamma,
    "gen-count": cmd_gen_count,
    "schedule": cmd_schedule,
    "signals": cmd_signals,
    "pcs-table": cmd_pcs_table,
    "benchmark": cmd_benchmark,
    "psa-steady": cmd_psa_steady,
    "median-shift": cmd_median_shift,
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", help="output directory (default: results)")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--workers", type=int, help="trial-parallel worker count")
    parser.add_argument("--no-plot", action="store_true", help="skip PNG rendering")
    parser.add_argument("--N", dest="n", help="dimension(s), comma separated")
    parser.add_argument("--mu", help="population size(s), comma separated")
    parser.add_argument("--mu0", type=int)
    parser.add_argument("--mu-min", type=int, dest="mu_min")
    parser.add_argument("--mu-max", type=int, dest="mu_max")
    parser.add_argument("--theta", type=float, help="truncation ratio mu/lambda")
    parser.add_argument("--csa", choices=[v.value for v in CsaVariant])
    parser.add_argument("--method")
    parser.add_argument("--objective", choices=[k.value for k in ObjectiveKind])
    parser.add_argument("--A", dest="a", type=float, help="Rastrigin amplitude")
    parser.add_argument("--alpha", type=float, help="Rastrigin frequency")
    parser.add_argument("--preset", choices=["P1", "P2"])
    parser.add_argument("--window", type=int, help="fitness window length L")
    parser.add_argument("--beta", type=float, help="PSA path constant")
    parser.add_argument("--alpha-mu", dest="alpha_mu", type=float)
    parser.add_argument("--delta-g", dest="delta_g", type=int)
    parser.add_argument("--rescale", choices=[r.value for r in RescaleLaw])
    parser.add_argument("--trials", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--burn-in", dest="burn_in", type=int)
    parser.add_argument("--repeats", type=int)
    parser.add_argument("--runs", type=int)
    parser.add_argument("--sigma-star", dest="sigma_star",
                        help="comma-separated normalized mutation strengths")
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--radius", type=float)
    parser.add_argument("--target-ratio", dest="target_ratio", type=float)
    parser.add_argument("--suite", choices=["rastrigin-ladder", "rastrigin-a3"])
    parser.add_argument("--methods", help="comma-separated benchmark methods")
    parser.add_argument("--max-n", dest="max_n", type=int)
    parser.add_argument("--f-stop", dest="f_stop", type=float)
    parser.add_argument("--sigma-stop", dest="sigma_stop", type=float)
    parser.add_argument("--g-max", dest="g_max", type=int)
    parser.add_argument("--eval-max", dest="eval_max", type=int)
    parser.add_argument("--trace", action="store_true")


def _cli_values(args: argparse.Namespace) -> dict:
    values = {}
    for key in _SCHEMA:
        if key == "experiment":
            continue
        if not hasattr(args, key):
            continue
        raw = getattr(args, key)
        if raw is None:
            continue
        converter = _SCHEMA[key][0]
        values[key] = converter(raw) if isinstance(raw, str) else raw
    if args.no_plot:
        values["plot"] = False
    if getattr(args, "trace", False):
        values["trace"] = True
    return values


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="csaes",
        description="Recombinative CSA evolution strategy with adaptive "
        "population control: experiment runner",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name, help=f"run the {name} experiment")
        _add_common_flags(cmd)
    args = parser.parse_args(argv)

    try:
        file_values: dict = {}
        if args.config:
            file_values = parse_config(Path(args.config).read_text())
            file_values.pop("experiment", None)
        cfg = build_config(args.command, file_values, _cli_values(args))
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        _HANDLERS[args.command](cfg)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure contract: nonzero exit, code 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
