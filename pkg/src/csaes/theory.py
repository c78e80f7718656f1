"""Closed-form sphere theory for the recombinative ES and the Monte-Carlo
oracles used to validate it.

Everything here is a pure function of its arguments.  The closed forms cover
the normalized progress rate phi* as a function of the normalized mutation
strength sigma* = sigma N / R, its second zero sigma*_0 (the largest sigma*
with positive progress), the steady-state ratio gamma = sigma*_ss / sigma*_0
predicted from the cumulation constant and damping, the generation count to
a relative distance target, the sigma-rescaling laws applied on population
changes, and the steady state of the two population-signal paths.

The oracles are brute-force one-generation experiments (and order-statistics
averages) kept deliberately simple so they can arbitrate the closed forms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import ndtri

__all__ = [
    "SphereParams",
    "SteadyStatePrediction",
    "OracleResult",
    "RescaleLaw",
    "progress_coefficient",
    "progress_coefficient_mc",
    "progress_rate_full",
    "progress_rate_large_pop",
    "progress_rate_infinite_n",
    "second_zero",
    "effective_damping",
    "gamma_prediction",
    "generation_number",
    "one_generation_oracle",
    "psa_steady_state_prediction",
    "rescale_factor",
]


def progress_coefficient(theta: float) -> float:
    """Asymptotic progress coefficient c_theta for truncation ratio theta.

    c_theta = exp(-q^2/2) / (theta sqrt(2 pi)) with q the standard normal
    quantile at 1 - theta; it equals the large-lambda limit of the expected
    average of the mu best of lambda standard normals at mu/lambda = theta.
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must be in (0, 1)")
    q = ndtri(1.0 - theta)
    return math.exp(-0.5 * q * q) / (theta * math.sqrt(2.0 * math.pi))


_C_MULAM_CACHE: dict[tuple[int, int, int], float] = {}


def progress_coefficient_mc(
    mu: int,
    lam: int,
    repeats: int = 100_000,
    rng: np.random.Generator | None = None,
) -> float:
    """Finite-lambda progress coefficient by Monte Carlo.

    Averages the mean of the mu largest of lambda standard normals over
    ``repeats`` draws.  With the default rng (seeded from (mu, lam)) results
    are cached per (mu, lam, repeats) and reproducible across processes.
    """
    if not 1 <= mu <= lam:
        raise ValueError("need 1 <= mu <= lam")
    key = (mu, lam, repeats)
    if rng is None:
        if key in _C_MULAM_CACHE:
            return _C_MULAM_CACHE[key]
        rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence((mu, lam))))
        cacheable = True
    else:
        cacheable = False
    total = 0.0
    done = 0
    chunk = max(1, min(repeats, 4_000_000 // lam))
    while done < repeats:
        m = min(chunk, repeats - done)
        z = rng.standard_normal((m, lam))
        top = np.partition(z, lam - mu, axis=1)[:, lam - mu:]
        total += float(top.mean(axis=1).sum())
        done += m
    value = total / repeats
    if cacheable:
        _C_MULAM_CACHE[key] = value
    return value


@dataclass(frozen=True)
class SphereParams:
    """Sphere setting for the progress-rate formulas.

    ``c_theta`` is derived from ``theta`` unless supplied.  ``c_mulam`` is the
    optional finite-lambda coefficient; when absent the formulas fall back to
    the asymptotic ``c_theta``.
    """

    n: int
    mu: int
    theta: float = 0.5
    c_theta: float | None = None
    c_mulam: float | None = None

    def __post_init__(self):
        if self.n < 1 or self.mu < 1:
            raise ValueError("n and mu must be >= 1")
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must be in (0, 1)")
        if self.c_theta is None:
            object.__setattr__(self, "c_theta", progress_coefficient(self.theta))
        if self.c_theta <= 0.0:
            raise ValueError("c_theta must be positive")

    @property
    def coefficient(self) -> float:
        """Progress coefficient used in the formulas (finite-lambda if set)."""
        return self.c_theta if self.c_mulam is None else self.c_mulam


def progress_rate_full(sigma_star, p: SphereParams):
    """Normalized progress rate phi*(sigma*) on the sphere (full N-dependent
    form).  Accepts scalars or arrays."""
    s = np.asarray(sigma_star, dtype=float)
    c = p.coefficient
    a = 1.0 + s * s / (p.mu * p.n)
    phi = (
        c * s * (1.0 + s * s / (2.0 * p.mu * p.n))
        / (np.sqrt(a) * np.sqrt(1.0 + s * s / (2.0 * p.n)))
        - p.n * (np.sqrt(a) - 1.0)
    )
    return phi if phi.ndim else float(phi)


def progress_rate_large_pop(sigma_star, p: SphereParams):
    """Large-population approximation phi* = sqrt(2N) c_theta - sigma*^2/(2 mu)."""
    s = np.asarray(sigma_star, dtype=float)
    phi = math.sqrt(2.0 * p.n) * p.c_theta - s * s / (2.0 * p.mu)
    return phi if phi.ndim else float(phi)


def progress_rate_infinite_n(sigma_star, mu: int, c_mulam: float):
    """Infinite-dimension limit phi* = c sigma* - sigma*^2/(2 mu).

    Maximizer at c*mu, second zero at 2*c*mu.
    """
    s = np.asarray(sigma_star, dtype=float)
    phi = c_mulam * s - s * s / (2.0 * mu)
    return phi if phi.ndim else float(phi)


def second_zero(p: SphereParams, mode: str = "approx") -> float:
    """Second zero sigma*_0 of the progress rate.

    ``approx`` evaluates the closed form (8N)^(1/4) sqrt(c_theta mu).
    ``numeric`` locates the maximizer of the full formula and then bisects on
    [maximizer, 4 * approx] to relative tolerance 1e-10.

    Raises:
        ValueError: in numeric mode when no sign change is bracketed, which
            signals that the formula is being used outside its range (tiny mu).
    """
    approx = (8.0 * p.n) ** 0.25 * math.sqrt(p.c_theta * p.mu)
    if mode == "approx":
        return approx
    if mode != "numeric":
        raise ValueError(f"unknown mode {mode!r}")
    res = minimize_scalar(
        lambda s: -progress_rate_full(s, p),
        bounds=(1e-12, 2.0 * approx),
        method="bounded",
        options={"xatol": 1e-10 * approx},
    )
    peak = float(res.x)
    if progress_rate_full(peak, p) <= 0.0 or progress_rate_full(4.0 * approx, p) >= 0.0:
        raise ValueError("cannot bracket the second zero; mu too small for the formula")
    return float(
        brentq(lambda s: progress_rate_full(s, p), peak, 4.0 * approx, rtol=1e-10)
    )


def effective_damping(c_sigma: float, d_sigma: float) -> float:
    """Damping D equivalent to a (c_sigma/d_sigma)-style update exponent.

    exp((c_sigma/d_sigma) x) = exp(x / D) with D = d_sigma / c_sigma, which
    expands to 1 + 1/c_sigma + g(N, mu)/c_sigma for the CMA-ES default pair.
    """
    if c_sigma <= 0.0 or d_sigma <= 0.0:
        raise ValueError("c_sigma and d_sigma must be positive")
    return d_sigma / c_sigma


@dataclass(frozen=True)
class SteadyStatePrediction:
    """Predicted sphere steady state of a CSA parametrization.

    ``gamma`` is the predicted ratio sigma*_ss / sigma*_0; the derivation
    assumes 1/sqrt(2) < gamma < 1 and ``in_branch`` records whether the result
    respects that assumption.  ``sigma_star_ss`` is populated only when a
    population size was supplied.
    """

    b: float
    gamma: float
    phi_star: float
    sigma_star_ss: float | None
    in_branch: bool


def gamma_prediction(
    c_sigma: float,
    damping: float,
    n: int,
    c_theta: float,
    mu: int | None = None,
) -> SteadyStatePrediction:
    """Predict the steady-state ratio gamma from (c_sigma, D, N).

    b = 1 / (c_sigma D / (1 - c_sigma) + sqrt(2) c_theta D / sqrt(N)) and
    gamma = sqrt((sqrt(1 + b^2) - b + 1) / 2); the associated progress rate is
    c_theta sqrt(2N) (1 - gamma^2).  For a (c_sigma/d_sigma)-style update pass
    ``damping=effective_damping(c_sigma, d_sigma)``.
    """
    if not 0.0 < c_sigma < 1.0:
        raise ValueError("c_sigma must be in (0, 1)")
    if damping <= 0.0:
        raise ValueError("damping must be positive")
    b = 1.0 / (
        c_sigma * damping / (1.0 - c_sigma)
        + math.sqrt(2.0) * c_theta * damping / math.sqrt(n)
    )
    gamma = math.sqrt(0.5 * (math.sqrt(1.0 + b * b) - b + 1.0))
    phi_star = c_theta * math.sqrt(2.0 * n) * (1.0 - gamma * gamma)
    sigma_star_ss = None
    if mu is not None:
        sigma_star_ss = gamma * second_zero(
            SphereParams(n=n, mu=mu, c_theta=c_theta), mode="approx"
        )
    return SteadyStatePrediction(
        b=b,
        gamma=gamma,
        phi_star=phi_star,
        sigma_star_ss=sigma_star_ss,
        in_branch=1.0 / math.sqrt(2.0) < gamma < 1.0,
    )


def generation_number(n: int, gamma: float, c_theta: float, r_ratio: float) -> float:
    """Generations needed for a relative distance change R(g0)/R(g) = r_ratio.

    G = sqrt(N) ln(r_ratio) / (sqrt(2) c_theta (1 - gamma^2)); independent of
    the population size by construction.
    """
    if r_ratio < 1.0:
        raise ValueError("r_ratio must be >= 1")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    return (
        math.sqrt(n)
        * math.log(r_ratio)
        / (math.sqrt(2.0) * c_theta * (1.0 - gamma * gamma))
    )


@dataclass(frozen=True)
class OracleResult:
    """Monte-Carlo estimate with its standard error (arrays when the oracle
    was evaluated at several sigma* at once)."""

    mean: np.ndarray
    stderr: np.ndarray


def one_generation_oracle(
    sigma_star,
    n: int,
    mu: int,
    lam: int,
    trials: int,
    rng: np.random.Generator,
) -> OracleResult:
    """Brute-force one-generation progress rate on the sphere.

    Places the parent at distance R = 1, sets sigma = sigma* R / N, performs
    one full sample-select-recombine step and returns mean and standard error
    of N (R - R') / R over ``trials`` repeats.  ``sigma_star`` may be an
    array; all values are evaluated on shared mutation draws, which speeds up
    sweeps without biasing the per-value estimates.

    This path is kept independent of the generation-step implementation in
    :mod:`csaes.core` so the two can cross-check each other.
    """
    sigma_star = np.atleast_1d(np.asarray(sigma_star, dtype=float))
    if np.any(sigma_star < 0.0):
        raise ValueError("sigma_star must be >= 0")
    sigmas = sigma_star / n
    values = np.empty((sigma_star.size, trials))
    chunk = max(1, min(trials, 8_000_000 // (lam * n)))
    done = 0
    while done < trials:
        m = min(chunk, trials - done)
        z = rng.standard_normal((m, lam, n))
        z_first = z[:, :, 0]
        z_sq = np.einsum("ijk,ijk->ij", z, z)
        for i, sig in enumerate(sigmas):
            # parent at e_1: f = |y + sigma z|^2 = 1 + 2 sigma z_1 + sigma^2 |z|^2
            f = 1.0 + 2.0 * sig * z_first + sig * sig * z_sq
            idx = np.argpartition(f, mu - 1, axis=1)[:, :mu]
            z_rec = np.take_along_axis(z, idx[:, :, None], axis=1).mean(axis=1)
            r_next = np.sqrt(
                1.0
                + 2.0 * sig * z_rec[:, 0]
                + sig * sig * np.einsum("ij,ij->i", z_rec, z_rec)
            )
            values[i, done:done + m] = n * (1.0 - r_next)
        done += m
    mean = values.mean(axis=1)
    stderr = values.std(axis=1, ddof=1) / math.sqrt(trials)
    return OracleResult(mean=mean, stderr=stderr)


def psa_steady_state_prediction(
    beta: float, mu: int, n: int, gamma: float, c_theta: float
) -> tuple[float, float]:
    """Sphere steady state of the two population-signal path norms.

    Returns (|p_m|^2, |p_c|^2) with

        |p_m|^2 = 1 - (2 - 1/gamma^2) / (1 + beta / (sqrt(2/N) c_theta (1-beta)))
        |p_c|^2 = (1/beta - 1/2) (8 c_theta^2 mu / N) (1 - gamma^2)^2

    The second is exactly linear in mu and vanishes as gamma -> 1.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must be in (0, 1)")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    pm_sq = 1.0 - (2.0 - 1.0 / (gamma * gamma)) / (
        1.0 + beta / (math.sqrt(2.0 / n) * c_theta * (1.0 - beta))
    )
    pc_sq = (
        (1.0 / beta - 0.5)
        * (8.0 * c_theta * c_theta * mu / n)
        * (1.0 - gamma * gamma) ** 2
    )
    return pm_sq, pc_sq


class RescaleLaw(str, enum.Enum):
    """Multiplicative sigma correction applied when mu changes."""

    NONE = "none"
    SQRT = "sqrt"
    LINEAR = "linear"


def rescale_factor(mu_old: int, mu_new: int, law: RescaleLaw) -> float:
    """sigma factor for a population change mu_old -> mu_new under a law."""
    if mu_old < 1 or mu_new < 1:
        raise ValueError("population sizes must be >= 1")
    law = RescaleLaw(law)
    if law is RescaleLaw.NONE:
        return 1.0
    ratio = mu_new / mu_old
    return math.sqrt(ratio) if law is RescaleLaw.SQRT else ratio
