"""Generation step of the multi-recombinative (mu/mu_I, lambda) evolution
strategy with cumulative step-size adaptation.

One generation consists of sampling ``lambda`` isotropic Gaussian offspring,
rank-based truncation selection of the ``mu`` best, intermediate (equal-weight)
recombination into the new parent, an update of the cumulation path, and a
multiplicative update of the mutation strength ``sigma`` driven by the path
length relative to its random-selection expectation.

Two sigma-update rules are supported:

* ``DAMPING``:   sigma' = sigma * exp((|s|/E_chi - 1) / D)
* ``CS_OVER_DS``: sigma' = sigma * exp((c_sigma/d_sigma) * (|s|/E_chi - 1))

and three standard parametrizations (:class:`CsaVariant`): cumulation constant
1/sqrt(N) with damping sqrt(N), cumulation constant 1/N with damping N (both
using ``DAMPING``), and the population-dependent pair used by default CMA-ES
implementations (using ``CS_OVER_DS``).

Objectives are duck-typed: anything with ``batch(points, rng) -> array`` and
``__call__(point, rng) -> float`` works (see :mod:`csaes.testbed`).  All
randomness flows through an explicit ``numpy.random.Generator`` so that runs
are reproducible; a single state is owned by one trial and mutated
sequentially.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "CsaVariant",
    "SigmaUpdateRule",
    "CsaConfig",
    "EsState",
    "OffspringSet",
    "Selection",
    "GenerationOutput",
    "DivergenceError",
    "expected_chi_norm",
    "csa_params",
    "offspring_count",
    "sample_and_select",
    "update_path",
    "update_sigma",
    "run_generation",
]

# Guard rails: a trial whose sigma leaves this range (or whose state turns
# non-finite) is aborted and reported as diverged rather than crashing.
SIGMA_MIN = 1e-300
SIGMA_MAX = 1e300


class DivergenceError(RuntimeError):
    """Raised when a trial blows up (non-finite state or sigma out of range)."""


class CsaVariant(str, enum.Enum):
    """Cumulation/damping parametrization of the sigma-adaptation."""

    SQRT_N = "sqrtN"  # c_sigma = 1/sqrt(N), D = sqrt(N)
    LIN_N = "linN"    # c_sigma = 1/N,       D = N
    HAN = "han"       # c_sigma = (mu+2)/(N+mu+5), d_sigma per default CMA-ES


class SigmaUpdateRule(enum.Enum):
    DAMPING = "damping"        # exponent (|s|/E_chi - 1) / D
    CS_OVER_DS = "cs_over_ds"  # exponent (c_sigma/d_sigma) (|s|/E_chi - 1)


@dataclass(frozen=True)
class CsaConfig:
    """Derived sigma-adaptation constants for a given variant, N and mu.

    ``damping`` is the factor appearing in the active update rule: D for
    ``DAMPING`` and d_sigma for ``CS_OVER_DS``.  ``e_chi`` caches the expected
    norm of an N-dimensional standard normal vector.  Must be regenerated via
    :func:`csa_params` whenever mu changes (only the HAN variant actually
    depends on mu).
    """

    variant: CsaVariant
    update_rule: SigmaUpdateRule
    c_sigma: float
    damping: float
    e_chi: float

    def __post_init__(self):
        if not 0.0 < self.c_sigma <= 1.0:
            raise ValueError("c_sigma must be in (0, 1]")
        if self.damping <= 0.0:
            raise ValueError("damping must be positive")
        if self.e_chi <= 0.0:
            raise ValueError("e_chi must be positive")
        expected = (
            SigmaUpdateRule.CS_OVER_DS
            if self.variant is CsaVariant.HAN
            else SigmaUpdateRule.DAMPING
        )
        if self.update_rule is not expected:
            raise ValueError(
                f"variant {self.variant.value} requires update rule {expected}"
            )


@dataclass
class EsState:
    """Full strategy state: parent, cumulation path, sigma, population sizes.

    Invariants: sigma > 0 and finite, all components of y and s finite,
    lam = round(mu / truncation ratio) as maintained by the callers.
    """

    y: np.ndarray
    s: np.ndarray
    sigma: float
    mu: int
    lam: int
    g: int = 0

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        if self.y.shape != self.s.shape or self.y.ndim != 1:
            raise ValueError("y and s must be 1-d arrays of equal length")
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError("sigma must be positive and finite")
        if self.mu < 1 or self.lam < self.mu:
            raise ValueError("need 1 <= mu <= lam")

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class OffspringSet:
    """One generation's offspring: mutation directions, candidates, fitness,
    and the stable ascending fitness order (ties keep original index)."""

    z: np.ndarray        # (lam, N) standard-normal mutation directions
    y_tilde: np.ndarray  # (lam, N) candidate points
    f_tilde: np.ndarray  # (lam,) fitness values
    order: np.ndarray    # (lam,) permutation, f_tilde[order] ascending


@dataclass(frozen=True)
class Selection:
    """Recombination result of the mu best offspring."""

    y_next: np.ndarray
    z_rec: np.ndarray
    f_med: float  # median of the mu selected fitness values


@dataclass(frozen=True)
class GenerationOutput:
    """Per-generation observables consumed by the population controllers."""

    z_rec: np.ndarray
    f_rec: float       # fitness of the new parent
    f_med: float       # median of the selected offspring fitness
    sigma_ratio: float  # sigma after / sigma before the CSA update


def expected_chi_norm(n: int) -> float:
    """Expected norm of an N-dimensional standard normal vector.

    Uses the customary three-term approximation
    sqrt(N) * (1 - 1/(4N) + 1/(21N^2)) for all N.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))


def csa_params(variant: CsaVariant, n: int, mu: int) -> CsaConfig:
    """Derive (c_sigma, damping, update rule) for a variant at given N and mu.

    Re-invoke whenever mu changes; only the HAN variant depends on it.
    """
    variant = CsaVariant(variant)
    if n < 1 or mu < 1:
        raise ValueError("n and mu must be >= 1")
    e_chi = expected_chi_norm(n)
    if variant is CsaVariant.SQRT_N:
        c_sigma = 1.0 / math.sqrt(n)
        return CsaConfig(variant, SigmaUpdateRule.DAMPING, c_sigma, 1.0 / c_sigma, e_chi)
    if variant is CsaVariant.LIN_N:
        c_sigma = 1.0 / n
        return CsaConfig(variant, SigmaUpdateRule.DAMPING, c_sigma, 1.0 / c_sigma, e_chi)
    c_sigma = (mu + 2.0) / (n + mu + 5.0)
    d_sigma = 1.0 + c_sigma + 2.0 * max(0.0, math.sqrt((mu - 1.0) / (n + 1.0)) - 1.0)
    return CsaConfig(variant, SigmaUpdateRule.CS_OVER_DS, c_sigma, d_sigma, e_chi)


def offspring_count(mu: int, theta: float) -> int:
    """lambda = round(mu / theta) for truncation ratio theta."""
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must be in (0, 1)")
    return int(round(mu / theta))


def sample_and_select(
    state: EsState, objective, rng: np.random.Generator
) -> tuple[OffspringSet, Selection]:
    """Sample lambda offspring, select the mu best by fitness, recombine.

    Selection is purely rank-based with a stable sort (ties broken by the
    original offspring index), so any strictly increasing transform of the
    fitness leaves the outcome unchanged.

    Raises:
        DivergenceError: if any fitness value is non-finite, which signals an
            objective or sigma blow-up; the trial should be reported as
            diverged.
    """
    z = rng.standard_normal((state.lam, state.n))
    y_tilde = state.y + state.sigma * z
    f_tilde = np.asarray(objective.batch(y_tilde, rng), dtype=float)
    if not np.all(np.isfinite(f_tilde)):
        raise DivergenceError(
            f"non-finite fitness at generation {state.g} (sigma={state.sigma:.3e})"
        )
    order = np.argsort(f_tilde, kind="stable")
    selected = order[: state.mu]
    y_next = y_tilde[selected].mean(axis=0)
    z_rec = z[selected].mean(axis=0)
    f_med = float(np.median(f_tilde[selected]))
    return (
        OffspringSet(z=z, y_tilde=y_tilde, f_tilde=f_tilde, order=order),
        Selection(y_next=y_next, z_rec=z_rec, f_med=f_med),
    )


def update_path(s: np.ndarray, z_rec: np.ndarray, c_sigma: float, mu: int) -> np.ndarray:
    """Cumulation path update s' = (1-c)s + sqrt(mu c (2-c)) z_rec.

    ``mu`` is the population size in effect for the generation that produced
    ``z_rec``.
    """
    return (1.0 - c_sigma) * s + math.sqrt(mu * c_sigma * (2.0 - c_sigma)) * z_rec


def update_sigma(sigma: float, s_new: np.ndarray, cfg: CsaConfig) -> float:
    """Multiplicative sigma update from the new path length.

    Raises:
        DivergenceError: if the exponential overflows or the result leaves
            the representable range.
    """
    deviation = float(np.linalg.norm(s_new)) / cfg.e_chi - 1.0
    if cfg.update_rule is SigmaUpdateRule.DAMPING:
        exponent = deviation / cfg.damping
    else:
        exponent = cfg.c_sigma / cfg.damping * deviation
    try:
        new_sigma = sigma * math.exp(exponent)
    except OverflowError:
        raise DivergenceError(f"sigma update overflow (exponent {exponent:.3e})") from None
    if not (np.isfinite(new_sigma) and new_sigma > 0.0):
        raise DivergenceError(f"sigma update overflow (exponent {exponent:.3e})")
    return new_sigma


def run_generation(
    state: EsState, cfg: CsaConfig, objective, rng: np.random.Generator
) -> GenerationOutput:
    """Advance ``state`` by one full generation in place.

    Evaluates lambda offspring plus the recombinant (lambda + 1 objective
    calls), updates the cumulation path with the current mu, applies the
    configured sigma rule, and increments the generation counter.

    Raises:
        DivergenceError: via the guard rails (non-finite state, sigma outside
            [1e-300, 1e300]) or from the component operations.
    """
    _, sel = sample_and_select(state, objective, rng)
    s_new = update_path(state.s, sel.z_rec, cfg.c_sigma, state.mu)
    sigma_new = update_sigma(state.sigma, s_new, cfg)
    f_rec = float(objective(sel.y_next, rng))
    sigma_ratio = sigma_new / state.sigma

    state.y = sel.y_next
    state.s = s_new
    state.sigma = sigma_new
    state.g += 1

    if not (np.all(np.isfinite(state.y)) and np.all(np.isfinite(state.s))):
        raise DivergenceError(f"non-finite state at generation {state.g}")
    if not SIGMA_MIN <= state.sigma <= SIGMA_MAX:
        raise DivergenceError(f"sigma={state.sigma:.3e} out of guard range")

    return GenerationOutput(
        z_rec=sel.z_rec, f_rec=f_rec, f_med=sel.f_med, sigma_ratio=sigma_ratio
    )
