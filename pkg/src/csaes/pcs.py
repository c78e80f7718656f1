"""Adaptive population control: three performance measures plus the shared
change machinery (growth factor, bounds, waiting time, sigma rescaling).

Each controller turns per-generation observables into a three-valued verdict:

* APOP counts median-fitness deteriorations in a sliding window of length L
  and compares the deterioration ratio P_f against a threshold (default 1/5).
* The trend test (pccsa) fits a least-squares line to the last L recombinant
  fitness values and runs a one-sided t-test on the slope; a p-value below
  the significance level (default 0.05) certifies progress.
* PSA accumulates the normalized mean shift and the relative sigma change in
  two cumulation paths and compares the combined squared norm against a
  threshold (default 1.4); small norms indicate selection indistinguishable
  from random.

A verdict of BAD grows mu by ceil(alpha_mu * mu), GOOD shrinks it by
floor(mu / alpha_mu); changes are clamped to [mu_min, mu_max], separated by a
waiting time of delta_g generations, and accompanied by a sigma rescaling.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.special import stdtr

from .core import CsaConfig, EsState, GenerationOutput, csa_params, offspring_count
from .theory import RescaleLaw, rescale_factor

__all__ = [
    "Performance",
    "ControlMethod",
    "ApopState",
    "PcCsaState",
    "PsaState",
    "PcsController",
    "apop_performance",
    "student_t_cdf",
    "slope_p_value",
    "pccsa_performance",
    "psa_update",
    "psa_performance",
    "apply_population_change",
]

THETA_F = 0.2    # APOP deterioration-ratio threshold
THETA_H = 0.05   # trend-test significance level
THETA_THETA = 1.4  # PSA combined-norm threshold


class Performance(enum.IntEnum):
    """Three-valued verdict; BAD triggers growth, GOOD triggers shrinking."""

    BAD = -1
    NEUTRAL = 0
    GOOD = 1


class ControlMethod(str, enum.Enum):
    NONE = "none"
    APOP = "apop"
    PCCSA = "pccsa"
    PSA = "psa"


@dataclass
class ApopState:
    """Sliding window of selected-fitness medians."""

    length: int
    threshold: float = THETA_F
    history: deque = field(init=False)

    def __post_init__(self):
        if self.length < 2:
            raise ValueError("window length must be >= 2")
        self.history = deque(maxlen=self.length)

    def push(self, f_med: float) -> None:
        self.history.append(f_med)


@dataclass
class PcCsaState:
    """Sliding window of recombinant fitness values for the trend test."""

    length: int
    threshold: float = THETA_H
    history: deque = field(init=False)

    def __post_init__(self):
        if self.length < 3:
            raise ValueError("trend test needs a window of at least 3 values")
        self.history = deque(maxlen=self.length)

    def push(self, f_rec: float) -> None:
        self.history.append(f_rec)


@dataclass
class PsaState:
    """Cumulation paths for the mean shift (p_m) and sigma change (p_c)."""

    n: int
    beta: float
    threshold: float = THETA_THETA
    p_m: np.ndarray = field(init=False)
    p_c: np.ndarray = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must be in (0, 1]")
        self.p_m = np.zeros(self.n)
        self.p_c = np.zeros(self.n)

    @property
    def combined_sq(self) -> float:
        return float(self.p_m @ self.p_m + self.p_c @ self.p_c)


def apop_performance(state: ApopState) -> Performance:
    """Deterioration-count verdict over a full window of medians.

    P_f is the fraction of positive consecutive differences among the L - 1
    available ones.  Returns NEUTRAL while the window is not yet full.
    """
    if len(state.history) < state.length:
        return Performance.NEUTRAL
    diffs = np.diff(np.asarray(state.history, dtype=float))
    p_f = float((diffs > 0).sum()) / (state.length - 1)
    if p_f < state.threshold:
        return Performance.GOOD
    if p_f > state.threshold:
        return Performance.BAD
    return Performance.NEUTRAL


def student_t_cdf(t: float, nu: int) -> float:
    """CDF of Student's t with nu degrees of freedom (regularized incomplete
    beta under the hood)."""
    if nu < 1:
        raise ValueError("nu must be >= 1")
    return float(stdtr(nu, t))


def slope_p_value(values: np.ndarray) -> float:
    """One-sided p-value P(T <= t) for the least-squares slope of ``values``
    against consecutive indices, with t = slope / stderr on L - 2 degrees of
    freedom.

    With zero residual variance the statistic degenerates; the limit is taken
    as p = 0 for a negative slope, 1 for a positive one, and 1/2 for a flat
    line.
    """
    values = np.asarray(values, dtype=float)
    length = values.size
    x = np.arange(length, dtype=float)
    xc = x - x.mean()
    fc = values - values.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ fc) / sxx
    residuals = fc - slope * xc
    ss_res = float(residuals @ residuals)
    if ss_res <= 0.0:
        return 0.0 if slope < 0.0 else (1.0 if slope > 0.0 else 0.5)
    stderr = math.sqrt(ss_res / ((length - 2) * sxx))
    return student_t_cdf(slope / stderr, length - 2)


def pccsa_performance(state: PcCsaState) -> Performance:
    """Trend-test verdict over a full window of recombinant fitness values."""
    if len(state.history) < state.length:
        return Performance.NEUTRAL
    p_h = slope_p_value(np.asarray(state.history, dtype=float))
    if p_h < state.threshold:
        return Performance.GOOD
    if p_h > state.threshold:
        return Performance.BAD
    return Performance.NEUTRAL


def psa_update(
    state: PsaState,
    z_rec: np.ndarray,
    sigma_ratio: float,
    mu: int,
    n: int,
) -> PsaState:
    """Advance both PSA paths by one generation (in place).

    ``mu`` is the population size that produced ``z_rec`` and
    ``sigma_ratio``; the normalization uses the expected update magnitude
    N / mu of the mean shift under random selection.
    """
    if sigma_ratio <= 0.0:
        raise ValueError("sigma_ratio must be positive")
    beta = state.beta
    coef = math.sqrt(beta * (2.0 - beta) * mu / n)
    state.p_m = (1.0 - beta) * state.p_m + coef * z_rec
    # the sigma-change increment is the constant vector (coef * delta_c) * 1
    delta_c = (sigma_ratio * sigma_ratio - 1.0) / math.sqrt(2.0)
    state.p_c = (1.0 - beta) * state.p_c + coef * delta_c
    return state


def psa_performance(state: PsaState) -> Performance:
    """Three-way comparison of |p_m|^2 + |p_c|^2 against the threshold."""
    combined = state.combined_sq
    if combined < state.threshold:
        return Performance.BAD
    if combined > state.threshold:
        return Performance.GOOD
    return Performance.NEUTRAL


@dataclass
class PcsController:
    """Method dispatch plus the shared mu-change machinery.

    The waiting counter starts at ``delta_g`` so the first change can happen
    no earlier than generation delta_g; it is reset on every applied change.
    Histories keep accumulating during waits (only the action is gated) and
    are never cleared on mu changes.
    """

    method: ControlMethod
    n: int
    mu_min: int
    mu_max: int
    alpha_mu: float
    delta_g: int
    rescale_law: RescaleLaw
    theta: float
    window: int = 10       # L for the fitness-window methods
    beta: float = 0.1      # path constant for PSA
    theta_f: float = THETA_F
    theta_h: float = THETA_H
    theta_theta: float = THETA_THETA
    w: int = field(init=False)
    apop: ApopState | None = field(init=False, default=None)
    pccsa: PcCsaState | None = field(init=False, default=None)
    psa: PsaState | None = field(init=False, default=None)

    def __post_init__(self):
        self.method = ControlMethod(self.method)
        self.rescale_law = RescaleLaw(self.rescale_law)
        if self.method is not ControlMethod.NONE:
            if self.alpha_mu <= 1.0:
                raise ValueError("alpha_mu must exceed 1")
            if not 1 <= self.mu_min <= self.mu_max:
                raise ValueError("need 1 <= mu_min <= mu_max")
            if self.delta_g < 0:
                raise ValueError("delta_g must be >= 0")
        self.w = self.delta_g
        if self.method is ControlMethod.APOP:
            self.apop = ApopState(self.window, self.theta_f)
        elif self.method is ControlMethod.PCCSA:
            self.pccsa = PcCsaState(self.window, self.theta_h)
        elif self.method is ControlMethod.PSA:
            self.psa = PsaState(self.n, self.beta, self.theta_theta)

    def observe(self, output: GenerationOutput, state: EsState) -> Performance:
        """Record this generation's observables and return the verdict.

        Runs every generation, waits included.  ``state.mu`` must still be
        the population size that produced ``output``.
        """
        if self.method is ControlMethod.APOP:
            self.apop.push(output.f_med)
            return apop_performance(self.apop)
        if self.method is ControlMethod.PCCSA:
            self.pccsa.push(output.f_rec)
            return pccsa_performance(self.pccsa)
        if self.method is ControlMethod.PSA:
            psa_update(self.psa, output.z_rec, output.sigma_ratio, state.mu, self.n)
            return psa_performance(self.psa)
        return Performance.NEUTRAL

    @property
    def signal(self) -> float:
        """Current raw measure (P_f, P_H, or |p_theta|^2); NaN while a
        fitness window is not yet full."""
        if self.method is ControlMethod.APOP:
            if len(self.apop.history) < self.apop.length:
                return math.nan
            diffs = np.diff(np.asarray(self.apop.history, dtype=float))
            return float((diffs > 0).sum()) / (self.apop.length - 1)
        if self.method is ControlMethod.PCCSA:
            if len(self.pccsa.history) < self.pccsa.length:
                return math.nan
            return slope_p_value(np.asarray(self.pccsa.history, dtype=float))
        if self.method is ControlMethod.PSA:
            return self.psa.combined_sq
        return math.nan


def apply_population_change(
    ctrl: PcsController,
    per: Performance,
    state: EsState,
    cfg: CsaConfig,
) -> tuple[CsaConfig, bool]:
    """Apply the mu-schedule step for this generation's verdict.

    While the waiting counter is positive it is decremented and nothing else
    happens.  Otherwise mu grows or shrinks by the alpha_mu factor; if the
    proposed mu differs from the current one it is clamped to the bounds, the
    wait restarts, sigma is rescaled (on the clamped pair, so a change
    swallowed by the clamp rescales by 1), lambda is recomputed, and the CSA
    constants are rederived for the new mu.  The returned flag reports
    whether the pre-clamp proposal differed.

    With method NONE this is a no-op, so the system reduces exactly to the
    plain fixed-population strategy.
    """
    if ctrl.method is ControlMethod.NONE:
        return cfg, False
    if ctrl.w > 0:
        ctrl.w -= 1
        return cfg, False
    if per < 0:
        mu_new = math.ceil(ctrl.alpha_mu * state.mu)
    elif per > 0:
        mu_new = math.floor(state.mu / ctrl.alpha_mu)
    else:
        mu_new = state.mu
    if mu_new == state.mu:
        return cfg, False
    mu_new = min(max(mu_new, ctrl.mu_min), ctrl.mu_max)
    ctrl.w = ctrl.delta_g
    state.sigma *= rescale_factor(state.mu, mu_new, ctrl.rescale_law)
    state.mu = mu_new
    state.lam = offspring_count(mu_new, ctrl.theta)
    return csa_params(cfg.variant, state.n, mu_new), True
