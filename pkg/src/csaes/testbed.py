"""Test functions, run initialization conventions, and termination logic.

Three objectives are provided: the sphere sum(y_i^2), a pure-noise function
returning a fresh standard normal per evaluation (independent of y), and the
Rastrigin function sum(y_i^2 + A (1 - cos(alpha y_i))).  Every evaluation,
single or batched, is counted so that runtime comparisons in function
evaluations are exact.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import EsState, offspring_count
from .theory import SphereParams, second_zero

__all__ = [
    "ObjectiveKind",
    "ObjectiveSpec",
    "Objective",
    "TerminationSpec",
    "Outcome",
    "init_run",
    "classify_termination",
]


class ObjectiveKind(str, enum.Enum):
    SPHERE = "sphere"
    RANDOM = "random"
    RASTRIGIN = "rastrigin"


@dataclass(frozen=True)
class ObjectiveSpec:
    """Objective selector; amplitude A and frequency alpha apply to Rastrigin."""

    kind: ObjectiveKind
    n: int
    a: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ObjectiveKind(self.kind))
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.kind is ObjectiveKind.RASTRIGIN:
            if self.a is None or self.a <= 0.0:
                raise ValueError("Rastrigin needs amplitude a > 0")
            if self.alpha is None or self.alpha <= 0.0:
                raise ValueError("Rastrigin needs frequency alpha > 0")


class Objective:
    """Evaluable objective with an evaluation counter.

    ``batch`` evaluates a (k, N) array of points and increments the counter
    by k; ``__call__`` evaluates a single point.  The random objective draws
    from the supplied generator, so evaluation order matters for
    reproducibility.
    """

    def __init__(self, spec: ObjectiveSpec):
        self.spec = spec
        self.evaluations = 0

    def batch(self, points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        self.evaluations += points.shape[0]
        if self.spec.kind is ObjectiveKind.SPHERE:
            return np.einsum("ij,ij->i", points, points)
        if self.spec.kind is ObjectiveKind.RANDOM:
            return rng.standard_normal(points.shape[0])
        return (
            np.einsum("ij,ij->i", points, points)
            + self.spec.a * (1.0 - np.cos(self.spec.alpha * points)).sum(axis=1)
        )

    def __call__(self, point: np.ndarray, rng: np.random.Generator) -> float:
        point = np.asarray(point, dtype=float)
        self.evaluations += 1
        if self.spec.kind is ObjectiveKind.SPHERE:
            return float(point @ point)
        if self.spec.kind is ObjectiveKind.RANDOM:
            return float(rng.standard_normal())
        return float(
            point @ point + self.spec.a * (1.0 - np.cos(self.spec.alpha * point)).sum()
        )


@dataclass(frozen=True)
class TerminationSpec:
    """Stop conditions: target fitness, sigma floor, and budgets."""

    f_stop: float = 1e-3
    sigma_stop: float = 1e-3
    g_max: int = 100_000
    eval_max: int = 100_000_000

    def __post_init__(self):
        if min(self.f_stop, self.sigma_stop) <= 0 or min(self.g_max, self.eval_max) <= 0:
            raise ValueError("all termination bounds must be positive")


class Outcome(str, enum.Enum):
    SUCCESS = "success"            # f below f_stop
    LOCAL = "local_convergence"    # sigma collapsed with f still above f_stop
    BUDGET = "budget"              # generation or evaluation budget exhausted
    DIVERGED = "diverged"          # guard rails tripped
    RUNNING = "running"


def init_run(
    spec: ObjectiveSpec,
    mu0: int,
    theta: float,
    r0: float = 1.0,
) -> EsState:
    """Initial strategy state for an objective.

    Sphere: parent at distance ``r0`` along the first axis, sigma at the
    approximate progress-rate zero (sigma = sigma*_0 r0 / N), path at
    all-ones.  Rastrigin: parent at 2 ceil(alpha A / 2) in every coordinate
    (outside the local attraction region), same sigma rule on |y0|.  Random:
    parent at the origin with sigma = 1 (any finite choice works since
    selection is random).
    """
    n = spec.n
    lam = offspring_count(mu0, theta)
    s0 = np.ones(n)
    if spec.kind is ObjectiveKind.RANDOM:
        return EsState(y=np.zeros(n), s=s0, sigma=1.0, mu=mu0, lam=lam)
    sigma_star0 = second_zero(SphereParams(n=n, mu=mu0, theta=theta), mode="approx")
    if spec.kind is ObjectiveKind.SPHERE:
        y0 = np.zeros(n)
        y0[0] = r0
    else:
        y0 = 2.0 * math.ceil(spec.alpha * spec.a / 2.0) * np.ones(n)
    sigma0 = sigma_star0 * float(np.linalg.norm(y0)) / n
    return EsState(y=y0, s=s0, sigma=sigma0, mu=mu0, lam=lam)


def classify_termination(
    state: EsState,
    f_value: float,
    evaluations: int,
    term: TerminationSpec,
    diverged: bool = False,
) -> Outcome:
    """Classify the run given the latest recombinant fitness.

    Precedence: success, local convergence, budget, diverged, running.
    """
    if f_value < term.f_stop:
        return Outcome.SUCCESS
    if state.sigma < term.sigma_stop and f_value >= term.f_stop:
        return Outcome.LOCAL
    if state.g >= term.g_max or evaluations >= term.eval_max:
        return Outcome.BUDGET
    if diverged:
        return Outcome.DIVERGED
    return Outcome.RUNNING
