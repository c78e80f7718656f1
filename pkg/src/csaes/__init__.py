"""Multi-recombinative CSA evolution strategy with adaptive population
control, the sphere scaling theory behind it, and an experiment harness."""

__version__ = "0.1.0"

from .core import (
    CsaConfig,
    CsaVariant,
    DivergenceError,
    EsState,
    GenerationOutput,
    SigmaUpdateRule,
    csa_params,
    expected_chi_norm,
    run_generation,
)
from .pcs import ControlMethod, PcsController, Performance
from .testbed import Objective, ObjectiveKind, ObjectiveSpec, Outcome, TerminationSpec
from .theory import (
    RescaleLaw,
    SphereParams,
    gamma_prediction,
    generation_number,
    one_generation_oracle,
    progress_coefficient,
    progress_rate_full,
    psa_steady_state_prediction,
    rescale_factor,
    second_zero,
)

__all__ = [
    "__version__",
    "CsaConfig",
    "CsaVariant",
    "DivergenceError",
    "EsState",
    "GenerationOutput",
    "SigmaUpdateRule",
    "csa_params",
    "expected_chi_norm",
    "run_generation",
    "ControlMethod",
    "PcsController",
    "Performance",
    "Objective",
    "ObjectiveKind",
    "ObjectiveSpec",
    "Outcome",
    "TerminationSpec",
    "RescaleLaw",
    "SphereParams",
    "gamma_prediction",
    "generation_number",
    "one_generation_oracle",
    "progress_coefficient",
    "progress_rate_full",
    "psa_steady_state_prediction",
    "rescale_factor",
    "second_zero",
]
