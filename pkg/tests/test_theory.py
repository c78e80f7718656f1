import math

import numpy as np
import pytest

from csaes.core import CsaVariant, csa_params, run_generation, EsState
from csaes.testbed import Objective, ObjectiveKind, ObjectiveSpec
from csaes.theory import (
    RescaleLaw,
    SphereParams,
    effective_damping,
    gamma_prediction,
    generation_number,
    one_generation_oracle,
    progress_coefficient,
    progress_coefficient_mc,
    progress_rate_full,
    progress_rate_infinite_n,
    progress_rate_large_pop,
    psa_steady_state_prediction,
    rescale_factor,
    second_zero,
)

C_HALF = progress_coefficient(0.5)


# --- progress coefficient ----------------------------------------------------

def test_c_theta_half_closed_form():
    assert C_HALF == pytest.approx(2.0 / math.sqrt(2.0 * math.pi), rel=1e-14)


def test_c_theta_vanishes_as_theta_to_one():
    assert progress_coefficient(0.999) < 0.005
    assert progress_coefficient(0.5) > progress_coefficient(0.9)


def test_c_theta_rejects_out_of_range():
    for theta in (0.0, 1.0, -0.2, 1.7):
        with pytest.raises(ValueError):
            progress_coefficient(theta)


@pytest.mark.parametrize("theta", [0.5, 0.25])
def test_c_theta_against_order_statistics_oracle(theta):
    # oracle: mean of the mu largest of lambda=10^4 standard normals
    lam = 10_000
    mu = int(lam * theta)
    mc = progress_coefficient_mc(mu, lam, repeats=10_000)
    assert mc == pytest.approx(progress_coefficient(theta), rel=0.01)


def test_c_mulam_mc_is_cached_and_deterministic():
    a = progress_coefficient_mc(10, 20, repeats=2000)
    b = progress_coefficient_mc(10, 20, repeats=2000)
    assert a == b


# --- progress rates ----------------------------------------------------------

def test_progress_rate_full_zero_at_origin():
    p = SphereParams(n=100, mu=100)
    assert progress_rate_full(0.0, p) == 0.0


def test_progress_rate_full_uses_finite_lambda_coefficient_when_given():
    p = SphereParams(n=100, mu=100, c_mulam=0.75)
    q = SphereParams(n=100, mu=100)
    assert progress_rate_full(10.0, p) < progress_rate_full(10.0, q)


def test_progress_rate_large_pop_at_origin():
    p = SphereParams(n=100, mu=500)
    assert progress_rate_large_pop(0.0, p) == pytest.approx(
        math.sqrt(200.0) * C_HALF, rel=1e-12
    )


def test_large_pop_root_matches_approx_zero():
    p = SphereParams(n=100, mu=500)
    root = second_zero(p, "approx")
    assert progress_rate_large_pop(root, p) == pytest.approx(0.0, abs=1e-9)


def test_large_pop_tracks_full_formula_at_large_mu():
    # deviation within 10% of the phi* scale sqrt(2N) c_theta on [0.5 z0, z0]
    p = SphereParams(n=100, mu=3000)
    grid = np.linspace(0.5 * second_zero(p, "approx"), second_zero(p, "approx"), 50)
    gap = np.max(np.abs(progress_rate_large_pop(grid, p) - progress_rate_full(grid, p)))
    assert gap <= 0.1 * math.sqrt(2.0 * p.n) * p.c_theta


def test_infinite_n_parabola_identities():
    mu, c = 10, 0.798
    peak = c * mu
    assert progress_rate_infinite_n(peak, mu, c) == pytest.approx(c * c * mu / 2.0)
    assert progress_rate_infinite_n(2.0 * peak, mu, c) == pytest.approx(0.0, abs=1e-12)
    assert progress_rate_infinite_n(4.0, mu, c) == pytest.approx(3.192 - 0.8, rel=1e-12)


# --- second zero -------------------------------------------------------------

def test_second_zero_approx_value():
    p = SphereParams(n=100, mu=100)
    assert second_zero(p, "approx") == pytest.approx(
        (800.0) ** 0.25 * math.sqrt(C_HALF * 100.0), rel=1e-14
    )
    assert second_zero(p, "approx") == pytest.approx(47.5, abs=0.1)


def test_second_zero_numeric_value():
    assert second_zero(SphereParams(n=100, mu=100), "numeric") == pytest.approx(
        47.899, abs=0.01
    )


def test_second_zero_numeric_is_a_root():
    p = SphereParams(n=100, mu=100)
    z = second_zero(p, "numeric")
    assert abs(progress_rate_full(z, p)) < 1e-6


def test_second_zero_approx_scaling():
    p1 = second_zero(SphereParams(n=100, mu=100), "approx")
    p4 = second_zero(SphereParams(n=100, mu=400), "approx")
    assert p4 / p1 == pytest.approx(2.0, rel=1e-14)
    q16 = second_zero(SphereParams(n=1600, mu=100), "approx")
    assert q16 / p1 == pytest.approx(2.0, rel=1e-14)  # N^(1/4) at 16x N


def test_second_zero_numeric_small_mu():
    # far below the large-population regime the numeric root still exists and
    # sits well under the approximation
    p = SphereParams(n=100, mu=2)
    z = second_zero(p, "numeric")
    assert 0.0 < z < second_zero(p, "approx")
    assert abs(progress_rate_full(z, p)) < 1e-8


def test_second_zero_rejects_unknown_mode():
    with pytest.raises(ValueError):
        second_zero(SphereParams(n=100, mu=100), "exact")


# --- gamma prediction ----------------------------------------------------------

def test_gamma_prediction_matches_direct_evaluation():
    pred = gamma_prediction(0.1, 10.0, 100, 0.798)
    b = 1.0 / (0.1 * 10.0 / 0.9 + math.sqrt(2.0) * 0.798 * 10.0 / 10.0)
    assert pred.b == pytest.approx(b, rel=1e-12)
    assert pred.gamma == pytest.approx(
        math.sqrt(0.5 * (math.sqrt(1.0 + b * b) - b + 1.0)), rel=1e-12
    )
    assert 0.44 < pred.b < 0.45
    assert 0.90 < pred.gamma < 0.91


def test_gamma_prediction_sqrt_n_large_dimension():
    pred = gamma_prediction(1.0 / math.sqrt(1000.0), math.sqrt(1000.0), 1000, C_HALF)
    assert pred.gamma == pytest.approx(0.90, abs=0.01)
    assert pred.in_branch


def test_gamma_prediction_slow_damping_limit():
    pred = gamma_prediction(0.5, 1e7, 100, C_HALF)
    assert pred.b == pytest.approx(0.0, abs=1e-6)
    assert pred.gamma == pytest.approx(1.0, abs=1e-6)
    assert pred.phi_star == pytest.approx(0.0, abs=1e-4)


def test_gamma_prediction_monotone_in_damping():
    gammas = [
        gamma_prediction(1.0 / d, d, 100, C_HALF).gamma for d in (5.0, 10.0, 40.0, 200.0)
    ]
    assert all(a < b for a, b in zip(gammas, gammas[1:]))


def test_gamma_prediction_sigma_star_ss():
    pred = gamma_prediction(0.1, 10.0, 100, C_HALF, mu=100)
    zero = second_zero(SphereParams(n=100, mu=100), "approx")
    assert pred.sigma_star_ss == pytest.approx(pred.gamma * zero, rel=1e-12)
    assert gamma_prediction(0.1, 10.0, 100, C_HALF).sigma_star_ss is None


def test_effective_damping():
    assert effective_damping(0.5, 1.5) == pytest.approx(3.0)
    cfg = csa_params(CsaVariant.HAN, 100, 1000)
    d_eff = effective_damping(cfg.c_sigma, cfg.damping)
    g_term = 2.0 * (math.sqrt(999.0 / 101.0) - 1.0)
    assert d_eff == pytest.approx(1.0 + (1.0 + g_term) / cfg.c_sigma, rel=1e-12)


# --- generation number --------------------------------------------------------

def test_generation_number_examples():
    assert generation_number(100, 0.9, 0.798, 1e6) == pytest.approx(644.3, abs=0.5)
    assert generation_number(100, 0.9, 0.798, 1.0) == 0.0
    g1 = generation_number(100, 0.9, 0.798, 100.0)
    g4 = generation_number(400, 0.9, 0.798, 100.0)
    assert g4 / g1 == pytest.approx(2.0, rel=1e-12)


# --- one-generation oracle ------------------------------------------------------

def test_oracle_zero_sigma_exact():
    rng = np.random.default_rng(0)
    res = one_generation_oracle(0.0, 50, 10, 20, 200, rng)
    assert res.mean[0] == 0.0
    assert res.stderr[0] == 0.0


def test_oracle_no_selection_loses_ground():
    rng = np.random.default_rng(1)
    res = one_generation_oracle(20.0, 50, 100, 100, 2000, rng)  # mu = lambda
    assert res.mean[0] < 0.0


def test_oracle_agrees_with_formula_smoke():
    rng = np.random.default_rng(2)
    p = SphereParams(n=100, mu=300)
    res = one_generation_oracle(30.0, 100, 300, 600, 4000, rng)
    assert abs(res.mean[0] - progress_rate_full(30.0, p)) < 3.0 * res.stderr[0]


def test_oracle_matches_core_generation_step():
    # the normalized one-step progress of the actual ES equals the oracle
    n, mu, lam, sigma_star = 60, 30, 60, 15.0
    rng = np.random.default_rng(3)
    obj = Objective(ObjectiveSpec(ObjectiveKind.SPHERE, n))
    cfg = csa_params(CsaVariant.SQRT_N, n, mu)
    trials = 3000
    vals = np.empty(trials)
    for t in range(trials):
        state = EsState(y=np.r_[1.0, np.zeros(n - 1)], s=np.zeros(n),
                        sigma=sigma_star / n, mu=mu, lam=lam)
        run_generation(state, cfg, obj, rng)
        vals[t] = n * (1.0 - float(np.linalg.norm(state.y)))
    direct = one_generation_oracle(sigma_star, n, mu, lam, trials,
                                   np.random.default_rng(4))
    combined = math.hypot(float(direct.stderr[0]), vals.std(ddof=1) / math.sqrt(trials))
    assert abs(vals.mean() - direct.mean[0]) < 3.5 * combined


# --- PSA steady state and rescaling ----------------------------------------------

def test_psa_prediction_formulas():
    beta, mu, n, gamma = 0.1, 1000, 100, 0.88
    pm, pc = psa_steady_state_prediction(beta, mu, n, gamma, C_HALF)
    expected_pm = 1.0 - (2.0 - 1.0 / gamma**2) / (
        1.0 + beta / (math.sqrt(2.0 / n) * C_HALF * (1.0 - beta))
    )
    expected_pc = (1.0 / beta - 0.5) * (8.0 * C_HALF**2 * mu / n) * (1.0 - gamma**2) ** 2
    assert pm == pytest.approx(expected_pm, rel=1e-12)
    assert pc == pytest.approx(expected_pc, rel=1e-12)


def test_psa_prediction_pc_linear_in_mu():
    _, pc1 = psa_steady_state_prediction(0.1, 250, 100, 0.9, C_HALF)
    _, pc4 = psa_steady_state_prediction(0.1, 1000, 100, 0.9, C_HALF)
    assert pc4 / pc1 == pytest.approx(4.0, rel=1e-12)


def test_psa_prediction_vanishes_in_slow_limit():
    _, pc = psa_steady_state_prediction(0.1, 1000, 100, 0.999999, C_HALF)
    assert pc < 1e-8


def test_rescale_factor_values():
    assert rescale_factor(100, 400, RescaleLaw.SQRT) == pytest.approx(2.0)
    assert rescale_factor(100, 400, RescaleLaw.LINEAR) == pytest.approx(4.0)
    assert rescale_factor(100, 400, RescaleLaw.NONE) == 1.0


@pytest.mark.parametrize("law", list(RescaleLaw))
def test_rescale_factor_composes(law):
    rng = np.random.default_rng(9)
    for _ in range(20):
        m1, m2, m3 = rng.integers(1, 2000, size=3)
        lhs = rescale_factor(m1, m2, law) * rescale_factor(m2, m3, law)
        assert lhs == pytest.approx(rescale_factor(m1, m3, law), rel=1e-12)
