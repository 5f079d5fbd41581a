import math

import numpy as np
import pytest
import scipy.linalg

from bdphase import kinetics
from bdphase.errors import (
    DegenerateStateError,
    DomainError,
    RateOverflowError,
    StepFailureError,
)
from bdphase.kinetics import RateModel

EPS = np.finfo(float).eps


def make_rm(n=4, e1=1.0, e2=1.0, e_act=0.0, b1=1.0, b2=1.0, kb_theta=1.0, fixed_k=None):
    return RateModel(
        e1=np.full(n, float(e1)),
        e2=np.full(n, float(e2)),
        e_act=(e_act if callable(e_act) else (lambda chi, _v=float(e_act): np.full_like(np.asarray(chi, dtype=float), _v))),
        b1=b1,
        b2=b2,
        kb_theta=kb_theta,
        fixed_k=fixed_k,
    )


def random_state(rng, n, cells=()):
    z = rng.uniform(0.05, 2.0, size=cells + (n,))
    return z


# ---------------------------------------------------------------- b_mix


def test_b_mix_endpoints_and_midpoint():
    rm = make_rm(b1=1.0, b2=0.75)
    assert kinetics.b_mix(1.0, rm) == 1.0
    assert kinetics.b_mix(0.0, rm) == 0.75
    # midpoint of the two lattice factors
    assert kinetics.b_mix(0.5, rm) == pytest.approx(0.875, abs=0.0)


def test_b_mix_domain_and_floor():
    rm = make_rm(b1=0.6, b2=0.9)
    with pytest.raises(DomainError):
        kinetics.b_mix(-0.1, rm)
    with pytest.raises(DomainError):
        kinetics.b_mix(1.2, rm)
    chi = np.linspace(0.0, 1.0, 101)
    b = kinetics.b_mix(chi, rm)
    assert np.all(b >= 0.6)
    assert np.all(b <= 0.9)


# ------------------------------------------------------- arrhenius_rate


def test_arrhenius_direct_substitution():
    rm = make_rm(n=3, e1=2.0, e2=5.0, e_act=1.0)
    assert kinetics.arrhenius_rate(1, 1.0, rm) == pytest.approx(math.e, rel=1e-15)


def test_arrhenius_zero_exponent():
    rm = make_rm(n=3, e1=7.0, e2=1.0, e_act=1.0)
    assert kinetics.arrhenius_rate(2, 0.0, rm) == 1.0


def test_arrhenius_symmetric_cancellation():
    rm = make_rm(n=3, e1=2.0, e2=1.0, e_act=1.5)
    assert kinetics.arrhenius_rate(1, 0.5, rm) == pytest.approx(1.0, rel=1e-15)


def test_arrhenius_overflow_names_alpha():
    rm = make_rm(n=3, e1=800.0, e2=800.0, e_act=0.0)
    with pytest.raises(RateOverflowError) as exc:
        kinetics.arrhenius_rate(2, 1.0, rm)
    assert exc.value.alpha == 2


def test_evaporation_coeff_overflow_through_b():
    # exponent fits at b=1 but overflows once divided by a small b_chi
    rm = make_rm(n=2, e1=500.0, e2=500.0, e_act=0.0, b1=0.5, b2=0.5)
    with pytest.raises(RateOverflowError):
        kinetics.evaporation_coeff(0.5, rm)


# ---------------------------------------------------- self-consistent K


def test_self_consistent_k_direct():
    rm = make_rm(n=2, e1=0.0, e2=0.0, e_act=0.0)
    z = np.array([1.0, 1.0])
    assert kinetics.self_consistent_k(z, 0.5, rm) == pytest.approx(0.5, abs=0.0)


def test_self_consistent_k_all_monomers():
    rm = make_rm(n=3, e1=0.0, e2=0.0, e_act=0.0)
    z = np.array([7.5, 0.0, 0.0])
    assert kinetics.self_consistent_k(z, 0.3, rm) == pytest.approx(1.0, abs=0.0)


def test_self_consistent_k_hand_value():
    # z=(2,1), b=1, R1=e (E=2, E_A=1), kb_theta=1 -> K = (2 e / 3) * e
    rm = make_rm(n=2, e1=2.0, e2=2.0, e_act=1.0)
    z = np.array([2.0, 1.0])
    expected = 2.0 * math.e**2 / 3.0
    assert kinetics.self_consistent_k(z, 1.0, rm) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(4.926, rel=1e-3)


def test_self_consistent_k_degenerate():
    rm = make_rm(n=2)
    with pytest.raises(DegenerateStateError):
        kinetics.self_consistent_k(np.zeros(2), 0.5, rm)
    with pytest.raises(DegenerateStateError):
        kinetics.self_consistent_k(np.array([0.0, 1.0]), 0.5, rm)


def test_self_consistent_k_satisfies_monomer_constraint():
    # (1/K) z1 R1^(1/b) / N == exp(-E_A/(b kb_theta)) after solving for K
    rng = np.random.default_rng(7)
    rm = make_rm(n=5, e1=1.3, e2=0.8, e_act=0.4, b1=0.9, b2=0.6)
    z = random_state(rng, 5)
    chi = 0.37
    k = kinetics.self_consistent_k(z, chi, rm)
    b = kinetics.b_mix(chi, rm)
    r1 = kinetics.arrhenius_rate(1, chi, rm)
    lhs = (1.0 / k) * z[0] * r1 ** (1.0 / b) / kinetics.count_n(z)
    rhs_val = math.exp(-0.4 / b / rm.kb_theta)
    assert lhs == pytest.approx(rhs_val, rel=1e-13)


# --------------------------------------------------------------- fluxes


def test_fluxes_hand_evaluated_n2():
    rm = make_rm(n=2, e1=1.0, e2=1.0, e_act=1.0, fixed_k=2.0)
    z = np.array([1.0, 1.0])
    j = kinetics.fluxes(z, 1.0, 2.0, rm)
    assert j == pytest.approx(np.array([-1.0, 1.0, 0.0]), abs=0.0)


def test_fluxes_zero_state():
    rm = make_rm(n=6)
    j = kinetics.fluxes(np.zeros(6), 0.5, 1.7, rm)
    assert np.all(j == 0.0)


def test_fluxes_closure_and_monomer_bookkeeping():
    rng = np.random.default_rng(42)
    rm = make_rm(n=9, e1=0.9, e2=1.4, e_act=0.7, b1=1.0, b2=0.8)
    for _ in range(25):
        z = random_state(rng, 9, cells=(4,))
        chi = rng.uniform(0.0, 1.0, size=4)
        k = rng.uniform(0.2, 3.0, size=4)
        j = kinetics.fluxes(z, chi, k, rm)
        assert np.all(j[..., -1] == 0.0)
        # j0 was defined as the negated sum, so the identity is exact
        assert np.all(j[..., 0] + np.sum(j[..., 1:], axis=-1) == 0.0)


def test_fluxes_detailed_balance_state():
    # build z so that K R_a^(1/b) z_a == R_{a+1}^(1/b) z_{a+1} for all a
    rm = make_rm(n=8, e1=1.1, e2=0.4, e_act=0.2, b1=0.9, b2=0.7)
    chi = 0.42
    k = 0.8
    ge = kinetics.evaporation_coeff(chi, rm)
    z = np.empty(8)
    z[0] = 1.3
    for a in range(7):
        z[a + 1] = k * ge[a] * z[a] / ge[a + 1]
    j = kinetics.fluxes(z, chi, k, rm)
    assert np.max(np.abs(j)) <= 1e-13 * np.max(k * ge * z)


# ------------------------------------------------------------------ rhs


def test_rhs_hand_evaluated_n2():
    rm = make_rm(n=2, e1=1.0, e2=1.0, e_act=1.0, fixed_k=2.0)
    dz = kinetics.rhs(np.array([1.0, 1.0]), 1.0, rm)
    assert dz == pytest.approx(np.array([-2.0, 1.0]), abs=0.0)
    assert 1.0 * dz[0] + 2.0 * dz[1] == 0.0


def test_rhs_zero_state():
    rm = make_rm(n=5)
    assert np.all(kinetics.rhs(np.zeros(5), 0.2, rm) == 0.0)
    rm_sc = make_rm(n=5, fixed_k=None)
    assert np.all(kinetics.rhs(np.zeros(5), 0.2, rm_sc) == 0.0)


def test_rhs_mass_conservation_random():
    rng = np.random.default_rng(2024)
    for trial in range(40):
        n = int(rng.integers(2, 40))
        rm = make_rm(
            n=n,
            e1=rng.uniform(0.2, 2.0),
            e2=rng.uniform(0.2, 2.0),
            e_act=rng.uniform(0.0, 1.0),
            b1=rng.uniform(0.3, 1.0),
            b2=rng.uniform(0.3, 1.0),
            fixed_k=rng.uniform(0.1, 4.0) if trial % 2 else None,
        )
        z = random_state(rng, n)
        dz = kinetics.rhs(z, rng.uniform(0, 1), rm)
        alphas = np.arange(1, n + 1)
        lhs = abs(np.sum(alphas * dz))
        assert lhs <= n * EPS * np.sum(alphas * np.abs(dz))


def test_rhs_chi_independent_when_reduced():
    # b1 = b2 = 1 and chi-independent rates: bitwise equality across chi
    rng = np.random.default_rng(11)
    e = rng.uniform(0.5, 1.5, size=12)
    rm = RateModel(e1=e, e2=e.copy(), e_act=lambda chi: np.zeros_like(np.asarray(chi, dtype=float)),
                   b1=1.0, b2=1.0, kb_theta=1.0, fixed_k=1.3)
    z = random_state(rng, 12)
    a = kinetics.rhs(z, 0.17, rm)
    b = kinetics.rhs(z, 0.93, rm)
    assert np.array_equal(a, b)


def test_rhs_spec_monomer_equation():
    # dz_1 must equal -j_1 - sum_{a<=n-1} j_a for the truncated system
    rng = np.random.default_rng(3)
    rm = make_rm(n=7, e1=0.8, e2=1.3, e_act=0.5, b1=0.9, b2=0.8, fixed_k=1.1)
    z = random_state(rng, 7)
    chi = 0.6
    j = kinetics.fluxes(z, chi, 1.1, rm)
    dz = kinetics.rhs(z, chi, rm)
    assert dz[0] == pytest.approx(-j[1] - np.sum(j[1:-1]), rel=1e-15)
    assert dz[-1] == j[-2]


# ------------------------------------------------------------- stepping


def test_step_fixed_point_on_balanced_state():
    rm = make_rm(n=6, e1=1.0, e2=1.0, e_act=0.5, fixed_k=0.7)
    ge = kinetics.evaporation_coeff(0.5, rm)
    z = np.empty(6)
    z[0] = 2.0
    for a in range(5):
        z[a + 1] = 0.7 * ge[a] * z[a] / ge[a + 1]
    z_new, rep = kinetics.step_cell(z, 0.5, rm, dt=0.25)
    assert z_new == pytest.approx(z, rel=1e-12)
    assert rep.dt == 0.25


def test_step_matches_matrix_exponential_n2():
    # n=2 with fixed K is a linear 2x2 system; expm is the oracle
    rm = make_rm(n=2, e1=0.4, e2=0.4, e_act=0.1, fixed_k=1.7)
    chi = 0.5
    ge = kinetics.evaporation_coeff(chi, rm)
    a, b = 1.7 * ge[0], ge[1]
    gen = np.array([[-2 * a, 2 * b], [a, -b]])
    z0 = np.array([1.0, 0.25])
    t_end = 1.0
    oracle = scipy.linalg.expm(gen * t_end) @ z0
    z = kinetics.integrate_cell(z0, chi, rm, t_end, rtol=1e-11, atol=1e-13)
    assert z == pytest.approx(oracle, rel=1e-8)


@pytest.mark.parametrize("seed", [101, 202, 303])
def test_step_mass_drift_within_roundoff(seed):
    rng = np.random.default_rng(seed)
    n = 16
    rm = make_rm(n=n, e1=0.7, e2=1.1, e_act=0.4, b1=0.95, b2=0.75)
    z = random_state(rng, n)
    mass0 = kinetics.rho(z)
    z_new, rep = kinetics.step_cell(z, 0.31, rm, dt=1e-3)
    assert rep.mass_drift <= 10.0 * EPS * mass0
    assert kinetics.rho(z_new) == pytest.approx(mass0, rel=1e-13)
    assert rep.min_component >= 0.0


def test_step_positivity_via_halving():
    # strongly evaporating tail forces rejections at a large dt
    rm = make_rm(n=3, e1=3.0, e2=3.0, e_act=0.0, fixed_k=1e-6)
    z = np.array([1e-9, 1e-9, 2.0])
    z_new, rep = kinetics.step_cell(z, 0.0, rm, dt=50.0)
    assert np.min(z_new) >= 0.0
    assert rep.halvings > 0


def test_step_failure_reports():
    rm = make_rm(n=2, e1=1.0, e2=1.0, e_act=0.0, fixed_k=1.0)
    with pytest.raises(DomainError):
        kinetics.step_cell(np.array([1.0, 1.0]), 0.5, rm, dt=0.0)
    with pytest.raises(StepFailureError):
        kinetics.step_cell(np.array([1.0, 0.2]), 0.5, rm, dt=1.0, max_halvings=0,
                           rtol=1e-16, atol=1e-18)


def test_vectorized_step_matches_per_cell():
    rng = np.random.default_rng(5)
    n = 10
    rm = make_rm(n=n, e1=0.9, e2=1.2, e_act=0.3, b1=1.0, b2=0.8)
    z = random_state(rng, n, cells=(6,))
    chi = rng.uniform(0.1, 0.9, size=6)
    stacked, _ = kinetics.step_cell(z, chi, rm, dt=1e-3)
    for c in range(6):
        single, _ = kinetics.step_cell(z[c], chi[c], rm, dt=1e-3)
        assert np.array_equal(stacked[c], single)


# ------------------------------------------------------------ functionals


def test_weighted_sums():
    z = np.array([1.0, 1.0])
    assert kinetics.rho(z) == 3.0
    assert kinetics.count_n(z) == 2.0
    assert kinetics.x_norm(z) == 3.0
    assert kinetics.rho(np.zeros(4)) == 0.0
    assert kinetics.count_n(np.zeros(4)) == 0.0


def test_weighted_sums_geometric_tail():
    # z_a = 2 * 2^-a: rho = 4, N = 2 (geometric series closed forms)
    n = 60
    z = 2.0 * 2.0 ** -np.arange(1, n + 1, dtype=float)
    assert kinetics.rho(z) == pytest.approx(4.0, abs=1e-13)
    assert kinetics.count_n(z) == pytest.approx(2.0, abs=1e-15)


def test_validate_cluster_state():
    kinetics.validate_cluster_state(np.array([1.0, 0.0]))
    with pytest.raises(DomainError):
        kinetics.validate_cluster_state(np.array([1.0, -1e-9]))
    with pytest.raises(DomainError):
        kinetics.validate_cluster_state(np.array([np.nan, 1.0]))


# ---------------------------------------------------- growth assumptions


def test_growth_check_constant_rates_pass():
    rm = make_rm(n=32, e1=1.0, e2=1.0, e_act=1.0)
    rep = kinetics.check_growth_assumptions(rm, k_values=[0.5, 1.0], chi_values=[0.0, 0.5, 1.0])
    assert rep.monotone
    assert rep.decay_ok
    assert rep.ok
    assert np.allclose(rep.gamma, 1.0)


def test_growth_check_exploding_rates_warn():
    n = 24
    alphas = np.arange(1, n + 1, dtype=float)
    rm = RateModel(e1=alphas.copy(), e2=alphas.copy(),
                   e_act=lambda chi: np.zeros_like(np.asarray(chi, dtype=float)),
                   b1=1.0, b2=1.0, kb_theta=1.0)
    rep = kinetics.check_growth_assumptions(rm, k_values=[1.0], chi_values=[0.5])
    assert not rep.monotone
    assert not rep.decay_ok
    assert rep.warnings


def test_growth_check_volume_surface_profile():
    # bounded-rate regime: negative volume term, positive surface term
    n = 40
    alphas = np.arange(1, n + 1, dtype=float)
    e = -0.4 * alphas + 1.6 * alphas ** (2.0 / 3.0)
    assert np.all(e > 0.0)
    rm = RateModel(e1=e, e2=e.copy(),
                   e_act=lambda chi: np.full_like(np.asarray(chi, dtype=float), 0.5),
                   b1=1.0, b2=1.0, kb_theta=1.0)
    rep = kinetics.check_growth_assumptions(rm, k_values=[1.0], chi_values=[0.0, 1.0])
    # enthalpy peaks early then decays, so the majorant decays overall
    assert rep.decay_slope < 0.0


def test_rate_model_validation():
    rm = make_rm(n=3)
    rm.validate()
    bad = RateModel(e1=np.array([1.0, -1.0]), e2=np.ones(2), e_act=lambda c: 0.0,
                    b1=1.0, b2=1.0, kb_theta=1.0)
    with pytest.raises(DomainError):
        bad.validate()
    with pytest.raises(DomainError):
        make_rm(b1=0.0).validate()
    with pytest.raises(DomainError):
        make_rm(fixed_k=-2.0).validate()
