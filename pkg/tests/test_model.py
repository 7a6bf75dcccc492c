import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from bosrec import density as dm
from bosrec.model import (
    ArbitraryMatrix,
    Coherent,
    ModelParams,
    TAYLOR_THRESHOLD,
    Thermal,
    TwoModeMomentProvider,
    coherent_amplitudes,
    envelopes,
    fock_state,
    joint_density,
    joint_element,
    lambdas,
    reduced_density,
    swap_modes,
    thermal_beta,
    thermal_betas,
)
from bosrec.reconstruction import TruncationError, TruncationPolicy, reconstruct

from conftest import STANDARD

params_st = st.builds(
    ModelParams,
    omega1=st.floats(0.5, 10), omega2=st.floats(0.5, 10),
    kappa1=st.floats(0, 1), kappa2=st.floats(0, 1), g=st.floats(0, 1),
)


def heisenberg_propagator(p, t):
    m = np.array([[p.kappa1 / 2 + 1j * p.omega1, 1j * p.g], [1j * p.g, p.kappa2 / 2 + 1j * p.omega2]])
    return expm(-m * t)


def single_oscillator(rho0, kappa, omega, t, cutoff):
    """Amplitude damping plus free rotation, written out level by level."""
    out = np.zeros((cutoff, cutoff), dtype=complex)
    c0 = rho0.shape[0]
    loss = -math.expm1(-kappa * t)
    for n in range(cutoff):
        for m in range(cutoff):
            s = 0j
            for k in range(c0 - max(n, m)):
                s += math.sqrt(math.comb(n + k, k) * math.comb(m + k, k)) * loss ** k * rho0[n + k, m + k]
            out[n, m] = cmath.exp(-(n + m) * kappa * t / 2 - 1j * (n - m) * omega * t) * s
    return out


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(0, 1, 0, 0)
    with pytest.raises(ValueError):
        ModelParams(1, 1, -0.1, 0)
    with pytest.raises(ValueError):
        ModelParams(1, 1, 0, 0, g=0.1j).real_g
    with pytest.raises(ValueError):
        envelopes(ModelParams(1, 1, 0, 0, g=0.1j), 1.0)


def test_lambdas_examples():
    lam = lambdas(ModelParams(1, 1, 0, 0, g=0.7))
    assert lam.plus == 1j and lam.minus == 0
    lam = lambdas(ModelParams(1, 3, 0.4, 0.0))
    assert lam.plus == pytest.approx(0.1 + 2j) and lam.minus == pytest.approx(0.1 - 1j)
    g = 0.05
    lam = lambdas(ModelParams(2, 2, 4 * g + 0.1, 0.1, g))
    assert lam.minus == pytest.approx(g)


def test_envelopes_at_zero():
    env = envelopes(STANDARD, 0.0)
    assert env.f1 == 1 and env.f2 == 0
    with pytest.raises(ValueError):
        envelopes(STANDARD, -1.0)


@pytest.mark.parametrize("t", [0.3, 2.0, 17.5])
def test_lossless_resonant_envelopes(t):
    p = ModelParams(2.0, 2.0, 0, 0, 0.3)
    env = envelopes(p, t)
    assert env.f1 == pytest.approx(cmath.exp(-2j * t) * math.cos(0.3 * t), abs=1e-14)
    assert env.f2 == pytest.approx(-1j * cmath.exp(-2j * t) * math.sin(0.3 * t), abs=1e-14)


def test_uncoupled_envelopes():
    p = ModelParams(3.0, 1.0, 0.2, 0.5, 0.0)
    for t in (0.1, 1.0, 9.0):
        env = envelopes(p, t)
        assert env.f1 == pytest.approx(cmath.exp(-(0.1 + 3j) * t), abs=1e-15)
        assert env.f2 == 0


def test_exceptional_point_closed_form():
    g = 0.05
    p = ModelParams(2, 2, 4 * g + 0.1, 0.1, g)
    lp = lambdas(p).plus
    for t in (0.0, 1.0, 10.0, 40.0):
        env = envelopes(p, t)
        assert env.f1 == pytest.approx(cmath.exp(-lp * t) * (1 - g * t), abs=1e-14)
        assert env.f2 == pytest.approx(-1j * g * t * cmath.exp(-lp * t), abs=1e-14)
        for s in (1 + 1e-6, 1 - 1e-6):
            near = envelopes(ModelParams(2, 2, 4 * g + 0.1, 0.1, g * s), t)
            assert abs(near.f1 - env.f1) <= 1e-5 and abs(near.f2 - env.f2) <= 1e-5


def test_taylor_switch_is_continuous():
    # straddle |x| t = TAYLOR_THRESHOLD by moving g slightly off the exceptional point
    g0, t = 0.05, 1.0
    for dg in np.linspace(-4e-9, 4e-9, 9):
        p = ModelParams(2, 2, 4 * g0 + 0.1, 0.1, g0 + dg)
        x = cmath.sqrt(lambdas(p).minus ** 2 - p.g ** 2)
        env = envelopes(p, t)
        u = heisenberg_propagator(p, t)
        assert abs(env.f1 - u[0, 0]) < 1e-14 and abs(env.f2 - u[1, 0]) < 1e-14, abs(x) * t < TAYLOR_THRESHOLD


@given(params_st, st.floats(0, 50))
def test_envelopes_match_matrix_exponential(p, t):
    env = envelopes(p, t)
    u = heisenberg_propagator(p, t)
    assert abs(env.f1 - u[0, 0]) <= 1e-10
    assert abs(env.f2 - u[1, 0]) <= 1e-10


@given(params_st, st.floats(0, 50))
def test_branch_flip_and_contraction(p, t):
    a, b = envelopes(p, t), envelopes(p, t, branch=-1)
    assert abs(a.f1 - b.f1) <= 1e-13 and abs(a.f2 - b.f2) <= 1e-13
    assert abs(a.f1) ** 2 + abs(a.f2) ** 2 <= 1 + 1e-12


@given(st.floats(0.5, 10), st.floats(0.5, 10), st.floats(0, 1), st.floats(0, 50))
def test_lossless_norm_conserved(w1, w2, g, t):
    env = envelopes(ModelParams(w1, w2, 0, 0, g), t)
    assert abs(abs(env.f1) ** 2 + abs(env.f2) ** 2 - 1) <= 1e-12


def test_swap_modes_involution():
    p = ModelParams(1, 2, 0.1, 0.2, 0.3)
    q = swap_modes(p)
    assert (q.omega1, q.omega2, q.kappa1, q.kappa2, q.g) == (2, 1, 0.2, 0.1, 0.3)
    assert swap_modes(q) == p
    sym = ModelParams(1, 1, 0.1, 0.1, 0.3)
    assert swap_modes(sym) == sym


def test_mode_two_envelope_by_symmetry():
    # f2 is symmetric under relabeling; f1 of the swapped model is mode 2's self-envelope
    p = ModelParams(1.3, 2.1, 0.1, 0.4, 0.3)
    for t in (0.5, 3.0):
        assert envelopes(swap_modes(p), t).f2 == pytest.approx(envelopes(p, t).f2, abs=1e-14)
        assert envelopes(swap_modes(p), t).f1 == pytest.approx(heisenberg_propagator(p, t)[1, 1], abs=1e-12)


def test_initial_state_validation():
    with pytest.raises(ValueError):
        Thermal(0.0)
    with pytest.raises(ValueError):
        Thermal(math.inf)
    with pytest.raises(ValueError):
        ArbitraryMatrix(dm.fock(0, 2).kron(dm.fock(0, 2)))
    assert fock_state(3).support_bound() == 3
    assert Coherent(0).support_bound() == 0 and Coherent(0.1).support_bound() is None


def test_t_zero_joint_elements(rng):
    rho = dm.random_density(5, 6, rng)
    init = ArbitraryMatrix(rho)
    for n in range(6):
        for m in range(6):
            assert joint_element(STANDARD, init, n, m, 0, 0, 0.0) == pytest.approx(rho.data[n, m], abs=1e-15)
            assert joint_element(STANDARD, init, n, m, 1, 0, 0.0) == 0
            assert joint_element(STANDARD, init, n, m, 0, 2, 0.0) == 0


def test_fock_one_decays_without_coupling():
    p = ModelParams(2.0, 3.0, 0.3, 0.1, 0.0)
    for t in (0.0, 1.0, 4.0):
        assert joint_element(p, fock_state(1), 1, 1, 0, 0, t) == pytest.approx(math.exp(-0.3 * t), abs=1e-15)


def test_fock_two_swaps_fully():
    p = ModelParams(3.0, 3.0, 0, 0, 0.25)
    t = math.pi / (2 * 0.25)
    assert joint_element(p, fock_state(2), 0, 0, 2, 2, t) == pytest.approx(1.0, abs=1e-14)


def test_vacuum_stays_vacuum():
    for t in (0.0, 3.0, 25.0):
        r = joint_density(STANDARD, fock_state(0), 3, 4, t)
        assert dm.max_deviation(r, dm.fock(0, 3).kron(dm.fock(0, 4))) == 0


def test_joint_element_agrees_with_vectorized(rng):
    init = ArbitraryMatrix(dm.random_density(4, 5, rng))
    r = joint_density(STANDARD, init, 4, 3, 7.0)
    for n1 in range(4):
        for m1 in range(4):
            for n2 in range(3):
                for m2 in range(3):
                    want = joint_element(STANDARD, init, n1, m1, n2, m2, 7.0)
                    assert r.entry((n1, n2), (m1, m2)) == pytest.approx(want, abs=1e-15)


def test_coherent_joint_is_product_of_coherents():
    a0 = 0.7 - 0.4j
    for t in (1.0, 12.0):
        a1, a2 = coherent_amplitudes(STANDARD, a0, t)
        r = joint_density(STANDARD, Coherent(a0), 10, 10, t)
        assert dm.max_deviation(r, dm.coherent(a1, 10).kron(dm.coherent(a2, 10))) <= 1e-12


def test_coherent_amplitudes_examples():
    a0 = 0.3 + 0.5j
    assert coherent_amplitudes(STANDARD, a0, 0.0) == (a0, 0)
    p = ModelParams(3.0, 3.0, 0, 0, 0.25)
    t = math.pi / 0.5
    a1, a2 = coherent_amplitudes(p, a0, t)
    assert abs(a1) < 1e-15
    assert a2 == pytest.approx(-1j * cmath.exp(-3j * t) * a0, abs=1e-14)


def test_partial_trace_matches_reduced(rng):
    init = ArbitraryMatrix(dm.random_density(5, 6, rng))
    for t in (2.0, 9.0):
        joint = joint_density(STANDARD, init, 8, 8, t)
        for mode, keep in ((1, 0), (2, 1)):
            red = reduced_density(STANDARD, init, mode, 8, t)
            assert dm.max_deviation(joint.partial_trace(keep), red) <= 1e-9


def test_reduced_mode_one_at_t_zero(rng):
    rho = dm.random_density(6, 8, rng)
    # exact up to the log-factorial round trip
    assert dm.max_deviation(reduced_density(STANDARD, ArbitraryMatrix(rho), 1, 8, 0.0), rho) <= 1e-15


@given(st.integers(0, 10**6), st.floats(0, 10))
def test_single_oscillator_limit(seed, t):
    rng = np.random.default_rng(seed)
    rho = dm.random_density(6, 7, rng)
    p = ModelParams(2.0, 1.0, 0.3, 0.2, 0.0)
    got = reduced_density(p, ArbitraryMatrix(rho), 1, 7, t)
    assert dm.max_deviation(got, single_oscillator(rho.data, 0.3, 2.0, t, 7)) <= 1e-12


def test_thermal_betas_examples():
    b1, b2 = thermal_betas(STANDARD, 1.5, 0.0)
    assert b1 == pytest.approx(1.5, abs=1e-15) and b2 == math.inf
    assert thermal_beta(0.0, 1.0) == math.inf
    assert thermal_beta(1.0, 0.7) == pytest.approx(0.7, abs=1e-15)
    with pytest.raises(ValueError):
        thermal_betas(STANDARD, 0.0, 1.0)


def test_thermal_reduced_states():
    for t in (0.5, 5.0, 20.0):
        b1, b2 = thermal_betas(STANDARD, 1.5, t)
        for mode, b in ((1, b1), (2, b2)):
            r = reduced_density(STANDARD, Thermal(1.5), mode, 20, t)
            off = r.data - np.diag(np.diag(r.data))
            assert np.max(np.abs(off)) <= 1e-12
            assert dm.max_deviation(r, dm.thermal(b, 20)) <= 1e-10


def test_joint_trace_preserved(rng):
    init = ArbitraryMatrix(dm.random_density(4, 5, rng))
    for t in (1.0, 10.0, 30.0):
        r = joint_density(STANDARD, init, 8, 8, t)
        assert abs(r.trace - 1) <= max(1e-10, r.eps_trunc)


def test_swap_phases(rng):
    p = ModelParams(3.0, 3.0, 0, 0, 0.25)
    t = math.pi / 0.5
    rho = dm.random_density(5, 6, rng)
    got = reduced_density(p, ArbitraryMatrix(rho), 2, 6, t).data
    n = np.arange(6)
    phase = (-1j) ** n * np.exp(-3j * n * t)
    assert np.max(np.abs(got - rho.data * np.outer(phase, phase.conj()))) <= 1e-10
    assert np.max(np.abs(np.abs(got) - np.abs(rho.data))) <= 1e-10


def test_hot_thermal_still_converges_in_closed_form():
    # the closed-form tail has ratio e^{-beta} (1 - |f|^2) < 1 for any beta > 0,
    # here ~0.74, so it needs more than the default 64 terms
    with pytest.raises(TruncationError):
        reduced_density(STANDARD, Thermal(0.3), 2, 10, 5.0)
    r = reduced_density(STANDARD, Thermal(0.3), 2, 10, 5.0, TruncationPolicy(max_series_depth=400))
    b2 = thermal_betas(STANDARD, 0.3, 5.0)[1]
    assert dm.max_deviation(r, dm.thermal(b2, 10)) <= 1e-10


def test_joint_truncation_error_carries_magnitude():
    with pytest.raises(TruncationError) as info:
        reduced_density(STANDARD, Thermal(1e-3), 2, 4, 5.0, TruncationPolicy(max_series_depth=5))
    assert info.value.last_term > 0


def test_heisenberg_moments_through_generic_engine(rng):
    init = ArbitraryMatrix(dm.random_density(3, 4, rng))
    for t in (0.0, 3.0, 11.0):
        via_engine = reconstruct(TwoModeMomentProvider(STANDARD, init, t), (4, 4))
        assert dm.max_deviation(via_engine, joint_density(STANDARD, init, 4, 4, t)) <= 1e-12


# Frozen values from the Lindblad integrator (dims 3x3, dt = 1e-3 and 5e-4 agree to 1e-15),
# standard coupled scenario, Fock |2> initial state, t = 15.
ORACLE_T15 = {
    ((1, 1), (1, 1)): 0.006398194647522,
    ((1, 0), (1, 0)): 0.010420498857888,
    ((2, 0), (2, 0)): 7.1932090822e-05,
    ((0, 2), (0, 2)): 0.142276188137900,
    ((0, 0), (0, 0)): 0.377393438752111,
    ((2, 0), (1, 1)): 6.784066026212e-04j,
}


def test_frozen_oracle_values():
    r = joint_density(STANDARD, fock_state(2), 3, 3, 15.0)
    for (n, m), want in ORACLE_T15.items():
        assert r.entry(n, m) == pytest.approx(want, abs=1e-12)
