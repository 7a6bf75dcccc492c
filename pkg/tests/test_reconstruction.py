import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bosrec.density import DensityMatrix, coherent, fock, max_deviation, random_density, thermal
from bosrec.reconstruction import (
    CachedProvider,
    CoherentProvider,
    FockProvider,
    MatrixMomentProvider,
    ProductProvider,
    Reconstructor,
    ThermalProvider,
    TruncationError,
    TruncationPolicy,
    VacuumProvider,
    density_matrix_element,
    grouped_weight,
    moment_coefficient,
    projector_expansion_coefficient,
    reconstruct,
)


def test_policy_validation():
    with pytest.raises(ValueError):
        TruncationPolicy(max_series_depth=0)
    with pytest.raises(ValueError):
        TruncationPolicy(term_tolerance=0.0)


@pytest.mark.parametrize("k,l,s,expected", [(0, 0, 0, 1.0), (0, 0, 1, -1.0), (2, 1, 2, 0.5 / math.sqrt(2))])
def test_projector_expansion_examples(k, l, s, expected):
    assert projector_expansion_coefficient(k, l, s) == pytest.approx(expected, rel=1e-15)


def test_vacuum_moment_coefficients():
    vac = VacuumProvider()
    assert moment_coefficient((0,), (0,), vac) == pytest.approx(1.0)
    assert moment_coefficient((1,), (1,), vac) == pytest.approx(-1.0)


def test_single_fock_coefficients_by_hand():
    # |1><1|: <a^dag a> = 1 and all higher moments vanish, so c_{1,1} = 1 and
    # c_{0,0} = 1 - <a^dag a> = 0
    rec = Reconstructor(FockProvider(1))
    assert rec.moment_coefficient((1,), (1,)) == pytest.approx(1.0)
    assert rec.moment_coefficient((0,), (0,)) == pytest.approx(0.0, abs=1e-15)
    assert rec.moment_coefficient((1,), (0,)) == 0


@pytest.mark.parametrize("n,m", [(0, 0), (1, 1), (2, 0), (3, 1), (4, 4)])
def test_grouped_weight_is_projector_coefficient(n, m):
    for r in range(-3, 6):
        w = grouped_weight(n, m, r)
        if r < 0:
            assert w == 0
        else:
            expect = Fraction((-1) ** r, math.factorial(r) * math.factorial(n) * math.factorial(m))
            assert w == expect


def test_element_examples():
    vac = VacuumProvider()
    assert density_matrix_element((0,), (0,), vac) == pytest.approx(1.0)
    assert abs(density_matrix_element((1,), (1,), vac)) < 1e-14
    a = 0.5
    got = density_matrix_element((2,), (0,), CoherentProvider(a))
    assert got == pytest.approx(math.exp(-0.25) * a ** 2 / math.sqrt(2), rel=1e-12)


def test_reconstruct_vacuum_and_fock():
    r = reconstruct(VacuumProvider(), (4,))
    assert max_deviation(r, fock(0, 4)) == 0.0
    r1 = reconstruct(FockProvider(1), (4,))
    assert max_deviation(r1, fock(1, 4)) < 1e-12
    r2 = reconstruct(FockProvider(2), (5,))
    assert max_deviation(r2, fock(2, 5)) < 1e-12


def test_reconstruct_coherent_cutoff_16():
    a = 0.8 + 0.3j
    r = reconstruct(CoherentProvider(a), (16,))
    assert max_deviation(r, coherent(a, 16)) <= 1e-10
    assert r.eps_trunc == pytest.approx(1 - r.trace)


def test_direct_method_agrees_on_small_case():
    prov = CoherentProvider(0.4j)
    rec = Reconstructor(prov)
    for n, m in [(0, 0), (2, 1), (3, 3)]:
        assert rec.element((n,), (m,), method="direct") == pytest.approx(rec.element((n,), (m,)), abs=1e-12)


def test_thermal_reconstruction_converges():
    r = reconstruct(ThermalProvider(2.0), (10,))
    assert max_deviation(r, thermal(2.0, 10)) < 1e-12


def test_hot_thermal_fails_with_truncation_error():
    # mean occupation above one: the moment series grows geometrically
    with pytest.raises(TruncationError) as info:
        reconstruct(ThermalProvider(0.3), (3,))
    assert info.value.last_term > 1


def test_unmirrored_elements_are_conjugate(rng):
    rec = Reconstructor(MatrixMomentProvider(random_density(5, 8, rng)))
    for n in range(6):
        for m in range(n):
            assert rec.element((n,), (m,)) == pytest.approx(np.conj(rec.element((m,), (n,))), abs=1e-10)


def test_product_provider_matches_tensor(rng):
    a = random_density(3, 5, rng)
    prov = ProductProvider([MatrixMomentProvider(a), CoherentProvider(0.3 - 0.2j)])
    assert prov.mode_count() == 2
    r = reconstruct(prov, (5, 6))
    expect = reconstruct(MatrixMomentProvider(a), (5,)).kron(reconstruct(CoherentProvider(0.3 - 0.2j), (6,)))
    assert max_deviation(r, expect) <= 1e-10


def test_mode_count_mismatch():
    with pytest.raises(ValueError):
        moment_coefficient((0, 0), (0, 0), VacuumProvider())
    with pytest.raises(ValueError):
        reconstruct(VacuumProvider(2), (3,))


def test_cached_provider_counts(rng):
    calls = []

    class Counting:
        def moment(self, u, v):
            calls.append((u, v))
            return 1.0 if u == v == (0,) else 0.0

        def support_bound(self):
            return 0

        def mode_count(self):
            return 1

    cp = CachedProvider(Counting())
    for _ in range(3):
        cp.moment((0,), (0,))
    assert len(calls) == 1


def test_cancellation_flag_recorded():
    r = reconstruct(CoherentProvider(0.9), (12,))
    assert r.diagnostics["cancellation_flagged"] == []
    # a zero element assembled from non-zero moments is cancellation-dominated
    rec = Reconstructor(MatrixMomentProvider(DensityMatrix((3,), np.diag([0.5, 0.0, 0.5]))))
    assert abs(rec.element((1,), (1,))) < 1e-15
    assert [f[:2] for f in rec.flagged] == [((1,), (1,))]


@given(st.integers(0, 10**6), st.integers(0, 8))
def test_matrix_provider_invariants(seed, level):
    rng = np.random.default_rng(seed)
    rho = random_density(level, 24, rng)
    prov = MatrixMomentProvider(rho)
    assert prov.support_bound() == level
    assert prov.moment((0,), (0,)) == pytest.approx(1.0, abs=1e-12)
    for u in range(level + 2):
        for v in range(level + 2):
            z = prov.moment((u,), (v,))
            assert z == pytest.approx(np.conj(prov.moment((v,), (u,))), abs=1e-12 * max(1, abs(z)))
            if u > level or v > level:
                assert z == 0


def test_round_trip_twenty_states_cutoff_24():
    rng = np.random.default_rng(11)
    for _ in range(20):
        rho = random_density(int(rng.integers(0, 9)), 24, rng)
        r = reconstruct(MatrixMomentProvider(rho), (24,))
        assert max_deviation(r, rho) <= 1e-9
        assert abs(r.trace - 1) <= 1e-10
