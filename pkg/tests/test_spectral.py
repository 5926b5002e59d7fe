import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oqmap.classical import BakerParams
from oqmap.maps import build_open_baker, build_toy_baker, build_walsh_open_baker, omega_block
from oqmap.spectral import (
    ResonanceSpectrum,
    canonical_order,
    count_at_radius,
    eigenvalues,
    modulus_multiplicities,
    necklace_orbits,
    necklace_period_fraction,
    oracle_match,
    radial_profile,
    walsh_analytic_spectrum,
    weyl_fit,
)

OMEGA3 = omega_block(3, (0, 2))
LP, LM = OMEGA3.eigenvalues()


def test_diagonal():
    spec = eigenvalues(np.diag([0.5, 0.25j]))
    assert_allclose(sorted(spec.values, key=abs), [0.25j, 0.5], atol=1e-15)


def test_omega3_as_matrix():
    vals = eigenvalues(OMEGA3.block).values
    assert_allclose(vals[0], 0.8390426165 + 0.0941739043j, atol=1e-9)
    assert_allclose(vals[1], -0.5503674819 + 0.4058260957j, atol=1e-9)


def test_toy_n3_nonzero_are_omega3():
    spec = eigenvalues(build_toy_baker(3))
    assert_allclose(spec.nonzero(), [LP, LM], atol=1e-12)


def test_canonical_order_is_deterministic():
    vals = [0.3, -0.3, 0.3j, 0.9, 0.1 - 0.1j]
    a = canonical_order(vals)
    b = canonical_order(vals[::-1])
    assert a == b
    assert abs(a[0]) == pytest.approx(0.9)


def test_from_values_keeps_repeats():
    spec = ResonanceSpectrum.from_values([0.5, 0.1j, 0.5])
    assert spec.total == 3
    assert_allclose(spec.values, [0.5, 0.5, 0.1j])


def test_count_at_radius_tie():
    spec = ResonanceSpectrum.from_values([0.5, 0.5 - 1e-12, 0.4999])
    assert count_at_radius(spec, 0.5) == 2


def test_analytic_small_k():
    s1 = walsh_analytic_spectrum(1, OMEGA3)
    assert_allclose(sorted(s1.nonzero(), key=abs), [LM, LP], atol=1e-14)
    s2 = walsh_analytic_spectrum(2, OMEGA3)
    mods = sorted(round(abs(z), 12) for z, m in s2.entries for _ in range(m) if abs(z) > 1e-12)
    expected = sorted(round(x, 12) for x in [abs(LP), abs(LM), 3**-0.25, 3**-0.25])
    assert mods == expected
    assert s2.total == 9


def test_necklace_orbit_count():
    # binary necklaces of length 6: 14
    assert len(necklace_orbits(6)) == 14
    assert sum(o.period for o in necklace_orbits(6)) == 64


@pytest.mark.parametrize("k", [1, 2, 4])
def test_oracle_toy(k):
    spec = eigenvalues(build_toy_baker(3**k), deflate=True)
    rep = oracle_match(spec, walsh_analytic_spectrum(k, OMEGA3))
    assert rep.ok, rep.message
    assert rep.max_distance < (1e-10 if k == 1 else 1e-7)
    assert rep.n_nonzero == 2**k


@pytest.mark.parametrize("kept", [(0, 2), (1, 3)])
def test_oracle_rank_one_blocks(kept):
    blk = omega_block(4, kept)
    for k in (1, 2, 3):
        spec = eigenvalues(build_walsh_open_baker(4, k, kept), deflate=True)
        ana = walsh_analytic_spectrum(k, blk)
        assert len(ana.nonzero()) == 1
        rep = oracle_match(spec, ana)
        assert rep.ok, rep.message
    assert_allclose(walsh_analytic_spectrum(3, omega_block(4, (0, 2))).nonzero(), [1.0], atol=1e-14)


def test_oracle_mismatch_reported():
    ana = walsh_analytic_spectrum(2, OMEGA3)
    wrong = ResonanceSpectrum.from_values(np.r_[ana.nonzero() * 1.01, np.zeros(5)])
    rep = oracle_match(wrong, ana)
    assert not rep.ok


def test_radial_profile():
    spec = walsh_analytic_spectrum(5, OMEGA3)
    prof = radial_profile(spec, 5, [0.5, 0.9])
    assert_allclose(prof, [1.0, 0.0])
    spec12 = walsh_analytic_spectrum(12, OMEGA3)
    prof = radial_profile(spec12, 12, [0.5, 0.70, 0.81, 0.95])
    assert np.all(np.abs(prof - [1, 1, 0, 0]) <= 0.1)


def test_toy_weyl_counts_numerical():
    for k in range(1, 6):
        spec = eigenvalues(build_toy_baker(3**k), deflate=True)
        assert count_at_radius(spec, 0.5) == 2**k


def test_weyl_fit():
    pts = [(N, 3.0 * N**0.5) for N in (9, 27, 81, 243)]
    assert weyl_fit(pts) == pytest.approx(0.5, abs=1e-10)
    pts = [(3**k, 2**k) for k in range(1, 11)]
    assert weyl_fit(pts) == pytest.approx(math.log(2) / math.log(3), abs=1e-10)
    # reference r=0.5 column, k=2..6
    table = [(3**k, c) for k, c in zip(range(2, 7), (8, 16, 33, 71, 142))]
    assert 0.55 <= weyl_fit(table) <= 0.70


def test_modulus_multiplicities():
    rows = modulus_multiplicities(walsh_analytic_spectrum(2, OMEGA3))
    assert dict(rows)[round(3**-0.25, 10)] == 2


def test_necklace_period_fraction():
    assert necklace_period_fraction(5, 2) == 0
    assert necklace_period_fraction(4, 2) == Fraction(1, 3)
    assert necklace_period_fraction(6, 3) == Fraction(2, 20)


def test_open_baker_reference_large_radius():
    # N=27, r=0.8 agrees with the reference table; smaller radii do not (see README)
    spec = eigenvalues(build_open_baker(BakerParams.symmetric(3), 27))
    assert count_at_radius(spec, 0.8) == 5
