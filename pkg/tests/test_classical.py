import math
from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from oqmap.classical import (
    TRAPPED,
    BakerParams,
    Point,
    baker_image,
    baker_preimage,
    boxcount_trapped,
    cantor_dimension,
    escape_time,
    escape_time_histogram,
    sin2_sum,
    toy_images,
    toy_probability,
    toy_relation,
)

B3 = BakerParams.symmetric(3)


def test_params_validation():
    assert B3 == BakerParams(3, 3, 0, 2)
    assert B3.is_symmetric
    with pytest.raises(ValueError):
        BakerParams(3, 3, 0, 0)
    with pytest.raises(ValueError):
        BakerParams(1, 3, 0, 2)


def test_baker_image_cases():
    assert baker_image(B3, Point(0.5, 0.2)) is None
    img = baker_image(B3, Point(0.1, 0.3))
    assert img.q == pytest.approx(0.3)
    assert img.p == pytest.approx(0.1)
    img = baker_image(B3, Point(0.9, 0.0))
    assert img.q == pytest.approx(0.7)
    assert img.p == pytest.approx(2 / 3)


def test_baker_exact_inverse():
    rho = Point(Fraction(2, 27), Fraction(5, 7))
    img = baker_image(B3, rho)
    assert baker_preimage(B3, img) == rho


def test_escape_time_cases():
    assert escape_time(B3, Point(0.5, 0.3), 10) == 1
    assert escape_time(B3, Point(1 / 3 + 1e-9, 0.0), 10) == 1
    # 1/4 = 0.0202... in base 3 never meets the middle third
    assert escape_time(B3, Point(Fraction(1, 4), Fraction(1, 2)), 50) is TRAPPED
    assert escape_time(B3, Point(Fraction(0), Fraction(0)), 50) is TRAPPED


def test_escape_histogram_survival():
    rng = np.random.default_rng(0)
    pts = [Point(q, p) for q, p in rng.random((20000, 2))]
    rows = dict(escape_time_histogram(B3, pts, 12))
    # a uniform point survives n steps with probability (2/3)^n
    assert rows[1] / 20000 == pytest.approx(1 / 3, abs=0.015)
    assert rows[2] / 20000 == pytest.approx(2 / 9, abs=0.015)


def test_sin2_identity():
    for D in (2, 3, 4, 7):
        x = np.linspace(0.01, 3.0, 200)
        assert_allclose(sin2_sum(D, x), D**2, rtol=1e-8)
        assert sin2_sum(D, 0.0) == pytest.approx(D**2)


def test_toy_probability_sum():
    p = np.linspace(0, 1, 101)
    for strip in (1, 2):
        total = sum(toy_probability(p, j, strip) for j in range(3))
        assert_allclose(total, 1.0, atol=1e-12)


def test_toy_images():
    imgs = toy_images(Point(0.1, 0.0))
    assert len(imgs) == 1
    (img, w), = imgs
    assert w == pytest.approx(1.0)
    assert img.q == pytest.approx(0.3)
    assert img.p == pytest.approx(0.0)
    imgs = toy_images(Point(0.1, 0.5))
    assert len(imgs) == 3
    assert sum(w for _, w in imgs) == pytest.approx(1.0, abs=1e-12)
    assert toy_images(Point(0.5, 0.5)) == []


def test_toy_relation_total_probability():
    rel = toy_relation()
    q = np.array([0.1, 0.2, 0.8, 0.9])
    p = np.array([0.05, 0.4, 0.6, 0.95])
    assert_allclose(rel.total_probability(q, p), 1.0, atol=1e-12)


def test_cantor_dimension():
    assert cantor_dimension(3, 3) == pytest.approx(math.log(2) / math.log(3), abs=1e-12)
    assert cantor_dimension(2, 2) == pytest.approx(1.0, abs=1e-12)
    assert cantor_dimension(4, 4) == pytest.approx(0.5, abs=1e-12)
    # D1^-nu + D2^-nu = 1
    nu = cantor_dimension(2, 5)
    assert 2**-nu + 5**-nu == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("depth", [1, 4, 8])
def test_boxcount_three_baker(depth):
    count, est = boxcount_trapped(B3, depth)
    assert count == 2**depth
    assert est == pytest.approx(math.log(2) / math.log(3), abs=1e-12)


def test_boxcount_four_baker_middle_strips():
    count, est = boxcount_trapped(depth=6, D=4, kept=(1, 2))
    assert count == 2**6
    assert est == pytest.approx(0.5, abs=1e-12)


def test_boxcount_closed_two_baker():
    count, est = boxcount_trapped(BakerParams(2, 2, 0, 1), 6)
    assert count == 2**6
    assert est == pytest.approx(1.0, abs=1e-12)


def test_boxcount_general_dimension():
    params = BakerParams(2, 4, 0, 3)
    _, est = boxcount_trapped(params, 10)
    assert est == pytest.approx(cantor_dimension(2, 4), abs=0.02)
