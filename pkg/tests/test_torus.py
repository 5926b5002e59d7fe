import numpy as np
import pytest
from numpy.testing import assert_allclose

from oqmap.torus import (
    PlanckGrid,
    QuDitWord,
    SizeLimitError,
    TrigObservable,
    check_size,
    dft_matrix,
    index_to_word,
    product_state,
    set_size_limit,
    walsh_apply,
    walsh_matrix,
    weyl_quantize,
    word_to_index,
)


def test_dft_small_cases():
    assert_allclose(dft_matrix(1).matrix, [[1.0]])
    assert_allclose(dft_matrix(2).matrix, np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)
    assert_allclose(dft_matrix(4).matrix[1, 1], -0.5j, atol=1e-15)


@pytest.mark.parametrize("N", [1, 3, 8, 27, 64])
def test_dft_unitary(N):
    assert dft_matrix(N).unitarity_defect() < 1e-12


def test_planck_grid_validation():
    with pytest.raises(ValueError):
        PlanckGrid(0)
    g = PlanckGrid.power(3, 4)
    assert g.N == 81
    assert g.h == pytest.approx(1 / (2 * np.pi * 81))


def test_size_limit_guard():
    old = set_size_limit(10)
    try:
        with pytest.raises(SizeLimitError):
            check_size(11)
        check_size(10)
    finally:
        set_size_limit(old)


def test_walsh_k1_is_dft():
    for D in (2, 3, 4, 5):
        assert_allclose(walsh_matrix(D, 1).matrix, dft_matrix(D).matrix, atol=1e-15)


def test_walsh_tensor_action_reverses_factors():
    F = dft_matrix(3).matrix
    e = np.eye(3)
    v = product_state([e[1], e[2]])
    expected = product_state([F @ e[2], F @ e[1]])
    assert_allclose(walsh_matrix(3, 2).matrix @ v, expected, atol=1e-15)


def test_walsh_unitary_and_fast_apply():
    W = walsh_matrix(2, 2)
    assert W.N == 4
    assert W.unitarity_defect() < 1e-12
    rng = np.random.default_rng(1)
    v = rng.normal(size=27) + 1j * rng.normal(size=27)
    W3 = walsh_matrix(3, 3).matrix
    assert_allclose(walsh_apply(v, 3, 3), W3 @ v, atol=1e-13)
    assert_allclose(walsh_apply(W3 @ v, 3, 3, inverse=True), v, atol=1e-13)


def test_word_index_roundtrip():
    assert word_to_index((0, 0), 3) == 0
    assert word_to_index((0, 3, 1, 2), 4) == 54
    assert index_to_word(8, 3, 2) == (2, 2)
    for j in range(81):
        assert word_to_index(index_to_word(j, 3, 4), 3) == j
    assert QuDitWord.from_index(54, 4, 4).symbols == (0, 3, 1, 2)
    with pytest.raises(ValueError):
        QuDitWord(3, (0, 3))


def test_weyl_constant_is_identity():
    assert_allclose(weyl_quantize(TrigObservable.constant(), 7).matrix, np.eye(7), atol=1e-15)


def test_weyl_position_harmonic():
    w = np.exp(2j * np.pi / 3)
    Op = weyl_quantize(TrigObservable({(1, 0): 1.0}), 3).matrix
    assert_allclose(Op, np.diag([1, w, w**2]), atol=1e-15)


def test_weyl_real_symbol_is_hermitian():
    f = TrigObservable.from_function(lambda q, p: np.cos(2 * np.pi * (q + 2 * p)) + np.sin(2 * np.pi * p) ** 2, 4, 16)
    assert f.is_real()
    Op = weyl_quantize(f, 9).matrix
    assert_allclose(Op, Op.conj().T, atol=1e-13)


def test_trig_algebra():
    a = TrigObservable({(1, 0): 2.0})
    b = TrigObservable({(0, 1): 1j})
    q, p = 0.3, 0.7
    assert (a * b)(q, p) == pytest.approx(a(q, p) * b(q, p))
    assert (a + b)(q, p) == pytest.approx(a(q, p) + b(q, p))
    assert a.conj()(q, p) == pytest.approx(np.conj(a(q, p)))
