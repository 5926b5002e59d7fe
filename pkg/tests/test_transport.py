import numpy as np
import pytest
from numpy.testing import assert_allclose

from oqmap.torus import index_to_word, word_to_index
from oqmap.transport import (
    LeadConfig,
    classify_channel,
    closed_walsh_baker,
    conductance,
    fano,
    noise_power,
    nonclassical_gram,
    nonclassical_words,
    nongeneric_words_combinatorial,
    nongeneric_words_measured,
    transmission_matrix,
    transmission_matrix_resolvent,
    transport_summary,
    walsh_t_apply,
)


def test_classify_examples():
    c = classify_channel((0, 3, 1, 2))
    assert (c.kind, c.exit_index) == ("transmitted", 2)
    c = classify_channel((0, 1, 0, 2))
    assert (c.kind, c.exit_index) == ("reflected", 3)
    assert classify_channel((0, 1, 2, 1)).kind == "nonclassical"
    with pytest.raises(ValueError):
        classify_channel((1, 2, 3))


def test_lead_config():
    cfg = LeadConfig(3)
    assert (cfg.N, cfg.M) == (64, 16)
    assert list(cfg.lead2[:2]) == [48, 49]
    assert np.trace(cfg.projector("I")) == 32


def test_moments_trivial():
    t = np.eye(2)
    assert (conductance(t), noise_power(t), fano(t)) == (2.0, 0.0, 0.0)
    t = np.eye(2) / np.sqrt(2)
    assert conductance(t) == pytest.approx(1.0)
    assert noise_power(t) == pytest.approx(0.5)
    assert fano(t) == pytest.approx(0.5)
    with pytest.raises(ZeroDivisionError):
        fano(np.zeros((2, 2)))


@pytest.fixture(scope="module", params=[3, 4])
def dense_t(request):
    k = request.param
    cfg = LeadConfig(k)
    U = closed_walsh_baker(k)
    return k, cfg, U, transmission_matrix(U, cfg, 0.0, n_components=2 * k)


def test_classical_channels_dense(dense_t):
    k, cfg, _, tm = dense_t
    norms = np.linalg.norm(tm.t, axis=0)
    for col in range(cfg.M):
        kind = classify_channel(index_to_word(col, 4, k)).kind
        if kind == "transmitted":
            assert norms[col] == pytest.approx(1.0, abs=1e-10)
        elif kind == "reflected":
            assert norms[col] == pytest.approx(0.0, abs=1e-10)


def test_resolvent_agrees(dense_t):
    _, cfg, U, tm = dense_t
    for theta in (0.0, 1.3):
        t = transmission_matrix(U, cfg, theta).t
        assert_allclose(t, transmission_matrix_resolvent(U, cfg, theta), atol=1e-9)


def test_theta_list_matches_scalar(dense_t):
    _, cfg, U, _ = dense_t
    many = transmission_matrix(U, cfg, [0.0, 0.7])
    assert_allclose(many[1].t, transmission_matrix(U, cfg, 0.7).t, atol=1e-13)


def test_component_norms(dense_t):
    k, cfg, _, tm = dense_t
    cols = [word_to_index(w, 4) for w in nonclassical_words(k)]
    for n in range(1, 2 * k):
        t_n = tm.components.get(n, np.zeros((cfg.M, cfg.M)))
        sq = np.sum(np.abs(t_n[:, cols]) ** 2, axis=0)
        expected = 0.0 if n < k else 1 / (4 * 2 ** (n - k))
        assert_allclose(sq, expected, atol=1e-10)


def test_tensor_column_matches_dense(dense_t):
    k, cfg, _, tm = dense_t
    for w in nonclassical_words(k)[:3]:
        col = walsh_t_apply(w, 0.0, theta_cut=None)
        j = word_to_index(w, 4)
        assert np.linalg.norm(col.dense() - tm.t[:, j]) < 1e-8 + col.tail_bound
        for m in range(k):
            assert col.component_norm2(k + m) == pytest.approx(1 / (4 * 2**m), abs=1e-12)
        assert col.component_norm2(k - 1) == 0.0


def test_walsh_t_apply_rejects_classical():
    with pytest.raises(ValueError):
        walsh_t_apply((0, 3, 1))


def test_gram_trace_matches_norms():
    G, tail = nonclassical_gram(3, 0.0, theta_cut=None)
    cols = [walsh_t_apply(w, 0.0, theta_cut=None) for w in nonclassical_words(3)]
    assert_allclose(np.diag(G).real, [c.norm2() for c in cols], atol=1e-12)
    assert_allclose(G, G.conj().T, atol=1e-14)
    assert tail < 1e-9


def test_summary_dense_vs_tensor():
    a = transport_summary(4, [0.0, 0.5], path="dense")
    b = transport_summary(4, [0.0, 0.5], path="tensor")
    for x, y in zip(a.summaries, b.summaries):
        assert x.g == pytest.approx(y.g, abs=1e-8)
        assert x.P == pytest.approx(y.P, abs=1e-8)
        assert (x.transmitted, x.reflected, x.nonclassical) == (y.transmitted, y.reflected, y.nonclassical)


def test_summary_ledger_counts():
    s = transport_summary(4, [0.0], path="tensor").summaries[0]
    assert s.transmitted == s.reflected == (4**3 - 2**3) // 2
    assert s.nonclassical == 2**3


def test_theta_dependence_is_weak():
    rep = transport_summary(4, 16, path="dense")
    g, gs = rep.g_mean_std
    assert gs / g < 0.05


def test_nongeneric_measured_within_combinatorial():
    for k in (5, 6, 7):
        assert nongeneric_words_measured(k) <= nongeneric_words_combinatorial(k)


def test_dark_nonclassical_channel_at_zero_theta():
    # 0 2 ... 2 is nonclassical yet fully reflected at theta = 0; both routes agree
    for k in (3, 4):
        cfg = LeadConfig(k)
        U = closed_walsh_baker(k)
        j = word_to_index((0,) + (2,) * (k - 1), 4)
        assert np.linalg.norm(transmission_matrix_resolvent(U, cfg, 0.0)[:, j]) < 1e-12
        assert np.linalg.norm(transmission_matrix(U, cfg, 0.0, tail_tol=1e-14).t[:, j]) < 1e-12
        assert np.linalg.norm(transmission_matrix_resolvent(U, cfg, 0.3)[:, j]) > 0.1
