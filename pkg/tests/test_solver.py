import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmbaselines import (FactorParams, ModelParams, MultimodalSegment, TemperatureConfig,
                         WordTable, closed_form_embedding, psi_factor, psi_word,
                         taylor_linear_coefficient)
from mmbaselines.solver import compute_psi_weights, shifted_features

from helpers import make_instance, sphere_max_oracle, unit_vector


class TestPsiWord:
    def test_zero_probability_gives_max_weight(self):
        cfg = TemperatureConfig(alpha=0.5, Z=2.0, alpha_w=0.8)
        assert psi_word(0.0, cfg) == pytest.approx(0.8)

    def test_zero_temperature(self):
        cfg = TemperatureConfig(alpha_w=0.0)
        assert psi_word(0.3, cfg) == 0.0

    def test_hand_evaluation(self):
        # beta = 1 via alpha = 0.5, Z = 1
        cfg = TemperatureConfig(alpha=0.5, Z=1.0, alpha_w=1.0)
        assert cfg.beta == pytest.approx(1.0)
        assert psi_word(1.0, cfg) == pytest.approx(0.5)

    @given(p=st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_bounded_by_temperature(self, p):
        cfg = TemperatureConfig(alpha=0.3, Z=5.0, alpha_w=0.7)
        assert 0.0 <= psi_word(p, cfg) <= 0.7 + 1e-15


class TestPsiFactor:
    def test_zero_log_scale(self):
        fp = FactorParams("v", np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(3), np.zeros(3))
        psi1, psi2 = psi_factor(fp, 0.9)
        assert np.allclose(psi1, 0.9)
        assert np.allclose(psi2, 0.0)

    def test_zero_temperature(self):
        fp = FactorParams("v", np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(3), np.ones(3))
        psi1, psi2 = psi_factor(fp, 0.0)
        assert np.all(psi1 == 0.0) and np.all(psi2 == 0.0)

    def test_hand_evaluation(self):
        fp = FactorParams("v", np.zeros((1, 2)), np.zeros((1, 2)), np.zeros(1),
                          np.array([0.5]))
        psi1, psi2 = psi_factor(fp, 2.0)
        assert psi1[0] == pytest.approx(2.0 / math.e, rel=1e-12)
        assert psi2[0] == pytest.approx(2.0 / math.e - 2.0, rel=1e-12)

    def test_psi1_positive_when_active(self):
        rng = np.random.default_rng(0)
        fp = FactorParams("a", np.zeros((4, 2)), np.zeros((4, 2)), np.zeros(4),
                          rng.normal(size=4))
        psi1, _ = psi_factor(fp, 0.4)
        assert np.all(psi1 > 0.0)


def test_shifted_features_square_nonnegative():
    rng = np.random.default_rng(1)
    shifted = shifted_features(rng.normal(size=(5, 3)), rng.normal(size=3))
    assert np.all(shifted.x2 >= 0.0)
    assert np.allclose(shifted.x2, shifted.x1 ** 2)


def test_psi_weights_summary():
    rng = np.random.default_rng(2)
    seg, params, table, cfg = make_instance(rng, mode="b2")
    weights = compute_psi_weights(params, table, cfg)
    assert set(weights.psi1) == set(cfg.gaussian_factors())
    for token in table.vocab:
        assert 0.0 <= weights.psi_w[token] <= cfg.alpha_w


class TestClosedForm:
    def test_single_word_points_along_its_vector(self):
        rng = np.random.default_rng(3)
        seg, params, table, cfg = make_instance(rng, T=1, alpha_v=0.0, alpha_a=0.0)
        emb = closed_form_embedding(seg, params, table, cfg)
        v = seg.word_vectors[0]
        assert np.allclose(emb.m, v / np.linalg.norm(v), atol=1e-12)

    def test_sif_degeneracy_weighted_word_average(self):
        # alpha_v = alpha_a = 0 reduces to the normalized psi-weighted average
        rng = np.random.default_rng(4)
        seg, params, table, cfg = make_instance(rng, T=6, alpha_v=0.0, alpha_a=0.0)
        emb = closed_form_embedding(seg, params, table, cfg)
        oracle = sum(psi_word(table.prob(t), cfg) * table.vector(t) for t in seg.tokens)
        assert np.allclose(emb.m, oracle / np.linalg.norm(oracle), atol=1e-12)

    def test_empty_segment_is_degenerate(self):
        rng = np.random.default_rng(5)
        _, params, table, cfg = make_instance(rng)
        seg = MultimodalSegment("e", [], np.zeros((0, 5)), np.zeros((0, 3)), np.zeros((0, 2)))
        emb = closed_form_embedding(seg, params, table, cfg)
        assert emb.degenerate
        assert np.array_equal(emb.m, np.zeros(5))
        emb.validate()

    def test_unit_norm_invariant(self):
        rng = np.random.default_rng(6)
        for mode in ("b1", "b2"):
            for _ in range(10):
                seg, params, table, cfg = make_instance(rng, mode=mode)
                emb = closed_form_embedding(seg, params, table, cfg)
                assert abs(np.linalg.norm(emb.m) - 1.0) < 1e-9
                emb.validate()

    def test_normalize_switch_returns_raw_g(self):
        rng = np.random.default_rng(7)
        seg, params, table, cfg = make_instance(rng)
        g = taylor_linear_coefficient(seg, params, table, cfg)
        emb = closed_form_embedding(seg, params, table, cfg, normalize=False)
        assert np.array_equal(emb.m, g)


class TestTaylorCoefficient:
    def test_empty_segment_zero(self):
        rng = np.random.default_rng(8)
        _, params, table, cfg = make_instance(rng)
        seg = MultimodalSegment("e", [], np.zeros((0, 5)), np.zeros((0, 3)), np.zeros((0, 2)))
        assert np.array_equal(taylor_linear_coefficient(seg, params, table, cfg), np.zeros(5))

    def test_identity_transform_recovers_frame(self):
        # one visual frame, W_mu = I, b = 0, b_sigma = 0 -> psi1 = 1, psi2 = 0 -> g = v
        d = 4
        frame = np.array([0.5, -1.0, 2.0, 0.25])
        seg = MultimodalSegment("s", [], np.zeros((0, d)), frame[None, :], np.zeros((0, 0)))
        params = ModelParams({"v": FactorParams("v", np.eye(d), np.ones((d, d)),
                                                np.zeros(d), np.zeros(d))}, d)
        cfg = TemperatureConfig(alpha_w=0.0, alpha_v=1.0, alpha_a=0.0)
        table = WordTable.empty(d)
        g = taylor_linear_coefficient(seg, params, table, cfg, use_pe=False)
        assert np.allclose(g, frame, atol=1e-12)

    def test_consistency_with_closed_form(self):
        rng = np.random.default_rng(9)
        seg, params, table, cfg = make_instance(rng, mode="b2")
        g = taylor_linear_coefficient(seg, params, table, cfg)
        emb = closed_form_embedding(seg, params, table, cfg)
        assert np.allclose(emb.m * np.linalg.norm(g), g, rtol=1e-12)


class TestSolverProperties:
    def test_linearity_over_concatenated_segments(self):
        rng = np.random.default_rng(10)
        seg, params, table, cfg = make_instance(rng, T=6)
        half = MultimodalSegment("h1", seg.tokens[:3], seg.word_vectors[:3],
                                 seg.visual[:3], seg.acoustic[:3])
        rest = MultimodalSegment("h2", seg.tokens[3:], seg.word_vectors[3:],
                                 seg.visual[3:], seg.acoustic[3:])
        g_whole = taylor_linear_coefficient(seg, params, table, cfg, use_pe=False)
        g_parts = (taylor_linear_coefficient(half, params, table, cfg, use_pe=False)
                   + taylor_linear_coefficient(rest, params, table, cfg, use_pe=False))
        assert np.allclose(g_whole, g_parts, rtol=1e-9)

    @given(c=st.floats(min_value=0.01, max_value=50.0))
    @settings(max_examples=25, deadline=None)
    def test_temperature_homogeneity(self, c):
        rng = np.random.default_rng(11)
        seg, params, table, cfg = make_instance(rng, mode="b2", d_m=4, d_v=2, d_a=2, T=3)
        scaled_cfg = TemperatureConfig(
            alpha=cfg.alpha, Z=cfg.Z, mode=cfg.mode,
            **{f"alpha_{f}": getattr(cfg, f"alpha_{f}") * c
               for f in ("w", "v", "a", "wv", "wa", "va", "wva")})
        g = taylor_linear_coefficient(seg, params, table, cfg)
        g_scaled = taylor_linear_coefficient(seg, params, table, scaled_cfg)
        assert np.allclose(g_scaled, c * g, rtol=1e-9)
        m = closed_form_embedding(seg, params, table, cfg).m
        m_scaled = closed_form_embedding(seg, params, table, scaled_cfg).m
        assert np.allclose(m, m_scaled, atol=1e-12)

    def test_b1_b2_consistency(self):
        rng = np.random.default_rng(12)
        seg, params, table, cfg = make_instance(
            rng, mode="b2", alpha_wv=0.0, alpha_wa=0.0, alpha_va=0.0, alpha_wva=0.0)
        b1_cfg = TemperatureConfig(alpha=cfg.alpha, Z=cfg.Z, mode="b1",
                                   alpha_w=cfg.alpha_w, alpha_v=cfg.alpha_v,
                                   alpha_a=cfg.alpha_a)
        b1_params = ModelParams({f: params.factors[f] for f in ("v", "a")}, params.d_m)
        m_b2 = closed_form_embedding(seg, params, table, cfg).m
        m_b1 = closed_form_embedding(seg, b1_params, table, b1_cfg).m
        assert np.array_equal(m_b2, m_b1)

    def test_permutation_invariance_without_pe(self):
        rng = np.random.default_rng(13)
        seg, params, table, cfg = make_instance(rng, T=5)
        perm = rng.permutation(5)
        shuffled = MultimodalSegment(seg.id, seg.tokens, seg.word_vectors,
                                     seg.visual[perm], seg.acoustic, seg.label)
        g0 = taylor_linear_coefficient(seg, params, table, cfg, use_pe=False)
        g1 = taylor_linear_coefficient(shuffled, params, table, cfg, use_pe=False)
        assert np.allclose(g0, g1, rtol=1e-12)

    def test_permutation_sensitivity_with_pe(self):
        rng = np.random.default_rng(14)
        seg, params, table, cfg = make_instance(rng, T=5)
        perm = np.array([4, 2, 0, 3, 1])
        shuffled = MultimodalSegment(seg.id, seg.tokens, seg.word_vectors,
                                     seg.visual[perm], seg.acoustic, seg.label)
        m0 = closed_form_embedding(seg, params, table, cfg, use_pe=True).m
        m1 = closed_form_embedding(shuffled, params, table, cfg, use_pe=True).m
        assert np.linalg.norm(m0 - m1) >= 1e-3

    @pytest.mark.parametrize("mode", ["b1", "b2"])
    def test_sphere_oracle_optimality(self, mode):
        rng = np.random.default_rng(15)
        for trial in range(10):
            seg, params, table, cfg = make_instance(rng, mode=mode, d_m=6, d_v=3, d_a=2)
            g = taylor_linear_coefficient(seg, params, table, cfg)
            m = closed_form_embedding(seg, params, table, cfg).m
            best_val, best_m = sphere_max_oracle(g, seed=trial)
            assert float(g @ m) >= best_val - 1e-6 * abs(best_val)
            assert float(m @ best_m) >= 0.999
