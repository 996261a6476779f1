"""Closed-form (approximate) maximum-likelihood embeddings.

Linearizing each factor's log density around the zero embedding turns the
objective into constant + <m, g>; maximizing over the unit sphere gives
m = g / ||g||. The coefficient g is a weighted average: rare words weigh
more, and each continuous feature dimension is scaled inversely by its
baseline variance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pipeline
from .errors import DimensionError
from .types import (FactorParams, ModelParams, MultimodalSegment, TemperatureConfig,
                    UtteranceEmbedding, WordTable)


def psi_word(p_w: float, cfg: TemperatureConfig) -> float:
    """Per-word weight alpha_w * beta / (p(w) + beta); maximal for unseen words."""
    beta = cfg.beta
    return cfg.alpha_w * beta / (p_w + beta)


def psi_factor(fp: FactorParams, alpha_f: float) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal weights of one continuous factor.

    psi1 scales the shifted features, psi2 the squared shifted features that
    the Gaussian's quadratic term introduces."""
    psi1 = alpha_f * np.exp(-2.0 * fp.b_sigma)
    return psi1, psi1 - alpha_f


@dataclass
class ShiftedFeatures:
    """Features shifted by the factor's base mean, and their square."""

    x1: np.ndarray
    x2: np.ndarray


def shifted_features(x: np.ndarray, b_mu: np.ndarray) -> ShiftedFeatures:
    x1 = x - b_mu
    return ShiftedFeatures(x1=x1, x2=x1 * x1)


@dataclass
class PsiWeights:
    """All closed-form weights for a given parameter/temperature setting."""

    psi_w: dict[str, float]
    psi1: dict[str, np.ndarray]
    psi2: dict[str, np.ndarray]


def compute_psi_weights(params: ModelParams, table: WordTable, cfg: TemperatureConfig) -> PsiWeights:
    psi_w = {token: psi_word(float(table.unigram[idx]), cfg) for token, idx in table.vocab.items()}
    psi1, psi2 = {}, {}
    for fid in cfg.gaussian_factors():
        if cfg.temperature(fid) == 0.0 or fid not in params.factors:
            continue
        psi1[fid], psi2[fid] = psi_factor(params.factors[fid], cfg.temperature(fid))
    return PsiWeights(psi_w=psi_w, psi1=psi1, psi2=psi2)


def taylor_linear_coefficient(seg: MultimodalSegment, params: ModelParams, table: WordTable,
                              cfg: TemperatureConfig, use_pe: bool = True) -> np.ndarray:
    """The un-normalized weighted-average vector g.

    g accumulates psi_w-weighted word vectors plus, per continuous factor,
    W_mu' (psi1 * shifted) + W_sigma' (psi2 * shifted^2) summed over time."""
    g = np.zeros(params.d_m)
    if cfg.alpha_w > 0.0 and seg.tokens:
        if seg.word_vectors.shape[1] != params.d_m:
            raise DimensionError(f"word vectors have dimension {seg.word_vectors.shape[1]} "
                                 f"but the word factor needs them in the embedding "
                                 f"space (d_m={params.d_m})")
        for token, vec in zip(seg.tokens, seg.word_vectors):
            g = g + psi_word(table.prob(token), cfg) * vec
    for fid in cfg.gaussian_factors():
        alpha_f = cfg.temperature(fid)
        if alpha_f == 0.0:
            continue
        X = pipeline.factor_features(seg, fid, use_pe=use_pe)
        if X.shape[0] == 0:
            continue
        fp = params.factor(fid)
        psi1, psi2 = psi_factor(fp, alpha_f)
        shifted = shifted_features(X, fp.b_mu)
        g = g + fp.W_mu.T @ (psi1 * shifted.x1).sum(axis=0)
        g = g + fp.W_sigma.T @ (psi2 * shifted.x2).sum(axis=0)
    return g


def closed_form_embedding(seg: MultimodalSegment, params: ModelParams, table: WordTable,
                          cfg: TemperatureConfig, use_pe: bool = True,
                          normalize: bool = True) -> UtteranceEmbedding:
    """Unit-sphere maximizer g / ||g|| of the linearized objective.

    A zero g (empty segment, all-zero temperatures) yields the zero embedding
    flagged degenerate so batch pipelines can proceed."""
    g = taylor_linear_coefficient(seg, params, table, cfg, use_pe=use_pe)
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        return UtteranceEmbedding(m=np.zeros(params.d_m), degenerate=True)
    return UtteranceEmbedding(m=g / norm if normalize else g, degenerate=False)


def embed_segments(segments: list[MultimodalSegment], params: ModelParams, table: WordTable,
                   cfg: TemperatureConfig, use_pe: bool = True,
                   normalize: bool = True) -> dict[str, np.ndarray]:
    """Closed-form embeddings for a whole dataset, keyed by segment id."""
    return {seg.id: closed_form_embedding(seg, params, table, cfg,
                                          use_pe=use_pe, normalize=normalize).m
            for seg in segments}
