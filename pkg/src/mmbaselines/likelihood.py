"""Likelihood evaluation for the factorized utterance models.

A segment's log-likelihood is a temperature-weighted sum over factors: the
word factor uses a smoothed log-linear model under a constant partition
approximation, every continuous factor a diagonal Gaussian whose mean and
log-scale are linear in the embedding.
"""

from __future__ import annotations

import math

import numpy as np

from . import pipeline
from .errors import DimensionError, NumericError
from .types import EPS_SIGMA, FactorParams, ModelParams, MultimodalSegment, TemperatureConfig, WordTable

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def word_log_prob(token: str, m: np.ndarray, table: WordTable, cfg: TemperatureConfig) -> float:
    """log[ alpha p(w) + (1 - alpha) exp(<v_w, m>) / Z ] for one token."""
    p = table.prob(token)
    value = cfg.alpha * p + (1.0 - cfg.alpha) * math.exp(float(table.vector(token) @ m)) / cfg.Z
    if value <= 0.0:
        raise NumericError(f"word probability {value} for token {token!r} is not positive")
    return math.log(value)


def gaussian_factor_distribution(m: np.ndarray, fp: FactorParams) -> tuple[np.ndarray, np.ndarray]:
    """Mean and per-dimension scale of one factor's Gaussian at embedding m.

    The scale is floored at EPS_SIGMA to keep likelihoods, closed-form
    weights, and gradients well conditioned."""
    if m.shape != (fp.d_m,):
        raise DimensionError(f"factor {fp.factor_id}: embedding shape {m.shape} != ({fp.d_m},)")
    mu = fp.W_mu @ m + fp.b_mu
    sigma = np.maximum(np.exp(fp.W_sigma @ m + fp.b_sigma), EPS_SIGMA)
    return mu, sigma


def gaussian_log_prob(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Sum of per-coordinate diagonal-Gaussian log densities."""
    if np.any(sigma <= 0.0):
        raise NumericError("gaussian scale must be strictly positive")
    z = (x - mu) / sigma
    return float(np.sum(-_LOG_SQRT_2PI - np.log(sigma) - 0.5 * z * z))


def _sequence_log_prob(X: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> float:
    """Gaussian log density summed over the rows of a (T, d) sequence."""
    Z = (X - mu) / sigma
    per_dim = -_LOG_SQRT_2PI - np.log(sigma)
    return float(X.shape[0] * np.sum(per_dim) - 0.5 * np.sum(Z * Z))


def segment_log_likelihood(seg: MultimodalSegment, m: np.ndarray, params: ModelParams,
                           table: WordTable, cfg: TemperatureConfig,
                           use_pe: bool = True) -> float:
    """Temperature-weighted log-likelihood of one segment at embedding m.

    Factors with zero temperature or an empty feature sequence contribute
    nothing. Mode b2 adds the concatenated bimodal/trimodal Gaussian factors.
    """
    total = 0.0
    if cfg.alpha_w > 0.0 and seg.tokens:
        total += cfg.alpha_w * sum(word_log_prob(t, m, table, cfg) for t in seg.tokens)
    for fid in cfg.gaussian_factors():
        alpha_f = cfg.temperature(fid)
        if alpha_f == 0.0:
            continue
        X = pipeline.factor_features(seg, fid, use_pe=use_pe)
        if X.shape[0] == 0:
            continue
        mu, sigma = gaussian_factor_distribution(m, params.factor(fid))
        if X.shape[1] != mu.shape[0]:
            raise DimensionError(f"factor {fid}: features have dimension {X.shape[1]}, "
                                 f"parameters expect {mu.shape[0]}")
        total += alpha_f * _sequence_log_prob(X, mu, sigma)
    return total


def dataset_log_likelihood(segments: list[MultimodalSegment], embeddings: dict[str, np.ndarray],
                           params: ModelParams, table: WordTable, cfg: TemperatureConfig,
                           use_pe: bool = True) -> float:
    """Full objective: sum of segment log-likelihoods at their embeddings."""
    return sum(segment_log_likelihood(seg, embeddings[seg.id], params, table, cfg, use_pe=use_pe)
               for seg in segments)
