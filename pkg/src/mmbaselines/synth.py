"""Synthetic data generators: model-sampled datasets with known parameters
(for recovery and end-to-end experiments) and quick random segments for
throughput benchmarking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import FactorParams, ModelParams, MultimodalSegment, TemperatureConfig, WordTable


@dataclass
class SyntheticSpec:
    d_m: int = 4
    d_v: int = 8
    d_a: int = 8
    T: int = 20
    vocab_size: int = 0          # 0 disables the word stream
    words_per_segment: int = 0
    word_scale: float = 1.0
    mu_scale: float = 1.0        # column norm of the generating mean weights
    b_mu_scale: float = 0.5
    log_sigma: float = 0.0       # constant generating b_sigma


def _orthogonal_columns(rng: np.random.Generator, d_f: int, d_m: int, scale: float) -> np.ndarray:
    A = rng.normal(size=(d_f, d_m))
    Q, _ = np.linalg.qr(A)
    return Q[:, :d_m] * scale


def sample_true_params(spec: SyntheticSpec, rng: np.random.Generator) -> ModelParams:
    """Generating parameters with orthogonal mean columns, so the weighted
    average of noiseless features points exactly along the true embedding."""
    factors = {}
    for fid, d_f in (("v", spec.d_v), ("a", spec.d_a)):
        factors[fid] = FactorParams(
            factor_id=fid,
            W_mu=_orthogonal_columns(rng, d_f, spec.d_m, spec.mu_scale),
            W_sigma=np.zeros((d_f, spec.d_m)),
            b_mu=rng.normal(0.0, spec.b_mu_scale, size=d_f),
            b_sigma=np.full(d_f, spec.log_sigma),
        )
    return ModelParams(factors=factors, d_m=spec.d_m)


def sample_word_table(spec: SyntheticSpec, rng: np.random.Generator) -> WordTable:
    vocab_size = max(spec.vocab_size, 1)
    vocab = {f"tok{k}": k for k in range(vocab_size)}
    vectors = rng.normal(0.0, spec.word_scale, size=(vocab_size, spec.d_m))
    unigram = np.full(vocab_size, 1.0 / vocab_size)
    return WordTable(vocab=vocab, vectors=vectors, unigram=unigram)


def sample_unit_sphere(rng: np.random.Generator, d: int) -> np.ndarray:
    x = rng.normal(size=d)
    return x / np.linalg.norm(x)


def sample_segments(spec: SyntheticSpec, params: ModelParams, table: WordTable,
                    rng: np.random.Generator, n: int,
                    labeler=None) -> tuple[list[MultimodalSegment], np.ndarray]:
    """Draw n segments: a unit-sphere embedding each, Gaussian continuous
    features around the parametrized means, and (optionally) tokens from the
    log-linear word model. Returns the segments and the true embeddings."""
    segments = []
    true_m = np.empty((n, spec.d_m))
    tokens_all = list(table.vocab)
    for k in range(n):
        m = sample_unit_sphere(rng, spec.d_m)
        true_m[k] = m
        streams = {}
        for fid in ("v", "a"):
            fp = params.factors[fid]
            mu = fp.W_mu @ m + fp.b_mu
            sigma = np.exp(fp.W_sigma @ m + fp.b_sigma)
            streams[fid] = mu + sigma * rng.normal(size=(spec.T, fp.d_f))
        tokens: list[str] = []
        if spec.vocab_size > 0 and spec.words_per_segment > 0:
            logits = table.vectors @ m
            probs = np.exp(logits - logits.max())
            probs /= probs.sum()
            idx = rng.choice(spec.vocab_size, size=spec.words_per_segment, p=probs)
            tokens = [tokens_all[i] for i in idx]
        word_vectors = (np.array([table.vector(t) for t in tokens])
                        if tokens else np.zeros((0, table.dim)))
        label = None if labeler is None else labeler(m)
        segments.append(MultimodalSegment(
            id=f"syn{k:05d}", tokens=tokens, word_vectors=word_vectors,
            visual=streams["v"], acoustic=streams["a"], label=label))
    return segments, true_m


def sign_labeler(direction: np.ndarray):
    """Binary labels from the sign of the true embedding's projection."""
    def labeler(m: np.ndarray) -> int:
        return int(float(direction @ m) >= 0.0)
    return labeler


def benchmark_segments(rng: np.random.Generator, n: int, T: int, d_w: int,
                       d_v: int, d_a: int, tokens_per_segment: int = 0,
                       table: WordTable | None = None) -> list[MultimodalSegment]:
    """Structureless random segments for throughput measurement."""
    segments = []
    names = list(table.vocab) if table is not None else []
    for k in range(n):
        tokens = []
        word_vectors = np.zeros((0, d_w))
        if table is not None and tokens_per_segment > 0:
            idx = rng.integers(0, len(names), size=tokens_per_segment)
            tokens = [names[i] for i in idx]
            word_vectors = table.vectors[idx]
        segments.append(MultimodalSegment(
            id=f"bench{k:06d}", tokens=tokens, word_vectors=word_vectors,
            visual=rng.normal(size=(T, d_v)), acoustic=rng.normal(size=(T, d_a))))
    return segments
