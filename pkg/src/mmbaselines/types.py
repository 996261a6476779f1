"""Domain types shared across the package.

Conventions:
  * An utterance embedding lives in R^{d_m} and is unit-norm, except for the
    degenerate all-zero embedding.
  * Gaussian factor ids are 'v', 'a' for the unimodal continuous streams and
    'wv', 'wa', 'va', 'wva' for the concatenated ones. The word factor 'w' is
    log-linear and carries no learnable parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, DataError, DimensionError, NumericError

EPS_SIGMA = 1e-6

UNIMODAL_GAUSSIAN_FACTORS = ("v", "a")
MULTIMODAL_FACTORS = ("wv", "wa", "va", "wva")
GAUSSIAN_FACTORS = UNIMODAL_GAUSSIAN_FACTORS + MULTIMODAL_FACTORS

# Which streams make up each gaussian factor, in concatenation order.
FACTOR_STREAMS = {
    "v": ("visual",),
    "a": ("acoustic",),
    "wv": ("words", "visual"),
    "wa": ("words", "acoustic"),
    "va": ("visual", "acoustic"),
    "wva": ("words", "visual", "acoustic"),
}


@dataclass
class MultimodalSegment:
    """One utterance: tokens with their (fixed) word vectors plus aligned
    visual and acoustic feature sequences, and an optional label."""

    id: str
    tokens: list[str]
    word_vectors: np.ndarray  # (T_w, d_w)
    visual: np.ndarray        # (T_v, d_v)
    acoustic: np.ndarray      # (T_a, d_a)
    label: float | int | None = None

    def validate(self, require_equal_lengths: bool = False) -> None:
        if len(self.tokens) != self.word_vectors.shape[0]:
            raise DataError(f"segment {self.id}: {len(self.tokens)} tokens but "
                            f"{self.word_vectors.shape[0]} word vectors")
        for name in ("word_vectors", "visual", "acoustic"):
            arr = getattr(self, name)
            if arr.ndim != 2:
                raise DataError(f"segment {self.id}: {name} must be 2-d, got shape {arr.shape}")
            if arr.size and not np.isfinite(arr).all():
                raise DataError(f"segment {self.id}: non-finite value in {name}")
        if require_equal_lengths:
            lengths = {len(self.tokens), self.visual.shape[0], self.acoustic.shape[0]}
            if len(lengths) != 1 or 0 in lengths:
                raise DataError(
                    f"segment {self.id}: bimodal/trimodal factors need equal stream "
                    f"lengths >= 1, got words={len(self.tokens)} "
                    f"visual={self.visual.shape[0]} acoustic={self.acoustic.shape[0]}")

    def stream(self, name: str) -> np.ndarray:
        return self.word_vectors if name == "words" else getattr(self, name)


@dataclass
class WordTable:
    """Pretrained word vectors plus unigram probabilities.

    Tokens that never occurred in the unigram corpus keep probability 0,
    which gives them the maximum closed-form weight."""

    vocab: dict[str, int]               # token -> row index
    vectors: np.ndarray                 # (|V|, d_w)
    unigram: np.ndarray                 # (|V|,) probabilities

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def index(self, token: str) -> int:
        try:
            return self.vocab[token]
        except KeyError:
            raise DataError(f"unknown token {token!r}: not in the word table") from None

    def vector(self, token: str) -> np.ndarray:
        return self.vectors[self.index(token)]

    def prob(self, token: str) -> float:
        return float(self.unigram[self.index(token)])

    def validate(self) -> None:
        n = len(self.vocab)
        if self.vectors.shape[0] != n or self.unigram.shape[0] != n:
            raise DataError(f"word table size mismatch: {n} tokens, "
                            f"{self.vectors.shape[0]} vectors, {self.unigram.shape[0]} unigram entries")
        if n and abs(float(self.unigram.sum()) - 1.0) > 1e-9:
            raise DataError(f"unigram probabilities sum to {self.unigram.sum()!r}, expected 1")
        if n and not np.isfinite(self.vectors).all():
            raise DataError("non-finite word vector in table")

    def with_unigram(self, probs: dict[str, float]) -> "WordTable":
        """Return a copy whose unigram column is filled from a token->prob map."""
        unigram = np.zeros(len(self.vocab))
        for token, p in probs.items():
            if token in self.vocab:
                unigram[self.vocab[token]] = p
        return replace(self, unigram=unigram)

    @classmethod
    def empty(cls, dim: int) -> "WordTable":
        return cls(vocab={}, vectors=np.zeros((0, dim)), unigram=np.zeros(0))


@dataclass
class TemperatureConfig:
    """Smoothing and per-factor temperature hyperparameters.

    Only beta = (1 - alpha) / (alpha * Z) enters the closed form, so beta is
    the user-facing smoothing knob; (alpha, Z) are stored consistently with it.
    """

    alpha: float = 0.5
    Z: float = 1000.0            # beta = 1e-3 with alpha = 0.5
    alpha_w: float = 1.0
    alpha_v: float = 1.0
    alpha_a: float = 1.0
    alpha_wv: float = 1.0
    alpha_wa: float = 1.0
    alpha_va: float = 1.0
    alpha_wva: float = 1.0
    mode: str = "b1"

    @classmethod
    def from_beta(cls, beta: float, alpha: float = 0.5, **kwargs) -> "TemperatureConfig":
        if beta <= 0:
            raise ConfigError(f"beta must be positive, got {beta}")
        return cls(alpha=alpha, Z=(1.0 - alpha) / (alpha * beta), **kwargs)

    @property
    def beta(self) -> float:
        return (1.0 - self.alpha) / (self.alpha * self.Z)

    def temperature(self, factor_id: str) -> float:
        if self.mode == "b1" and factor_id in MULTIMODAL_FACTORS:
            return 0.0
        return getattr(self, f"alpha_{factor_id}")

    def gaussian_factors(self) -> tuple[str, ...]:
        return GAUSSIAN_FACTORS if self.mode == "b2" else UNIMODAL_GAUSSIAN_FACTORS

    def validate(self) -> None:
        if self.mode not in ("b1", "b2"):
            raise ConfigError(f"mode must be 'b1' or 'b2', got {self.mode!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"smoothing alpha must lie in (0, 1), got {self.alpha}")
        if self.Z <= 0:
            raise ConfigError(f"partition constant Z must be positive, got {self.Z}")
        for fid in ("w",) + GAUSSIAN_FACTORS:
            if getattr(self, f"alpha_{fid}") < 0:
                raise ConfigError(f"temperature alpha_{fid} must be nonnegative")

    def without_continuous_factors(self) -> "TemperatureConfig":
        """Text-only ablation: zero every temperature except the word factor's."""
        return replace(self, alpha_v=0.0, alpha_a=0.0, alpha_wv=0.0,
                       alpha_wa=0.0, alpha_va=0.0, alpha_wva=0.0)


@dataclass
class FactorParams:
    """Per-factor linear transformation parameters of the Gaussian likelihood."""

    factor_id: str
    W_mu: np.ndarray     # (d_f, d_m)
    W_sigma: np.ndarray  # (d_f, d_m)
    b_mu: np.ndarray     # (d_f,)
    b_sigma: np.ndarray  # (d_f,)

    @property
    def d_f(self) -> int:
        return self.W_mu.shape[0]

    @property
    def d_m(self) -> int:
        return self.W_mu.shape[1]

    def validate(self) -> None:
        d_f, d_m = self.W_mu.shape
        if self.W_sigma.shape != (d_f, d_m):
            raise DimensionError(f"factor {self.factor_id}: W_sigma shape {self.W_sigma.shape} "
                                 f"!= W_mu shape {(d_f, d_m)}")
        if self.b_mu.shape != (d_f,) or self.b_sigma.shape != (d_f,):
            raise DimensionError(f"factor {self.factor_id}: bias shapes "
                                 f"{self.b_mu.shape}/{self.b_sigma.shape} do not match d_f={d_f}")
        for name in ("W_mu", "W_sigma", "b_mu", "b_sigma"):
            if not np.isfinite(getattr(self, name)).all():
                raise NumericError(f"non-finite entries in {name} of factor {self.factor_id!r}")

    def copy(self) -> "FactorParams":
        return FactorParams(self.factor_id, self.W_mu.copy(), self.W_sigma.copy(),
                            self.b_mu.copy(), self.b_sigma.copy())


@dataclass
class ModelParams:
    """All learnable parameters: one FactorParams per Gaussian factor."""

    factors: dict[str, FactorParams]
    d_m: int

    def factor(self, factor_id: str) -> FactorParams:
        try:
            return self.factors[factor_id]
        except KeyError:
            raise ConfigError(f"no parameters for active factor {factor_id!r}") from None

    def validate(self, cfg: TemperatureConfig | None = None) -> None:
        for fid, fp in self.factors.items():
            fp.validate()
            if fp.d_m != self.d_m:
                raise DimensionError(f"factor {fid}: d_m={fp.d_m} != model d_m={self.d_m}")
        if cfg is not None:
            for fid in cfg.gaussian_factors():
                if cfg.temperature(fid) > 0 and fid not in self.factors:
                    raise ConfigError(f"mode {cfg.mode}: factor {fid!r} has temperature "
                                      f"{cfg.temperature(fid)} but no parameters")

    def copy(self) -> "ModelParams":
        return ModelParams({fid: fp.copy() for fid, fp in self.factors.items()}, self.d_m)

    def parameter_count(self) -> int:
        """Total learnable scalar count: sum over factors of 2*d_f*d_m + 2*d_f."""
        return sum(2 * fp.d_f * fp.d_m + 2 * fp.d_f for fp in self.factors.values())


@dataclass
class UtteranceEmbedding:
    """Unit-norm segment embedding; all-zero (degenerate) when nothing weighs in."""

    m: np.ndarray
    degenerate: bool = False

    def validate(self) -> None:
        if self.degenerate:
            if np.any(self.m != 0.0):
                raise NumericError("degenerate embedding must be exactly zero")
        else:
            norm = float(np.linalg.norm(self.m))
            if abs(norm - 1.0) > 1e-9:
                raise NumericError(f"embedding norm {norm} is not 1 within 1e-9")
