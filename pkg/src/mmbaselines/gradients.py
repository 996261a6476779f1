"""Analytic gradients of the objective with respect to the linear
transformation parameters, plus a central-difference oracle used to pin their
exact index semantics in the tests.

Per factor, with residual r = x - mu and the (floored) scale sigma, summed
over time steps:

    d/db_mu    = alpha_f * r / sigma^2
    d/db_sigma = -alpha_f * (1 - r^2 / sigma^2)
    d/dW_mu    = (d/db_mu)    outer m
    d/dW_sigma = (d/db_sigma) outer m

The b_sigma form already absorbs the chain-rule factor of the exponential
scale parametrization. Where the scale floor binds, the scale is locally
constant and the corresponding entries are zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import pipeline
from .errors import DimensionError
from .likelihood import gaussian_factor_distribution
from .types import EPS_SIGMA, FactorParams, ModelParams, MultimodalSegment, TemperatureConfig, WordTable


@dataclass
class FactorGradients:
    """Gradient slices matching one factor's parameter shapes."""

    dW_mu: np.ndarray
    dW_sigma: np.ndarray
    db_mu: np.ndarray
    db_sigma: np.ndarray

    def scaled(self, c: float) -> "FactorGradients":
        return FactorGradients(self.dW_mu * c, self.dW_sigma * c,
                               self.db_mu * c, self.db_sigma * c)

    def add_(self, other: "FactorGradients") -> None:
        self.dW_mu += other.dW_mu
        self.dW_sigma += other.dW_sigma
        self.db_mu += other.db_mu
        self.db_sigma += other.db_sigma

    @classmethod
    def zeros_like(cls, fp: FactorParams) -> "FactorGradients":
        return cls(np.zeros_like(fp.W_mu), np.zeros_like(fp.W_sigma),
                   np.zeros_like(fp.b_mu), np.zeros_like(fp.b_sigma))


def factor_param_gradients(X: np.ndarray, m: np.ndarray, fp: FactorParams,
                           alpha_f: float) -> FactorGradients:
    """Gradients of one factor's temperature-weighted Gaussian term, summed
    over the rows of the (T, d_f) feature sequence."""
    if X.ndim != 2 or X.shape[1] != fp.d_f:
        raise DimensionError(f"factor {fp.factor_id}: features shape {X.shape} "
                             f"incompatible with d_f={fp.d_f}")
    mu, sigma = gaussian_factor_distribution(m, fp)
    T = X.shape[0]
    R = X - mu
    inv_var = 1.0 / (sigma * sigma)
    db_mu = alpha_f * inv_var * R.sum(axis=0)
    db_sigma = -alpha_f * (T - inv_var * (R * R).sum(axis=0))
    floored = np.exp(fp.W_sigma @ m + fp.b_sigma) < EPS_SIGMA
    db_sigma = np.where(floored, 0.0, db_sigma)
    return FactorGradients(dW_mu=np.outer(db_mu, m), dW_sigma=np.outer(db_sigma, m),
                           db_mu=db_mu, db_sigma=db_sigma)


def segment_param_gradients(seg: MultimodalSegment, m: np.ndarray, params: ModelParams,
                            table: WordTable, cfg: TemperatureConfig,
                            use_pe: bool = True) -> dict[str, FactorGradients]:
    """Per-factor gradients of one segment's log-likelihood. The word factor
    has no learnable parameters and contributes nothing here."""
    grads: dict[str, FactorGradients] = {}
    for fid in cfg.gaussian_factors():
        alpha_f = cfg.temperature(fid)
        if alpha_f == 0.0:
            continue
        X = pipeline.factor_features(seg, fid, use_pe=use_pe)
        if X.shape[0] == 0:
            continue
        grads[fid] = factor_param_gradients(X, m, params.factor(fid), alpha_f)
    return grads


def finite_difference_oracle(f: Callable[[np.ndarray], float], point: np.ndarray,
                             h: float = 1e-5) -> np.ndarray:
    """Central differences (f(x + h e) - f(x - h e)) / 2h, entry by entry."""
    if h <= 0:
        raise ValueError("finite-difference step h must be positive")
    point = np.asarray(point, dtype=float)
    grad = np.zeros_like(point)
    it = np.nditer(point, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        bumped = point.copy()
        bumped[idx] = point[idx] + h
        f_plus = f(bumped)
        bumped[idx] = point[idx] - h
        f_minus = f(bumped)
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
        it.iternext()
    return grad
