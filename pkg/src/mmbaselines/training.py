"""Coordinate-ascent fitting: alternate the closed-form embedding step with
adaptive-moment ascent on the linear transformation parameters.

Initialization matches each factor's Gaussian to the data marginals (bias
mean = feature mean, bias log-scale = feature log standard deviation) so the
first closed-form pass starts from sensible weights.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from . import pipeline, solver
from .errors import ConfigError, NumericError
from .gradients import FactorGradients, segment_param_gradients
from .likelihood import dataset_log_likelihood
from .types import (EPS_SIGMA, FactorParams, ModelParams, MultimodalSegment,
                    TemperatureConfig, WordTable)

log = logging.getLogger(__name__)

PARAM_NAMES = ("W_mu", "W_sigma", "b_mu", "b_sigma")


@dataclass
class FitConfig:
    iterations: int = 20
    lr: float = 1e-3
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    adaptive: bool = True
    rel_tol: float = 1e-6      # early stop when |dL| < rel_tol * |L|
    use_pe: bool = True
    init_scale: float = 0.01   # uniform(-s, s) weight init


@dataclass
class OptimizerState:
    """Per-parameter first/second moment accumulators plus the step counter."""

    m1: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    m2: dict[tuple[str, str], np.ndarray] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "OptimizerState":
        state = cls()
        for fid, fp in params.factors.items():
            for name in PARAM_NAMES:
                state.m1[(fid, name)] = np.zeros_like(getattr(fp, name))
                state.m2[(fid, name)] = np.zeros_like(getattr(fp, name))
        return state


@dataclass
class TrainState:
    params: ModelParams
    embeddings: dict[str, np.ndarray]
    opt: OptimizerState
    iteration: int = 0
    objective_history: list[float] = field(default_factory=list)


def _grad_arrays(g: FactorGradients) -> dict[str, np.ndarray]:
    return {"W_mu": g.dW_mu, "W_sigma": g.dW_sigma, "b_mu": g.db_mu, "b_sigma": g.db_sigma}


def apply_gradient_step(state: TrainState, grads: dict[str, FactorGradients],
                        lr: float, beta1: float = 0.9, beta2: float = 0.999,
                        eps: float = 1e-8, adaptive: bool = True) -> TrainState:
    """Ascent step on the log-likelihood; gradients point uphill.

    With adaptive moments enabled this is Adam with bias correction; disabled,
    a plain `param += lr * grad` step. Mutates and returns the state."""
    for fid, g in grads.items():
        for name, arr in _grad_arrays(g).items():
            if not np.isfinite(arr).all():
                bad = np.argwhere(~np.isfinite(np.atleast_1d(arr)))[0]
                raise NumericError(f"non-finite gradient for factor {fid!r}, parameter "
                                   f"{name}, entry {tuple(int(i) for i in bad)}")
    if adaptive:
        state.opt.t += 1
        t = state.opt.t
    for fid, g in grads.items():
        fp = state.params.factors[fid]
        for name, grad in _grad_arrays(g).items():
            param = getattr(fp, name)
            if not adaptive:
                param += lr * grad
                continue
            key = (fid, name)
            m1 = state.opt.m1[key]
            m2 = state.opt.m2[key]
            m1 *= beta1
            m1 += (1.0 - beta1) * grad
            m2 *= beta2
            m2 += (1.0 - beta2) * grad * grad
            m1_hat = m1 / (1.0 - beta1 ** t)
            m2_hat = m2 / (1.0 - beta2 ** t)
            param += lr * m1_hat / (np.sqrt(m2_hat) + eps)
    return state


def initialize_params(segments: list[MultimodalSegment], cfg: TemperatureConfig,
                      d_m: int, seed: int = 0, init_scale: float = 0.01,
                      use_pe: bool = True) -> ModelParams:
    """Seeded parameter init: small uniform weights, biases from the pooled
    per-dimension feature mean and log standard deviation of each factor."""
    rng = np.random.default_rng(seed)
    factors: dict[str, FactorParams] = {}
    for fid in cfg.gaussian_factors():
        pooled = [pipeline.factor_features(seg, fid, use_pe=use_pe) for seg in segments]
        pooled = [X for X in pooled if X.shape[0] > 0]
        if not pooled:
            continue
        X = np.vstack(pooled)
        d_f = X.shape[1]
        b_mu = X.mean(axis=0)
        b_sigma = np.log(np.maximum(X.std(axis=0), EPS_SIGMA))
        factors[fid] = FactorParams(
            factor_id=fid,
            W_mu=rng.uniform(-init_scale, init_scale, size=(d_f, d_m)),
            W_sigma=rng.uniform(-init_scale, init_scale, size=(d_f, d_m)),
            b_mu=b_mu,
            b_sigma=b_sigma,
        )
    return ModelParams(factors=factors, d_m=d_m)


def _accumulate_gradients(segments: list[MultimodalSegment], embeddings: dict[str, np.ndarray],
                          params: ModelParams, table: WordTable, cfg: TemperatureConfig,
                          use_pe: bool) -> dict[str, FactorGradients]:
    """Mean gradient over segments, accumulated in fixed dataset order."""
    total: dict[str, FactorGradients] = {
        fid: FactorGradients.zeros_like(fp) for fid, fp in params.factors.items()}
    for seg in segments:
        for fid, g in segment_param_gradients(seg, embeddings[seg.id], params, table,
                                              cfg, use_pe=use_pe).items():
            total[fid].add_(g)
    n = len(segments)
    return {fid: g.scaled(1.0 / n) for fid, g in total.items()}


def coordinate_ascent_fit(segments: list[MultimodalSegment], table: WordTable,
                          cfg: TemperatureConfig, hyper: FitConfig,
                          d_m: int) -> TrainState:
    """Alternate closed-form embeddings with a parameter ascent step,
    recording the full objective after each iteration.

    If the objective turns non-finite the last finite state is returned. The
    final embeddings are recomputed under the final parameters."""
    if not segments:
        raise ConfigError("coordinate ascent needs a non-empty dataset")
    cfg.validate()
    params = initialize_params(segments, cfg, d_m, seed=hyper.seed,
                               init_scale=hyper.init_scale, use_pe=hyper.use_pe)
    params.validate(cfg)
    state = TrainState(params=params, embeddings={}, opt=OptimizerState.for_params(params))

    for _ in range(hyper.iterations):
        snapshot = state.params.copy()
        embeddings = solver.embed_segments(segments, state.params, table, cfg,
                                           use_pe=hyper.use_pe)
        grads = _accumulate_gradients(segments, embeddings, state.params, table, cfg,
                                      hyper.use_pe)
        apply_gradient_step(state, grads, hyper.lr, beta1=hyper.beta1, beta2=hyper.beta2,
                            eps=hyper.adam_eps, adaptive=hyper.adaptive)
        objective = dataset_log_likelihood(segments, embeddings, state.params, table, cfg,
                                           use_pe=hyper.use_pe)
        if not np.isfinite(objective):
            log.warning("objective became non-finite at iteration %d; keeping last good state",
                        state.iteration + 1)
            state.params = snapshot
            break
        state.embeddings = embeddings
        state.iteration += 1
        state.objective_history.append(float(objective))
        if len(state.objective_history) >= 2:
            prev, cur = state.objective_history[-2], state.objective_history[-1]
            if abs(cur - prev) < hyper.rel_tol * abs(cur):
                break

    state.embeddings = solver.embed_segments(segments, state.params, table, cfg,
                                             use_pe=hyper.use_pe)
    return state


def parameter_count(params: ModelParams) -> int:
    return params.parameter_count()


# ---------------------------------------------------------------------------
# Checkpoint container: a .npz archive holding every parameter and optimizer
# tensor under "factor__<id>__<name>" / "opt__m{1,2}__<id>__<name>" keys (the
# arrays carry their own dimension headers), the objective history, and a
# JSON metadata string with the temperature config, mode, and counters.
# ---------------------------------------------------------------------------

def save_checkpoint(path: str, state: TrainState, cfg: TemperatureConfig,
                    use_pe: bool = True) -> None:
    arrays: dict[str, np.ndarray] = {}
    for fid, fp in state.params.factors.items():
        for name in PARAM_NAMES:
            arrays[f"factor__{fid}__{name}"] = getattr(fp, name)
    for (fid, name), arr in state.opt.m1.items():
        arrays[f"opt__m1__{fid}__{name}"] = arr
    for (fid, name), arr in state.opt.m2.items():
        arrays[f"opt__m2__{fid}__{name}"] = arr
    arrays["objective_history"] = np.array(state.objective_history, dtype=float)
    meta = {
        "d_m": state.params.d_m,
        "iteration": state.iteration,
        "opt_t": state.opt.t,
        "use_pe": use_pe,
        "factor_ids": sorted(state.params.factors),
        "temperatures": {
            "alpha": cfg.alpha, "Z": cfg.Z, "mode": cfg.mode,
            **{f"alpha_{fid}": getattr(cfg, f"alpha_{fid}")
               for fid in ("w", "v", "a", "wv", "wa", "va", "wva")},
        },
    }
    arrays["meta_json"] = np.array(json.dumps(meta))
    np.savez(path, **arrays)


def load_checkpoint(path: str) -> tuple[TrainState, TemperatureConfig, bool]:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta_json"]))
        temps = meta["temperatures"]
        cfg = TemperatureConfig(
            alpha=temps["alpha"], Z=temps["Z"], mode=temps["mode"],
            **{k: temps[k] for k in temps if k.startswith("alpha_")})
        factors = {}
        for fid in meta["factor_ids"]:
            factors[fid] = FactorParams(
                factor_id=fid,
                **{name: data[f"factor__{fid}__{name}"] for name in PARAM_NAMES})
        params = ModelParams(factors=factors, d_m=int(meta["d_m"]))
        opt = OptimizerState(t=int(meta["opt_t"]))
        for fid in meta["factor_ids"]:
            for name in PARAM_NAMES:
                opt.m1[(fid, name)] = data[f"opt__m1__{fid}__{name}"]
                opt.m2[(fid, name)] = data[f"opt__m2__{fid}__{name}"]
        history = [float(x) for x in data["objective_history"]]
    state = TrainState(params=params, embeddings={}, opt=opt,
                       iteration=int(meta["iteration"]), objective_history=history)
    return state, cfg, bool(meta.get("use_pe", True))
