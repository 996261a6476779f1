"""Shared fixture builders and independent oracles for the test suite.

The oracles here intentionally avoid the library's vectorized code paths:
scalar math, explicit loops, and a projected-gradient maximizer are the
reference implementations the fast paths are checked against.
"""

import math

import numpy as np

from mmbaselines import FactorParams, ModelParams, MultimodalSegment, TemperatureConfig, WordTable

EPS_SIGMA = 1e-6


def make_table(rng, vocab_size=6, d_w=5):
    vectors = rng.normal(size=(vocab_size, d_w))
    unigram = rng.uniform(0.1, 1.0, size=vocab_size)
    unigram /= unigram.sum()
    return WordTable({f"t{k}": k for k in range(vocab_size)}, vectors, unigram)


def make_instance(rng, mode="b1", d_m=5, d_v=3, d_a=2, T=4, with_words=True,
                  param_scale=0.5, **cfg_kwargs):
    """A random segment + parameters + table + temperatures. Word vectors are
    d_m-dimensional since the word factor lives in the embedding space."""
    table = make_table(rng, d_w=d_m)
    tokens = [f"t{rng.integers(0, len(table.vocab))}" for _ in range(T)] if with_words else []
    wv = np.array([table.vector(t) for t in tokens]) if tokens else np.zeros((0, d_m))
    seg = MultimodalSegment("s0", tokens, wv,
                            rng.normal(size=(T, d_v)), rng.normal(size=(T, d_a)))
    defaults = dict(alpha=0.5, Z=2.0, mode=mode, alpha_w=0.7, alpha_v=1.3, alpha_a=0.9,
                    alpha_wv=0.5, alpha_wa=0.6, alpha_va=0.4, alpha_wva=0.3)
    defaults.update(cfg_kwargs)
    cfg = TemperatureConfig(**defaults)
    dims = {"v": d_v, "a": d_a, "wv": d_m + d_v, "wa": d_m + d_a, "va": d_v + d_a,
            "wva": d_m + d_v + d_a}
    factors = {}
    for fid in cfg.gaussian_factors():
        d_f = dims[fid]
        factors[fid] = FactorParams(
            fid,
            rng.normal(size=(d_f, d_m)) * param_scale,
            rng.normal(size=(d_f, d_m)) * param_scale * 0.6,
            rng.normal(size=d_f),
            rng.normal(size=d_f) * 0.4,
        )
    return seg, ModelParams(factors, d_m), table, cfg


def unit_vector(rng, d):
    x = rng.normal(size=d)
    return x / np.linalg.norm(x)


# ---------------------------------------------------------------------------
# independent oracles
# ---------------------------------------------------------------------------

def pe_entry_oracle(pos, k, d):
    """Scalar positional-encoding entry: sin for even columns, cos for odd,
    the pair sharing the frequency 10000^(2i/d)."""
    exponent = (k // 2) * 2 / d
    angle = pos / (10000.0 ** exponent)
    return math.sin(angle) if k % 2 == 0 else math.cos(angle)


def word_log_prob_oracle(token, m, table, cfg):
    p = table.prob(token)
    dot = sum(float(v) * float(x) for v, x in zip(table.vector(token), m))
    return math.log(cfg.alpha * p + (1.0 - cfg.alpha) * math.exp(dot) / cfg.Z)


def gaussian_log_prob_oracle(x, mu, sigma):
    total = 0.0
    for xi, mi, si in zip(x, mu, sigma):
        total += -math.log(math.sqrt(2.0 * math.pi) * si) - (xi - mi) ** 2 / (2.0 * si ** 2)
    return total


def _factor_features_oracle(seg, fid, use_pe):
    """Explicit-loop factor feature construction (concat, then per-factor PE)."""
    streams = {"v": ["visual"], "a": ["acoustic"], "wv": ["words", "visual"],
               "wa": ["words", "acoustic"], "va": ["visual", "acoustic"],
               "wva": ["words", "visual", "acoustic"]}[fid]
    arrays = [seg.word_vectors if s == "words" else getattr(seg, s) for s in streams]
    T = arrays[0].shape[0]
    d = sum(a.shape[1] for a in arrays)
    rows = []
    for t in range(T):
        row = []
        for a in arrays:
            row.extend(float(x) for x in a[t])
        if use_pe:
            row = [row[k] + pe_entry_oracle(t, k, d) for k in range(d)]
        rows.append(row)
    return rows, d


def segment_log_likelihood_oracle(seg, m, params, table, cfg, use_pe=True):
    """From-scratch term enumeration of the factorized log-likelihood."""
    total = 0.0
    if cfg.alpha_w > 0:
        for token in seg.tokens:
            total += cfg.alpha_w * word_log_prob_oracle(token, m, table, cfg)
    factor_ids = ["v", "a"] if cfg.mode == "b1" else ["v", "a", "wv", "wa", "va", "wva"]
    for fid in factor_ids:
        alpha_f = getattr(cfg, f"alpha_{fid}")
        if alpha_f == 0.0:
            continue
        rows, d = _factor_features_oracle(seg, fid, use_pe)
        if not rows:
            continue
        fp = params.factors[fid]
        mu, sigma = [], []
        for i in range(d):
            mu_i = sum(float(fp.W_mu[i, j]) * float(m[j]) for j in range(len(m))) + float(fp.b_mu[i])
            s_i = math.exp(sum(float(fp.W_sigma[i, j]) * float(m[j]) for j in range(len(m)))
                           + float(fp.b_sigma[i]))
            mu.append(mu_i)
            sigma.append(max(s_i, EPS_SIGMA))
        for row in rows:
            total += alpha_f * gaussian_log_prob_oracle(row, mu, sigma)
    return total


def mlp_forward_oracle(x, model):
    """Explicit-loop forward pass through the rectifier MLP."""
    h = [float(v) for v in x]
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        out = []
        for j in range(W.shape[1]):
            z = float(b[j]) + sum(h[i] * float(W[i, j]) for i in range(W.shape[0]))
            out.append(z if k == last else max(z, 0.0))
        h = out
    return np.array(h)


def project_sphere(x):
    return x / np.linalg.norm(x)


def sphere_max_oracle(g, restarts=100, iters=60, step=0.5, seed=0):
    """Maximize <g, m> over the unit sphere by projected gradient ascent from
    random restarts; returns (best value, best point). The step is scaled by
    1/||g|| so convergence does not depend on the objective's magnitude."""
    rng = np.random.default_rng(seed)
    direction = step * g / np.linalg.norm(g)
    best_val, best_m = -np.inf, None
    for _ in range(restarts):
        m = project_sphere(rng.normal(size=g.shape[0]))
        for _ in range(iters):
            m = project_sphere(m + direction)
        val = float(g @ m)
        if val > best_val:
            best_val, best_m = val, m
    return best_val, best_m
