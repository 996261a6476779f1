"""Experiment command line: `fit`, `train-eval`, `benchmark`, `histogram`.

Every command takes `--config <path>` (flat key = value text with a
schema_version field) plus a small set of overriding flags, is deterministic
given (config, seed), and writes a resolved copy of its configuration next to
its outputs. Exit codes: 0 success, 1 usage/config error, 2 data error,
3 numeric failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import head, pipeline, solver, synth, training
from .errors import ConfigError, DataError, MmbError, NumericError
from .head import ClassifierConfig, FineTuneConfig, TaskSpec
from .training import FitConfig
from .types import ModelParams, MultimodalSegment, TemperatureConfig, WordTable

SCHEMA_VERSION = 1


@dataclass
class RunConfig:
    schema_version: int = SCHEMA_VERSION
    # paths
    dataset: str = ""
    test_dataset: str = ""
    word_vectors: str = ""
    checkpoint: str = ""
    mlp_checkpoint: str = ""
    out: str = "run_out"
    # model
    mode: str = "b1"
    d_m: int = 0                # 0 = infer from the word-vector table
    beta: float = 1e-3
    alpha: float = 0.5
    alpha_w: float = 1.0
    alpha_v: float = 1.0
    alpha_a: float = 1.0
    alpha_wv: float = 1.0
    alpha_wa: float = 1.0
    alpha_va: float = 1.0
    alpha_wva: float = 1.0
    normalize_embeddings: bool = True
    # optimizer
    iterations: int = 20
    lr: float = 1e-3
    init_scale: float = 0.01
    seed: int = 0
    # ablations
    text_only: bool = False
    no_pe: bool = False
    no_finetune: bool = False
    # supervised stage
    label_fraction: float = 1.0
    task: str = "regression"
    n_classes: int = 2
    label_lo: float = -3.0
    label_hi: float = 3.0
    clf_hidden: int = 64
    clf_lr: float = 0.05
    clf_epochs: int = 200
    clf_batch: int = 32
    ft_steps: int = 10
    ft_lr: float = 1e-2
    ft_renormalize: bool = True
    ft_update_model: bool = True
    # benchmark
    bench_n: int = 1000
    bench_T: int = 20
    bench_reps: int = 5
    # histogram
    hist_factor: str = "v"
    hist_dims: str = ""         # comma-separated indices; empty = all
    hist_bins: int = 30


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"config key {name}: expected a boolean, got {raw!r}")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {raw!r} as {kind}") from None
    return raw


def load_config(path: str) -> RunConfig:
    """Parse a flat `key = value` config file."""
    values: dict[str, object] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {line!r}")
        key, raw = line.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    if "schema_version" not in values:
        raise ConfigError(f"{path}: missing required schema_version field")
    if values["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"{path}: unsupported schema_version {values['schema_version']}")
    return RunConfig(**values)


def write_config(path: Path, config: RunConfig) -> None:
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in dataclasses.fields(RunConfig)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_table(path: Path, header: list[str], rows: list[list[object]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(str(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# shared assembly helpers
# ---------------------------------------------------------------------------

def temperature_config(config: RunConfig) -> TemperatureConfig:
    cfg = TemperatureConfig.from_beta(
        config.beta, alpha=config.alpha, mode=config.mode,
        alpha_w=config.alpha_w, alpha_v=config.alpha_v, alpha_a=config.alpha_a,
        alpha_wv=config.alpha_wv, alpha_wa=config.alpha_wa,
        alpha_va=config.alpha_va, alpha_wva=config.alpha_wva)
    if config.text_only:
        cfg = cfg.without_continuous_factors()
    cfg.validate()
    return cfg


def task_spec(config: RunConfig) -> TaskSpec:
    spec = TaskSpec(kind=config.task, n_classes=config.n_classes,
                    label_lo=config.label_lo, label_hi=config.label_hi)
    spec.validate()
    return spec


def _load_table(config: RunConfig) -> WordTable | None:
    if not config.word_vectors:
        return None
    return pipeline.load_word_vectors(config.word_vectors)


def _load_segments(config: RunConfig, path: str, table: WordTable | None) -> list[MultimodalSegment]:
    if not path:
        raise ConfigError("no dataset path configured")
    try:
        return pipeline.load_dataset(path, table)
    except OSError as exc:
        raise DataError(f"cannot read dataset {path}: {exc}") from None


def _resolve_table(config: RunConfig, segments: list[MultimodalSegment],
                   table: WordTable | None) -> WordTable:
    """Attach train-corpus unigram statistics; tokens absent from the corpus
    keep probability zero."""
    if table is None:
        if config.alpha_w > 0 and not config.text_only and any(s.tokens for s in segments):
            raise ConfigError("dataset has tokens and alpha_w > 0 but no word_vectors "
                              "table was configured")
        return WordTable.empty(0)
    table = table.with_unigram(pipeline.compute_unigram([seg.tokens for seg in segments]))
    table.validate()
    return table


def _infer_d_m(config: RunConfig, table: WordTable) -> int:
    if config.d_m > 0:
        if len(table.vocab) and config.alpha_w > 0 and config.d_m != table.dim:
            raise ConfigError(f"d_m={config.d_m} but word vectors have dimension {table.dim}; "
                              "the word factor needs them equal")
        return config.d_m
    if len(table.vocab) == 0:
        raise ConfigError("d_m not set and no word-vector table to infer it from")
    return table.dim


def _out_dir(config: RunConfig) -> Path:
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_embeddings(path: Path, embeddings: dict[str, np.ndarray], d_m: int) -> None:
    header = ["id", "degenerate"] + [f"e{k}" for k in range(d_m)]
    rows = []
    for seg_id, m in embeddings.items():
        degenerate = int(not np.any(m != 0.0))
        rows.append([seg_id, degenerate] + [repr(float(x)) for x in m])
    write_table(path, header, rows)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_fit(config: RunConfig) -> Path:
    """Unsupervised embedding fit over the full dataset; writes the
    checkpoint, per-segment embeddings, and the objective history."""
    cfg = temperature_config(config)
    table = _load_table(config)
    segments = _load_segments(config, config.dataset, table)
    if not segments:
        raise DataError(f"dataset {config.dataset} contains no segments")
    table = _resolve_table(config, segments, table)
    d_m = _infer_d_m(config, table)
    if config.mode == "b2":
        for seg in segments:
            seg.validate(require_equal_lengths=True)
    hyper = FitConfig(iterations=config.iterations, lr=config.lr, seed=config.seed,
                      use_pe=not config.no_pe, init_scale=config.init_scale)
    state = training.coordinate_ascent_fit(segments, table, cfg, hyper, d_m=d_m)

    out = _out_dir(config)
    training.save_checkpoint(str(out / "checkpoint.npz"), state, cfg,
                             use_pe=not config.no_pe)
    _write_embeddings(out / "embeddings.tsv", state.embeddings, d_m)
    write_table(out / "objective_history.tsv", ["iteration", "objective"],
                [[k + 1, repr(v)] for k, v in enumerate(state.objective_history)])
    write_config(out / "config.resolved.txt", config)
    return out


def nested_label_subset(labeled_ids: list[str], fraction: float, seed: int) -> list[str]:
    """Seeded prefix of a fixed permutation: lower fractions are subsets of
    higher ones, so metric trends are comparable across the sweep."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"label_fraction must lie in (0, 1], got {fraction}")
    order = np.random.default_rng(seed).permutation(len(labeled_ids))
    keep = int(round(fraction * len(labeled_ids)))
    return [labeled_ids[i] for i in order[:keep]]


def cmd_train_eval(config: RunConfig) -> Path:
    """Supervised stage: classifier on a seeded label subset, optional
    embedding fine-tuning, evaluation on the untouched test split."""
    if not config.checkpoint:
        raise ConfigError("train-eval needs a checkpoint (set the checkpoint config key)")
    try:
        state, cfg, fit_use_pe = training.load_checkpoint(config.checkpoint)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {config.checkpoint}: {exc}") from None
    use_pe = fit_use_pe and not config.no_pe
    if config.text_only:
        cfg = cfg.without_continuous_factors()

    table = _load_table(config)
    train_segments = _load_segments(config, config.dataset, table)
    test_segments = _load_segments(config, config.test_dataset, table)
    table = _resolve_table(config, train_segments, table)

    train_emb = solver.embed_segments(train_segments, state.params, table, cfg,
                                      use_pe=use_pe, normalize=config.normalize_embeddings)
    test_emb = solver.embed_segments(test_segments, state.params, table, cfg,
                                     use_pe=use_pe, normalize=config.normalize_embeddings)

    labeled = [seg for seg in train_segments if seg.label is not None]
    if not labeled:
        raise DataError("train split has no labeled segments")
    unlabeled_test = [seg.id for seg in test_segments if seg.label is None]
    if unlabeled_test:
        raise DataError(f"test split has unlabeled segments: {unlabeled_test[:3]}")

    subset_ids = nested_label_subset([seg.id for seg in labeled], config.label_fraction,
                                     config.seed)
    by_id = {seg.id: seg for seg in labeled}
    X = np.array([train_emb[i] for i in subset_ids])
    y = np.array([by_id[i].label for i in subset_ids])

    spec = task_spec(config)
    clf_cfg = ClassifierConfig(hidden=(config.clf_hidden,), lr=config.clf_lr,
                               epochs=config.clf_epochs, batch_size=config.clf_batch,
                               seed=config.seed)
    model = head.train_classifier(X, y, clf_cfg, spec)
    out = _out_dir(config)
    if not config.no_finetune:
        ft = FineTuneConfig(steps=config.ft_steps, lr=config.ft_lr,
                            renormalize=config.ft_renormalize,
                            update_model=config.ft_update_model, model_lr=config.clf_lr)
        X_tuned = head.fine_tune_embeddings(X, y, model, ft)
        _write_embeddings(out / "embeddings_finetuned.tsv",
                          dict(zip(subset_ids, X_tuned)), X_tuned.shape[1])

    test_X = np.array([test_emb[seg.id] for seg in test_segments])
    test_y = np.array([seg.label for seg in test_segments])
    preds = head.predict(test_X, model)
    report = head.evaluate(preds, test_y, spec)

    head.save_mlp(str(out / "mlp.npz"), model)
    row = {
        "mode": config.mode, "label_fraction": config.label_fraction,
        "text_only": config.text_only, "no_pe": config.no_pe,
        "no_finetune": config.no_finetune, "seed": config.seed,
        "n_labeled": len(subset_ids),
    }
    row.update(report.row())
    write_table(out / "metrics.tsv", list(row), [list(row.values())])
    write_config(out / "config.resolved.txt", config)
    return out


def cmd_benchmark(config: RunConfig) -> Path:
    """Times the closed-form embedding plus classifier forward pass per
    segment; reports inferences per second over several repetitions."""
    if not config.checkpoint:
        raise ConfigError("benchmark needs a checkpoint (set the checkpoint config key)")
    try:
        state, cfg, use_pe = training.load_checkpoint(config.checkpoint)
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {config.checkpoint}: {exc}") from None
    params = state.params

    if config.dataset:
        table = _load_table(config)
        segments = _load_segments(config, config.dataset, table)[: config.bench_n]
        table = _resolve_table(config, segments, table)
    else:
        table = WordTable.empty(0)
        rng = np.random.default_rng(config.seed)
        d_v = params.factors["v"].d_f if "v" in params.factors else 1
        d_a = params.factors["a"].d_f if "a" in params.factors else 1
        segments = synth.benchmark_segments(rng, config.bench_n, config.bench_T,
                                            d_w=params.d_m, d_v=d_v, d_a=d_a)

    if config.mlp_checkpoint:
        model = head.load_mlp(config.mlp_checkpoint)
    else:
        model = head.init_mlp(params.d_m, (config.clf_hidden,), task_spec(config),
                              seed=config.seed)
    clf_params = sum(W.size + b.size for W, b in zip(model.weights, model.biases))

    n = len(segments)
    ips_runs: list[float] = []
    total_times: list[float] = []
    if n > 0:
        for seg in segments[: min(50, n)]:   # warm-up, excluded from timing
            emb = solver.closed_form_embedding(seg, params, table, cfg, use_pe=use_pe)
            head.mlp_forward(emb.m, model)
        for _ in range(config.bench_reps):
            t0 = time.perf_counter()
            for seg in segments:
                emb = solver.closed_form_embedding(seg, params, table, cfg, use_pe=use_pe)
                head.mlp_forward(emb.m, model)
            elapsed = time.perf_counter() - t0
            total_times.append(elapsed)
            ips_runs.append(n / elapsed)

    out = _out_dir(config)
    defined = len(ips_runs) > 0
    write_table(out / "benchmark.tsv",
                ["n_segments", "reps", "ips_defined", "ips_mean", "ips_std",
                 "total_time_mean", "embedding_params", "classifier_params"],
                [[n, config.bench_reps, defined,
                  repr(float(np.mean(ips_runs))) if defined else "undefined",
                  repr(float(np.std(ips_runs))) if defined else "undefined",
                  repr(float(np.mean(total_times))) if defined else "undefined",
                  training.parameter_count(params), clf_params]])
    write_config(out / "config.resolved.txt", config)
    return out


def _skewness_kurtosis(x: np.ndarray) -> tuple[float, float]:
    c = x - x.mean()
    m2 = float(np.mean(c * c))
    if m2 == 0.0:
        return 0.0, 0.0
    m3 = float(np.mean(c ** 3))
    m4 = float(np.mean(c ** 4))
    return m3 / m2 ** 1.5, m4 / m2 ** 2 - 3.0


def cmd_histogram(config: RunConfig) -> Path:
    """Per-dimension histograms of pooled raw feature values, as plot-ready
    tables, plus a skewness / excess-kurtosis normality summary."""
    table = _load_table(config)
    segments = _load_segments(config, config.dataset, table)
    factor = config.hist_factor
    if factor == "w":
        pooled = [seg.word_vectors for seg in segments if seg.word_vectors.shape[0] > 0]
    else:
        if factor not in ("v", "a", "wv", "wa", "va", "wva"):
            raise ConfigError(f"unknown histogram factor {factor!r}")
        pooled = [pipeline.concat_factors(seg, factor) for seg in segments]
        pooled = [X for X in pooled if X.shape[0] > 0]
    if not pooled:
        raise DataError(f"factor {factor!r} has no feature frames in {config.dataset}")
    X = np.vstack(pooled)

    dims = (sorted(int(d) for d in config.hist_dims.split(",") if d.strip() != "")
            if config.hist_dims else list(range(X.shape[1])))
    out = _out_dir(config)
    summary_rows = []
    for d in dims:
        if not 0 <= d < X.shape[1]:
            raise ConfigError(f"histogram dim {d} out of range for factor {factor!r} "
                              f"with {X.shape[1]} dimensions")
        values = X[:, d]
        counts, edges = np.histogram(values, bins=config.hist_bins)
        write_table(out / f"hist_{factor}_{d}.tsv", ["bin_lo", "bin_hi", "count"],
                    [[repr(float(edges[k])), repr(float(edges[k + 1])), int(counts[k])]
                     for k in range(len(counts))])
        skew, exkurt = _skewness_kurtosis(values)
        summary_rows.append([factor, d, values.shape[0], repr(float(values.mean())),
                             repr(float(values.std())), repr(skew), repr(exkurt)])
    write_table(out / "histogram_summary.tsv",
                ["factor", "dim", "n", "mean", "std", "skewness", "excess_kurtosis"],
                summary_rows)
    write_config(out / "config.resolved.txt", config)
    return out


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="flat key = value config file")
    p.add_argument("--mode", choices=["b1", "b2"], default=None)
    p.add_argument("--label-fraction", type=float, default=None)
    p.add_argument("--text-only", action="store_true", default=None)
    p.add_argument("--no-pe", action="store_true", default=None)
    p.add_argument("--no-finetune", action="store_true", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)


_OVERRIDES = {
    "mode": "mode", "label_fraction": "label_fraction", "text_only": "text_only",
    "no_pe": "no_pe", "no_finetune": "no_finetune", "seed": "seed", "out": "out",
}


def build_parser() -> _Parser:
    parser = _Parser(prog="mmb", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("fit", cmd_fit), ("train-eval", cmd_train_eval),
                     ("benchmark", cmd_benchmark), ("histogram", cmd_histogram)):
        p = sub.add_parser(name, help=(fn.__doc__ or "").split("\n")[0])
        _add_common_flags(p)
        p.set_defaults(fn=fn)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    config = load_config(args.config)
    for arg_name, field in _OVERRIDES.items():
        value = getattr(args, arg_name)
        if value is not None:
            setattr(config, field, value)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = resolve_config(args)
        args.fn(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except MmbError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
