"""Fully-connected prediction head over utterance embeddings, embedding
fine-tuning against the task loss, and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, NumericError


@dataclass
class TaskSpec:
    """What the labels mean and how regression outputs are bucketed."""

    kind: str = "regression"            # 'regression' or 'classification'
    n_classes: int = 2                  # classification only
    label_lo: float = -3.0
    label_hi: float = 3.0
    binary_threshold: float = 0.0
    acc_classes: tuple[int, ...] = (2, 7)

    def validate(self) -> None:
        if self.kind not in ("regression", "classification"):
            raise ConfigError(f"task kind must be regression or classification, got {self.kind!r}")


def mosi_task_spec() -> TaskSpec:
    """Sentiment-in-[-3, 3] preset: binary accuracy at 0 plus 7-class bucketing."""
    return TaskSpec(kind="regression", label_lo=-3.0, label_hi=3.0,
                    binary_threshold=0.0, acc_classes=(2, 7))


@dataclass
class MlpModel:
    """Rectifier MLP with a linear output head (regression: 1 output;
    classification: one logit per class)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    task: TaskSpec
    final_train_loss: float | None = None

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def validate(self) -> None:
        for k in range(len(self.weights) - 1):
            if self.weights[k].shape[1] != self.weights[k + 1].shape[0]:
                raise DimensionError(f"layer {k} output {self.weights[k].shape[1]} != "
                                     f"layer {k + 1} input {self.weights[k + 1].shape[0]}")


def init_mlp(d_in: int, hidden: tuple[int, ...], task: TaskSpec, seed: int = 0) -> MlpModel:
    rng = np.random.default_rng(seed)
    n_out = 1 if task.kind == "regression" else task.n_classes
    dims = (d_in,) + tuple(hidden) + (n_out,)
    weights = [rng.normal(0.0, np.sqrt(2.0 / dims[k]), size=(dims[k], dims[k + 1]))
               for k in range(len(dims) - 1)]
    biases = [np.zeros(dims[k + 1]) for k in range(len(dims) - 1)]
    return MlpModel(weights=weights, biases=biases, task=task)


def _forward_cached(X: np.ndarray, model: MlpModel) -> tuple[np.ndarray, list[np.ndarray]]:
    acts = [X]
    h = X
    last = len(model.weights) - 1
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = z if k == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts


def mlp_forward(m: np.ndarray, model: MlpModel) -> np.ndarray:
    """Deterministic forward pass; accepts a single embedding or a batch."""
    single = m.ndim == 1
    X = m[None, :] if single else m
    if X.shape[1] != model.input_dim:
        raise DimensionError(f"embedding dimension {X.shape[1]} != model input {model.input_dim}")
    out, _ = _forward_cached(X, model)
    return out[0] if single else out


def predict(m: np.ndarray, model: MlpModel) -> np.ndarray:
    """Task-level prediction: regression value, or argmax class index."""
    out = mlp_forward(m, model)
    if model.task.kind == "regression":
        return out[..., 0]
    return np.argmax(out, axis=-1)


def _loss_and_output_grad(out: np.ndarray, labels: np.ndarray,
                          task: TaskSpec) -> tuple[float, np.ndarray]:
    n = out.shape[0]
    if task.kind == "regression":
        resid = out[:, 0] - labels
        loss = float(np.mean(resid * resid))
        dout = np.zeros_like(out)
        dout[:, 0] = 2.0 * resid / n
        return loss, dout
    shifted = out - out.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsumexp
    idx = labels.astype(int)
    loss = float(-np.mean(logp[np.arange(n), idx]))
    dout = np.exp(logp)
    dout[np.arange(n), idx] -= 1.0
    return loss, dout / n


def _backward(acts: list[np.ndarray], dout: np.ndarray,
              model: MlpModel) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    dWs = [np.zeros_like(W) for W in model.weights]
    dbs = [np.zeros_like(b) for b in model.biases]
    grad = dout
    last = len(model.weights) - 1
    for k in range(last, -1, -1):
        if k != last:
            grad = grad * (acts[k + 1] > 0.0)
        dWs[k] = acts[k].T @ grad
        dbs[k] = grad.sum(axis=0)
        grad = grad @ model.weights[k].T
    return dWs, dbs, grad


def task_loss_input_grad(X: np.ndarray, labels: np.ndarray,
                         model: MlpModel) -> tuple[float, np.ndarray]:
    """Task loss and its gradient with respect to the input embeddings."""
    out, acts = _forward_cached(X, model)
    loss, dout = _loss_and_output_grad(out, labels, model.task)
    _, _, dX = _backward(acts, dout, model)
    return loss, dX


@dataclass
class ClassifierConfig:
    hidden: tuple[int, ...] = (64,)
    lr: float = 0.05
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0


def train_classifier(embeddings: np.ndarray, labels: np.ndarray,
                     hyper: ClassifierConfig, task: TaskSpec) -> MlpModel:
    """Mini-batch gradient descent on MSE (regression) or cross-entropy
    (classification); deterministic given the seed. The model records its
    final full-batch training loss."""
    if embeddings.shape[0] == 0:
        raise ConfigError("cannot train a classifier on an empty labeled set")
    task.validate()
    labels = np.asarray(labels, dtype=float if task.kind == "regression" else int)
    model = init_mlp(embeddings.shape[1], hyper.hidden, task, seed=hyper.seed)
    rng = np.random.default_rng(hyper.seed + 1)
    n = embeddings.shape[0]
    with np.errstate(over="ignore", invalid="ignore"):   # divergence is caught below
        for _ in range(hyper.epochs):
            order = rng.permutation(n)
            for start in range(0, n, hyper.batch_size):
                batch = order[start:start + hyper.batch_size]
                out, acts = _forward_cached(embeddings[batch], model)
                loss, dout = _loss_and_output_grad(out, labels[batch], task)
                if not np.isfinite(loss):
                    raise NumericError(f"classifier training loss became non-finite ({loss})")
                dWs, dbs, _ = _backward(acts, dout, model)
                for k in range(len(model.weights)):
                    model.weights[k] -= hyper.lr * dWs[k]
                    model.biases[k] -= hyper.lr * dbs[k]
    final_out, _ = _forward_cached(embeddings, model)
    model.final_train_loss, _ = _loss_and_output_grad(final_out, labels, task)
    return model


@dataclass
class FineTuneConfig:
    steps: int = 10
    lr: float = 1e-2
    renormalize: bool = True
    update_model: bool = False
    model_lr: float = 1e-3


def fine_tune_embeddings(embeddings: np.ndarray, labels: np.ndarray, model: MlpModel,
                         hyper: FineTuneConfig) -> np.ndarray:
    """Gradient steps on the labeled embeddings under the task loss.

    Each step optionally re-projects onto the unit sphere, keeping the
    embedding invariant intact; `update_model` also nudges the classifier."""
    X = np.array(embeddings, dtype=float, copy=True)
    labels = np.asarray(labels, dtype=float if model.task.kind == "regression" else int)
    for _ in range(hyper.steps):
        out, acts = _forward_cached(X, model)
        _, dout = _loss_and_output_grad(out, labels, model.task)
        dWs, dbs, dX = _backward(acts, dout, model)
        X -= hyper.lr * dX
        if hyper.renormalize:
            norms = np.linalg.norm(X, axis=1, keepdims=True)
            X = X / np.where(norms == 0.0, 1.0, norms)
        if hyper.update_model:
            for k in range(len(model.weights)):
                model.weights[k] -= hyper.model_lr * dWs[k]
                model.biases[k] -= hyper.model_lr * dbs[k]
    return X


@dataclass
class MetricReport:
    acc: dict[int, float]
    f1: float | None
    mae: float
    pearson_r: float | None      # None when undefined (zero variance or n < 2)
    n: int

    def row(self) -> dict[str, object]:
        out: dict[str, object] = {f"acc_{k}": v for k, v in sorted(self.acc.items())}
        out["f1"] = self.f1 if self.f1 is not None else "undefined"
        out["mae"] = self.mae
        out["pearson_r"] = self.pearson_r if self.pearson_r is not None else "undefined"
        out["n"] = self.n
        return out


def bucket(values: np.ndarray, c: int, task: TaskSpec) -> np.ndarray:
    """Map regression outputs to c ordinal classes.

    c = 2 thresholds at the task's binary threshold; when c matches the
    integer grid of the label range, values round to the nearest integer;
    otherwise the range is split into c uniform bins."""
    values = np.asarray(values, dtype=float)
    if c == 2:
        return (values >= task.binary_threshold).astype(int)
    lo, hi = task.label_lo, task.label_hi
    if c == int(round(hi - lo)) + 1:
        return np.clip(np.rint(values), lo, hi).astype(int)
    edges = np.linspace(lo, hi, c + 1)[1:-1]
    return np.digitize(np.clip(values, lo, hi), edges)


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    if a.shape[0] < 2:
        return None
    a = a - a.mean()
    b = b - b.mean()
    va, vb = float(a @ a), float(b @ b)
    if va == 0.0 or vb == 0.0:
        return None
    return float((a @ b) / np.sqrt(va * vb))


def evaluate(preds: np.ndarray, labels: np.ndarray, task: TaskSpec) -> MetricReport:
    """Accuracy at each requested class count, binary F1, MAE, and Pearson r.

    Zero-variance Pearson input is reported as undefined (None), never 0."""
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if preds.shape != labels.shape:
        raise DimensionError(f"{preds.shape[0]} predictions vs {labels.shape[0]} labels")
    n = preds.shape[0]
    acc: dict[int, float] = {}
    if task.kind == "classification":
        acc[task.n_classes] = float(np.mean(preds.astype(int) == labels.astype(int)))
        pred_pos = preds.astype(int) == 1
        true_pos = labels.astype(int) == 1
    else:
        for c in task.acc_classes:
            acc[c] = float(np.mean(bucket(preds, c, task) == bucket(labels, c, task)))
        pred_pos = bucket(preds, 2, task) == 1
        true_pos = bucket(labels, 2, task) == 1
    tp = float(np.sum(pred_pos & true_pos))
    fp = float(np.sum(pred_pos & ~true_pos))
    fn = float(np.sum(~pred_pos & true_pos))
    f1 = 2.0 * tp / (2.0 * tp + fp + fn) if (2.0 * tp + fp + fn) > 0 else None
    return MetricReport(
        acc=acc,
        f1=f1,
        mae=float(np.mean(np.abs(preds - labels))),
        pearson_r=_pearson(preds, labels),
        n=n,
    )


def save_mlp(path: str, model: MlpModel) -> None:
    """Same .npz container style as the training checkpoints."""
    import json

    arrays: dict[str, np.ndarray] = {}
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"layer__{k}__W"] = W
        arrays[f"layer__{k}__b"] = b
    meta = {
        "n_layers": len(model.weights),
        "task": {"kind": model.task.kind, "n_classes": model.task.n_classes,
                 "label_lo": model.task.label_lo, "label_hi": model.task.label_hi,
                 "binary_threshold": model.task.binary_threshold,
                 "acc_classes": list(model.task.acc_classes)},
        "final_train_loss": model.final_train_loss,
    }
    arrays["meta_json"] = np.array(json.dumps(meta))
    np.savez(path, **arrays)


def load_mlp(path: str) -> MlpModel:
    import json

    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta_json"]))
        t = meta["task"]
        task = TaskSpec(kind=t["kind"], n_classes=int(t["n_classes"]),
                        label_lo=t["label_lo"], label_hi=t["label_hi"],
                        binary_threshold=t["binary_threshold"],
                        acc_classes=tuple(t["acc_classes"]))
        weights = [data[f"layer__{k}__W"] for k in range(meta["n_layers"])]
        biases = [data[f"layer__{k}__b"] for k in range(meta["n_layers"])]
    return MlpModel(weights=weights, biases=biases, task=task,
                    final_train_loss=meta["final_train_loss"])
