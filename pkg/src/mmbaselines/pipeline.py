"""Dataset ingestion, word-interval alignment, positional encodings, and
factor feature construction.

Ordering contract: streams are aligned to word intervals first; positional
encodings are then added per factor at that factor's own dimension. Unimodal
word vectors are never modified; concatenated factors are built from the raw
aligned streams (word vectors included) and receive a positional encoding
spanning the full concatenated dimension.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, DataError
from .types import FACTOR_STREAMS, MultimodalSegment, TemperatureConfig, WordTable


@dataclass
class RawStream:
    """A timestamped feature stream, e.g. facial features at 30 Hz."""

    timestamps: np.ndarray  # (T,) strictly increasing, seconds
    frames: np.ndarray      # (T, d)
    rate: float | None = None

    def validate(self) -> None:
        if self.timestamps.shape[0] != self.frames.shape[0]:
            raise DataError(f"stream has {self.timestamps.shape[0]} timestamps "
                            f"but {self.frames.shape[0]} frames")
        if self.timestamps.size > 1 and not np.all(np.diff(self.timestamps) > 0):
            raise DataError("stream timestamps must be strictly increasing")


def align_to_words(stream: RawStream, intervals: list[tuple[float, float]]) -> np.ndarray:
    """Average stream frames over each word interval [start, end).

    An interval that catches no frames falls back to the temporally nearest
    frame (zeros would bias the Gaussian statistics)."""
    stream.validate()
    if stream.frames.shape[0] == 0:
        raise AlignmentError(f"cannot align intervals {intervals!r}: stream has no frames")
    out = np.empty((len(intervals), stream.frames.shape[1]))
    for k, (start, end) in enumerate(intervals):
        if not start < end:
            raise DataError(f"word interval ({start}, {end}) must have start < end")
        mask = (stream.timestamps >= start) & (stream.timestamps < end)
        if mask.any():
            out[k] = stream.frames[mask].mean(axis=0)
        else:
            mid = 0.5 * (start + end)
            out[k] = stream.frames[np.argmin(np.abs(stream.timestamps - mid))]
    return out


def positional_encoding(T: int, d: int) -> np.ndarray:
    """Sinusoidal positional encodings: column 2i is sin(pos / 10000^(2i/d)),
    column 2i+1 is cos at the same frequency. Positions are 0-indexed."""
    pe = np.zeros((T, d))
    pos = np.arange(T)[:, None]
    i2 = np.arange(0, d, 2)
    angles = pos / np.power(10000.0, i2 / d)
    pe[:, 0::2] = np.sin(angles)
    pe[:, 1::2] = np.cos(angles[:, : d // 2])
    return pe


def apply_positional_encoding(seq: np.ndarray) -> np.ndarray:
    """Add positional encoding rows to each time step of a (T, d) sequence."""
    T, d = seq.shape
    return seq + positional_encoding(T, d)


def concat_factors(seg: MultimodalSegment, factor_id: str) -> np.ndarray:
    """Per-time-step concatenation of the factor's constituent streams."""
    parts = [seg.stream(name) for name in FACTOR_STREAMS[factor_id]]
    lengths = {p.shape[0] for p in parts}
    if len(lengths) > 1:
        raise AlignmentError(
            f"segment {seg.id}: factor {factor_id!r} needs equal stream lengths, got "
            + ", ".join(f"{n}={seg.stream(n).shape[0]}" for n in FACTOR_STREAMS[factor_id]))
    return np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]


def factor_features(seg: MultimodalSegment, factor_id: str, use_pe: bool = True) -> np.ndarray:
    """Feature sequence of one Gaussian factor, with its positional encoding.

    Word vectors are left untouched inside concatenations before the
    factor-wide encoding is added; the 'w' factor itself never goes through
    here (it is log-linear, not Gaussian)."""
    feats = concat_factors(seg, factor_id)
    if use_pe and feats.shape[0] > 0:
        feats = apply_positional_encoding(feats)
    return feats


def factor_dimensions(seg: MultimodalSegment, cfg: TemperatureConfig) -> dict[str, int]:
    """Feature dimension of each Gaussian factor active under the mode."""
    dims = {"visual": seg.visual.shape[1], "acoustic": seg.acoustic.shape[1],
            "words": seg.word_vectors.shape[1]}
    return {fid: sum(dims[name] for name in FACTOR_STREAMS[fid])
            for fid in cfg.gaussian_factors()}


def compute_unigram(corpus: list[list[str]]) -> dict[str, float]:
    """Token frequencies normalized to sum 1 over the corpus."""
    counts: dict[str, int] = {}
    total = 0
    for tokens in corpus:
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
            total += 1
    if total == 0:
        return {}
    return {token: count / total for token, count in counts.items()}


def load_word_vectors(path: str) -> WordTable:
    """Read a `token v1 ... vd` text table (standard pretrained-vector format).

    Unigram probabilities start at zero; fill them with `with_unigram` once a
    corpus is available."""
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split(" ")
            token, values = parts[0], parts[1:]
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise DataError(f"{path}:{lineno}: expected {dim} vector entries, got {len(values)}")
            if token in vocab:
                raise DataError(f"{path}:{lineno}: duplicate token {token!r}")
            try:
                row = np.array([float(v) for v in values])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not np.isfinite(row).all():
                raise DataError(f"{path}:{lineno}: non-finite word vector entry")
            vocab[token] = len(rows)
            rows.append(row)
    if dim is None:
        raise DataError(f"{path}: empty word vector table")
    return WordTable(vocab=vocab, vectors=np.vstack(rows), unigram=np.zeros(len(rows)))


def _parse_stream(record: dict, key: str, lineno: int) -> RawStream:
    frames = record[key]
    ts = np.array([f["t"] for f in frames], dtype=float)
    xs = np.array([f["x"] for f in frames], dtype=float)
    if xs.size == 0:
        xs = xs.reshape(0, 0)
    stream = RawStream(timestamps=ts, frames=xs)
    try:
        stream.validate()
    except DataError as exc:
        raise DataError(f"line {lineno}: {key}: {exc}") from None
    return stream


def _segment_from_record(record: dict, table: WordTable | None, lineno: int) -> MultimodalSegment:
    try:
        seg_id = str(record["id"])
        tokens = [str(t) for t in record.get("tokens", [])]
    except KeyError as exc:
        raise DataError(f"line {lineno}: missing field {exc}") from None

    if table is not None and tokens:
        word_vectors = np.array([table.vector(t) for t in tokens])
    else:
        word_vectors = np.zeros((len(tokens), table.dim if table else 0))

    aligned = {}
    for modality in ("visual", "acoustic"):
        pre = record.get(f"{modality}_aligned")
        if pre is not None:
            aligned[modality] = np.array(pre, dtype=float)
            if aligned[modality].size == 0:
                aligned[modality] = aligned[modality].reshape(0, 0)
        elif modality in record:
            stream = _parse_stream(record, modality, lineno)
            intervals = record.get("intervals")
            if intervals is None:
                raise DataError(f"line {lineno}: raw {modality} stream needs word intervals")
            if len(intervals) != len(tokens):
                raise DataError(f"line {lineno}: {len(intervals)} intervals for {len(tokens)} tokens")
            try:
                aligned[modality] = align_to_words(stream, [tuple(iv) for iv in intervals])
            except DataError as exc:
                raise DataError(f"line {lineno}: {exc}") from None
        else:
            aligned[modality] = np.zeros((0, 0))

    seg = MultimodalSegment(
        id=seg_id,
        tokens=tokens,
        word_vectors=word_vectors,
        visual=aligned["visual"],
        acoustic=aligned["acoustic"],
        label=record.get("label"),
    )
    try:
        seg.validate()
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from None
    return seg


def load_dataset(path: str, table: WordTable | None = None) -> list[MultimodalSegment]:
    """Load a line-delimited segment file (one JSON record per line).

    Records carry either raw timestamped streams plus word intervals, or the
    pre-aligned `visual_aligned`/`acoustic_aligned` per-word arrays. Rejects
    non-finite features and per-modality dimension drift across segments."""
    segments: list[MultimodalSegment] = []
    dims: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid record: {exc}") from None
            try:
                seg = _segment_from_record(record, table, lineno)
            except DataError as exc:
                raise DataError(f"{path}: {exc}") from None
            for modality in ("visual", "acoustic"):
                arr = getattr(seg, modality)
                if arr.shape[0] == 0:
                    continue
                if modality in dims and dims[modality] != arr.shape[1]:
                    raise DataError(f"{path}: line {lineno}: {modality} dimension "
                                    f"{arr.shape[1]} != {dims[modality]} seen earlier")
                dims.setdefault(modality, arr.shape[1])
            segments.append(seg)
    return segments


def save_dataset(path: str, segments: list[MultimodalSegment]) -> None:
    """Write segments in the pre-aligned record format (lossless round-trip)."""
    with open(path, "w", encoding="utf-8") as fh:
        for seg in segments:
            label = seg.label
            if label is not None:
                label = int(label) if isinstance(label, (int, np.integer)) else float(label)
            record = {
                "id": seg.id,
                "tokens": seg.tokens,
                "visual_aligned": seg.visual.tolist(),
                "acoustic_aligned": seg.acoustic.tolist(),
                "label": label,
            }
            fh.write(json.dumps(record) + "\n")
