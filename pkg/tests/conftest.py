import numpy as np
import pytest

from mmbaselines import MultimodalSegment, save_dataset


@pytest.fixture
def workspace(tmp_path):
    """Builds a small on-disk experiment workspace: word vectors, a labeled
    dataset of pre-aligned segments, and a config file."""

    class Workspace:
        root = tmp_path

        def write_vectors(self, rng, vocab=("alpha", "beta", "gamma", "delta"), d=4,
                          name="vectors.txt"):
            lines = [tok + " " + " ".join(repr(float(v)) for v in rng.normal(size=d))
                     for tok in vocab]
            path = tmp_path / name
            path.write_text("\n".join(lines) + "\n")
            return path

        def write_dataset(self, rng, n=4, d_v=3, d_a=2, T=3, name="data.jsonl",
                          vocab=("alpha", "beta", "gamma", "delta"), labels=None,
                          table=None):
            segments = []
            for k in range(n):
                tokens = [vocab[int(rng.integers(0, len(vocab)))] for _ in range(T)]
                if table is not None:
                    wv = np.array([table.vector(t) for t in tokens])
                else:
                    wv = np.zeros((T, 0))
                label = None if labels is None else labels[k]
                segments.append(MultimodalSegment(
                    f"seg{k:03d}", tokens, wv, rng.normal(size=(T, d_v)),
                    rng.normal(size=(T, d_a)), label=label))
            path = tmp_path / name
            save_dataset(str(path), segments)
            return path, segments

        def write_config(self, name="run.cfg", **overrides):
            entries = {"schema_version": 1}
            entries.update(overrides)
            path = tmp_path / name
            path.write_text("\n".join(f"{k} = {v}" for k, v in entries.items()) + "\n")
            return path

    return Workspace()
