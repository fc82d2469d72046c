import numpy as np
import pytest
import scipy.sparse as sp

from zge.graph import Dataset, write_dataset


def build_dataset(edges, features, labels) -> Dataset:
    """Assemble a Dataset from plain lists/arrays (test helper)."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    n = features.shape[0]
    pairs = sorted({(min(u, v), max(u, v)) for u, v in edges if u != v})
    if pairs:
        uv = np.asarray(pairs)
        src = np.concatenate([uv[:, 0], uv[:, 1]])
        dst = np.concatenate([uv[:, 1], uv[:, 0]])
        adj = sp.csr_matrix((np.ones(len(src)), (src, dst)), shape=(n, n))
    else:
        adj = sp.csr_matrix((n, n))
    adj.sort_indices()
    return Dataset(
        adjacency=adj,
        features=sp.csr_matrix(features),
        labels=labels,
        n_classes=int(labels.max()) + 1,
    )


def make_blob_dataset(
    n_per_class=20, n_classes=3, words_per_class=6, seed=0, p_in=0.25, p_out=0.01
) -> Dataset:
    """Stochastic-block-model graph with class-specific bag-of-words features."""
    rng = np.random.default_rng(seed)
    n = n_per_class * n_classes
    labels = np.repeat(np.arange(n_classes), n_per_class)
    d = words_per_class * n_classes + 4
    feats = rng.poisson(0.05, size=(n, d)).astype(float)
    for c in range(n_classes):
        block = slice(c * words_per_class, (c + 1) * words_per_class)
        feats[labels == c, block] += rng.poisson(2.0, size=(n_per_class, words_per_class))
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            p = p_in if labels[i] == labels[j] else p_out
            if rng.random() < p:
                edges.append((i, j))
    return build_dataset(edges, feats, labels)


def dataset_to_files(ds: Dataset, directory):
    directory.mkdir(parents=True, exist_ok=True)
    write_dataset(
        ds,
        directory / "edges.txt",
        directory / "features.txt",
        directory / "labels.txt",
    )
    return directory


@pytest.fixture
def blob_ds():
    return make_blob_dataset(seed=7)


@pytest.fixture
def tiny_files(tmp_path):
    """Handwritten 5-node dataset on disk."""
    (tmp_path / "edges.txt").write_text(
        "# toy graph\n0 1\n1 2\n2 3\n3 4\n0 1\n4 4\n", encoding="utf-8"
    )
    (tmp_path / "features.txt").write_text(
        "0:1 2:2\n1:1\n\n0:3 3:1\n2:1 3:2\n", encoding="utf-8"
    )
    (tmp_path / "labels.txt").write_text(
        "0 0\n1 0\n2 1\n3 1\n4 1\n", encoding="utf-8"
    )
    return tmp_path
