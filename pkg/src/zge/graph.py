"""Dataset loading, adjacency normalization, and zero-shot split construction.

File formats
------------
edges    : one edge per line, two whitespace-separated 0-based node ids;
           anything after ``#`` is a comment.
features : line i describes node i as whitespace-separated ``index:value``
           pairs; an empty line is a zero row.
labels   : one ``node_id class_id`` pair per line.

All files are UTF-8 with LF or CRLF line endings.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """An undirected attributed graph with one gold class per node.

    adjacency : sparse symmetric n x n 0/1 matrix with zero diagonal
    features  : sparse n x d nonnegative matrix (bag-of-words counts)
    labels    : per-node class id in [0, n_classes)
    """

    adjacency: sp.csr_matrix
    features: sp.csr_matrix
    labels: np.ndarray
    n_classes: int

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def m(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class PropagationMatrix:
    """Symmetrically normalized adjacency with self-loops.

    A_hat = D~^(-1/2) (A + I) D~^(-1/2), with D~ the degree matrix of A + I.
    CSR pieces are kept pre-canonicalized for the spmm kernel.
    """

    matrix: sp.csr_matrix
    indptr: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @classmethod
    def from_csr(cls, mat: sp.csr_matrix) -> "PropagationMatrix":
        mat = mat.tocsr()
        mat.sort_indices()
        return cls(
            matrix=mat,
            indptr=np.ascontiguousarray(mat.indptr, dtype=np.int64),
            indices=np.ascontiguousarray(mat.indices, dtype=np.int64),
            values=np.ascontiguousarray(mat.data, dtype=np.float64),
        )

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class SplitSpec:
    """A zero-shot evaluation split.

    train_labeled : labeled nodes visible to the embedding model (seen classes)
    probe_train   : balanced nodes used only by the downstream SVM probe
    test          : every node outside probe_train
    """

    seen: tuple[int, ...]
    unseen: tuple[int, ...]
    label_rate: float
    seed: int
    train_labeled: np.ndarray
    probe_train: np.ndarray
    test: np.ndarray


def _parse_pairs(path: Path):
    """Yield (line_number, tokens) for non-comment, non-empty lines."""
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        yield lineno, line.split()


def load_dataset(
    edges_path: str | Path,
    features_path: str | Path,
    labels_path: str | Path,
    n_features: int | None = None,
) -> Dataset:
    """Load a dataset from its three text files.

    The node count is the number of lines in the features file. Edges are
    symmetrized and deduplicated; self-loops are dropped with a logged
    warning count. When `n_features` is given, any feature index at or above
    it is rejected; otherwise the width is inferred from the data.

    Raises
    ------
    DataError
        On malformed lines (with line number), out-of-range node ids,
        class ids with zero members, or feature indices >= n_features.
    """
    edges_path, features_path, labels_path = (
        Path(edges_path),
        Path(features_path),
        Path(labels_path),
    )

    # features: line i -> node i
    rows, cols, vals = [], [], []
    feat_lines = features_path.read_text(encoding="utf-8").splitlines()
    n = len(feat_lines)
    if n == 0:
        raise DataError(f"{features_path}: empty features file")
    max_index = -1
    for i, raw in enumerate(feat_lines):
        line = raw.strip()
        if not line:
            continue
        seen_idx = set()
        for tok in line.split():
            idx_s, _, val_s = tok.partition(":")
            try:
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataError(
                    f"{features_path}:{i + 1}: malformed feature entry {tok!r}"
                ) from None
            if idx < 0:
                raise DataError(f"{features_path}:{i + 1}: negative feature index {idx}")
            if n_features is not None and idx >= n_features:
                raise DataError(
                    f"{features_path}:{i + 1}: feature index {idx} >= width {n_features}"
                )
            if idx in seen_idx:
                raise DataError(f"{features_path}:{i + 1}: duplicate feature index {idx}")
            if val < 0:
                raise DataError(f"{features_path}:{i + 1}: negative feature value {val}")
            seen_idx.add(idx)
            if val != 0.0:
                rows.append(i)
                cols.append(idx)
                vals.append(val)
                max_index = max(max_index, idx)
    d = n_features if n_features is not None else max_index + 1
    if d <= 0:
        raise DataError(f"{features_path}: no feature entries found")
    features = sp.csr_matrix(
        (np.asarray(vals), (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
        shape=(n, d),
    )

    # labels: exactly one per node
    labels = np.full(n, -1, dtype=np.int64)
    for lineno, toks in _parse_pairs(labels_path):
        if len(toks) != 2:
            raise DataError(f"{labels_path}:{lineno}: expected 'node class', got {toks}")
        try:
            node, cls = int(toks[0]), int(toks[1])
        except ValueError:
            raise DataError(f"{labels_path}:{lineno}: malformed pair {toks}") from None
        if not 0 <= node < n:
            raise DataError(f"{labels_path}:{lineno}: node id {node} out of range [0, {n})")
        if cls < 0:
            raise DataError(f"{labels_path}:{lineno}: negative class id {cls}")
        if labels[node] != -1:
            raise DataError(f"{labels_path}:{lineno}: duplicate label for node {node}")
        labels[node] = cls
    if (labels == -1).any():
        missing = int(np.argmax(labels == -1))
        raise DataError(f"{labels_path}: node {missing} has no label")
    n_classes = int(labels.max()) + 1
    counts = np.bincount(labels, minlength=n_classes)
    if (counts == 0).any():
        empty = int(np.argmax(counts == 0))
        raise DataError(f"{labels_path}: class id {empty} has zero members")

    # edges: dedup, symmetrize, drop self-loops
    pairs = set()
    self_loops = 0
    for lineno, toks in _parse_pairs(edges_path):
        if len(toks) != 2:
            raise DataError(f"{edges_path}:{lineno}: expected 'u v', got {toks}")
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError:
            raise DataError(f"{edges_path}:{lineno}: malformed edge {toks}") from None
        for node in (u, v):
            if not 0 <= node < n:
                raise DataError(f"{edges_path}:{lineno}: node id {node} out of range [0, {n})")
        if u == v:
            self_loops += 1
            continue
        pairs.add((min(u, v), max(u, v)))
    if self_loops:
        logger.warning("%s: dropped %d self-loop(s)", edges_path, self_loops)

    if pairs:
        uv = np.asarray(sorted(pairs), dtype=np.int64)
        src = np.concatenate([uv[:, 0], uv[:, 1]])
        dst = np.concatenate([uv[:, 1], uv[:, 0]])
        adjacency = sp.csr_matrix(
            (np.ones(src.shape[0]), (src, dst)), shape=(n, n)
        )
    else:
        adjacency = sp.csr_matrix((n, n))
    adjacency.sort_indices()

    return Dataset(adjacency=adjacency, features=features, labels=labels, n_classes=n_classes)


def write_dataset(
    ds: Dataset,
    edges_path: str | Path,
    features_path: str | Path,
    labels_path: str | Path,
) -> None:
    """Serialize a Dataset back into the three-file text format."""
    coo = sp.triu(ds.adjacency, k=1).tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u, v in zip(coo.row[order], coo.col[order]):
            fh.write(f"{u} {v}\n")
    feats = ds.features.tocsr()
    with open(features_path, "w", encoding="utf-8") as fh:
        for i in range(ds.n):
            row = feats.getrow(i)
            toks = [f"{j}:{float(v)!r}" for j, v in zip(row.indices, row.data)]
            fh.write(" ".join(toks) + "\n")
    with open(labels_path, "w", encoding="utf-8") as fh:
        for node, cls in enumerate(ds.labels):
            fh.write(f"{node} {cls}\n")


def normalize_adjacency(ds: Dataset) -> PropagationMatrix:
    """Return D~^(-1/2) (A + I) D~^(-1/2); isolated nodes keep a unit self-loop."""
    a_hat = (ds.adjacency + sp.identity(ds.n, format="csr")).tocsr()
    deg = np.asarray(a_hat.sum(axis=1)).ravel()
    dinv = 1.0 / np.sqrt(deg)
    scaled = sp.diags(dinv) @ a_hat @ sp.diags(dinv)
    return PropagationMatrix.from_csr(scaled.tocsr())


def average_degree(ds: Dataset) -> float:
    """Average node degree 2m/n."""
    return 2.0 * ds.m / ds.n


def make_zero_shot_split(
    ds: Dataset, label_rate: float, n_unseen: int, seed: int
) -> SplitSpec:
    """Draw a zero-shot split: unseen classes, balanced probe set, test set.

    The probe set has round(label_rate * n) nodes, floor(total / C) per class
    (capped by class size) with the remainder going to the lowest class ids.
    train_labeled is the probe members whose gold class is seen; the test set
    is the complement of the probe set.
    """
    if not 0.0 < label_rate < 1.0:
        raise ValueError(f"label_rate must be in (0, 1), got {label_rate}")
    if not 1 <= n_unseen < ds.n_classes:
        raise ValueError(
            f"n_unseen must be in [1, {ds.n_classes}), got {n_unseen}"
        )
    rng = np.random.default_rng(seed)
    unseen = np.sort(rng.choice(ds.n_classes, size=n_unseen, replace=False))
    seen = np.setdiff1d(np.arange(ds.n_classes), unseen)

    total = round(label_rate * ds.n)
    base, rem = divmod(total, ds.n_classes)
    if base == 0:
        raise ValueError(
            f"label_rate {label_rate} gives only {total} probe nodes for "
            f"{ds.n_classes} classes; some class would get zero probe nodes"
        )
    picks = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        quota = min(base + (1 if c < rem else 0), members.shape[0])
        picks.append(np.sort(rng.choice(members, size=quota, replace=False)))
    probe_train = np.sort(np.concatenate(picks))
    in_seen = np.isin(ds.labels[probe_train], seen)
    train_labeled = probe_train[in_seen]
    test = np.setdiff1d(np.arange(ds.n), probe_train, assume_unique=True)
    return SplitSpec(
        seen=tuple(int(c) for c in seen),
        unseen=tuple(int(c) for c in unseen),
        label_rate=label_rate,
        seed=seed,
        train_labeled=train_labeled,
        probe_train=probe_train,
        test=test,
    )
