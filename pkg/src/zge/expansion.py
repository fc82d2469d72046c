"""Label expansion strategies over a trained model.

Seen-class self-training picks, per seen class, the unlabeled nodes whose
predicted semantic vectors are closest to the class prototype. Clustering
expansion runs K-means on the embeddings and labels each cluster's nodes
nearest its center with a fresh pseudo-class, covering unseen classes too.
Both respect a total budget of round(n / zeta^tau) labeled nodes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
import numpy as np

from . import kernels
from .errors import DataError, NumericError
from .graph import SplitSpec
from .model import PSEUDO, REAL, EmbeddingMatrix, SemanticTable

logger = logging.getLogger(__name__)

KMEANS_TOL = 1e-4
KMEANS_MAX_ITER = 100
SILHOUETTE_SUBSAMPLE_ABOVE = 5000
SILHOUETTE_SUBSAMPLE_SIZE = 2000


@dataclass(frozen=True)
class ExpansionBudget:
    """Total labeled-set target and its split into per-class quotas."""

    total_target: int
    quotas: tuple[int, ...]
    tau: int
    zeta: float

    @property
    def new_slots(self) -> int:
        return sum(self.quotas)


@dataclass(frozen=True)
class LabelEntry:
    label: int
    provenance: str  # original | expanded
    kind: str  # real | pseudo


@dataclass
class ExpandedLabels:
    """node id -> (label, provenance, kind); originals are never rewritten."""

    entries: dict[int, LabelEntry] = field(default_factory=dict)

    @classmethod
    def from_split(cls, split: SplitSpec, labels: np.ndarray) -> "ExpandedLabels":
        out = cls()
        for node in split.train_labeled:
            out.entries[int(node)] = LabelEntry(int(labels[node]), "original", REAL)
        return out

    def add_expanded(self, node: int, label: int, kind: str) -> None:
        if node in self.entries:
            raise ValueError(f"node {node} already labeled")
        self.entries[int(node)] = LabelEntry(int(label), "expanded", kind)

    def as_mapping(self) -> dict[int, int]:
        return {n: e.label for n, e in self.entries.items()}

    def pseudo_ids(self) -> set[int]:
        return {e.label for e in self.entries.values() if e.kind == PSEUDO}

    def original_nodes(self) -> set[int]:
        return {n for n, e in self.entries.items() if e.provenance == "original"}

    def __len__(self) -> int:
        return len(self.entries)


def expansion_budget(
    n: int, zeta: float, tau: int, labeled_size: int, n_classes: int
) -> ExpansionBudget:
    """T = round(n / zeta^tau); the slots beyond the current labeled set are
    split near-equally, remainder to the lowest ids."""
    if zeta <= 0:
        raise ValueError(f"average degree must be positive, got {zeta}")
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    if n_classes < 1:
        raise ValueError("need at least one target class")
    total = int(round(n / zeta**tau))
    new = max(0, total - labeled_size)
    base, rem = divmod(new, n_classes)
    quotas = tuple(base + (1 if i < rem else 0) for i in range(n_classes))
    return ExpansionBudget(total_target=total, quotas=quotas, tau=tau, zeta=zeta)


def _ranked(candidates: np.ndarray, sqd: np.ndarray) -> np.ndarray:
    """Candidates sorted by distance, node id breaking ties."""
    return candidates[np.lexsort((candidates, sqd))]


def _exact_sqdists(points: np.ndarray, refs: np.ndarray) -> np.ndarray:
    """Direct (points - ref)^2 sums, one column per reference row.

    Selection operators rank by these, so the arithmetic must be the exact
    difference form: Gram-style expansions round differently and can flip
    genuine ties (e.g. both members of a 2-point cluster sit exactly at the
    midpoint distance).
    """
    out = np.empty((points.shape[0], refs.shape[0]))
    for j in range(refs.shape[0]):
        out[:, j] = ((points - refs[j]) ** 2).sum(axis=1)
    return out


def expand_seen(
    predicted: np.ndarray,
    table: SemanticTable,
    split: SplitSpec,
    budget: ExpansionBudget,
    labels: np.ndarray,
) -> ExpandedLabels:
    """Self-training expansion of the seen classes.

    Every node outside train_labeled is a candidate for exactly one class:
    the seen class whose prototype is nearest its predicted semantic vector.
    Each class then takes its quota of nearest eligible candidates.
    """
    seen = sorted(split.seen)
    if len(budget.quotas) != len(seen):
        raise ValueError(
            f"budget has {len(budget.quotas)} quotas for {len(seen)} seen classes"
        )
    protos = np.stack([table.prototype(c) for c in seen])
    candidates = np.setdiff1d(np.arange(predicted.shape[0]), split.train_labeled)
    if candidates.size == 0:
        raise ValueError("empty candidate pool: every node is already labeled")

    dists = _exact_sqdists(predicted[candidates], protos)
    nearest = dists.argmin(axis=1)
    sqd = dists[np.arange(candidates.shape[0]), nearest]
    out = ExpandedLabels.from_split(split, labels)
    for ci, cls in enumerate(seen):
        mask = nearest == ci
        chosen = _ranked(candidates[mask], sqd[mask])[: budget.quotas[ci]]
        for node in chosen:
            out.add_expanded(int(node), cls, REAL)
    return out


@dataclass(frozen=True)
class Clustering:
    k: int
    centers: np.ndarray
    assignment: np.ndarray
    inertia: float
    inertia_history: tuple[float, ...]


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    sqd = kernels.pairwise_sqdist(points, centers[0][None, :]).ravel()
    for j in range(1, k):
        total = sqd.sum()
        if total <= 0.0:
            # all remaining mass on already-chosen locations
            idx = int(np.argmin(sqd))
        else:
            u = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(sqd), u, side="right"))
            idx = min(idx, n - 1)
        centers[j] = points[idx]
        np.minimum(sqd, kernels.pairwise_sqdist(points, centers[j][None, :]).ravel(), out=sqd)
    return centers


def kmeans(points: np.ndarray, k: int, seed: int) -> Clustering:
    """K-means++ seeding then Lloyd iterations until the max center shift
    drops below 1e-4 or 100 iterations pass. Empty clusters are re-seeded to
    the farthest point. Assignment ties go to the lowest cluster id."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds point count {n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not np.all(np.isfinite(points)):
        raise NumericError("non-finite points passed to kmeans")

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    history: list[float] = []
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        assign, sqd = kernels.assign_nearest(points, centers)
        # re-seed empty clusters one at a time: stealing the farthest point
        # may empty a singleton cluster, so recheck after every fix; stolen
        # points are marked so fewer distinct points than k cannot loop
        while True:
            counts = np.bincount(assign, minlength=k)
            empties = np.flatnonzero(counts == 0)
            if empties.size == 0 or sqd.max() <= 0.0:
                break
            cid = int(empties[0])
            far = int(np.argmax(sqd))
            centers[cid] = points[far]
            assign[far] = cid
            sqd[far] = -1.0
        history.append(float(np.maximum(sqd, 0.0).sum()))
        new_centers = centers.copy()
        for cid in range(k):
            members = assign == cid
            if members.any():
                new_centers[cid] = points[members].mean(axis=0)
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < KMEANS_TOL:
            break
    assign, sqd = kernels.assign_nearest(points, centers)
    return Clustering(
        k=k,
        centers=centers,
        assignment=assign,
        inertia=float(sqd.sum()),
        inertia_history=tuple(history),
    )


def silhouette_score(points: np.ndarray, assignment: np.ndarray) -> float:
    """Mean of (b - a) / max(a, b); singletons and the a=b=0 case score 0."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    assignment = np.asarray(assignment)
    uniq, inv = np.unique(assignment, return_inverse=True)
    k = uniq.shape[0]
    if k < 2:
        raise ValueError("silhouette needs at least 2 clusters")
    counts = np.bincount(inv, minlength=k)
    sums = kernels.cluster_dist_sums(points, inv.astype(np.int64), k)
    n = points.shape[0]
    own = counts[inv]
    scores = np.zeros(n)
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[np.arange(n), inv] / (own - 1)
        mean_other = sums / counts[None, :]
        mean_other[np.arange(n), inv] = np.inf
        b = mean_other.min(axis=1)
        denom = np.maximum(a, b)
        valid = (own > 1) & (denom > 0)
        scores[valid] = (b[valid] - a[valid]) / denom[valid]
    return float(scores.mean())


def select_k_silhouette(points: np.ndarray, k_min: int, k_max: int, seed: int) -> int:
    """The k in [k_min, k_max] whose k-means clustering maximizes the mean
    silhouette (ties -> smallest k). Above 5000 points the silhouette is
    computed on a seeded 2000-point subsample."""
    n = points.shape[0]
    if not 2 <= k_min <= k_max <= n:
        raise ValueError(f"need 2 <= k_min <= k_max <= {n}, got [{k_min}, {k_max}]")
    rng = np.random.default_rng(seed)
    k_seeds = rng.integers(0, 2**63, size=k_max - k_min + 1)
    sub_seed = int(rng.integers(0, 2**63))
    subsample = None
    if n > SILHOUETTE_SUBSAMPLE_ABOVE:
        subsample = np.sort(
            np.random.default_rng(sub_seed).choice(
                n, size=SILHOUETTE_SUBSAMPLE_SIZE, replace=False
            )
        )
    best_k, best_score = k_min, -np.inf
    for j, k in enumerate(range(k_min, k_max + 1)):
        cl = kmeans(points, k, seed=int(k_seeds[j]))
        pts, asg = points, cl.assignment
        if subsample is not None:
            pts, asg = points[subsample], cl.assignment[subsample]
        score = silhouette_score(pts, asg) if np.unique(asg).size >= 2 else -1.0
        if score > best_score:
            best_k, best_score = k, score
    return best_k


def expand_clusters(
    embeddings: EmbeddingMatrix | np.ndarray,
    clustering: Clustering,
    split: SplitSpec,
    budget: ExpansionBudget,
    labels: np.ndarray,
    n_classes: int,
) -> ExpandedLabels:
    """Clustering-based expansion over seen and unseen classes.

    Cluster c contributes its quota of member nodes nearest its center
    (originally labeled nodes excluded) under pseudo-class id n_classes + c.
    Unmet quotas are reallocated to clusters that still have candidates,
    with a warning.
    """
    emb = embeddings.matrix if isinstance(embeddings, EmbeddingMatrix) else np.asarray(embeddings)
    if clustering.assignment.shape[0] != emb.shape[0]:
        raise ValueError("clustering does not cover the embedding's node set")
    if len(budget.quotas) != clustering.k:
        raise ValueError(
            f"budget has {len(budget.quotas)} quotas for {clustering.k} clusters"
        )
    original = set(int(v) for v in split.train_labeled)
    out = ExpandedLabels.from_split(split, labels)

    ranked: list[np.ndarray] = []
    for cid in range(clustering.k):
        members = np.flatnonzero(clustering.assignment == cid)
        members = members[~np.isin(members, list(original))] if original else members
        if members.size:
            sqd = kernels.pairwise_sqdist(emb[members], clustering.centers[cid][None, :]).ravel()
            ranked.append(_ranked(members, sqd))
        else:
            ranked.append(np.empty(0, dtype=np.int64))

    taken = [min(len(ranked[c]), budget.quotas[c]) for c in range(clustering.k)]
    shortfall = sum(budget.quotas) - sum(taken)
    if shortfall > 0:
        logger.warning(
            "reallocating %d unmet expansion slot(s) across clusters", shortfall
        )
        while shortfall > 0:
            progressed = False
            for cid in range(clustering.k):
                if shortfall == 0:
                    break
                if taken[cid] < len(ranked[cid]):
                    taken[cid] += 1
                    shortfall -= 1
                    progressed = True
            if not progressed:
                break
    for cid in range(clustering.k):
        for node in ranked[cid][: taken[cid]]:
            out.add_expanded(int(node), n_classes + cid, PSEUDO)
    return out


def write_expanded_labels(
    el: ExpandedLabels, path: str | Path, header: str | None = None
) -> None:
    """Audit dump: ``node label provenance kind`` per line; optional
    '#'-comment header (e.g. the config hash)."""
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"# {header}\n")
        for node in sorted(el.entries):
            e = el.entries[node]
            fh.write(f"{node} {e.label} {e.provenance} {e.kind}\n")


def read_expanded_labels(path: str | Path) -> ExpandedLabels:
    out = ExpandedLabels()
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) != 4 or toks[2] not in ("original", "expanded") or toks[3] not in (REAL, PSEUDO):
            raise DataError(f"{path}:{lineno}: malformed expanded-label line {raw!r}")
        out.entries[int(toks[0])] = LabelEntry(int(toks[1]), toks[2], toks[3])
    return out
