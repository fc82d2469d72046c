"""Zero-shot evaluation: variant pipelines, SVM probe, F1 scoring, and
empirical risk diagnostics.

A variant produces an embedding for every node while seeing labels only from
the seen classes; a linear SVM trained on the balanced probe set (all
classes, gold labels) then classifies the test nodes.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .expansion import (
    expand_clusters,
    expand_seen,
    expansion_budget,
    kmeans,
    select_k_silhouette,
)
from .graph import Dataset, PropagationMatrix, SplitSpec, average_degree, make_zero_shot_split
from .linalg import ReducedFeatures
from .model import (
    EmbeddingMatrix,
    GcnModel,
    SemanticTable,
    TrainParams,
    compute_class_semantics,
    embed,
    forward,
    train,
)

logger = logging.getLogger(__name__)

VARIANTS = ("rect-l", "sl", "sul", "sul-star", "sl-sul", "sl-sul-star")

# salts for per-seed derived random streams, one per pipeline stage
_SALT_TRAIN = 1
_SALT_SL_RETRAIN = 2
_SALT_KMEANS_SUL = 3
_SALT_SUL_RETRAIN = 4
_SALT_SILHOUETTE = 5
_SALT_KMEANS_SULSTAR = 6
_SALT_SULSTAR_RETRAIN = 7
_SALT_SVM = 8
_SALT_DOMAIN = 9


def derive_seed(seed: int, salt: int) -> int:
    """Independent 63-bit stream seed for (seed, stage)."""
    return int(np.random.default_rng([seed, salt]).integers(0, 2**63))


@dataclass(frozen=True)
class PipelineParams:
    rank: int = 200
    hidden: int = 200
    epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    tau: int = 2
    k_min: int = 0  # 0 -> default range [2, max(10, C + 2)]
    k_max: int = 0
    svm_c: float = 1.0
    svm_epochs: int = 50
    svd_seed: int = 0

    def train_params(self) -> TrainParams:
        return TrainParams(
            hidden=self.hidden,
            epochs=self.epochs,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )


@dataclass(frozen=True)
class LinearSvm:
    """One-vs-rest linear SVM trained by Pegasos-style subgradient descent."""

    weights: np.ndarray  # n_classes x dim
    classes: np.ndarray

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights.T

    def predict(self, X: np.ndarray) -> np.ndarray:
        # argmax keeps the first maximum -> lowest class id on ties
        return self.classes[np.argmax(self.decision(X), axis=1)]


def train_linear_svm(
    X: np.ndarray,
    y: np.ndarray,
    reg_c: float = 1.0,
    epochs: int = 50,
    seed: int = 0,
) -> LinearSvm:
    """L2-regularized hinge loss, one weight vector per class.

    Deterministic epoch-based subgradient descent: per-epoch shuffles come
    from `seed`, the step at global count t is 1/(lambda t), and
    lambda = 1 / (reg_c * n) matches the usual C-SVM objective.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise ValueError("SVM probe needs at least 2 classes in its training set")
    index = {c: i for i, c in enumerate(classes)}
    y_mapped = np.asarray([index[v] for v in y], dtype=np.int64)
    n = X.shape[0]
    lam = 1.0 / (reg_c * n)
    rng = np.random.default_rng(seed)
    orders = np.stack([rng.permutation(n) for _ in range(epochs)])
    W = kernels.pegasos_ovr(X, y_mapped, classes.shape[0], lam, orders)
    return LinearSvm(weights=W, classes=classes)


def micro_macro_f1(
    predictions: np.ndarray, gold: np.ndarray, n_classes: int | None = None
) -> tuple[float, float]:
    """Micro-F1 from pooled TP/FP/FN and macro-F1 as the unweighted mean of
    per-class F1 (a class absent from both vectors scores 0)."""
    predictions = np.asarray(predictions)
    gold = np.asarray(gold)
    if predictions.shape != gold.shape:
        raise ValueError(f"length mismatch: {predictions.shape} vs {gold.shape}")
    if predictions.size == 0:
        raise ValueError("empty prediction vector")
    if n_classes is None:
        classes = np.union1d(predictions, gold)
    else:
        classes = np.arange(n_classes)
    tp_total = fp_total = fn_total = 0
    f1s = []
    for c in classes:
        tp = int(np.sum((predictions == c) & (gold == c)))
        fp = int(np.sum((predictions == c) & (gold != c)))
        fn = int(np.sum((predictions != c) & (gold == c)))
        tp_total, fp_total, fn_total = tp_total + tp, fp_total + fp, fn_total + fn
        denom = 2 * tp + fp + fn
        f1s.append(2 * tp / denom if denom else 0.0)
    micro_denom = 2 * tp_total + fp_total + fn_total
    micro = 2 * tp_total / micro_denom if micro_denom else 0.0
    return float(micro), float(np.mean(f1s))


def concat_embeddings(a: EmbeddingMatrix, b: EmbeddingMatrix) -> EmbeddingMatrix:
    """Row-wise concatenation, a's columns first."""
    if a.matrix.shape[0] != b.matrix.shape[0]:
        raise ValueError(
            f"row mismatch: {a.matrix.shape[0]} vs {b.matrix.shape[0]}"
        )
    return EmbeddingMatrix(
        matrix=np.hstack([a.matrix, b.matrix]), provenance="concatenated"
    )


class VariantPipeline:
    """Lazily builds per-variant models and embeddings for one split."""

    def __init__(
        self,
        ds: Dataset,
        prop: PropagationMatrix,
        X: ReducedFeatures,
        split: SplitSpec,
        params: PipelineParams,
        seed: int,
    ):
        self.ds = ds
        self.prop = prop
        self.X = X
        self.split = split
        self.params = params
        self.seed = seed
        self.zeta = average_degree(ds)
        self._emb: dict[str, EmbeddingMatrix] = {}
        self._models: dict[str, tuple[GcnModel, SemanticTable, dict[int, int]]] = {}
        self._expanded: dict[str, object] = {}
        self._base_predicted: np.ndarray | None = None

    def _train_on(self, labeled, expected, salt: int, key: str) -> EmbeddingMatrix:
        table = compute_class_semantics(self.X, labeled, expected_classes=expected)
        mapping = labeled.as_mapping() if hasattr(labeled, "as_mapping") else labeled
        model = train(
            self.prop,
            self.X,
            table,
            mapping,
            params=self.params.train_params(),
            seed=derive_seed(self.seed, salt),
        )
        self._models[key] = (model, table, dict(mapping))
        return embed(model, self.prop, self.X)

    def _base(self) -> EmbeddingMatrix:
        if "rect-l" not in self._emb:
            labeled = {
                int(n): int(self.ds.labels[n]) for n in self.split.train_labeled
            }
            emb = self._train_on(labeled, self.split.seen, _SALT_TRAIN, "rect-l")
            self._emb["rect-l"] = emb
            model, _, _ = self._models["rect-l"]
            _, self._base_predicted = forward(model, self.prop, self.X)
        return self._emb["rect-l"]

    def _sl(self) -> EmbeddingMatrix:
        if "sl" not in self._emb:
            self._base()
            model, table, _ = self._models["rect-l"]
            budget = expansion_budget(
                self.ds.n,
                self.zeta,
                self.params.tau,
                self.split.train_labeled.shape[0],
                len(self.split.seen),
            )
            expanded = expand_seen(
                self._base_predicted, table, self.split, budget, self.ds.labels
            )
            self._expanded["sl"] = expanded
            self._emb["sl"] = self._train_on(
                expanded, self.split.seen, _SALT_SL_RETRAIN, "sl"
            )
        return self._emb["sl"]

    def _sul(self, auto_k: bool) -> EmbeddingMatrix:
        key = "sul-star" if auto_k else "sul"
        if key not in self._emb:
            base = self._base()
            if auto_k:
                k_min = self.params.k_min or 2
                k_max = self.params.k_max or max(10, self.ds.n_classes + 2)
                k_max = min(k_max, self.ds.n)
                k = select_k_silhouette(
                    base.matrix, k_min, k_max, derive_seed(self.seed, _SALT_SILHOUETTE)
                )
                cl = kmeans(base.matrix, k, derive_seed(self.seed, _SALT_KMEANS_SULSTAR))
                retrain_salt = _SALT_SULSTAR_RETRAIN
            else:
                cl = kmeans(
                    base.matrix,
                    self.ds.n_classes,
                    derive_seed(self.seed, _SALT_KMEANS_SUL),
                )
                retrain_salt = _SALT_SUL_RETRAIN
            budget = expansion_budget(
                self.ds.n,
                self.zeta,
                self.params.tau,
                self.split.train_labeled.shape[0],
                cl.k,
            )
            expanded = expand_clusters(
                base, cl, self.split, budget, self.ds.labels, self.ds.n_classes
            )
            self._expanded[key] = expanded
            self._emb[key] = self._train_on(expanded, None, retrain_salt, key)
        return self._emb[key]

    def embedding(self, variant: str) -> EmbeddingMatrix:
        if variant == "rect-l":
            return self._base()
        if variant == "sl":
            return self._sl()
        if variant == "sul":
            return self._sul(auto_k=False)
        if variant == "sul-star":
            return self._sul(auto_k=True)
        if variant == "sl-sul":
            return concat_embeddings(self._sl(), self._sul(auto_k=False))
        if variant == "sl-sul-star":
            return concat_embeddings(self._sl(), self._sul(auto_k=True))
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")

    def model_for(self, variant: str):
        """(model, table, labeled) for single-model variants."""
        if variant not in ("rect-l", "sl", "sul", "sul-star"):
            raise ValueError(f"variant {variant!r} has no single underlying model")
        self.embedding(variant)
        return self._models[variant]

    def expanded_labels(self, variant: str):
        """The ExpandedLabels produced by an expansion variant."""
        if variant not in ("sl", "sul", "sul-star"):
            raise ValueError(f"variant {variant!r} performs no label expansion")
        self.embedding(variant)
        return self._expanded[variant]

    def probe_scores(self, variant: str) -> tuple[float, float]:
        emb = self.embedding(variant).matrix
        svm = train_linear_svm(
            emb[self.split.probe_train],
            self.ds.labels[self.split.probe_train],
            reg_c=self.params.svm_c,
            epochs=self.params.svm_epochs,
            seed=derive_seed(self.seed, _SALT_SVM),
        )
        pred = svm.predict(emb[self.split.test])
        return micro_macro_f1(
            pred, self.ds.labels[self.split.test], n_classes=self.ds.n_classes
        )


@dataclass
class VariantScores:
    micro_mean: float
    micro_std: float
    macro_mean: float
    macro_std: float
    per_seed: list[dict]

    def to_dict(self) -> dict:
        return {
            "micro_f1": self.micro_mean,
            "micro_f1_std": self.micro_std,
            "macro_f1": self.macro_mean,
            "macro_f1_std": self.macro_std,
            "per_seed": self.per_seed,
        }


@dataclass
class EvalReport:
    dataset: str
    label_rate: float
    n_unseen: int
    seeds: tuple[int, ...]
    variants: dict[str, VariantScores] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "label_rate": self.label_rate,
            "n_unseen": self.n_unseen,
            "seeds": list(self.seeds),
            "variants": {v: s.to_dict() for v, s in self.variants.items()},
        }

    def csv_rows(self) -> list[tuple]:
        rows = []
        for variant, scores in self.variants.items():
            for rec in scores.per_seed:
                rows.append(
                    (
                        variant,
                        self.dataset,
                        self.label_rate,
                        rec["seed"],
                        rec["micro_f1"],
                        rec["macro_f1"],
                    )
                )
        return rows


def _std(values: list[float]) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def evaluate_zero_shot(
    ds: Dataset,
    label_rate: float,
    n_unseen: int,
    variants,
    params: PipelineParams,
    seeds,
    prop: PropagationMatrix | None = None,
    X: ReducedFeatures | None = None,
    dataset_name: str = "dataset",
    threads: int = 1,
) -> EvalReport:
    """Run the requested variants over fresh per-seed splits and aggregate.

    Each repetition draws a new split (unseen classes and probe sample) from
    its seed; all model/clustering/SVM randomness is derived from the same
    seed, so a variant's scores do not depend on which other variants run.
    """
    for v in variants:
        if v not in VARIANTS:
            raise ValueError(f"unknown variant {v!r}; expected one of {VARIANTS}")
    prop, X = prepare_inputs(ds, params, prop, X)

    def one_seed(seed: int) -> dict[str, tuple[float, float]]:
        split = make_zero_shot_split(ds, label_rate, n_unseen, seed)
        pipeline = VariantPipeline(ds, prop, X, split, params, seed)
        return {v: pipeline.probe_scores(v) for v in variants}

    seeds = [int(s) for s in seeds]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_seed, seeds))
    else:
        results = [one_seed(s) for s in seeds]

    report = EvalReport(
        dataset=dataset_name, label_rate=label_rate, n_unseen=n_unseen, seeds=tuple(seeds)
    )
    for v in VARIANTS:
        if v not in variants:
            continue
        micro = [r[v][0] for r in results]
        macro = [r[v][1] for r in results]
        per_seed = [
            {"seed": s, "micro_f1": mi, "macro_f1": ma}
            for s, mi, ma in zip(seeds, micro, macro)
        ]
        report.variants[v] = VariantScores(
            micro_mean=float(np.mean(micro)),
            micro_std=_std(micro),
            macro_mean=float(np.mean(macro)),
            macro_std=_std(macro),
            per_seed=per_seed,
        )
    return report


def prepare_inputs(
    ds: Dataset,
    params: PipelineParams,
    prop: PropagationMatrix | None = None,
    X: ReducedFeatures | None = None,
) -> tuple[PropagationMatrix, ReducedFeatures]:
    """Normalize the adjacency and reduce features unless already cached."""
    from .graph import normalize_adjacency
    from .linalg import truncated_svd

    if prop is None:
        prop = normalize_adjacency(ds)
    if X is None:
        rank = min(params.rank, min(ds.n, ds.n_features))
        X = truncated_svd(ds.features, rank, seed=params.svd_seed)
    return prop, X


@dataclass(frozen=True)
class RiskDiagnostics:
    """Empirical prediction errors plus a proxy for the train/test
    distribution distance (balanced held-out error of a linear domain
    classifier, rescaled to [0, 2])."""

    empirical_train_error: float
    empirical_test_error: float
    proxy_distance: float

    def to_dict(self) -> dict:
        return {
            "empirical_train_error": self.empirical_train_error,
            "empirical_test_error": self.empirical_test_error,
            "proxy_distance": self.proxy_distance,
            "proxy_note": (
                "proxy A-distance from a linear domain classifier's balanced "
                "held-out error; not the formal distribution distance"
            ),
        }


def _domain_proxy(train_emb: np.ndarray, test_emb: np.ndarray, seed: int) -> float:
    rng = np.random.default_rng(seed)
    halves = []
    for emb in (train_emb, test_emb):
        perm = rng.permutation(emb.shape[0])
        cut = emb.shape[0] // 2
        halves.append((emb[perm[:cut]], emb[perm[cut:]]))
    (tr0, ev0), (tr1, ev1) = halves
    if min(tr0.shape[0], tr1.shape[0], ev0.shape[0], ev1.shape[0]) == 0:
        logger.warning("domain proxy: too few points for a held-out split")
        return 0.0
    X_tr = np.vstack([tr0, tr1])
    y_tr = np.concatenate([np.zeros(tr0.shape[0], int), np.ones(tr1.shape[0], int)])
    svm = train_linear_svm(X_tr, y_tr, reg_c=1.0, epochs=50, seed=seed)
    err0 = float(np.mean(svm.predict(ev0) != 0))
    err1 = float(np.mean(svm.predict(ev1) != 1))
    err = 0.5 * (err0 + err1)
    return max(0.0, 2.0 * (1.0 - 2.0 * err))


def risk_diagnostics(
    model: GcnModel,
    prop: PropagationMatrix,
    X: ReducedFeatures | np.ndarray,
    table: SemanticTable,
    labeled,
    split: SplitSpec,
    gold_labels: np.ndarray,
    embeddings: EmbeddingMatrix | None = None,
    seed: int = 0,
) -> RiskDiagnostics:
    """Mean absolute deviation between predicted and target semantic vectors
    on the labeled training set and on seen-class test nodes, plus the
    domain-classifier proxy distance between train and test embeddings.

    The test-error term uses gold labels and exists only as a diagnostic
    oracle; nothing in training consumes it.
    """
    mapping = labeled.as_mapping() if hasattr(labeled, "as_mapping") else dict(labeled)
    h1, predicted = forward(model, prop, X)
    emb = embeddings.matrix if embeddings is not None else h1

    train_nodes = np.asarray(sorted(mapping))
    train_targets = table.targets_for(np.asarray([mapping[int(n)] for n in train_nodes]))
    err_train = float(np.mean(np.abs(predicted[train_nodes] - train_targets)))

    in_table = set(table.class_ids)
    seen = set(split.seen)
    test_nodes = np.asarray(
        [n for n in split.test if int(gold_labels[n]) in seen and int(gold_labels[n]) in in_table]
    )
    if test_nodes.size:
        test_targets = table.targets_for(gold_labels[test_nodes])
        err_test = float(np.mean(np.abs(predicted[test_nodes] - test_targets)))
    else:
        logger.warning("risk diagnostics: no seen-class test nodes; test error set to 0")
        err_test = 0.0

    proxy = _domain_proxy(
        emb[train_nodes], emb[split.test], derive_seed(seed, _SALT_DOMAIN)
    )
    return RiskDiagnostics(
        empirical_train_error=err_train,
        empirical_test_error=err_test,
        proxy_distance=proxy,
    )


def diagnose_variant(
    ds: Dataset,
    label_rate: float,
    n_unseen: int,
    variant: str,
    params: PipelineParams,
    seed: int,
    prop: PropagationMatrix | None = None,
    X: ReducedFeatures | None = None,
) -> RiskDiagnostics:
    """Risk diagnostics for one single-model variant on a fresh split."""
    prop, X = prepare_inputs(ds, params, prop, X)
    split = make_zero_shot_split(ds, label_rate, n_unseen, seed)
    pipeline = VariantPipeline(ds, prop, X, split, params, seed)
    emb = pipeline.embedding(variant)
    model, table, labeled = pipeline.model_for(variant)
    return risk_diagnostics(
        model, prop, X, table, labeled, split, ds.labels, embeddings=emb, seed=seed
    )
