"""The prototypical two-layer GCN: class-semantic readout, training with the
semantic regression loss, embedding extraction, and nearest-prototype decoding.

The network maps reduced node features into the same reduced space the class
prototypes live in: H1 = PReLU(A_hat X W1), Y_pred = A_hat H1 W2. Training
minimizes the mean squared difference between a labeled node's predicted
vector and its class prototype (the mean reduced-feature vector of the
class's labeled nodes).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from . import kernels, matio
from .errors import DataError, NumericError
from .graph import PropagationMatrix
from .linalg import ReducedFeatures, prelu, xavier_init
from .optim import AdamState, adam_step

REAL = "real"
PSEUDO = "pseudo"


@dataclass(frozen=True)
class SemanticTable:
    """Class id -> prototype vector, with a real/pseudo flag per class.

    Rows of `prototypes` are ordered by ascending class id, so nearest-row
    lookups break distance ties toward the lowest class id.
    """

    class_ids: tuple[int, ...]
    prototypes: np.ndarray
    kinds: tuple[str, ...]

    def __post_init__(self):
        if len(self.class_ids) != len(set(self.class_ids)):
            raise ValueError("duplicate class id in semantic table")
        if not np.all(np.isfinite(self.prototypes)):
            raise NumericError("non-finite prototype in semantic table")

    def index_of(self, class_id: int) -> int:
        try:
            return self.class_ids.index(class_id)
        except ValueError:
            raise KeyError(f"class {class_id} not in semantic table") from None

    def prototype(self, class_id: int) -> np.ndarray:
        return self.prototypes[self.index_of(class_id)]

    def targets_for(self, classes: np.ndarray) -> np.ndarray:
        """Stack the prototype rows for an array of class ids."""
        lookup = {c: i for i, c in enumerate(self.class_ids)}
        try:
            idx = np.asarray([lookup[int(c)] for c in classes])
        except KeyError as exc:
            raise KeyError(f"class {exc.args[0]} not in semantic table") from None
        return self.prototypes[idx]


@dataclass(frozen=True)
class TrainParams:
    hidden: int = 200
    epochs: int = 100
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class GcnModel:
    w1: np.ndarray
    slopes: np.ndarray
    w2: np.ndarray
    params: TrainParams
    seed: int
    loss_history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class EmbeddingMatrix:
    """n x h dense embedding with a provenance tag."""

    matrix: np.ndarray
    provenance: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise NumericError("non-finite embedding entries")


def compute_class_semantics(
    X: ReducedFeatures | np.ndarray,
    labeled,
    expected_classes=None,
) -> SemanticTable:
    """Prototypes as arithmetic means of labeled nodes' reduced features.

    `labeled` is either a node -> class mapping or an ExpandedLabels
    instance (whose pseudo classes are flagged in the table). When
    `expected_classes` is given, every listed class must carry at least
    one labeled node.
    """
    feats = X.matrix if isinstance(X, ReducedFeatures) else np.asarray(X)
    pseudo_ids: set[int] = set()
    if hasattr(labeled, "as_mapping"):  # ExpandedLabels
        pseudo_ids = set(labeled.pseudo_ids())
        mapping: Mapping[int, int] = labeled.as_mapping()
    else:
        mapping = labeled
    if not mapping:
        raise ValueError("empty labeled set")

    by_class: dict[int, list[int]] = {}
    for node, cls in mapping.items():
        by_class.setdefault(int(cls), []).append(int(node))
    if expected_classes is not None:
        missing = sorted(set(int(c) for c in expected_classes) - by_class.keys())
        if missing:
            raise ValueError(f"class {missing[0]} has zero labeled nodes")

    class_ids = tuple(sorted(by_class))
    prototypes = np.stack(
        [feats[np.asarray(sorted(by_class[c]))].mean(axis=0) for c in class_ids]
    )
    kinds = tuple(PSEUDO if c in pseudo_ids else REAL for c in class_ids)
    return SemanticTable(class_ids=class_ids, prototypes=prototypes, kinds=kinds)


def _propagate(prop: PropagationMatrix, X: np.ndarray) -> np.ndarray:
    return kernels.csr_spmm_raw(prop.indptr, prop.indices, prop.values, prop.n, X)


def _forward_full(model: GcnModel, prop: PropagationMatrix, X: np.ndarray):
    """Forward pass keeping intermediates for backprop."""
    M = _propagate(prop, X)
    Z = M @ model.w1
    act = prelu(Z, model.slopes)
    if not np.all(np.isfinite(act.out)):
        raise NumericError("non-finite values in hidden layer (layer 1)")
    AH = _propagate(prop, act.out)
    Yp = AH @ model.w2
    if not np.all(np.isfinite(Yp)):
        raise NumericError("non-finite values in output layer (layer 2)")
    return M, act, AH, Yp


def forward(
    model: GcnModel, prop: PropagationMatrix, X: ReducedFeatures | np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Return (H1, Y_pred): the hidden embedding and the predicted semantics."""
    feats = X.matrix if isinstance(X, ReducedFeatures) else np.asarray(X)
    _, act, _, Yp = _forward_full(model, prop, feats)
    return act.out, Yp


def loss_and_gradients(
    model: GcnModel,
    prop: PropagationMatrix,
    X: ReducedFeatures | np.ndarray,
    table: SemanticTable,
    labeled: Mapping[int, int],
):
    """Semantic MSE over labeled nodes plus hand-derived gradients.

    loss = mean over labeled nodes of the per-dimension mean squared
    difference between the predicted vector and the class prototype.
    """
    if not labeled:
        raise ValueError("empty labeled set")
    feats = X.matrix if isinstance(X, ReducedFeatures) else np.asarray(X)
    nodes = np.asarray(sorted(labeled))
    classes = np.asarray([labeled[int(i)] for i in nodes])
    targets = table.targets_for(classes)

    M, act, AH, Yp = _forward_full(model, prop, feats)
    resid = Yp[nodes] - targets
    loss = float(np.mean(resid**2))

    G = np.zeros_like(Yp)
    G[nodes] = (2.0 / resid.size) * resid
    AG = _propagate(prop, G)
    g_w2 = act.out.T @ AG
    d_h1 = AG @ model.w2.T
    d_z = d_h1 * act.dinput
    g_slopes = np.einsum("ij,ij->j", d_h1, act.dslope)
    g_w1 = M.T @ d_z
    return loss, {"w1": g_w1, "slopes": g_slopes, "w2": g_w2}


def train(
    prop: PropagationMatrix,
    X: ReducedFeatures | np.ndarray,
    table: SemanticTable,
    labeled: Mapping[int, int],
    params: TrainParams = TrainParams(),
    seed: int = 0,
) -> GcnModel:
    """Full-batch training: one Adam step per epoch from Xavier init."""
    feats = X.matrix if isinstance(X, ReducedFeatures) else np.asarray(X)
    d_in = feats.shape[1]
    d_out = table.prototypes.shape[1]
    if d_in != d_out:
        raise ValueError(
            f"feature dim {d_in} must match prototype dim {d_out} "
            "(prototypes live in the reduced feature space)"
        )
    rng = np.random.default_rng(seed)
    w1_seed, w2_seed = (int(s) for s in rng.integers(0, 2**63, size=2))
    model = GcnModel(
        w1=xavier_init(d_in, params.hidden, w1_seed),
        slopes=np.full(params.hidden, 0.25),
        w2=xavier_init(params.hidden, d_out, w2_seed),
        params=params,
        seed=seed,
    )
    tensors = {"w1": model.w1, "slopes": model.slopes, "w2": model.w2}
    state = AdamState.for_params(
        tensors, lr=params.lr, beta1=params.beta1, beta2=params.beta2, eps=params.eps
    )
    for _ in range(params.epochs):
        loss, grads = loss_and_gradients(model, prop, feats, table, labeled)
        adam_step(tensors, grads, state)
        model.loss_history.append(loss)
    return model


def embed(
    model: GcnModel, prop: PropagationMatrix, X: ReducedFeatures | np.ndarray
) -> EmbeddingMatrix:
    """First-hidden-layer outputs as the node embedding."""
    h1, _ = forward(model, prop, X)
    return EmbeddingMatrix(matrix=h1, provenance="rect-l")


def decode_nearest_prototype(y: np.ndarray, table: SemanticTable) -> int:
    """Class of the Euclidean-nearest prototype; ties go to the lowest id."""
    if len(table.class_ids) == 0:
        raise ValueError("empty semantic table")
    idx, _ = kernels.assign_nearest(np.asarray(y)[None, :], table.prototypes)
    return table.class_ids[int(idx[0])]


def save_model(model: GcnModel, directory: str | Path) -> None:
    """Checkpoint: one ZGEM file per parameter plus a plain-text manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    matio.write_matrix(directory / "w1.zgem", model.w1)
    matio.write_matrix(directory / "slopes.zgem", model.slopes[None, :])
    matio.write_matrix(directory / "w2.zgem", model.w2)
    p = model.params
    lines = [
        f"w1_shape={model.w1.shape[0]}x{model.w1.shape[1]}",
        f"slopes_shape={model.slopes.shape[0]}",
        f"w2_shape={model.w2.shape[0]}x{model.w2.shape[1]}",
        f"hidden={p.hidden}",
        f"epochs={p.epochs}",
        f"lr={p.lr!r}",
        f"beta1={p.beta1!r}",
        f"beta2={p.beta2!r}",
        f"eps={p.eps!r}",
        f"seed={model.seed}",
        "loss_history=" + ",".join(repr(v) for v in model.loss_history),
    ]
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(directory: str | Path) -> GcnModel:
    directory = Path(directory)
    manifest = {}
    for line in (directory / "manifest.txt").read_text(encoding="utf-8").splitlines():
        if line.strip():
            key, _, val = line.partition("=")
            manifest[key] = val
    w1 = matio.read_matrix(directory / "w1.zgem")
    slopes = matio.read_matrix(directory / "slopes.zgem").ravel()
    w2 = matio.read_matrix(directory / "w2.zgem")
    expect = (
        f"{w1.shape[0]}x{w1.shape[1]}",
        str(slopes.shape[0]),
        f"{w2.shape[0]}x{w2.shape[1]}",
    )
    stored = (manifest["w1_shape"], manifest["slopes_shape"], manifest["w2_shape"])
    if stored != expect:
        raise DataError(f"checkpoint shape mismatch: manifest {stored} vs files {expect}")
    params = TrainParams(
        hidden=int(manifest["hidden"]),
        epochs=int(manifest["epochs"]),
        lr=float(manifest["lr"]),
        beta1=float(manifest["beta1"]),
        beta2=float(manifest["beta2"]),
        eps=float(manifest["eps"]),
    )
    history = [float(v) for v in manifest["loss_history"].split(",") if v]
    return GcnModel(
        w1=w1,
        slopes=slopes,
        w2=w2,
        params=params,
        seed=int(manifest["seed"]),
        loss_history=history,
    )
