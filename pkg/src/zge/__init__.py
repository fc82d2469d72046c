"""Zero-shot graph embedding: a prototypical GCN with label expansion.

Train a two-layer GCN to regress labeled nodes onto their class prototypes
(mean reduced-feature vectors), expand the labeled set by semantic
self-training and/or embedding clustering, and evaluate embeddings with a
balanced linear-SVM probe under a zero-shot split.
"""

from .graph import (
    Dataset,
    PropagationMatrix,
    SplitSpec,
    average_degree,
    load_dataset,
    make_zero_shot_split,
    normalize_adjacency,
)
from .linalg import ReducedFeatures, prelu, randomized_svd, spmm, truncated_svd, xavier_init
from .model import (
    EmbeddingMatrix,
    GcnModel,
    SemanticTable,
    TrainParams,
    compute_class_semantics,
    decode_nearest_prototype,
    embed,
    forward,
    loss_and_gradients,
    train,
)
from .expansion import (
    Clustering,
    ExpandedLabels,
    ExpansionBudget,
    expand_clusters,
    expand_seen,
    expansion_budget,
    kmeans,
    select_k_silhouette,
    silhouette_score,
)
from .evaluation import (
    VARIANTS,
    EvalReport,
    LinearSvm,
    PipelineParams,
    RiskDiagnostics,
    concat_embeddings,
    evaluate_zero_shot,
    micro_macro_f1,
    risk_diagnostics,
    train_linear_svm,
)
from .optim import AdamState, adam_step

__version__ = "0.1.0"
