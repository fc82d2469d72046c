import numpy as np
import pytest

from conftest import make_blob_dataset
from zge.evaluation import (
    PipelineParams,
    RiskDiagnostics,
    concat_embeddings,
    diagnose_variant,
    micro_macro_f1,
    risk_diagnostics,
    train_linear_svm,
)
from zge.graph import make_zero_shot_split, normalize_adjacency
from zge.linalg import truncated_svd
from zge.model import (
    EmbeddingMatrix,
    GcnModel,
    TrainParams,
    compute_class_semantics,
    forward,
    train,
)


class TestLinearSvm:
    def test_separable_two_class(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(-3, 0.4, (25, 3)), rng.normal(3, 0.4, (25, 3))])
        y = np.repeat([0, 1], 25)
        svm = train_linear_svm(X, y, seed=1)
        assert (svm.predict(X) == y).mean() == 1.0

    def test_no_signal_near_chance(self):
        X = np.ones((40, 5))
        y = np.repeat([0, 1], 20)
        svm = train_linear_svm(X, y, seed=2)
        acc = (svm.predict(X) == y).mean()
        assert abs(acc - 0.5) <= 0.25

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_linear_svm(np.zeros((5, 2)), np.zeros(5, dtype=int))

    def test_three_class_vs_qp_oracle(self):
        cvxpy = pytest.importorskip("cvxpy")
        rng = np.random.default_rng(3)
        centers = np.array([[0.0, 4.0], [-4.0, -2.0], [4.0, -2.0]])
        X = np.vstack([rng.normal(c, 1.0, (7, 2)) for c in centers])
        y = np.repeat([0, 1, 2], 7)
        n = X.shape[0]
        svm = train_linear_svm(X, y, reg_c=1.0, epochs=200, seed=4)

        # margin-maximizing oracle: exact one-vs-rest soft-margin QP per class
        W_exact = []
        for c in range(3):
            s = np.where(y == c, 1.0, -1.0)
            w = cvxpy.Variable(2)
            xi = cvxpy.Variable(n)
            lam = 1.0 / n  # same objective scaling as the subgradient trainer
            objective = cvxpy.Minimize(
                0.5 * lam * cvxpy.sum_squares(w) + cvxpy.sum(xi) / n
            )
            constraints = [cvxpy.multiply(s, X @ w) >= 1 - xi, xi >= 0]
            cvxpy.Problem(objective, constraints).solve()
            W_exact.append(w.value)
        oracle_pred = (X @ np.stack(W_exact).T).argmax(1)
        agree = (svm.predict(X) == oracle_pred).mean()
        assert agree >= 18 / 20

    def test_scale_invariance_of_decisions(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((30, 4))
        y = rng.integers(0, 3, size=30)
        base = train_linear_svm(X, y, reg_c=1.0, epochs=30, seed=6)
        s = 4.0
        scaled = train_linear_svm(X * s, y, reg_c=1.0 / s**2, epochs=30, seed=6)
        assert np.array_equal(base.predict(X), scaled.predict(X * s))

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((20, 3))
        y = rng.integers(0, 2, size=20)
        a = train_linear_svm(X, y, seed=8)
        b = train_linear_svm(X, y, seed=8)
        assert np.array_equal(a.weights, b.weights)


class TestMicroMacroF1:
    def test_all_correct(self):
        micro, macro = micro_macro_f1(np.array([0, 1, 2]), np.array([0, 1, 2]))
        assert micro == 1.0 and macro == 1.0

    def test_micro_equals_accuracy_single_label(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            n = int(rng.integers(2, 40))
            k = int(rng.integers(2, 6))
            gold = rng.integers(0, k, size=n)
            pred = rng.integers(0, k, size=n)
            micro, _ = micro_macro_f1(pred, gold, n_classes=k)
            assert micro == pytest.approx((pred == gold).mean())

    def test_hand_confusion_case(self):
        gold = np.array([0, 0, 1, 1, 2, 2])
        pred = np.array([0, 1, 1, 1, 2, 0])
        # class 0: tp=1 fp=1 fn=1 -> f1 = 2/4; class 1: tp=2 fp=1 fn=0 -> 4/5
        # class 2: tp=1 fp=0 fn=1 -> 2/3
        micro, macro = micro_macro_f1(pred, gold)
        assert micro == pytest.approx(4 / 6)
        assert macro == pytest.approx((0.5 + 0.8 + 2 / 3) / 3)

    def test_absent_class_counts_zero(self):
        gold = np.array([0, 0])
        pred = np.array([0, 0])
        _, macro = micro_macro_f1(pred, gold, n_classes=3)
        assert macro == pytest.approx(1.0 / 3.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            micro_macro_f1(np.zeros(3), np.zeros(4))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            micro_macro_f1(np.zeros(0), np.zeros(0))


class TestConcat:
    def test_widths_add(self):
        a = EmbeddingMatrix(np.ones((2, 3)), "rect-l")
        b = EmbeddingMatrix(np.zeros((2, 2)), "rect-l")
        out = concat_embeddings(a, b)
        assert out.matrix.shape == (2, 5)
        assert out.provenance == "concatenated"

    def test_zero_width_identity(self):
        a = EmbeddingMatrix(np.ones((4, 3)), "rect-l")
        b = EmbeddingMatrix(np.zeros((4, 0)), "rect-l")
        assert np.array_equal(concat_embeddings(a, b).matrix, a.matrix)

    def test_column_order(self):
        a = EmbeddingMatrix(np.full((2, 1), 1.0), "rect-l")
        b = EmbeddingMatrix(np.full((2, 1), 2.0), "rect-l")
        assert np.array_equal(
            concat_embeddings(a, b).matrix, np.array([[1.0, 2.0], [1.0, 2.0]])
        )

    def test_row_mismatch(self):
        a = EmbeddingMatrix(np.ones((2, 3)), "rect-l")
        b = EmbeddingMatrix(np.ones((3, 3)), "rect-l")
        with pytest.raises(ValueError):
            concat_embeddings(a, b)


class TestRiskDiagnostics:
    def _trained_setting(self, epochs=60):
        ds = make_blob_dataset(n_per_class=12, n_classes=3, seed=11)
        prop = normalize_adjacency(ds)
        X = truncated_svd(ds.features, 6, seed=0)
        split = make_zero_shot_split(ds, 0.3, 1, seed=1)
        labeled = {int(n): int(ds.labels[n]) for n in split.train_labeled}
        table = compute_class_semantics(X, labeled, expected_classes=split.seen)
        model = train(prop, X, table, labeled, TrainParams(hidden=6, epochs=epochs), seed=2)
        return ds, prop, X, split, labeled, table, model

    def test_matches_direct_summation_oracle(self):
        ds, prop, X, split, labeled, table, model = self._trained_setting()
        diag = risk_diagnostics(
            model, prop, X, table, labeled, split, ds.labels, seed=3
        )
        _, predicted = forward(model, prop, X)
        # direct evaluation of the mean absolute deviations
        train_err = np.mean(
            [
                np.mean(np.abs(predicted[n] - table.prototype(c)))
                for n, c in sorted(labeled.items())
            ]
        )
        seen = set(split.seen)
        test_nodes = [v for v in split.test if int(ds.labels[v]) in seen]
        test_err = np.mean(
            [
                np.mean(np.abs(predicted[v] - table.prototype(int(ds.labels[v]))))
                for v in test_nodes
            ]
        )
        assert diag.empirical_train_error == pytest.approx(train_err, abs=1e-12)
        assert diag.empirical_test_error == pytest.approx(test_err, abs=1e-12)
        assert 0.0 <= diag.proxy_distance <= 2.0

    def test_zero_train_error_when_predictions_equal_prototypes(self):
        # identity network on identity features: predictions == feature rows
        from conftest import build_dataset

        ds = build_dataset([], np.eye(4), [0, 0, 1, 1])
        prop = normalize_adjacency(ds)
        X = np.eye(4)
        model = GcnModel(
            w1=np.eye(4), slopes=np.ones(4), w2=np.eye(4),
            params=TrainParams(hidden=4), seed=0,
        )
        labeled = {0: 0, 2: 1}
        table = compute_class_semantics(X, labeled)
        split = make_zero_shot_split(ds, 0.5, 1, seed=5)
        split = type(split)(
            seen=(0, 1), unseen=(), label_rate=0.5, seed=5,
            train_labeled=np.array([0, 2]), probe_train=np.array([0, 2]),
            test=np.array([1, 3]),
        )
        diag = risk_diagnostics(model, prop, X, table, labeled, split, ds.labels, seed=0)
        assert diag.empirical_train_error == pytest.approx(0.0, abs=1e-15)

    def test_identical_distributions_proxy_near_zero(self):
        from zge.evaluation import _domain_proxy

        pts = np.random.default_rng(4).standard_normal((60, 5))
        proxy = _domain_proxy(pts, pts.copy(), seed=6)
        assert proxy == pytest.approx(0.0, abs=0.15)

    def test_separated_distributions_proxy_near_two(self):
        from zge.evaluation import _domain_proxy

        rng = np.random.default_rng(5)
        a = rng.normal(-5, 0.3, size=(50, 4))
        b = rng.normal(5, 0.3, size=(50, 4))
        assert _domain_proxy(a, b, seed=7) > 1.5

    def test_diagnose_variant_end_to_end(self):
        ds = make_blob_dataset(n_per_class=10, n_classes=3, seed=12)
        params = PipelineParams(rank=6, hidden=6, epochs=15)
        for variant in ("rect-l", "sl"):
            diag = diagnose_variant(ds, 0.3, 1, variant, params, seed=0)
            assert isinstance(diag, RiskDiagnostics)
            assert np.isfinite(diag.empirical_train_error)
            assert np.isfinite(diag.empirical_test_error)
            assert 0.0 <= diag.proxy_distance <= 2.0
