import numpy as np
import pytest
from oracles import naive_knn

from zoneocr.knn import knn_fit, knn_predict, knn_predict_batch, load_knn_model, save_knn_model
from zoneocr.preprocess import PreprocessConfig
from zoneocr.zoning import FeatureTable, GridSpec


def make_table(features, labels, n_classes=None):
    features = np.asarray(features, dtype=np.float64)
    n_classes = n_classes or int(max(labels)) + 1
    dim = features.shape[1]
    return FeatureTable(
        GridSpec(1, dim), [(c, f"c{c}") for c in range(n_classes)], labels,
        [f"s{i}" for i in range(len(labels))], features,
    )


def random_table(rng, n, dim=16, n_classes=4, quantized=True):
    if quantized:
        feats = rng.integers(0, 3, (n, dim)) * 0.5  # dyadic values: exact arithmetic, many ties
    else:
        feats = rng.random((n, dim))
    return make_table(feats, rng.integers(0, n_classes, n), n_classes)


class TestFit:
    def test_stores_rows(self):
        t = random_table(np.random.default_rng(0), 10)
        m = knn_fit(t)
        assert m.table is t and m.metric == "euclidean"

    def test_single_row(self):
        m = knn_fit(make_table([[0.1] * 16], [0]))
        assert knn_predict(m, [0.9] * 16, 1)[0] == 0

    def test_empty(self):
        with pytest.raises(ValueError):
            knn_fit(make_table(np.zeros((0, 16)), np.zeros(0, int), 1))


class TestPredict:
    def test_exact_match(self):
        t = random_table(np.random.default_rng(1), 20, quantized=False)
        m = knn_fit(t)
        cls, nb = knn_predict(m, t.features[7], 1)
        assert nb == [7] and cls == t.class_ids[7]

    def test_three_point_example(self):
        rows = np.zeros((3, 16))
        rows[1, 0] = 1.0
        rows[2, :2] = 1.0
        m = knn_fit(make_table(rows, [0, 1, 1]))
        q = np.zeros(16)
        q[:2] = [0.9, 0.1]
        expected = naive_knn(rows, [0, 1, 1], q, 3)
        assert expected[0] == 1
        assert knn_predict(m, q, 3) == expected

    def test_k_equals_all_rows_is_global_majority(self):
        rng = np.random.default_rng(2)
        t = random_table(rng, 25, quantized=False)
        q = rng.random(16)
        assert knn_predict(knn_fit(t), q, 25)[0] == naive_knn(t.features, t.class_ids, q, 25)[0]
        counts = np.bincount(t.class_ids)
        if (counts == counts.max()).sum() == 1:
            assert knn_predict(knn_fit(t), q, 25)[0] == counts.argmax()

    def test_distance_tie_uses_storage_order(self):
        rows = [[1.0, 0.0], [-1.0, 0.0]]
        m = knn_fit(make_table(rows, [1, 0]))
        cls, nb = knn_predict(m, [0.0, 0.0], 1)
        assert nb == [0] and cls == 1

    def test_vote_tie_uses_summed_distance(self):
        rows = [[0.0, 1.0], [0.0, 3.0], [0.0, -1.5], [0.0, -1.6]]
        m = knn_fit(make_table(rows, [0, 0, 1, 1]))
        # class 0: 1 + 3 = 4, class 1: 1.5 + 1.6 = 3.1
        assert knn_predict(m, [0.0, 0.0], 4)[0] == 1

    def test_vote_tie_then_class_id(self):
        rows = [[1.0, 0.0], [-1.0, 0.0]]
        m = knn_fit(make_table(rows, [3, 2], 4))
        assert knn_predict(m, [0.0, 0.0], 2)[0] == 2

    @pytest.mark.parametrize("k", [0, 11])
    def test_k_out_of_range(self, k):
        m = knn_fit(random_table(np.random.default_rng(3), 10))
        with pytest.raises(ValueError):
            knn_predict(m, np.zeros(16), k)

    def test_dimension_mismatch(self):
        m = knn_fit(random_table(np.random.default_rng(3), 10))
        with pytest.raises(ValueError):
            knn_predict(m, np.zeros(15), 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_oracle(self, seed):
        rng = np.random.default_rng(seed)
        t = random_table(rng, int(rng.integers(1, 60)), quantized=seed % 2 == 0)
        m = knn_fit(t)
        for _ in range(5):
            q = (rng.integers(0, 3, 16) * 0.5) if seed % 2 == 0 else rng.random(16)
            for k in range(1, min(15, len(t)) + 1):
                assert knn_predict(m, q, k) == naive_knn(t.features, t.class_ids, q, k)

    def test_translation_invariance(self):
        rng = np.random.default_rng(11)
        t = random_table(rng, 40, quantized=False)
        shift = rng.random(16) * 3
        moved = make_table(t.features + shift, t.class_ids, 4)
        queries = rng.random((20, 16))
        for k in (1, 3, 7):
            assert np.array_equal(
                knn_predict_batch(knn_fit(t), queries, k),
                knn_predict_batch(knn_fit(moved), queries + shift, k),
            )

    def test_storage_order_irrelevant_without_ties(self):
        rng = np.random.default_rng(12)
        t = random_table(rng, 30, quantized=False)
        perm = rng.permutation(30)
        shuffled = make_table(t.features[perm], t.class_ids[perm], 4)
        q = rng.random((15, 16))
        assert np.array_equal(knn_predict_batch(knn_fit(t), q, 1), knn_predict_batch(knn_fit(shuffled), q, 1))


class TestBatch:
    def test_singleton(self):
        rng = np.random.default_rng(5)
        t = random_table(rng, 30)
        q = rng.random((1, 16))
        assert knn_predict_batch(knn_fit(t), q, 3).tolist() == [knn_predict(knn_fit(t), q[0], 3)[0]]

    def test_self_classification(self):
        rng = np.random.default_rng(6)
        t = random_table(rng, 80, quantized=False)
        assert np.array_equal(knn_predict_batch(knn_fit(t), t, 1), t.class_ids)

    def test_matches_loop(self):
        rng = np.random.default_rng(7)
        t = random_table(rng, 150)
        q = rng.integers(0, 3, (50, 16)) * 0.5
        m = knn_fit(t)
        for k in (1, 4, 9):
            assert knn_predict_batch(m, q, k).tolist() == [knn_predict(m, row, k)[0] for row in q]


def test_model_file_round_trip(tmp_path):
    t = random_table(np.random.default_rng(8), 12, quantized=False)
    t.preprocess = PreprocessConfig(speck_max_area=3)
    save_knn_model(tmp_path / "m.knn", knn_fit(t))
    assert (tmp_path / "m.knn").read_text().splitlines()[0] == "metric=euclidean"
    back = load_knn_model(tmp_path / "m.knn")
    assert back.table.classes == t.classes
    assert back.table.preprocess == PreprocessConfig(speck_max_area=3)
    assert np.allclose(back.table.features, t.features, rtol=1e-8)
    assert back.table.class_ids.tolist() == t.class_ids.tolist()


def test_model_file_rejects_other_formats(tmp_path):
    (tmp_path / "x").write_text("metric=cosine\nclass_id,sample_id,f0\n")
    with pytest.raises(ValueError):
        load_knn_model(tmp_path / "x")
