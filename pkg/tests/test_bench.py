import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratified_transfer import bench
from stratified_transfer.bench import (
    TaskSpec,
    accuracy,
    class_means,
    default_config,
    load_feature_csv,
    load_labels_csv,
    run_repeats,
    run_task,
    synth_shift,
    thread_count,
    write_feature_csv,
    write_labels_csv,
)
from stratified_transfer.classify import ClassifierModel
from stratified_transfer.datasets import LabeledDataset, UnlabeledDataset
from stratified_transfer.exceptions import EmptyInput, InvalidInput, NumericalFailure, ParseError

FAST = default_config(dim=5, iters=3)


class TestAccuracy:
    @pytest.mark.parametrize("a, b, expected", [
        ([1, 2, 3], [1, 2, 3], 1.0), ([1, 2, 3], [1, 2, 2], 2 / 3), ([1], [2], 0.0),
    ])
    def test_examples(self, a, b, expected):
        assert accuracy(a, b) == pytest.approx(expected, abs=1e-4)

    def test_errors(self):
        with pytest.raises(InvalidInput):
            accuracy([1, 2], [1])
        with pytest.raises(EmptyInput):
            accuracy([], [])

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=20),
           st.randoms(use_true_random=False))
    def test_permutation_invariant(self, pairs, r):
        a, b = map(np.array, zip(*pairs))
        perm = list(range(len(pairs)))
        r.shuffle(perm)
        assert accuracy(a[perm], b[perm]) == accuracy(a, b)


class TestCSV:
    def test_single_row(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("f1,f2,label\n0.5,1.0,2\n")
        d = load_feature_csv(p)
        assert isinstance(d, LabeledDataset)
        np.testing.assert_array_equal(d.X, [[0.5, 1.0]])
        assert d.y.tolist() == [2]

    def test_unlabelled(self, tmp_path):
        p = tmp_path / "f.csv"
        p.write_text("f1,f2\n0.5,1.0\n1,2\n")
        assert isinstance(load_feature_csv(p), UnlabeledDataset)

    @pytest.mark.parametrize("body, line", [
        ("f1,f2\n1,2\n1,x\n", 3),
        ("f1,f2\n1,2\n1,2,3\n", 3),
        ("f1,label\n1,0.5\n", 2),
    ])
    def test_parse_errors(self, tmp_path, body, line):
        p = tmp_path / "bad.csv"
        p.write_text(body)
        with pytest.raises(ParseError) as info:
            load_feature_csv(p)
        assert info.value.line == line
        assert f"line {line}" in str(info.value)

    def test_empty(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("f1\n")
        with pytest.raises(EmptyInput):
            load_feature_csv(p)

    def test_round_trip(self, tmp_path, rng):
        X, y = rng.normal(size=(7, 4)) * 1e3, rng.integers(0, 3, 7)
        write_feature_csv(tmp_path / "a.csv", X, y)
        d = load_feature_csv(tmp_path / "a.csv")
        np.testing.assert_allclose(d.X, X, rtol=1e-12, atol=1e-12)
        np.testing.assert_array_equal(d.y, y)
        write_labels_csv(tmp_path / "y.csv", y)
        np.testing.assert_array_equal(load_labels_csv(tmp_path / "y.csv"), y)


class TestSynth:
    def test_shapes_and_balance(self):
        src, tgt = synth_shift(4, 25, 6, 2.0)
        assert src.X.shape == tgt.X.shape == (100, 6)
        assert np.bincount(src.y).tolist() == [25] * 4
        np.testing.assert_array_equal(src.y, tgt.y)

    def test_deterministic(self):
        a, b = synth_shift(seed=3), synth_shift(seed=3)
        np.testing.assert_array_equal(a[1].X, b[1].X)

    def test_grid_means(self):
        np.testing.assert_array_equal(class_means(4, 3)[:, :2], [[0, 0], [6, 0], [0, 6], [6, 6]])

    def test_zero_shift_same_distribution(self):
        src, tgt = synth_shift(3, 2000, 2, 0.0, 1.0)
        for c in range(3):
            np.testing.assert_allclose(src.X[src.y == c].mean(0), tgt.X[tgt.y == c].mean(0),
                                       atol=0.1)

    def test_shift_and_scale(self):
        src, tgt = synth_shift(2, 5000, 2, [1.0, -3.0], 2.0)
        expected = 2 * class_means(2, 2) + [1.0, -3.0]
        for c in range(2):
            np.testing.assert_allclose(tgt.X[tgt.y == c].mean(0), expected[c], atol=0.1)
            np.testing.assert_allclose(tgt.X[tgt.y == c].std(0), 2.0, atol=0.1)

    def test_large_shift_hurts_1nn(self):
        knn = ClassifierModel("knn", k=1)

        def acc(shift):
            src, tgt = synth_shift(shift=shift, seed=7)
            return accuracy(tgt.y, knn.build().fit(src.X, src.y).predict(tgt.X))

        assert acc(5.0) < acc(0.0)

    def test_errors(self):
        with pytest.raises(InvalidInput):
            synth_shift(classes=1)
        with pytest.raises(InvalidInput):
            synth_shift(dim=3, shift=[1.0, 2.0])


class TestRepeats:
    def test_source_only_zero_shift(self):
        src, tgt = synth_shift(shift=0.0, seed=7)
        rep = run_repeats(src, tgt.X, tgt.y, FAST, "source_only", repeats=5)
        assert len(rep.accuracies) == 5
        assert rep.mean >= 0.95

    def test_deterministic_and_paired(self):
        src, tgt = synth_shift(3, 20, 3, 2.0, seed=1)
        a = run_repeats(src, tgt.X, tgt.y, FAST, "stl", repeats=2, shuffle_seed=4)
        b = run_repeats(src, tgt.X, tgt.y, FAST, "stl", repeats=2, shuffle_seed=4)
        assert a.accuracies == b.accuracies
        assert [r["shuffle_seed"] for r in a.per_repeat] == [4, 5]

    @pytest.mark.parametrize("method", bench.METHODS)
    def test_every_method_runs(self, method):
        src, tgt = synth_shift(3, 15, 4, 1.0, seed=2)
        rep = run_repeats(src, tgt.X, tgt.y, FAST, method, repeats=1)
        assert 0.0 <= rep.accuracies[0] <= 1.0

    def test_labels_without_truth(self):
        src, tgt = synth_shift(2, 10, 2, seed=2)
        rep = run_repeats(src, tgt.X, None, FAST, "source_only", repeats=2)
        assert rep.accuracies == [] and rep.mean is None
        assert len(rep.per_repeat[0]["labels"]) == tgt.n
        assert "n/a" in rep.summary()

    def test_labels_restored_to_input_order(self):
        src, tgt = synth_shift(2, 10, 2, seed=2)
        rep = run_repeats(src, tgt.X, None, FAST, "source_only", repeats=1)
        # shuffling only reorders rows, so a well-separated target is labeled correctly
        assert rep.per_repeat[0]["labels"] == tgt.y.tolist()

    def test_failed_repeat_recorded(self, monkeypatch):
        src, tgt = synth_shift(2, 10, 2, seed=2)
        real = bench.run_method
        calls = []

        def flaky(*args, **kwargs):
            calls.append(1)
            if len(calls) == 1:
                raise NumericalFailure("solver blew up", iteration=3)
            return real(*args, **kwargs)

        monkeypatch.setattr(bench, "run_method", flaky)
        rep = run_repeats(src, tgt.X, tgt.y, FAST, "source_only", repeats=3)
        assert len(rep.accuracies) == 2
        assert rep.failures[0]["repeat"] == 0 and "NumericalFailure" in rep.failures[0]["error"]

    def test_all_failed_raises(self, monkeypatch):
        src, tgt = synth_shift(2, 10, 2, seed=2)

        def broken(*args, **kwargs):
            raise NumericalFailure("nope")

        monkeypatch.setattr(bench, "run_method", broken)
        with pytest.raises(NumericalFailure):
            run_repeats(src, tgt.X, tgt.y, FAST, "stl", repeats=2)

    def test_threads_same_result(self):
        src, tgt = synth_shift(3, 15, 3, 2.0, seed=5)
        a = run_repeats(src, tgt.X, tgt.y, FAST, "stl", repeats=3, threads=1)
        b = run_repeats(src, tgt.X, tgt.y, FAST, "stl", repeats=3, threads=3)
        assert a.accuracies == b.accuracies

    def test_thread_count_env(self, monkeypatch):
        monkeypatch.delenv("STL_THREADS", raising=False)
        assert thread_count() == 1
        monkeypatch.setenv("STL_THREADS", "4")
        assert thread_count() == 4
        monkeypatch.setenv("STL_THREADS", "lots")
        with pytest.raises(InvalidInput):
            thread_count()

    def test_bad_arguments(self):
        src, tgt = synth_shift(2, 5, 2)
        with pytest.raises(InvalidInput):
            run_repeats(src, tgt.X, method="svm")
        with pytest.raises(InvalidInput):
            run_repeats(src, tgt.X, repeats=0)


class TestTask:
    def write(self, tmp_path, with_label_column=False):
        src, tgt = synth_shift(2, 10, 3, 1.0, seed=3)
        write_feature_csv(tmp_path / "s.csv", src.X, src.y)
        write_feature_csv(tmp_path / "t.csv", tgt.X, tgt.y if with_label_column else None)
        write_labels_csv(tmp_path / "y.csv", tgt.y)
        return tmp_path

    def test_report_json(self, tmp_path):
        d = self.write(tmp_path)
        rep = run_task(TaskSpec(str(d / "s.csv"), str(d / "t.csv"), str(d / "y.csv"),
                                FAST, "stl", repeats=2))
        data = json.loads(rep.to_json())
        assert list(data) == ["method", "accuracies", "mean", "std", "per_repeat", "failures",
                              "config", "wall_time"]
        assert len(data["accuracies"]) == 2
        assert all(0 <= a <= 1 for a in data["accuracies"])
        assert data["config"]["transfer"]["m"] == 5
        assert "iterations" in data["per_repeat"][0]
        assert "%" in rep.summary()

    def test_truth_from_label_column(self, tmp_path):
        d = self.write(tmp_path, with_label_column=True)
        rep = run_task(TaskSpec(str(d / "s.csv"), str(d / "t.csv"), None, FAST,
                                "source_only", repeats=1))
        assert len(rep.accuracies) == 1

    def test_unlabelled_source(self, tmp_path):
        d = self.write(tmp_path)
        with pytest.raises(InvalidInput):
            run_task(TaskSpec(str(d / "t.csv"), str(d / "t.csv")))

    def test_spec_validation(self):
        with pytest.raises(InvalidInput):
            TaskSpec("a", "b", repeats=0)
        with pytest.raises(InvalidInput):
            TaskSpec("a", "b", method="gfk")
