import numpy as np
import pytest

from crossaug.eval import (DegenerateLabelsError, ExperimentSpec, f1, predict_labels, read_csv,
                           run_experiment, train_classifier, write_csv, write_svg)
from crossaug.eval.experiment import ExperimentResult, LeakError, _assert_no_leak
from crossaug.nn import TrainConfig
from crossaug.tensor import Rng


def confusion_f1(pred, true, k):
    cm = np.zeros((k, k), dtype=np.int64)
    for p, t in zip(pred, true):
        cm[t, p] += 1
    scores = []
    for c in range(k):
        tp = cm[c, c]
        fp = cm[:, c].sum() - tp
        fn = cm[c, :].sum() - tp
        scores.append(2.0 * tp / (2 * tp + fp + fn) if (2 * tp + fp + fn) else 0.0)
    return scores


def test_f1_matches_confusion_oracle():
    r = Rng(0)
    for trial in range(1000):
        k = int(r.integers(2, 11))
        n = int(r.integers(1, 60))
        pred, true = r.integers(0, k, n), r.integers(0, k, n)
        assert f1(pred, true, "macro", k) == float(np.mean(confusion_f1(pred, true, k)))
        if k == 2:
            assert f1(pred, true, "binary_positive") == confusion_f1(pred, true, 2)[1]


def test_f1_hand_values():
    assert f1([1, 1, 0, 0], [1, 0, 1, 0], "binary_positive") == 0.5
    assert f1([0, 0], [0, 0], "macro", n_classes=3) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        f1([], [])


def test_tabular_classifier_learns():
    x = Rng(0).uniform((200, 3))
    y = (x[:, 0] > 0.5).astype(int)
    cfg = TrainConfig(epochs=40, batch_size=32, learning_rate=1e-2)
    net = train_classifier("tabular_mlp", x, y, cfg, Rng(1), n_classes=2, dropout=0.0)
    assert f1(predict_labels(net, x), y, "binary_positive") > 0.9


def test_single_class_labels_rejected():
    with pytest.raises(DegenerateLabelsError):
        train_classifier("tabular_mlp", np.zeros((10, 2)), np.zeros(10, dtype=int),
                         TrainConfig(epochs=1, batch_size=5), Rng(0))


def test_leak_assertion():
    from crossaug.data import make_synthetic_pair

    a, _ = make_synthetic_pair(rows_a=10, rows_b=10)
    with pytest.raises(LeakError):
        _assert_no_leak(a.take([1, 2]), a.take([2, 3]))


def _tiny_spec(**kw):
    base = dict(source="synthetic-pair", data={"rows_b": 300, "seed": 0}, grid=[100, 300],
                variants=["baseline", "ae"], folds=2,
                classifier={"train": {"epochs": 3}}, mapping={"train": {"epochs": 2}})
    base.update(kw)
    return ExperimentSpec(**base)


def test_tabular_grid_runs_and_is_reproducible():
    r1 = run_experiment(_tiny_spec())
    r2 = run_experiment(_tiny_spec())
    assert [r.fold_f1 for r in r1] == [r.fold_f1 for r in r2]
    assert [r.cell for r in r1] == ["A-count100", "A-count300"]
    assert all(len(v) == 2 for r in r1 for v in r.fold_f1.values())


def test_failed_cell_is_recorded_not_raised():
    (res,) = run_experiment(_tiny_spec(grid=[300], data={"rows_b": 300, "rows_a": 3}))
    assert res.error and not res.fold_f1


def test_image_grid_smoke():
    spec = ExperimentSpec("synthetic-digits", {"rows": 240}, [8], ["baseline", "vae"], ["A", "B"], folds=2,
                          test_rows=40, classifier={"train": {"epochs": 1, "batch_size": 32},
                                                    "arch": {"filters": [4, 4], "dense": 16}},
                          mapping={"train": {"epochs": 1}})
    results = run_experiment(spec)
    assert [r.cell for r in results] == ["A-n8", "B-n8"]
    assert all(r.error is None for r in results)


def test_invalid_specs():
    with pytest.raises(ValueError):
        ExperimentSpec("synthetic-digits", grid=[7])
    with pytest.raises(ValueError):
        ExperimentSpec("nope", grid=[8])
    with pytest.raises(ValueError):
        ExperimentSpec("synthetic-pair", grid=[100], variants=["gan"])


def _results():
    return [ExperimentResult("A-count250", "count", 250, "A", {"baseline": [0.8, 0.9], "ae": [0.85, 1 / 3]}),
            ExperimentResult("A-count1000", "count", 1000, "A", {"baseline": [0.7, 0.1 + 0.2]}, error=None),
            ExperimentResult("A-count5000", "count", 5000, "A", {}, error="ValueError: boom")]


def test_csv_round_trip_exact(tmp_path):
    write_csv(_results(), tmp_path / "r.csv")
    text = (tmp_path / "r.csv").read_text()
    assert text.splitlines()[0] == "cell,axis,value,direction,variant,mean_f1,f1_fold0,f1_fold1,seed,error"
    back = read_csv(tmp_path / "r.csv")
    assert back[0].fold_f1 == _results()[0].fold_f1
    assert back[1].fold_f1["baseline"][1] == 0.1 + 0.2
    assert back[2].error == "ValueError: boom"
    write_csv(back, tmp_path / "again.csv")
    assert (tmp_path / "again.csv").read_text() == text


def test_svg_is_self_contained(tmp_path):
    write_svg(_results(), tmp_path / "r.svg")
    svg = (tmp_path / "r.svg").read_text()
    assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
    assert svg.count('class="xtick"') == 3
    assert svg.count('class="series"') == 2
    assert "href" not in svg and "http://www.w3.org/2000/svg" in svg
