import numpy as np
import pytest
from oracles import count_confusion, metrics_from_counts

from seroprompt.metrics import (
    ConfusionCounts,
    compute_metrics,
    confusion,
    f1_score,
    format_table,
    full_report,
    write_confusion_csv,
)


@pytest.mark.parametrize("seed", range(20))
def test_against_counting_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 300))
    t = rng.integers(0, 2, n)
    p = rng.integers(0, 2, n) if seed % 3 else t.copy()
    for positive in (0, 1):
        c = confusion(t, p, positive)
        assert (c.tp, c.fp, c.tn, c.fn) == count_confusion(t, p, positive)
        m = compute_metrics(c)
        assert (m.precision, m.recall, m.f1, m.accuracy) == metrics_from_counts(c.tp, c.fp, c.tn, c.fn)


def test_against_sklearn():
    from sklearn.metrics import accuracy_score, precision_recall_fscore_support

    rng = np.random.default_rng(0)
    t, p = rng.integers(0, 2, 500), rng.integers(0, 2, 500)
    rep = full_report(t, p)
    prec, rec, f1, sup = precision_recall_fscore_support(t, p, labels=[0, 1])
    for cls in (0, 1):
        assert rep.rows[cls].precision == pytest.approx(prec[cls], abs=1e-15)
        assert rep.rows[cls].recall == pytest.approx(rec[cls], abs=1e-15)
        assert rep.rows[cls].f1 == pytest.approx(f1[cls], abs=1e-15)
        assert rep.rows[cls].support == sup[cls]
    assert rep.accuracy == accuracy_score(t, p)


def test_degenerate_denominators_are_flagged():
    m = compute_metrics(confusion([0, 0, 0], [0, 0, 0]))
    assert (m.precision, m.recall, m.f1, m.accuracy) == (0.0, 0.0, 0.0, 1.0)
    assert set(m.degenerate) == {"precision", "recall", "f1"}
    with pytest.raises(ValueError):
        compute_metrics(ConfusionCounts(0, 0, 0, 0))


@pytest.mark.parametrize("precision, recall, f1", [(0.6610, 0.6500, 0.6555), (0.9444, 0.9401, 0.9423)])
def test_f1_reference_values(precision, recall, f1):
    assert abs(f1_score(precision, recall) - f1) < 5e-4


def test_bad_inputs():
    with pytest.raises(ValueError):
        confusion([0, 1], [0])
    with pytest.raises(ValueError):
        confusion([], [])
    with pytest.raises(ValueError):
        confusion([0, 2], [0, 1])


def test_confusion_matrix_and_outputs(tmp_path):
    t = [1, 1, 0, 0, 0]
    p = [1, 0, 0, 1, 0]
    rep = full_report(t, p)
    assert rep.confusion_matrix == ((2, 1), (1, 1))
    table = format_table("Severity", {"A": rep})
    assert "0.6000" in table and "Severity" in table.splitlines()[0]
    path = tmp_path / "c.csv"
    write_confusion_csv(path, {"A": rep}, comment="x")
    lines = path.read_text().splitlines()
    assert lines[:2] == ["# x", "model,true,predicted,count"]
    assert "A,0,1,1" in lines and "A,1,1,1" in lines
    assert rep.to_dict()["classes"]["1"]["support"] == 2
