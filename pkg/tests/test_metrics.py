import pytest
from hypothesis import given
from hypothesis import strategies as st

from sodefect.defect import DefectLabel
from sodefect.metrics import compute_metrics

L, U, N = DefectLabel.LIKELY_DEFECTIVE, DefectLabel.UNLIKELY_DEFECTIVE, DefectLabel.UNPREDICTABLE


def test_all_correct():
    m = compute_metrics([(L, L), (U, U), (L, L)])
    assert m.accuracy == 1.0 and m.f1 == 1.0


def test_two_thirds():
    pairs = [(L, L), (L, L), (L, U), (U, L), (U, U)]
    m = compute_metrics(pairs)
    assert (m.tp, m.fp, m.fn, m.tn) == (2, 1, 1, 1)
    assert m.precision == pytest.approx(2 / 3)
    assert m.recall == pytest.approx(2 / 3)
    assert m.f1 == pytest.approx(2 / 3)


def test_no_positive_predictions():
    m = compute_metrics([(U, L), (U, U)])
    assert m.precision is None and m.f1 is None
    assert m.recall == 0.0
    assert m.to_json()["precision"] is None


def test_unpredictable_excluded_and_label_forms():
    m = compute_metrics([(-1, "Likely-defective"), (300, -1), (1, N), ("Unlikely-defective", 1)])
    assert m.excluded == 2 and m.accuracy == 1.0
    with pytest.raises(ValueError):
        compute_metrics([(N, L)])
    with pytest.raises(ValueError):
        compute_metrics([(0, 1)])


@given(st.lists(st.tuples(st.sampled_from([L, U]), st.sampled_from([L, U])), min_size=1, max_size=50))
def test_metric_bounds(pairs):
    m = compute_metrics(pairs)
    assert 0.0 <= m.accuracy <= 1.0
    for v in (m.precision, m.recall, m.f1):
        assert v is None or 0.0 <= v <= 1.0
    if m.f1 is not None:
        assert min(m.precision, m.recall) - 1e-12 <= m.f1 <= max(m.precision, m.recall) + 1e-12
