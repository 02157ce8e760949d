import datetime
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tremorid.errors import DegenerateSpectrum, EmptyData, InsufficientSessions, UnknownLabel
from tremorid.evaluation import (band_energy, derive_seed, evaluate_identification, evaluate_verification,
                                 report_from_confusion, run_evaluation, split_by_session, sweep,
                                 verification_claims)
from tremorid.features import FeatureVector
from tremorid.forest import Forest, ForestConfig, Tree
from tremorid.pipeline import PipelineConfig, prepare_sessions

D0 = datetime.date(2016, 3, 1)


def fv(subject, day, value=0.0):
    values = np.zeros(176)
    values[0] = value
    return FeatureVector(subject, f"s{day}", D0 + datetime.timedelta(days=day), "dev", values)


def threshold_forest(labels=("A", "B")):
    """Predicts labels[0] when feature 0 <= 0.5, else labels[1]."""
    tree = Tree(feature=np.array([0, -1, -1]), threshold=np.array([0.5, 0.0, 0.0]),
                left=np.array([1, -1, -1]), right=np.array([2, -1, -1]),
                value=np.array([0, 0, 1]), n_features=176)
    return Forest([tree], tuple(labels), ForestConfig(n_trees=1), tuple(f"f{i}" for i in range(176)))


# ------------------------------------------------------------------ splitting


def test_split_moves_latest_session_to_test():
    data = [fv("S1", 0)] * 60 + [fv("S1", 3)] * 40
    train, test = split_by_session(data, 0.25)
    assert len(train) == 60 and len(test) == 40
    assert {v.session_date for v in test} == {D0 + datetime.timedelta(days=3)}


def test_split_takes_several_sessions_when_needed():
    data = [fv("S1", d) for d in range(4) for _ in range(10)]
    train, test = split_by_session(data, 0.5)
    assert sorted({v.session_date.day for v in test}) == [3, 4]
    assert len(train) == 20


def test_split_keeps_one_session_for_training():
    data = [fv("S1", 0)] * 5 + [fv("S1", 1)] * 5
    train, test = split_by_session(data, 0.99)
    assert len(train) == 5 and len(test) == 5


def test_split_zero_fraction():
    data = [fv("S1", 0), fv("S1", 1)]
    with pytest.raises(ValueError):
        split_by_session(data, 0.0)
    assert split_by_session(data, 0.0, allow_empty_test=True) == (data, [])


def test_split_needs_two_sessions():
    with pytest.raises(InsufficientSessions) as info:
        split_by_session([fv("S1", 0), fv("S2", 0), fv("S2", 1)], 0.25)
    assert info.value.subject == "S1"


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ABC"), st.integers(0, 5)), min_size=1, max_size=80),
       st.floats(min_value=0.01, max_value=0.95))
def test_split_is_session_disjoint(rows, frac):
    data = [fv(s, d) for s, d in rows]
    per_subject = {}
    for s, d in rows:
        per_subject.setdefault(s, set()).add(d)
    if any(len(days) < 2 for days in per_subject.values()):
        with pytest.raises(InsufficientSessions):
            split_by_session(data, frac)
        return
    train, test = split_by_session(data, frac)
    key = lambda v: (v.subject_id, v.session_date)
    assert not {key(v) for v in train} & {key(v) for v in test}
    assert len(train) + len(test) == len(data)
    for s in per_subject:
        n = sum(1 for v in data if v.subject_id == s)
        n_test = sum(1 for v in test if v.subject_id == s)
        assert any(v.subject_id == s for v in train)
        # either the fraction is met, or only one session is left in training
        assert n_test >= frac * n or len({v.session_date for v in train if v.subject_id == s}) == 1


# ---------------------------------------------------------------- metrics


def test_two_class_confusion_by_hand():
    r = report_from_confusion([[8, 2], [3, 7]], ["A", "B"])
    assert r.accuracy == 0.75
    assert r.false_non_match_rate == 0.25
    assert r.false_match_rate == 0.25
    assert r.n_test == 20


def test_three_class_macro_rates():
    cm = [[5, 0, 0], [1, 3, 0], [0, 0, 1]]
    r = report_from_confusion(cm, "abc")
    assert r.false_non_match_rate == pytest.approx((0 + 0.25 + 0) / 3)
    assert r.false_match_rate == pytest.approx((1 / 5 + 0 / 6 + 0 / 9) / 3)


def test_perfect_predictions():
    test = [fv("A", 0, 0.0), fv("A", 1, 0.0), fv("B", 0, 1.0)]
    r = evaluate_identification(threshold_forest(), test)
    assert (r.accuracy, r.false_match_rate, r.false_non_match_rate) == (1.0, 0.0, 0.0)
    assert r.confusion == [[2, 0], [0, 1]]


def test_report_serialisations():
    r = report_from_confusion([[8, 2], [3, 7]], ["A", "B"], {"seed": 1})
    doc = json.loads(r.to_json())
    assert doc["accuracy"] == 0.75 and doc["config"] == {"seed": 1}
    assert doc["per_class"][0] == {"label": "A", "n_genuine": 10, "fnmr": 0.2, "fmr": 0.3}
    lines = r.to_csv().splitlines()
    assert lines[0] == "label,n_genuine,fnmr,fmr" and lines[-1].startswith("__all__,20,")


def test_unknown_label_and_empty_test():
    with pytest.raises(UnknownLabel):
        evaluate_identification(threshold_forest(), [fv("Z", 0)])
    with pytest.raises(EmptyData):
        evaluate_identification(threshold_forest(), [])
    with pytest.raises(EmptyData):
        report_from_confusion([[0]], ["A"])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.lists(st.integers(0, 20), min_size=3, max_size=3), min_size=3, max_size=3))
def test_rates_bounded(cm):
    if sum(map(sum, cm)) == 0:
        return
    r = report_from_confusion(cm, "abc")
    assert 0 <= r.accuracy <= 1 and 0 <= r.false_match_rate <= 1 and 0 <= r.false_non_match_rate <= 1
    assert r.accuracy == np.trace(cm) / r.n_test


# ------------------------------------------------------------ verification


def test_verification_perfect():
    test = [fv("A", 0, 0.0), fv("B", 0, 1.0), fv("B", 1, 1.0)]
    rep = evaluate_verification(threshold_forest(), test, seed=3)
    assert rep.accuracy == 1.0 and rep.n_claims == 6


def test_verification_constant_predictor_closed_form():
    # Everything predicted A: windows of A score 2/2, windows of B score 0/2,
    # so accuracy equals the prior of A.
    test = [fv("A", 0, 0.0)] * 3 + [fv("B", 0, 0.0)] * 7
    rep = evaluate_verification(threshold_forest(), test)
    assert rep.accuracy == pytest.approx(0.3)
    assert rep.genuine_accept_rate == pytest.approx(0.3)
    assert rep.impostor_reject_rate == pytest.approx(0.3)


def test_verification_claims_are_one_to_one_and_seeded():
    truth = ["A", "B", "C", "A"]
    claims = verification_claims(truth, "ABC", seed=4)
    assert claims == verification_claims(truth, "ABC", seed=4)
    assert [i for i, _ in claims] == [0, 0, 1, 1, 2, 2, 3, 3]
    for k in range(0, 8, 2):
        assert claims[k][1] == truth[claims[k][0]] and claims[k + 1][1] != truth[claims[k + 1][0]]


def test_verification_rejects_unknown_claims():
    with pytest.raises(UnknownLabel):
        evaluate_verification(threshold_forest(), [fv("A", 0)], claims=[(0, "Q")])


# ------------------------------------------------------------------ sweeps


def test_derive_seed_is_stable():
    assert derive_seed(0, "window_s", 1.0, 0) == derive_seed(0, "window_s", 1.0, 0)
    assert derive_seed(0, "window_s", 1.0, 0) != derive_seed(0, "window_s", 1.0, 1)
    assert 0 <= derive_seed(5, "n_trees", 10, 2) < 2 ** 64


@pytest.fixture(scope="module")
def prepared(small_sessions):
    return prepare_sessions(small_sessions, PipelineConfig())


def test_single_value_sweep_equals_direct_run(prepared, small_features):
    cfg = PipelineConfig().with_overrides(forest={"n_trees": 15})
    table = sweep("n_trees", [15], prepared, cfg, prepared=True)
    direct = run_evaluation(small_features, cfg, derive_seed(cfg.seed, "n_trees", 15, 0))
    assert table.rows == [(15, direct.accuracy, [direct.accuracy])]


def test_window_sweep_rows(prepared):
    cfg = PipelineConfig().with_overrides(forest={"n_trees": 10})
    table = sweep("window_s", [1.0, 0.5, 1.0], prepared, cfg, prepared=True, repeats=2)
    assert [r[0] for r in table.rows] == [0.5, 1.0]
    assert all(0 <= r[1] <= 1 and len(r[2]) == 2 for r in table.rows)
    assert table.to_csv().splitlines()[0] == "window_s,mean_accuracy,accuracies"
    assert table.to_dict()["rows"][0]["value"] == 0.5


def test_sweep_errors_carry_the_value(prepared):
    with pytest.raises(ValueError, match=r"^window_s=0\.01: "):
        sweep("window_s", [0.01], prepared, PipelineConfig(), prepared=True)


def test_sweep_argument_checks(prepared):
    with pytest.raises(ValueError):
        sweep("trim_ms", [1], prepared, PipelineConfig(), prepared=True)
    with pytest.raises(ValueError):
        sweep("n_trees", [], prepared, PipelineConfig(), prepared=True)


# ------------------------------------------------------------- band energy


def tone(hz, n=1000, rate=100.0):
    return np.sin(2 * math.pi * hz * np.arange(n) / rate)


def test_band_energy_of_in_band_tone():
    assert band_energy(tone(5.0), 100.0, [(4, 7)]) == pytest.approx([1.0], abs=1e-12)


def test_band_energy_of_out_of_band_tone():
    assert band_energy(tone(20.0), 100.0, [(4, 7)]) == pytest.approx([0.0], abs=1e-12)


def test_band_energy_overlapping_bands_and_pooling():
    traces = [tone(5.0), tone(8.0)]
    fr = band_energy(traces, 100.0, [(4, 7), (7, 10), (6, 10), (0, 50)])
    assert fr == pytest.approx([0.5, 0.5, 0.5, 1.0], abs=1e-12)


def test_band_energy_errors():
    with pytest.raises(DegenerateSpectrum):
        band_energy(np.zeros(100), 100.0, [(4, 7)])
    with pytest.raises(ValueError):
        band_energy(tone(5.0), 100.0, [(4, 60)])
