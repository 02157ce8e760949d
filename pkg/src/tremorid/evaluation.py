"""Evaluation harness: session-disjoint splits, identification and
verification metrics, parameter sweeps and tremor band-energy analysis.

Identification error rates are macro-averaged over classes:

* false match rate for class c: impostor windows (true label != c)
  predicted as c, divided by all impostor windows for c;
* false non-match rate for class c: genuine windows of c predicted as
  anything else, divided by the genuine windows of c.

Classes without genuine (or impostor) test windows are left out of the
corresponding average.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import (DegenerateSpectrum, EmptyData, InsufficientSessions, TremorError, UnknownLabel,
                     with_context)
from .features import FEATURE_NAMES, FeatureVector, feature_matrix, two_sided_periodogram
from .forest import Forest, train_forest
from .pipeline import PipelineConfig, SessionPair, pair_features, prepare_sessions


# ----------------------------------------------------------------- splitting


def split_by_session(vectors: Sequence[FeatureVector], test_fraction: float,
                     allow_empty_test: bool = False):
    """Assign whole session dates to test, latest first, per subject.

    Dates move to the test side until at least ``test_fraction`` of that
    subject's windows are there; at least one date always stays in training.
    Returns ``(train, test)`` in input order.
    """
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    by_subject = defaultdict(lambda: defaultdict(int))
    for v in vectors:
        by_subject[v.subject_id][v.session_date] += 1
    for subject, dates in by_subject.items():
        if len(dates) < 2:
            raise InsufficientSessions(subject)
    if test_fraction == 0.0:
        if allow_empty_test:
            return list(vectors), []
        raise ValueError("test_fraction of 0 leaves an empty test set")

    test_keys = set()
    for subject, dates in by_subject.items():
        total = sum(dates.values())
        in_test = 0
        for date in sorted(dates, reverse=True)[:-1]:
            if in_test >= test_fraction * total:
                break
            test_keys.add((subject, date))
            in_test += dates[date]
    train = [v for v in vectors if (v.subject_id, v.session_date) not in test_keys]
    test = [v for v in vectors if (v.subject_id, v.session_date) in test_keys]
    return train, test


# ------------------------------------------------------------ identification


@dataclass
class EvalReport:
    accuracy: float
    false_match_rate: float
    false_non_match_rate: float
    labels: list
    confusion: list  # rows: true label, columns: predicted label
    n_test: int
    config: dict = field(default_factory=dict)

    def per_class(self) -> list[dict]:
        cm = np.asarray(self.confusion)
        n = cm.sum()
        rows = []
        for i, lab in enumerate(self.labels):
            genuine = int(cm[i].sum())
            impostor = int(n - genuine)
            rows.append({
                "label": lab,
                "n_genuine": genuine,
                "fnmr": (genuine - int(cm[i, i])) / genuine if genuine else None,
                "fmr": (int(cm[:, i].sum()) - int(cm[i, i])) / impostor if impostor else None,
            })
        return rows

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "false_match_rate": self.false_match_rate,
            "false_non_match_rate": self.false_non_match_rate,
            "labels": list(self.labels),
            "confusion": [list(map(int, r)) for r in self.confusion],
            "n_test": self.n_test,
            "per_class": self.per_class(),
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["label", "n_genuine", "fnmr", "fmr"])
        for r in self.per_class():
            w.writerow([r["label"], r["n_genuine"],
                        "" if r["fnmr"] is None else repr(r["fnmr"]),
                        "" if r["fmr"] is None else repr(r["fmr"])])
        w.writerow(["__all__", self.n_test, repr(self.false_non_match_rate),
                    repr(self.false_match_rate)])
        return out.getvalue()


def report_from_confusion(confusion, labels, config: dict | None = None) -> EvalReport:
    cm = np.asarray(confusion, dtype=np.int64)
    n = int(cm.sum())
    if n == 0:
        raise EmptyData("empty confusion matrix")
    diag = np.diag(cm)
    genuine = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    impostor = n - genuine
    has_gen = genuine > 0
    has_imp = impostor > 0
    fnmr = float(np.mean((genuine[has_gen] - diag[has_gen]) / genuine[has_gen]))
    fmr = float(np.mean((predicted[has_imp] - diag[has_imp]) / impostor[has_imp])) if has_imp.any() else 0.0
    return EvalReport(
        accuracy=float(diag.sum() / n),
        false_match_rate=fmr,
        false_non_match_rate=fnmr,
        labels=list(labels),
        confusion=cm.tolist(),
        n_test=n,
        config=dict(config or {}),
    )


def _check_labels(model: Forest, labels):
    known = set(model.label_set)
    for lab in labels:
        if lab not in known:
            raise UnknownLabel(f"label {lab!r} is not in the model's label set")


def evaluate_identification(model: Forest, test: Sequence[FeatureVector],
                            config: dict | None = None) -> EvalReport:
    if not test:
        raise EmptyData("test set is empty")
    truth = [v.subject_id for v in test]
    _check_labels(model, truth)
    index = {lab: i for i, lab in enumerate(model.label_set)}
    pred = np.argmax(model.votes(feature_matrix(test)), axis=1)
    cm = np.zeros((len(index), len(index)), dtype=np.int64)
    for t, p in zip(truth, pred):
        cm[index[t], p] += 1
    return report_from_confusion(cm, model.label_set, config)


# -------------------------------------------------------------- verification


@dataclass
class VerificationReport:
    accuracy: float
    genuine_accept_rate: float
    impostor_reject_rate: float
    n_claims: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def verification_claims(truth: Sequence, label_set: Sequence, seed: int = 0) -> list[tuple[int, object]]:
    """One genuine and one random impostor claim per window."""
    rng = np.random.default_rng(seed)
    labels = list(label_set)
    claims = []
    for i, t in enumerate(truth):
        claims.append((i, t))
        others = [lab for lab in labels if lab != t]
        if others:
            claims.append((i, others[int(rng.integers(len(others)))]))
    return claims


def evaluate_verification(model: Forest, test: Sequence[FeatureVector], claims=None,
                          seed: int = 0) -> VerificationReport:
    """Accept a claim iff the predicted identity equals the claimed one.

    ``claims`` is a list of ``(window_index, claimed_id)``; by default each
    window is paired with its own id and one random other enrolled id.
    """
    if not test:
        raise EmptyData("test set is empty")
    truth = [v.subject_id for v in test]
    _check_labels(model, truth)
    if claims is None:
        claims = verification_claims(truth, model.label_set, seed)
    _check_labels(model, [c for _, c in claims])
    pred = model.predict(feature_matrix(test))
    correct = gen = gen_ok = imp = imp_ok = 0
    for i, claim in claims:
        accept = pred[i] == claim
        genuine = truth[i] == claim
        if genuine:
            gen += 1
            gen_ok += accept
        else:
            imp += 1
            imp_ok += not accept
        correct += accept == genuine
    return VerificationReport(
        accuracy=correct / len(claims),
        genuine_accept_rate=gen_ok / gen if gen else 0.0,
        impostor_reject_rate=imp_ok / imp if imp else 0.0,
        n_claims=len(claims),
    )


# -------------------------------------------------------------------- sweeps


SWEEP_PARAMETERS = ("window_s", "n_trees", "overlap")


def derive_seed(base_seed: int, parameter: str, value, repeat: int) -> int:
    digest = hashlib.sha256(f"{base_seed}|{parameter}|{value!r}|{repeat}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def run_evaluation(vectors: Sequence[FeatureVector], cfg: PipelineConfig, seed: int | None = None) -> EvalReport:
    """Split, train and evaluate once on precomputed feature vectors."""
    train, test = split_by_session(vectors, cfg.test_fraction)
    forest_cfg = cfg.forest if seed is None else replace(cfg.forest, rng_seed=seed)
    model = train_forest(feature_matrix(train), [v.subject_id for v in train], forest_cfg,
                         FEATURE_NAMES, jobs=cfg.jobs)
    return evaluate_identification(model, test, replace(cfg, forest=forest_cfg).report_echo())


@dataclass
class SweepTable:
    parameter: str
    rows: list  # (value, mean accuracy, per-repeat accuracies)

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([self.parameter, "mean_accuracy", "accuracies"])
        for value, mean, accs in self.rows:
            w.writerow([repr(value), repr(mean), " ".join(repr(a) for a in accs)])
        return out.getvalue()

    def to_dict(self) -> dict:
        return {"parameter": self.parameter,
                "rows": [{"value": v, "mean_accuracy": m, "accuracies": a} for v, m, a in self.rows]}


def _apply(cfg: PipelineConfig, parameter: str, value) -> PipelineConfig:
    if parameter == "n_trees":
        return cfg.with_overrides(forest={"n_trees": int(value)})
    return cfg.with_overrides(**{parameter: float(value)})


def sweep(parameter: str, values: Sequence, sessions: Sequence[SessionPair], cfg: PipelineConfig,
          repeats: int = 1, prepared: bool = False) -> SweepTable:
    """Mean session-split accuracy for each value of ``parameter``.

    Filtering does not depend on any sweepable parameter, so recordings are
    trimmed and filtered once; pass ``prepared=True`` if that is already done.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}")
    if not values:
        raise ValueError("values must be non-empty")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    values = sorted(set(values))
    ready = list(sessions) if prepared else prepare_sessions(sessions, cfg)

    cache = {}
    rows = []
    for value in values:
        try:
            run_cfg = _apply(cfg, parameter, value)
            key = (run_cfg.window_s, run_cfg.overlap)
            if key not in cache:
                cache[key] = [fv for acc, gyro in ready for fv in pair_features(acc, gyro, run_cfg)]
            accs = [run_evaluation(cache[key], run_cfg, derive_seed(cfg.seed, parameter, value, r)).accuracy
                    for r in range(repeats)]
        except (TremorError, ValueError) as exc:
            raise with_context(exc, f"{parameter}={value!r}") from exc
        rows.append((value, float(np.mean(accs)), accs))
    return SweepTable(parameter, rows)


# --------------------------------------------------------------- band energy


def band_energy(traces, sample_rate_hz: float, bands: Sequence[tuple[float, float]]) -> list[float]:
    """Share of total one-sided periodogram energy inside each band.

    Periodograms of all traces are pooled. Bands are ``(lo_hz, hi_hz)``,
    include both edges and may overlap.
    """
    nyquist = sample_rate_hz / 2
    for lo, hi in bands:
        if not 0 <= lo <= hi <= nyquist:
            raise ValueError(f"band ({lo}, {hi}) outside [0, {nyquist}] Hz")
    if isinstance(traces, np.ndarray) and traces.ndim == 1:
        traces = [traces]
    in_band = np.zeros(len(bands))
    total = 0.0
    for tr in traces:
        tr = np.asarray(tr, dtype=np.float64)
        n = len(tr)
        p = two_sided_periodogram(tr)[: n // 2 + 1]
        f = np.arange(len(p)) * sample_rate_hz / n
        total += float(p.sum())
        for b, (lo, hi) in enumerate(bands):
            in_band[b] += float(p[(f >= lo) & (f <= hi)].sum())
    if total == 0.0:
        raise DegenerateSpectrum("traces carry no energy")
    return (in_band / total).tolist()
