"""Evaluation harness: P/R/F1, precision-recall curves, average precision
and AUC-PR.

Average precision is computed in exact rational arithmetic and converted to
float once at the end, so results are reproducible and oracle-checkable at
any input size.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import AlignmentError, ValidationError
from .records import LabelPair

LABELS = ("challenge", "direction")


def _check_aligned(pred: Mapping, gold: Mapping) -> None:
    if set(pred.keys()) != set(gold.keys()):
        missing = set(gold) - set(pred)
        extra = set(pred) - set(gold)
        raise AlignmentError(
            f"prediction/gold sentence ids differ ({len(missing)} missing, {len(extra)} extra)"
        )


def confusion(
    pred: Mapping[str, LabelPair], gold: Mapping[str, LabelPair], label: str
) -> tuple[int, int, int]:
    """(TP, FP, FN) for one label, aligned by sentence id."""
    if label not in LABELS:
        raise ValidationError(f"label must be one of {LABELS}, got {label!r}")
    _check_aligned(pred, gold)
    tp = fp = fn = 0
    for sid in gold:
        p = getattr(pred[sid], label)
        g = getattr(gold[sid], label)
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif g and not p:
            fn += 1
    return tp, fp, fn


def _prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def prf(
    pred: Mapping[str, LabelPair], gold: Mapping[str, LabelPair], label: str
) -> tuple[float, float, float]:
    """Binary precision/recall/F1 for one label.

    Zero predicted positives give precision 0 by convention; F1 is 0 whenever
    P + R is 0.
    """
    return _prf_from_counts(*confusion(pred, gold, label))


def micro_prf(
    pred: Mapping[str, LabelPair], gold: Mapping[str, LabelPair]
) -> tuple[float, float, float]:
    """P/R/F1 with TP/FP/FN pooled over both labels."""
    c = confusion(pred, gold, "challenge")
    d = confusion(pred, gold, "direction")
    return _prf_from_counts(c[0] + d[0], c[1] + d[1], c[2] + d[2])


@dataclass(frozen=True)
class PRCurve:
    """Threshold sweep points as (recall, precision, threshold), recall
    non-decreasing."""

    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValidationError("PR curve needs at least one point")
        pts = tuple((float(r), float(p), float(t)) for r, p, t in self.points)
        for (r0, _, _), (r1, _, _) in zip(pts, pts[1:]):
            if r1 < r0:
                raise ValidationError("recall must be non-decreasing along the curve")
        for r, p, _ in pts:
            if not (0.0 <= r <= 1.0 and 0.0 <= p <= 1.0):
                raise ValidationError("recall and precision must lie in [0,1]")
        object.__setattr__(self, "points", pts)

    def to_dict(self) -> dict:
        return {"points": [list(p) for p in self.points]}

    @classmethod
    def from_dict(cls, d: dict) -> "PRCurve":
        return cls(points=tuple(tuple(p) for p in d["points"]))


def _ranked(scores: Mapping[str, float]) -> list[str]:
    # Descending score; ties broken by sentence_id so results never depend
    # on input ordering.
    return sorted(scores, key=lambda sid: (-scores[sid], sid))


def pr_curve(scores: Mapping[str, float], gold: Mapping[str, bool]) -> PRCurve:
    """Precision/recall at every distinct score threshold, descending.

    Tied scores fall into a single threshold step.
    """
    _check_aligned(scores, gold)
    n_pos = sum(1 for v in gold.values() if v)
    if n_pos == 0:
        raise ValidationError("PR curve undefined with zero gold positives")
    order = _ranked(scores)
    points = []
    tp = pred_pos = 0
    for i, sid in enumerate(order):
        pred_pos += 1
        if gold[sid]:
            tp += 1
        is_last = i == len(order) - 1
        if is_last or scores[order[i + 1]] != scores[sid]:
            points.append((tp / n_pos, tp / pred_pos, scores[sid]))
    return PRCurve(points=tuple(points))


def average_precision(scores: Mapping[str, float], gold: Mapping[str, bool]) -> float:
    """Non-interpolated average precision: mean of precision@rank over the
    ranks of the gold positives."""
    _check_aligned(scores, gold)
    n_pos = sum(1 for v in gold.values() if v)
    if n_pos == 0:
        raise ValidationError("average precision undefined with zero gold positives")
    total = Fraction(0)
    tp = 0
    for rank, sid in enumerate(_ranked(scores), start=1):
        if gold[sid]:
            tp += 1
            total += Fraction(tp, rank)
    return float(total / n_pos)


def auc_pr(curve: PRCurve) -> float:
    """Trapezoidal area under the curve over recall, anchored by extending
    the first point back to recall zero at the same precision."""
    pts = [(0.0, curve.points[0][1])] + [(r, p) for r, p, _ in curve.points]
    area = 0.0
    for (r0, p0), (r1, p1) in zip(pts, pts[1:]):
        area += (r1 - r0) * (p0 + p1) / 2.0
    return area


def evaluation_report(
    pred: Mapping[str, LabelPair],
    gold: Mapping[str, LabelPair],
    scores: Optional[Mapping[str, tuple[float, float]]] = None,
    sampling_scheme: Optional[str] = None,
) -> dict:
    """Full metrics report: per-label P/R/F1, micro P/R/F1, and when
    confidence scores are available, AP, AUC-PR and the PR curve points.

    ``sampling_scheme`` records how the evaluated sentences were drawn;
    rank-sensitive metrics like AP are not comparable across differently
    sampled sets, so the report carries the scheme next to the numbers.
    """
    report: dict = {"labels": {}, "n_sentences": len(gold)}
    if sampling_scheme is not None:
        report["sampling_scheme"] = sampling_scheme
    for idx, label in enumerate(LABELS):
        p, r, f1 = prf(pred, gold, label)
        entry: dict = {"precision": p, "recall": r, "f1": f1}
        if scores is not None:
            label_scores = {sid: pair[idx] for sid, pair in scores.items()}
            label_gold = {sid: getattr(lp, label) for sid, lp in gold.items()}
            if any(label_gold.values()):
                curve = pr_curve(label_scores, label_gold)
                entry["average_precision"] = average_precision(label_scores, label_gold)
                entry["auc_pr"] = auc_pr(curve)
                entry["pr_curve"] = curve.to_dict()
        report["labels"][label] = entry
    mp, mr, mf1 = micro_prf(pred, gold)
    report["micro"] = {"precision": mp, "recall": mr, "f1": mf1}
    return report
