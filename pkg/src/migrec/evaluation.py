"""Detection and text metrics for the extraction pipeline.

Detection quality is scored by one-to-one box matching at IoU > 0.5, with
accuracy = TP / (TP + FP + FN), precision, recall and F1 on the matched
counts (true negatives are meaningless for detection).  Text quality is
scored by character error rate and exact match, with unreadable references
(containing '?') excluded and a numeric/textual split: a line is textual
when it contains at least one letter, numeric otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Sequence

from .interchange import Box


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance with unit costs at character granularity."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            cur.append(min(cur[j - 1] + 1, prev[j] + 1, prev[j - 1] + cost))
        prev = cur
    return prev[-1]


def cer(pred: str, ref: str) -> float:
    """Character error rate: edit distance divided by reference length."""
    if not ref:
        raise ValueError("cer requires a non-empty reference")
    return edit_distance(pred, ref) / len(ref)


def exact_match(pred: str, ref: str) -> bool:
    """Equality after trimming outer whitespace; no case folding."""
    return pred.strip() == ref.strip()


def corpus_exact_match(pairs: Sequence[tuple[str, str]]) -> float:
    """Percentage of (prediction, reference) pairs that match exactly."""
    if not pairs:
        return 0.0
    return 100.0 * sum(1 for p, r in pairs if exact_match(p, r)) / len(pairs)


def filter_unreadable(pairs: Iterable[tuple[str, str]]) -> list[tuple[str, str]]:
    """Drop pairs whose reference contains '?' (unreadable to the annotator)."""
    return [(p, r) for p, r in pairs if "?" not in r]


def is_textual_line(ref: str) -> bool:
    """A line is textual when it includes at least one letter."""
    return any(ch.isalpha() for ch in ref)


@dataclass(frozen=True)
class TextMetrics:
    label: str
    exact_match: float  # percentage
    cer: float  # corpus CER: total edit distance over total reference length
    avg_ref_length: float
    support: int


def _text_metrics(label: str, pairs: Sequence[tuple[str, str]]) -> TextMetrics:
    if not pairs:
        return TextMetrics(label, 0.0, 0.0, 0.0, 0)
    total_dist = sum(edit_distance(p, r) for p, r in pairs)
    total_len = sum(len(r) for r in pairs_refs(pairs))
    return TextMetrics(
        label=label,
        exact_match=corpus_exact_match(pairs),
        cer=total_dist / total_len if total_len else 0.0,
        avg_ref_length=total_len / len(pairs),
        support=len(pairs),
    )


def pairs_refs(pairs: Sequence[tuple[str, str]]) -> list[str]:
    return [r for _, r in pairs]


def split_metrics(pairs: Sequence[tuple[str, str]]) -> list[TextMetrics]:
    """EM/CER for textual lines, numeric lines, and all lines together."""
    textual = [(p, r) for p, r in pairs if is_textual_line(r)]
    numeric = [(p, r) for p, r in pairs if not is_textual_line(r)]
    return [
        _text_metrics("textual", textual),
        _text_metrics("numeric", numeric),
        _text_metrics("all", list(pairs)),
    ]


# ---------------------------------------------------------------------------
# Box matching
# ---------------------------------------------------------------------------


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes; 0 when disjoint."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    inter = w * h
    union = a.area + b.area - inter
    return inter / union


@dataclass(frozen=True)
class EvalCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if self.tp < 0 or self.fp < 0 or self.fn < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "EvalCounts") -> "EvalCounts":
        return EvalCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def match_detections(
    pred: Sequence[Box], gold: Sequence[Box], thr: float = 0.5
) -> tuple[EvalCounts, list[tuple[int, int, float]]]:
    """Greedy one-to-one matching of predicted boxes against ground truth.

    Candidate pairs with IoU strictly above the threshold are taken in
    descending IoU order (ties broken by earlier prediction index, then
    earlier ground-truth index); matched pairs are true positives, leftover
    predictions false positives, leftover ground truths false negatives.
    """
    if not 0.0 < thr <= 1.0:
        raise ValueError("threshold must lie in (0, 1]")
    scored = []
    for pi, p in enumerate(pred):
        for gi, g in enumerate(gold):
            score = iou(p, g)
            if score > thr:
                scored.append((-score, pi, gi))
    scored.sort()
    used_pred: set[int] = set()
    used_gold: set[int] = set()
    pairing = []
    for neg_score, pi, gi in scored:
        if pi in used_pred or gi in used_gold:
            continue
        used_pred.add(pi)
        used_gold.add(gi)
        pairing.append((pi, gi, -neg_score))
    tp = len(pairing)
    return EvalCounts(tp=tp, fp=len(pred) - tp, fn=len(gold) - tp), pairing


# ---------------------------------------------------------------------------
# Detection metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricRow:
    category: str
    accuracy: float  # percentages in [0, 100]
    recall: float
    precision: float
    f1: float


def metrics(counts: EvalCounts, category: str = "") -> MetricRow:
    """Accuracy, precision, recall and F1 (percentages) from matched counts.

    accuracy = TP / (TP + FP + FN); F1 is the harmonic mean of precision and
    recall, 0 when both are 0.  Values are exact; rounding happens only in
    report rendering.
    """
    total = counts.tp + counts.fp + counts.fn
    if total == 0:
        raise ValueError("metrics are undefined for all-zero counts")
    accuracy = 100.0 * counts.tp / total
    precision = 100.0 * counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = 100.0 * counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    return MetricRow(
        category=category,
        accuracy=accuracy,
        recall=recall,
        precision=precision,
        f1=f1_score(precision, recall),
    )


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall (percentages in, percentage out)."""
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def accuracy_from_pr(precision: float, recall: float) -> float:
    """Accuracy implied by precision and recall (percentages).

    Algebraic identity of the matched-count definitions:
    accuracy = 1 / (1/precision + 1/recall - 1).
    """
    if precision <= 0.0 or recall <= 0.0:
        return 0.0
    return 100.0 / (100.0 / precision + 100.0 / recall - 1.0)


# ---------------------------------------------------------------------------
# Classification report aggregation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClassRow:
    label: str
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class ClassReport:
    rows: tuple[ClassRow, ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    total_support: int


def class_report(rows: Sequence[ClassRow]) -> ClassReport:
    """Macro (unweighted) and weighted (support-weighted) averages per metric."""
    if not rows:
        raise ValueError("class_report requires at least one class row")
    total = sum(row.support for row in rows)
    if total <= 0:
        raise ValueError("supports must be positive")
    n = len(rows)

    def macro(metric) -> float:
        return sum(metric(row) for row in rows) / n

    def weighted(metric) -> float:
        return sum(metric(row) * row.support for row in rows) / total

    return ClassReport(
        rows=tuple(rows),
        macro_precision=macro(lambda r: r.precision),
        macro_recall=macro(lambda r: r.recall),
        macro_f1=macro(lambda r: r.f1),
        weighted_precision=weighted(lambda r: r.precision),
        weighted_recall=weighted(lambda r: r.recall),
        weighted_f1=weighted(lambda r: r.f1),
        total_support=total,
    )


def round_half_up(value: float, ndigits: int = 1) -> float:
    """Decimal half-up rounding, applied only when rendering reports."""
    quantum = Decimal(1).scaleb(-ndigits)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP))
