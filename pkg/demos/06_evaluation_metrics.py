"""The evaluation toolkit: box matching, detection metrics, text metrics.

Detections are matched one-to-one against ground truth at IoU > 0.5;
accuracy is TP/(TP+FP+FN).  Text is scored by exact match and character
error rate with unreadable references ('?') excluded and a numeric/textual
split.  Per-class reports aggregate into macro and support-weighted rows.
"""

from migrec import Box, EvalCounts, cer, exact_match, iou, match_detections, metrics
from migrec.evaluation import (
    ClassRow,
    class_report,
    filter_unreadable,
    round_half_up,
    split_metrics,
)

a = Box(0, 0, 1, 1, 1.0)
b = Box(0.5, 0, 1.5, 1, 1.0)
print(f"iou of unit squares overlapping by half: {iou(a, b):.4f}")

pred = [Box(0, 0, 10, 10, 0.9), Box(20, 0, 30, 10, 0.8), Box(50, 50, 60, 60, 0.7)]
gold = [Box(1, 0, 11, 10, 1.0), Box(20, 0, 30, 10, 1.0), Box(80, 80, 90, 90, 1.0)]
counts, pairing = match_detections(pred, gold)
print(f"matching 3 predictions vs 3 golds: tp={counts.tp} fp={counts.fp} fn={counts.fn}")
row = metrics(counts)
print(f"  accuracy={round_half_up(row.accuracy)} recall={round_half_up(row.recall)} "
      f"precision={round_half_up(row.precision)} f1={round_half_up(row.f1)}")

print(f"\nmetrics at tp:fn = 942:58 with no false positives -> "
      f"f1={round_half_up(metrics(EvalCounts(942, 0, 58)).f1)}")

pairs = [
    ("296", "296"),
    ("Maria Sirkka", "Maria Sirkka"),
    ("piika", "pika"),
    ("1878", "18?8"),  # unreadable reference, excluded
    ("s 296", "s. 296"),
]
kept = filter_unreadable(pairs)
print(f"\n{len(pairs) - len(kept)} unreadable pair excluded; split metrics on the rest:")
for m in split_metrics(kept):
    print(f"  {m.label:8} em={m.exact_match:5.1f}%  cer={m.cer:.3f}  "
          f"avg_len={m.avg_ref_length:.1f}  n={m.support}")
print(f"exact_match('1878 ', '1878') = {exact_match('1878 ', '1878')} (outer whitespace trimmed)")
print(f"cer('abd', 'abc') = {cer('abd', 'abc'):.3f}")

report = class_report(
    [
        ClassRow("single_line", 96.3, 87.3, 91.6, 9829),
        ClassRow("empty", 81.2, 96.7, 88.3, 3692),
        ClassRow("repetition", 79.4, 87.1, 83.1, 2020),
        ClassRow("multi_line", 67.9, 69.6, 68.7, 744),
    ]
)
print(f"\nclass report averages: macro f1={round_half_up(report.macro_f1)}, "
      f"weighted f1={round_half_up(report.weighted_f1)}")
