"""Micro-averaged accuracy / precision / recall / F1 with seen-unseen grouping.

For a label subset, only examples whose gold label is in the subset are
scored. A wrong prediction counts as a false negative for the gold class, and
as a false positive only if the predicted class is itself in the subset.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

GROUPS = ("seen", "unseen", "overall")


@dataclass(frozen=True)
class Scores:
    acc: float
    precision: float
    recall: float
    f1: float
    support: int


def micro_scores(predictions, golds, label_subset=None) -> Scores:
    pred = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(golds, dtype=np.int64)
    if pred.shape != gold.shape:
        raise ValueError("predictions and golds differ in length")
    if label_subset is None:
        keep = np.ones(len(gold), dtype=bool)
        subset = None
    else:
        subset = np.asarray(sorted(set(int(x) for x in label_subset)), dtype=np.int64)
        keep = np.isin(gold, subset)
    if not keep.any():
        raise ValueError("empty evaluation set")
    p, g = pred[keep], gold[keep]
    correct = p == g
    tp = int(correct.sum())
    wrong_in_subset = ~correct if subset is None else (~correct & np.isin(p, subset))
    fp = int(wrong_in_subset.sum())
    fn = int((~correct).sum())
    acc = tp / len(g)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Scores(acc, precision, recall, f1, len(g))


@dataclass
class MetricsReport:
    groups: dict  # group name -> Scores | None (None: no support)

    def rows(self):
        for name in GROUPS:
            if name in self.groups:
                yield name, self.groups[name]

    def to_csv(self, footer: str | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["group", "acc", "precision", "recall", "f1", "support"])
        for name, s in self.rows():
            if s is None:
                writer.writerow([name, "", "", "", "", 0])
            else:
                writer.writerow([name] + [f"{100 * v:.2f}" for v in (s.acc, s.precision, s.recall, s.f1)]
                                + [s.support])
        buf.write("# precision counts a class with no predictions as contributing 0 true positives\n")
        if footer:
            buf.write(f"# {footer}\n")
        return buf.getvalue()


def grouped_report(predictions, golds, I: int, K: int) -> MetricsReport:
    """Seen / unseen / overall micro scores; group membership is by gold label."""
    groups = {}
    for name, subset in (("seen", range(I)), ("unseen", range(I, K)), ("overall", range(K))):
        try:
            groups[name] = micro_scores(predictions, golds, subset)
        except ValueError:
            groups[name] = None
    return MetricsReport(groups)


def unseen_report(predictions, golds, I: int, K: int) -> MetricsReport:
    """Single-row report for zero-shot evaluation over unseen intents."""
    return MetricsReport({"unseen": micro_scores(predictions, golds, range(I, K))})
