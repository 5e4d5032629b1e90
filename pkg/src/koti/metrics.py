"""Confusion-matrix metrics: per-class precision/recall/F1 and macro-F1.

Division-by-zero convention: precision/recall are 0 when their denominator
is 0, and F1 is 0 when precision + recall is 0.  Macro-F1 averages over
classes that occur in gold or predictions; a class absent from both is
excluded from the mean (it carries no information in that run), while a
class with gold examples that is never predicted contributes F1 = 0.
"""

from __future__ import annotations

from .errors import EmptyEvaluation


def confusion_matrix(gold: list[int], pred: list[int], n_classes: int) -> list[list[int]]:
    """counts[g][p] = number of examples with gold class g predicted as p."""
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold labels vs {len(pred)} predictions")
    counts = [[0] * n_classes for _ in range(n_classes)]
    for g, p in zip(gold, pred):
        if not (0 <= g < n_classes and 0 <= p < n_classes):
            raise ValueError(f"class index out of range: gold={g} pred={p}")
        counts[g][p] += 1
    return counts


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def per_class_prf(confusion: list[list[int]]) -> list[dict[str, float]]:
    """Per-class precision/recall/F1/support from a square confusion matrix."""
    n = len(confusion)
    if any(len(row) != n for row in confusion):
        raise ValueError("confusion matrix must be square")
    out = []
    for c in range(n):
        tp = confusion[c][c]
        gold_c = sum(confusion[c])
        pred_c = sum(confusion[g][c] for g in range(n))
        precision = _safe_div(tp, pred_c)
        recall = _safe_div(tp, gold_c)
        # Count form of F1 (= 2PR/(P+R)): one division, so no compounded rounding.
        f1 = _safe_div(2 * tp, gold_c + pred_c)
        out.append(
            {"precision": precision, "recall": recall, "f1": f1, "support": float(gold_c)}
        )
    return out


def macro_f1(confusion: list[list[int]]) -> float:
    """Unweighted mean F1 over classes present in gold or predictions."""
    n = len(confusion)
    total = sum(sum(row) for row in confusion)
    if total == 0:
        raise EmptyEvaluation("confusion matrix has no examples")
    prf = per_class_prf(confusion)
    included = []
    for c in range(n):
        gold_c = sum(confusion[c])
        pred_c = sum(confusion[g][c] for g in range(n))
        if gold_c == 0 and pred_c == 0:
            continue
        included.append(prf[c]["f1"])
    return sum(included) / len(included)
