"""Tolerance-aware evaluation metrics.

A prediction is credited when it lands within a tolerance of delta timesteps
of a true anomaly. Curve metrics sweep the score threshold over every
distinct value, build the tolerant PR / ROC curves, integrate them with the
trapezoid rule, and average areas over a tolerance grid. The affiliation
score softly matches predicted timestamps to ground-truth intervals through
a Gaussian kernel and is NaN when there is nothing to match.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadParams, DegenerateLabels, NoAnomalies

DEFAULT_DELTA_SET = (0, 1, 2, 3, 4)


@dataclass(frozen=True)
class DeltaRow:
    delta: int
    auc_pr: float
    auc_roc: float


@dataclass(frozen=True)
class EvalScores:
    vus_pr: float
    vus_roc: float
    affiliation_f1: float  # NaN when undefined
    per_delta: tuple[DeltaRow, ...]


def _check_series(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise BadParams("scores and labels must be 1-D and the same length")
    return scores, labels


def _tolerant_mask(labels: np.ndarray, delta: int) -> np.ndarray:
    """True at timesteps within delta of some anomaly timestep."""
    if delta == 0:
        return labels.astype(bool)
    return np.convolve(labels.astype(np.float64), np.ones(2 * delta + 1), mode="same") > 0


def tolerant_counts(
    scores: np.ndarray, labels: np.ndarray, delta: int, tau: float
) -> tuple[int, int, int]:
    """Raw (tp, n_predicted, n_anomalies) at one threshold; tp is unclamped."""
    scores, labels = _check_series(scores, labels)
    matched = _tolerant_mask(labels, delta)
    pred = scores > tau
    return int(np.sum(pred & matched)), int(pred.sum()), int(labels.sum())


def tolerant_pr(
    scores: np.ndarray, labels: np.ndarray, delta: int, tau: float
) -> tuple[float, float]:
    """Precision/recall with predictions {t: score > tau} credited within delta.

    Precision is NaN when nothing is predicted; recall clamps the credited
    count to the number of anomalies so it stays within [0, 1].
    """
    tp, n_pred, n_anom = tolerant_counts(scores, labels, delta, tau)
    if n_anom == 0:
        raise NoAnomalies("labels contain no anomaly")
    precision = tp / n_pred if n_pred > 0 else float("nan")
    recall = min(tp, n_anom) / n_anom
    return precision, recall


def _threshold_sweep(scores: np.ndarray, matched: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Credited and total prediction counts for {t: score >= tau} at every
    distinct threshold, descending (ties grouped)."""
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    tp_cum = np.cumsum(matched[order].astype(np.float64))
    group_ends = np.append(np.nonzero(np.diff(s_sorted))[0], s_sorted.size - 1)
    return tp_cum[group_ends], group_ends + 1.0


def vus_pr(scores: np.ndarray, labels: np.ndarray, delta_set=DEFAULT_DELTA_SET) -> float:
    """Tolerant area under the precision-recall curve, averaged over deltas.

    The empty-prediction end of the sweep carries the smallest-recall point's
    precision down to recall zero.
    """
    scores, labels = _check_series(scores, labels)
    n_anom = int(labels.sum())
    if n_anom == 0:
        raise NoAnomalies("labels contain no anomaly")
    areas = []
    for delta in delta_set:
        tp, n_pred = _threshold_sweep(scores, _tolerant_mask(labels, delta))
        precision = tp / n_pred
        recall = np.minimum(tp, n_anom) / n_anom
        recall = np.concatenate([[0.0], recall])
        precision = np.concatenate([[precision[0]], precision])
        areas.append(float(np.trapezoid(precision, recall)))
    return float(np.mean(areas))


def vus_roc(scores: np.ndarray, labels: np.ndarray, delta_set=DEFAULT_DELTA_SET) -> float:
    """Tolerant area under the ROC curve, averaged over deltas."""
    scores, labels = _check_series(scores, labels)
    n_anom = int(labels.sum())
    n_norm = labels.size - n_anom
    if n_anom == 0 or n_norm == 0:
        raise DegenerateLabels("need at least one anomaly and one normal point")
    areas = []
    for delta in delta_set:
        tp, n_pred = _threshold_sweep(scores, _tolerant_mask(labels, delta))
        tpr = np.minimum(tp, n_anom) / n_anom
        fpr = (n_pred - tp) / n_norm
        tpr = np.concatenate([[0.0], tpr, [1.0]])
        fpr = np.concatenate([[0.0], fpr, [1.0]])
        areas.append(float(np.trapezoid(tpr, fpr)))
    return float(np.mean(areas))


def label_intervals(labels: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous runs of 1s as inclusive (start, end) pairs."""
    labels = np.asarray(labels, dtype=np.int64)
    edges = np.diff(np.concatenate([[0], labels, [0]]))
    starts = np.where(edges == 1)[0]
    ends = np.where(edges == -1)[0] - 1
    return list(zip(starts.tolist(), ends.tolist()))


def _dist_to_intervals(points: np.ndarray, intervals: np.ndarray) -> np.ndarray:
    """Distance from each point to the nearest interval (0 inside)."""
    below = intervals[None, :, 0] - points[:, None]
    above = points[:, None] - intervals[None, :, 1]
    d = np.maximum(np.maximum(below, above), 0.0)
    return d.min(axis=1)


def affiliation_f1(
    pred_flags: np.ndarray, intervals: list[tuple[int, int]], sigma: float
) -> float:
    """Harmonic mean of Gaussian-kernel soft precision and recall.

    Precision averages, over predicted timestamps, the kernel of the distance
    to the nearest ground-truth interval; recall averages, over true anomaly
    timestamps, the kernel of the distance to the nearest prediction. NaN
    when there are no predictions (or no true anomalies to recall, or the
    kernels underflow to zero on both sides).
    """
    if sigma <= 0:
        raise BadParams("sigma must be positive")
    pred_ts = np.where(np.asarray(pred_flags, dtype=np.int64) == 1)[0].astype(np.float64)
    if pred_ts.size == 0 or not intervals:
        return float("nan")
    iv = np.asarray(intervals, dtype=np.float64)
    denom = 2.0 * sigma * sigma

    d_pred = _dist_to_intervals(pred_ts, iv)
    precision = float(np.mean(np.exp(-(d_pred**2) / denom)))

    true_ts = np.concatenate([np.arange(s, e + 1) for s, e in intervals]).astype(np.float64)
    d_true = np.abs(true_ts[:, None] - pred_ts[None, :]).min(axis=1)
    recall = float(np.mean(np.exp(-(d_true**2) / denom)))

    if precision + recall == 0.0:
        return float("nan")
    return 2.0 * precision * recall / (precision + recall)


def evaluate(
    point_scores: np.ndarray,
    flags: np.ndarray,
    labels: np.ndarray,
    delta_set=DEFAULT_DELTA_SET,
    sigma: float = 5.0,
) -> EvalScores:
    """All three metrics plus the per-delta breakdown, as the eval command reports them."""
    scores, labels = _check_series(point_scores, labels)
    rows = []
    for delta in delta_set:
        rows.append(
            DeltaRow(
                delta=int(delta),
                auc_pr=vus_pr(scores, labels, delta_set=(delta,)),
                auc_roc=vus_roc(scores, labels, delta_set=(delta,)),
            )
        )
    return EvalScores(
        vus_pr=float(np.mean([r.auc_pr for r in rows])),
        vus_roc=float(np.mean([r.auc_roc for r in rows])),
        affiliation_f1=affiliation_f1(flags, label_intervals(labels), sigma),
        per_delta=tuple(rows),
    )
