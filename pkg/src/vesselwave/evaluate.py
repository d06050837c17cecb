"""FOV-restricted ROC analysis, pooled over a test set.

Pixels from all test images are pooled before sweeping thresholds, so the
curve reflects the whole split rather than a per-image average.  The
decision convention everywhere is "vessel iff score > threshold"; ties go
to non-vessel.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass
class RocCurve:
    """Ordered ROC points with per-point thresholds and the trapezoidal area."""

    fpf: np.ndarray
    tpf: np.ndarray
    thresholds: np.ndarray
    az: float

    @property
    def points(self):
        return np.column_stack([self.fpf, self.tpf])


def _masked_pair(a, b, mask):
    a = np.asarray(a)
    b = np.asarray(b)
    mask = np.asarray(mask, dtype=bool)
    if a.shape != b.shape or a.shape != mask.shape:
        raise DataError(
            f"shape mismatch: {a.shape} vs {b.shape} vs mask {mask.shape}"
        )
    return a[mask], b[mask]


def confusion(seg, truth, mask):
    """Count (TP, FP, TN, FN) over in-FOV pixels only."""
    s, t = _masked_pair(np.asarray(seg, dtype=bool), np.asarray(truth, dtype=bool), mask)
    if not t.any():
        raise DataError("ground truth has no vessel pixels inside the FOV")
    tp = int(np.count_nonzero(s & t))
    fp = int(np.count_nonzero(s & ~t))
    tn = int(np.count_nonzero(~s & ~t))
    fn = int(np.count_nonzero(~s & t))
    return tp, fp, tn, fn


def _pooled(values_list, truths, masks):
    vals = []
    labs = []
    for values, truth, mask in zip(values_list, truths, masks):
        v, t = _masked_pair(values, np.asarray(truth, dtype=bool), mask)
        vals.append(v)
        labs.append(t)
    return np.concatenate(vals), np.concatenate(labs)


def roc(scores, truths, masks):
    """Build the pooled ROC curve from per-image score maps.

    Thresholds sweep every distinct pooled score value in descending order;
    each threshold t contributes the operating point of the rule
    "vessel iff score > t", and a final point at threshold -inf closes the
    curve at (1, 1).  The area is computed with the trapezoidal rule, which
    makes it equal to the Mann-Whitney statistic with ties counted half.

    Parameters
    ----------
    scores, truths, masks : sequences of numpy.ndarray
        Matching per-image score maps, boolean ground truths, FOV masks.

    Returns
    -------
    RocCurve
    """
    pooled_scores, pooled_labels = _pooled(scores, truths, masks)
    n_pos = int(np.count_nonzero(pooled_labels))
    n_neg = pooled_labels.size - n_pos
    if n_pos == 0:
        raise DataError("ground truth has no vessel pixels inside the FOV")
    if n_neg == 0:
        raise DataError("ground truth has no non-vessel pixels inside the FOV")
    order = np.argsort(-pooled_scores, kind="stable")
    sorted_scores = pooled_scores[order]
    sorted_labels = pooled_labels[order]
    cum_tp = np.cumsum(sorted_labels)
    # First index of each distinct value; counts strictly above that value
    # are everything before it.
    starts = np.flatnonzero(np.r_[True, np.diff(sorted_scores) != 0])
    tp = np.where(starts > 0, cum_tp[starts - 1], 0)
    fp = starts - tp
    thresholds = np.r_[sorted_scores[starts], -np.inf]
    tp = np.r_[tp, n_pos]
    fp = np.r_[fp, n_neg]
    fpf = fp / n_neg
    tpf = tp / n_pos
    az = float(np.trapezoid(tpf, fpf))
    return RocCurve(fpf=fpf, tpf=tpf, thresholds=thresholds, az=az)


def accuracy(segs, truths, masks):
    """Fraction of correctly classified in-FOV pixels, pooled over images."""
    correct = 0
    total = 0
    for seg, truth, mask in zip(segs, truths, masks):
        s, t = _masked_pair(
            np.asarray(seg, dtype=bool), np.asarray(truth, dtype=bool), mask
        )
        correct += int(np.count_nonzero(s == t))
        total += s.size
    return correct / total


def observer_point(second_labels, truths, masks):
    """Score one human labeling against the ground truth.

    Returns the pooled (FPF, TPF, accuracy) triple used as the observer
    reference point on ROC plots.
    """
    tp = fp = tn = fn = 0
    for obs, truth, mask in zip(second_labels, truths, masks):
        a, b, c, d = confusion(obs, truth, mask)
        tp += a
        fp += b
        tn += c
        fn += d
    return fp / (fp + tn), tp / (tp + fn), (tp + tn) / (tp + fp + tn + fn)


def write_roc_csv(path, curve):
    """Export a curve as CSV with header ``threshold,fpf,tpf``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpf", "tpf"])
        for t, f, p in zip(curve.thresholds, curve.fpf, curve.tpf):
            writer.writerow([repr(float(t)), repr(float(f)), repr(float(p))])


def write_summary_csv(path, metrics):
    """Export (metric, value) rows as CSV with header ``metric,value``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for name, value in metrics.items():
            writer.writerow([name, repr(float(value))])
