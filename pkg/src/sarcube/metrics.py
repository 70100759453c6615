"""Precision-recall curves and average precision for pixel predictions."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateLabels, InvalidLabel


@dataclass
class PRCurve:
    thresholds: np.ndarray   # descending unique scores
    precision: np.ndarray
    recall: np.ndarray
    auprc: float
    prevalence: float


def _validate(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise ValueError(f"{scores.size} scores vs {labels.size} labels")
    if labels.size and not np.isin(labels, (0, 1)).all():
        raise InvalidLabel("labels must be 0 or 1")
    if np.isnan(scores).any():
        raise ValueError("scores contain NaN")
    labels = labels.astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DegenerateLabels("need at least one positive and one negative label")
    return scores, labels, n_pos


def average_precision(precision, recall) -> float:
    """Step-rule area: sum over k of (R_k - R_{k-1}) * P_k with R_0 = 0."""
    steps = np.diff(np.concatenate([[0.0], recall]))
    return math.fsum((steps * precision).tolist())


def pr_curve(scores, labels) -> PRCurve:
    """Precision/recall at every distinct score, thresholds descending.

    A threshold t predicts positive for all scores >= t, so tied scores
    enter the curve together.
    """
    scores, labels, n_pos = _validate(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = labels[order]
    # last index of each tie group in descending order
    ends = np.flatnonzero(np.diff(s) != 0)
    ends = np.append(ends, s.size - 1)
    tp = np.cumsum(y, dtype=np.int64)[ends]
    predicted = ends + 1
    precision = tp / predicted
    recall = tp / n_pos
    return PRCurve(s[ends], precision, recall, average_precision(precision, recall),
                   n_pos / labels.size)


def evaluate_chips(scores, masks) -> PRCurve:
    """Pool every pixel of every test chip into a single curve."""
    scores = [np.asarray(s) for s in scores]
    masks = [np.asarray(m) for m in masks]
    if not scores:
        raise ValueError("need at least one chip")
    if len(scores) != len(masks):
        raise ValueError(f"{len(scores)} score maps vs {len(masks)} masks")
    for s, m in zip(scores, masks):
        if s.shape != m.shape:
            raise ValueError(f"score map {s.shape} vs mask {m.shape}")
    return pr_curve(np.concatenate([s.ravel() for s in scores]),
                    np.concatenate([m.ravel() for m in masks]))


def write_curve_csv(curve: PRCurve, path) -> Path:
    """threshold,precision,recall rows followed by a summary line."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(curve.thresholds, curve.precision, curve.recall):
            w.writerow([repr(float(t)), repr(float(p)), repr(float(r))])
        w.writerow([f"# auprc={curve.auprc!r}", f"prevalence={curve.prevalence!r}"])
    return path


def read_curve_csv(path) -> PRCurve:
    rows, summary = [], {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] == "threshold":
                continue
            if row[0].startswith("#"):
                for cell in row:
                    key, _, val = cell.lstrip("# ").partition("=")
                    summary[key] = float(val)
                continue
            rows.append([float(v) for v in row])
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    return PRCurve(arr[:, 0], arr[:, 1], arr[:, 2], summary["auprc"], summary["prevalence"])
