"""Cosine-similarity gallery matching and evaluation reports.

A gallery is the matrix of flattened training projections with their labels.
Probes are matched to the single nearest gallery row by cosine similarity
(1-NN); ties keep the lowest row index.  Evaluation also derives one-vs-rest
ROC curves from per-class scores, where a probe's score for class c is its
best cosine against any gallery row of that class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .msl import LabeledSamples

__all__ = ["Gallery", "EvalReport", "cosine", "predict", "evaluate", "render_report"]


@dataclass
class Gallery:
    """Flattened reference vectors (rows) with labels into `class_names`."""

    vectors: np.ndarray
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        v = np.ascontiguousarray(self.vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvalidArgumentError(
                f"gallery must be a non-empty 2-D matrix, got shape {v.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError("gallery contains non-finite entries")
        norms = np.linalg.norm(v, axis=1)
        if np.any(norms == 0.0):
            row = int(np.argmax(norms == 0.0))
            raise InvalidArgumentError(
                f"gallery row {row} is all-zero; cosine similarity is undefined"
            )
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if labels.shape != (v.shape[0],):
            raise InvalidArgumentError(
                f"need {v.shape[0]} labels, got shape {labels.shape}"
            )
        if not self.class_names:
            raise InvalidArgumentError("gallery needs a class name list")
        names = [str(c) for c in self.class_names]
        if np.any(labels < 1) or np.any(labels > len(names)):
            raise InvalidArgumentError(
                f"labels must lie in 1..{len(names)}"
            )
        self.vectors = v
        self.labels = labels
        self.class_names = names
        self._units = v / norms[:, None]

    @classmethod
    def from_samples(cls, samples: LabeledSamples) -> "Gallery":
        """Flatten labeled tensors into gallery rows (C order)."""
        if samples.class_names is None:
            raise InvalidArgumentError("gallery construction needs class names")
        rows = np.stack([s.ravel() for s in samples.samples])
        return cls(rows, samples.labels, samples.class_names)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)


@dataclass
class EvalReport:
    """Metrics from matching a probe set against a gallery.

    ``confusion[t, p]`` counts probes of true class t+1 predicted as p+1.
    Per-class values are NaN where undefined (no probes of that class, or no
    negatives for the ROC sweep).
    """

    accuracy: float
    n_test: int
    confusion: np.ndarray
    per_class_accuracy: np.ndarray
    auc: np.ndarray
    micro_auc: float
    class_names: list[str]


def cosine(a, b) -> float:
    """Cosine similarity of two equal-length non-zero vectors."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.shape[0] < 1:
        raise InvalidArgumentError(
            f"vectors must share a non-zero length, got {a.shape} and {b.shape}"
        )
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise InvalidArgumentError("cosine similarity of a zero vector is undefined")
    return float(a @ b / (na * nb))


def _unit_probes(vectors) -> np.ndarray:
    v = np.ascontiguousarray(vectors, dtype=np.float64)
    if v.ndim != 2:
        raise InvalidArgumentError(f"probes must be 2-D, got order {v.ndim}")
    if not np.all(np.isfinite(v)):
        raise InvalidArgumentError("probes contain non-finite entries")
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0.0):
        row = int(np.argmax(norms == 0.0))
        raise InvalidArgumentError(f"probe {row} is all-zero")
    return v / norms[:, None]


def predict(probe, gallery: Gallery) -> tuple[int, float, np.ndarray]:
    """Nearest-row decision for one probe.

    Returns (label, best score, all per-row cosine scores); ties go to the
    lowest gallery row.
    """
    probe = np.ascontiguousarray(probe, dtype=np.float64).ravel()
    if probe.shape[0] != gallery.vectors.shape[1]:
        raise InvalidArgumentError(
            f"probe length {probe.shape[0]} does not match gallery width "
            f"{gallery.vectors.shape[1]}"
        )
    scores = gallery._units @ _unit_probes(probe[None, :])[0]
    best = int(np.argmax(scores))
    return int(gallery.labels[best]), float(scores[best]), scores


def _roc_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    # One-vs-rest ROC by threshold sweep over distinct scores, trapezoid area.
    n_pos = int(positive.sum())
    n_neg = positive.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        return float("nan")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    y = positive[order]
    ends = np.nonzero(np.append(s[1:] != s[:-1], True))[0]
    tpr = np.cumsum(y)[ends] / n_pos
    fpr = np.cumsum(~y)[ends] / n_neg
    tpr = np.concatenate(([0.0], tpr))
    fpr = np.concatenate(([0.0], fpr))
    return float(np.trapezoid(tpr, fpr))


def evaluate(vectors, labels, gallery: Gallery) -> EvalReport:
    """Match every probe row against the gallery and aggregate metrics."""
    units = _unit_probes(vectors)
    if units.shape[1] != gallery.vectors.shape[1]:
        raise InvalidArgumentError(
            f"probe width {units.shape[1]} does not match gallery width "
            f"{gallery.vectors.shape[1]}"
        )
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.shape != (units.shape[0],):
        raise InvalidArgumentError(
            f"need {units.shape[0]} probe labels, got shape {labels.shape}"
        )
    l_count = gallery.n_classes
    if np.any(labels < 1) or np.any(labels > l_count):
        raise InvalidArgumentError(f"probe labels must lie in 1..{l_count}")
    scores = units @ gallery._units.T
    predicted = gallery.labels[np.argmax(scores, axis=1)]
    n = units.shape[0]
    confusion = np.zeros((l_count, l_count), dtype=np.int64)
    np.add.at(confusion, (labels - 1, predicted - 1), 1)
    accuracy = float(np.trace(confusion)) / n
    row_totals = confusion.sum(axis=1)
    with np.errstate(invalid="ignore"):
        per_class = np.where(
            row_totals > 0, np.diag(confusion) / np.maximum(row_totals, 1), np.nan
        )
    # Per-class probe score: best cosine against any gallery row of the class.
    class_scores = np.full((n, l_count), -np.inf)
    for c in range(1, l_count + 1):
        cols = gallery.labels == c
        if np.any(cols):
            class_scores[:, c - 1] = scores[:, cols].max(axis=1)
    auc = np.array(
        [_roc_auc(class_scores[:, c], labels == c + 1) for c in range(l_count)]
    )
    pooled_mask = np.isfinite(class_scores).all(axis=0)
    pooled = class_scores[:, pooled_mask].ravel()
    truth = (labels[:, None] == np.arange(1, l_count + 1)[None, :])[:, pooled_mask]
    micro = _roc_auc(pooled, truth.ravel())
    return EvalReport(
        accuracy=accuracy,
        n_test=n,
        confusion=confusion,
        per_class_accuracy=per_class,
        auc=auc,
        micro_auc=micro,
        class_names=list(gallery.class_names),
    )


def render_report(report: EvalReport) -> str:
    """Line-oriented text form of an :class:`EvalReport` with stable keys."""
    lines = [
        "report_version: 1",
        f"n_test: {report.n_test}",
        f"n_classes: {len(report.class_names)}",
        f"accuracy: {report.accuracy:.6f}",
        f"micro_auc: {report.micro_auc:.6f}",
    ]
    for i, name in enumerate(report.class_names):
        lines.append(f"class {i + 1} name: {name}")
        lines.append(f"class {i + 1} accuracy: {report.per_class_accuracy[i]:.6f}")
        lines.append(f"class {i + 1} auc: {report.auc[i]:.6f}")
        row = " ".join(str(int(v)) for v in report.confusion[i])
        lines.append(f"confusion {i + 1}: {row}")
    return "\n".join(lines) + "\n"
