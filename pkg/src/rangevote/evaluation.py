"""Detection evaluation: matching, precision-recall curves, summaries.

A detection is correct when its center lies within the matching radius of
an annotation; at most one detection can claim each annotation. Matching
is greedy in descending confidence, which makes the threshold sweep exact:
matching a frame once and thresholding the outcome equals re-matching at
every threshold.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Annotation, ClassId, Detection, FOREGROUND_CLASSES

EVAL_MODES = ("agnostic",) + tuple(c.name.lower() for c in FOREGROUND_CLASSES)


@dataclass(frozen=True)
class MatchResult:
    """Greedy matching outcome for one frame.

    pairs holds one (detection index, annotation index or None) entry per
    detection, in input order. tp + fn equals the annotation count.
    """

    pairs: tuple
    tp: int
    fp: int
    fn: int


def match_frame(detections: list[Detection], annotations: list[Annotation],
                radius: float, class_aware: bool = False) -> MatchResult:
    """Match detections to annotations, nearest-first in confidence order.

    Each detection, taken in descending confidence, claims the nearest
    still-unclaimed annotation within the radius (requiring class agreement
    in class_aware mode) or counts as a false positive.
    """
    order = sorted(range(len(detections)), key=lambda i: -detections[i].confidence)
    taken = [False] * len(annotations)
    matched: dict[int, int | None] = {}
    tp = 0
    for di in order:
        det = detections[di]
        best_j = None
        best_d = math.inf
        for j, ann in enumerate(annotations):
            if taken[j]:
                continue
            if class_aware and det.dominant_class != ann.class_id:
                continue
            d = math.hypot(det.x - ann.x, det.y - ann.y)
            if d <= radius and d < best_d:
                best_j, best_d = j, d
        if best_j is not None:
            taken[best_j] = True
            tp += 1
        matched[di] = best_j
    pairs = tuple((di, matched[di]) for di in range(len(detections)))
    return MatchResult(pairs=pairs, tp=tp, fp=len(detections) - tp,
                       fn=len(annotations) - tp)


@dataclass(frozen=True)
class PrCurve:
    """Precision-recall points swept over every distinct confidence.

    Arrays run from the highest threshold down, so recall is
    non-decreasing. precision is defined as 1 when nothing is predicted.
    """

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    n_annotations: int

    def __len__(self) -> int:
        return len(self.thresholds)


def _filter_mode(detections, annotations, mode):
    if mode == "agnostic":
        return detections, annotations
    try:
        cls = ClassId[mode.upper()]
    except KeyError:
        raise ValueError(f"mode must be one of {EVAL_MODES}") from None
    return ([d for d in detections if d.dominant_class == cls],
            [a for a in annotations if a.class_id == cls])


def pr_curve(detections_by_seq: dict[int, list[Detection]],
             annotations_by_seq: dict[int, list[Annotation]],
             annotated_seqs, radius: float, mode: str = "agnostic") -> PrCurve:
    """Sweep the confidence threshold over the whole evaluation set.

    Only frames in annotated_seqs participate. mode "agnostic" evaluates
    all classes jointly; a class name restricts detections (by dominant
    class) and annotations to that class.
    """
    events = []  # (confidence, matched) per detection
    total_ann = 0
    for seq in annotated_seqs:
        dets, anns = _filter_mode(detections_by_seq.get(seq, []),
                                  annotations_by_seq.get(seq, []), mode)
        total_ann += len(anns)
        result = match_frame(dets, anns, radius)
        for di, aj in result.pairs:
            events.append((dets[di].confidence, aj is not None))
    if total_ann == 0:
        raise ValueError("no annotations to evaluate against")

    events.sort(key=lambda e: -e[0])
    thresholds, precision, recall = [], [], []
    tp = fp = 0
    for i, (conf, is_tp) in enumerate(events):
        tp += bool(is_tp)
        fp += not is_tp
        if i + 1 == len(events) or events[i + 1][0] != conf:
            thresholds.append(conf)
            precision.append(tp / (tp + fp))
            recall.append(tp / total_ann)
    return PrCurve(np.asarray(thresholds), np.asarray(precision),
                   np.asarray(recall), total_ann)


def curve_summaries(curve: PrCurve) -> dict[str, float]:
    """Area under the curve, peak F1, and equal error rate, all in [0, 1].

    AUC integrates precision over recall trapezoidally after prepending
    (recall 0, first precision). EER is the common value where precision
    crosses recall, linearly interpolated between the straddling sweep
    points; without a crossing, the point minimizing |p - r| stands in.
    """
    if len(curve) == 0:
        return {"auc": 0.0, "peak_f1": 0.0, "eer": 0.0}
    p = curve.precision
    r = curve.recall
    r_ext = np.concatenate([[0.0], r])
    p_ext = np.concatenate([[p[0]], p])
    auc = float(np.trapz(p_ext, r_ext))

    denom = p + r
    f1 = np.where(denom > 0, 2.0 * p * r / np.where(denom > 0, denom, 1.0), 0.0)
    peak_f1 = float(f1.max())

    d = p - r
    eer = None
    for i in range(len(d) - 1):
        if d[i] == 0.0:
            eer = float(r[i])
            break
        if (d[i] > 0) != (d[i + 1] > 0):
            lam = d[i] / (d[i] - d[i + 1])
            eer = float(r[i] + lam * (r[i + 1] - r[i]))
            break
    if eer is None:
        i = int(np.argmin(np.abs(d)))
        eer = float(0.5 * (p[i] + r[i]))
    return {"auc": auc, "peak_f1": peak_f1, "eer": eer}


@dataclass(frozen=True)
class DistanceHistogram:
    """Per-class annotation counts over 1 m distance slices."""

    bins: dict
    overflow: dict
    bin_width: float
    n_bins: int

    def total(self, cls: ClassId) -> int:
        return int(self.bins[cls].sum()) + int(self.overflow[cls])


def distance_histogram(annotations, bin_width: float = 1.0,
                       n_bins: int = 15) -> DistanceHistogram:
    """Bin annotations by euclidean distance from the sensor origin.

    Covers [0, n_bins * bin_width); farther annotations land in the
    per-class overflow counter.
    """
    bins = {c: np.zeros(n_bins, dtype=np.int64) for c in FOREGROUND_CLASSES}
    overflow = {c: 0 for c in FOREGROUND_CLASSES}
    for ann in annotations:
        b = int(math.hypot(ann.x, ann.y) / bin_width)
        if b < n_bins:
            bins[ann.class_id][b] += 1
        else:
            overflow[ann.class_id] += 1
    return DistanceHistogram(bins=bins, overflow=overflow,
                             bin_width=bin_width, n_bins=n_bins)


def write_curve_file(path, curve: PrCurve, summaries: dict[str, float] | None = None) -> None:
    """Plot-ready tab-separated curve file.

    Header, then one `threshold precision recall f1` row per sweep point,
    then a final `# auc= peak_f1= eer=` comment line.
    """
    s = summaries if summaries is not None else curve_summaries(curve)
    with open(path, "w") as f:
        f.write("threshold\tprecision\trecall\tf1\n")
        for t, p, r in zip(curve.thresholds, curve.precision, curve.recall):
            f1 = 2.0 * p * r / (p + r) if p + r > 0 else 0.0
            f.write(f"{t!r}\t{p!r}\t{r!r}\t{f1!r}\n")
        f.write(f"# auc={s['auc']!r} peak_f1={s['peak_f1']!r} eer={s['eer']!r}\n")
