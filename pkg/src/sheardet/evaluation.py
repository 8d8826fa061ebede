"""Detector evaluation: greedy matching, PR curves, AP, MR/FPPI, and LAMR.

Matching is greedy by descending score within each image (ties keep input
order), pairing each detection with the unmatched ground truth of highest
IoU when that IoU reaches the threshold. The miss rate and false-positive
ratio are the complements of recall and precision, evaluated cumulatively
down the globally score-sorted detection list.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .boxes import (
    DEFAULT_MEDIUM_MAX,
    DEFAULT_SMALL_MAX,
    Box,
    Detection,
    GroundTruth,
    SizeClass,
    area_class,
    iou,
)

AP_THRESHOLDS = tuple((50 + 5 * i) / 100 for i in range(10))
LAMR_REFERENCE_POINTS = tuple(10.0 ** (-2.0 + 0.25 * i) for i in range(9))
MISS_RATE_FLOOR = 1e-10


@dataclass(frozen=True)
class MatchResult:
    """Per-detection TP flags in global score order, plus aggregate counts."""

    tp_flags: tuple[bool, ...]
    scores: tuple[float, ...]
    gt_matched: tuple[bool, ...]
    tp: int
    fp: int
    fn: int
    iou_threshold: float


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) at every rank of the score-sorted detections."""

    recalls: tuple[float, ...]
    precisions: tuple[float, ...]
    scores: tuple[float, ...]
    num_ground_truth: int


@dataclass(frozen=True)
class EvalConfig:
    iou_threshold: float = 0.5
    score_min: float = 0.5
    small_max: float = DEFAULT_SMALL_MAX
    medium_max: float = DEFAULT_MEDIUM_MAX
    fppi_per_image: bool = False
    eleven_point_ap: bool = False


@dataclass(frozen=True)
class EvalReport:
    ap: float
    ap50: float
    ap75: float
    ap50_small: float | None
    ap50_medium: float | None
    ap50_large: float | None
    precision: float
    recall: float
    f1: float
    accuracy: float
    lamr: float
    pr_curve: PRCurve
    mr_fppi_curve: tuple[tuple[float, float], ...]

    def scalar_dict(self) -> dict:
        return {
            "ap": self.ap,
            "ap50": self.ap50,
            "ap75": self.ap75,
            "ap50_small": self.ap50_small,
            "ap50_medium": self.ap50_medium,
            "ap50_large": self.ap50_large,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "lamr": self.lamr,
        }

    def to_json(self) -> str:
        return json.dumps(self.scalar_dict(), indent=2)


def _ranked(detections: list[Detection]) -> list[int]:
    """Indices of detections in descending score, ties by input order."""
    return sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))


def _greedy_claims(
    detections: list[Detection], ground_truths: list[GroundTruth], t: float
) -> dict[int, int]:
    """Map detection input index -> claimed ground-truth index."""
    gt_by_image: dict[str, list[int]] = {}
    for gi, gt in enumerate(ground_truths):
        gt_by_image.setdefault(gt.image_id, []).append(gi)

    claimed: dict[int, int] = {}
    taken = [False] * len(ground_truths)
    for di in _ranked(detections):
        det = detections[di]
        best_iou, best_gi = 0.0, -1
        for gi in gt_by_image.get(det.image_id, ()):
            if taken[gi]:
                continue
            overlap = iou(det.box, ground_truths[gi].box)
            if overlap > best_iou:
                best_iou, best_gi = overlap, gi
        if best_gi >= 0 and best_iou >= t:
            taken[best_gi] = True
            claimed[di] = best_gi
    return claimed


def match(
    detections: list[Detection], ground_truths: list[GroundTruth], t: float
) -> MatchResult:
    """Greedily match detections to ground truths at IoU threshold t."""
    if not 0.0 < t <= 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1], got {t}")
    claimed = _greedy_claims(detections, ground_truths, t)
    order = _ranked(detections)
    gt_matched = [False] * len(ground_truths)
    for gi in claimed.values():
        gt_matched[gi] = True
    tp_flags = tuple(di in claimed for di in order)
    scores = tuple(detections[di].score for di in order)
    tp = len(claimed)
    return MatchResult(
        tp_flags=tp_flags,
        scores=scores,
        gt_matched=tuple(gt_matched),
        tp=tp,
        fp=len(detections) - tp,
        fn=len(ground_truths) - tp,
        iou_threshold=t,
    )


def pr_curve(
    detections: list[Detection], ground_truths: list[GroundTruth], t: float
) -> PRCurve:
    """Cumulative precision/recall down the score-sorted detection list."""
    result = match(detections, ground_truths, t)
    num_gt = len(ground_truths)
    recalls, precisions = [], []
    tp = 0
    for rank, is_tp in enumerate(result.tp_flags, start=1):
        tp += is_tp
        precisions.append(tp / rank)
        recalls.append(tp / num_gt if num_gt else 0.0)
    return PRCurve(
        recalls=tuple(recalls),
        precisions=tuple(precisions),
        scores=result.scores,
        num_ground_truth=num_gt,
    )


def average_precision(curve: PRCurve, eleven_point: bool = False) -> float:
    """Area under the precision envelope of the curve.

    The default integrates the monotone (right-to-left maximum) precision
    envelope over every recall increment; the eleven-point variant averages
    the envelope at recalls 0.0, 0.1, ..., 1.0.
    """
    if curve.num_ground_truth == 0:
        raise ValueError("average precision is undefined without ground truth")
    if not curve.recalls:
        return 0.0
    envelope = list(curve.precisions)
    for i in range(len(envelope) - 2, -1, -1):
        envelope[i] = max(envelope[i], envelope[i + 1])
    if eleven_point:
        total = 0.0
        for r in (i / 10 for i in range(11)):
            candidates = [p for p, rec in zip(envelope, curve.recalls) if rec >= r]
            total += max(candidates) if candidates else 0.0
        return total / 11.0
    area = 0.0
    prev_recall = 0.0
    for recall, precision in zip(curve.recalls, envelope):
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def ap_range(
    detections: list[Detection], ground_truths: list[GroundTruth]
) -> tuple[float, float, float]:
    """(mean AP over IoU 0.50:0.05:0.95, AP at 0.50, AP at 0.75)."""
    aps = {
        t: average_precision(pr_curve(detections, ground_truths, t)) for t in AP_THRESHOLDS
    }
    return sum(aps.values()) / len(aps), aps[0.5], aps[0.75]


def size_stratified_ap(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    t: float,
    small_max: float = DEFAULT_SMALL_MAX,
    medium_max: float = DEFAULT_MEDIUM_MAX,
) -> dict[SizeClass, float | None]:
    """AP restricted to each ground-truth size class.

    Detections that matched out-of-class ground truths in the unrestricted
    matching are removed from the class's pool rather than counted as false
    positives; classes with no ground truth report None.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError(f"IoU threshold must lie in (0, 1], got {t}")
    claimed = _greedy_claims(detections, ground_truths, t)
    gt_classes = [area_class(gt.box, small_max, medium_max) for gt in ground_truths]
    report: dict[SizeClass, float | None] = {}
    for cls in SizeClass:
        class_gts = [gt for gt, c in zip(ground_truths, gt_classes) if c is cls]
        if not class_gts:
            report[cls] = None
            continue
        kept = [
            det
            for di, det in enumerate(detections)
            if di not in claimed or gt_classes[claimed[di]] is cls
        ]
        report[cls] = average_precision(pr_curve(kept, class_gts, t))
    return report


def classification_scores(result: MatchResult) -> tuple[float, float, float, float]:
    """(precision, recall, F1, accuracy) with 0/0 ratios reported as 0."""

    def ratio(num: float, den: float) -> float:
        return num / den if den > 0 else 0.0

    precision = ratio(result.tp, result.tp + result.fp)
    recall = ratio(result.tp, result.tp + result.fn)
    f1 = ratio(2.0 * precision * recall, precision + recall)
    accuracy = ratio(result.tp, result.tp + result.fp + result.fn)
    return precision, recall, f1, accuracy


def mr_fppi_curve(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    t: float,
    per_image: bool = False,
) -> tuple[tuple[float, float], ...]:
    """(fppi, mr) at every rank; mr = 1 - recall, fppi = 1 - precision.

    With per_image=True the false-positive count is divided by the number
    of annotated images instead (the conventional per-image rate).
    """
    curve = pr_curve(detections, ground_truths, t)
    if not per_image:
        return tuple(
            (1.0 - p, 1.0 - r) for p, r in zip(curve.precisions, curve.recalls)
        )
    result = match(detections, ground_truths, t)
    num_images = max(len({gt.image_id for gt in ground_truths}), 1)
    points = []
    tp = 0
    for rank, is_tp in enumerate(result.tp_flags, start=1):
        tp += is_tp
        points.append(((rank - tp) / num_images, 1.0 - curve.recalls[rank - 1]))
    return tuple(points)


def lamr(curve: tuple[tuple[float, float], ...]) -> float:
    """Geometric mean of miss rates at nine log-spaced FPPI reference points.

    For each reference f the point with the largest fppi <= f is used (the
    latest such point when tied); if every point exceeds f, the point with
    the smallest fppi stands in. Miss rates are floored at 1e-10 before the
    log to keep a perfect detector finite.
    """
    if not curve:
        raise ValueError("cannot summarize an empty MR/FPPI curve")
    log_sum = 0.0
    for f in LAMR_REFERENCE_POINTS:
        candidates = [(fppi, rank) for rank, (fppi, _) in enumerate(curve) if fppi <= f]
        if candidates:
            _, rank = max(candidates)
        else:
            smallest = min(fppi for fppi, _ in curve)
            rank = max(r for r, (fppi, _) in enumerate(curve) if fppi == smallest)
        mr = curve[rank][1]
        log_sum += math.log(max(mr, MISS_RATE_FLOOR))
    return math.exp(log_sum / len(LAMR_REFERENCE_POINTS))


def evaluate(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    config: EvalConfig = EvalConfig(),
) -> EvalReport:
    """Assemble the full report at the configured IoU threshold.

    Precision/recall/F1/accuracy are taken over detections scoring at least
    config.score_min; AP and the curves sweep all detections. An all-miss
    detector (no detections at all) reports LAMR 1.
    """
    if not ground_truths and not detections:
        raise ValueError("nothing to evaluate: no detections and no ground truth")
    if not ground_truths:
        raise ValueError("cannot evaluate without ground truth")

    t = config.iou_threshold
    ap, ap50, ap75 = ap_range(detections, ground_truths)
    if config.eleven_point_ap:
        ap = sum(
            average_precision(pr_curve(detections, ground_truths, th), eleven_point=True)
            for th in AP_THRESHOLDS
        ) / len(AP_THRESHOLDS)
        ap50 = average_precision(pr_curve(detections, ground_truths, 0.5), eleven_point=True)
        ap75 = average_precision(pr_curve(detections, ground_truths, 0.75), eleven_point=True)

    by_size = size_stratified_ap(detections, ground_truths, 0.5, config.small_max, config.medium_max)
    operating = [d for d in detections if d.score >= config.score_min]
    precision, recall, f1, accuracy = classification_scores(
        match(operating, ground_truths, t)
    )
    curve = mr_fppi_curve(detections, ground_truths, t, per_image=config.fppi_per_image)
    return EvalReport(
        ap=ap,
        ap50=ap50,
        ap75=ap75,
        ap50_small=by_size[SizeClass.SMALL],
        ap50_medium=by_size[SizeClass.MEDIUM],
        ap50_large=by_size[SizeClass.LARGE],
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        lamr=lamr(curve) if curve else 1.0,
        pr_curve=pr_curve(detections, ground_truths, t),
        mr_fppi_curve=curve,
    )
