"""Anchor-shape estimation by k-means under the 1 - IoU distance.

Cluster centroids are updated with the component-wise median of the member
extents, the robust convention for the IoU objective. Initialization samples
k distinct shapes without replacement, so runs are fully determined by
(shapes, k, seed, restarts).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boxes import Anchor, GroundTruth, read_ground_truth_csv

MAX_ITERATIONS = 300
DEFAULT_RESTARTS = 10
DEFAULT_K = 6


@dataclass(frozen=True)
class AnchorEstimate:
    """Result of one clustering run: anchors sorted by area ascending."""

    k: int
    anchors: tuple[Anchor, ...]
    mean_iou: float
    seed: int
    restarts: int

    def __post_init__(self) -> None:
        if len(self.anchors) != self.k:
            raise ValueError(f"estimate must hold k={self.k} anchors, got {len(self.anchors)}")
        if not 0.0 <= self.mean_iou <= 1.0:
            raise ValueError(f"mean_iou must lie in [0, 1], got {self.mean_iou}")


@dataclass(frozen=True)
class SweepResult:
    """(k, mean_iou) entries for a contiguous range of cluster counts."""

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        ks = [k for k, _ in self.entries]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("sweep entries must have strictly increasing k")


@dataclass(frozen=True)
class SeriesStats:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    skewness: float

    def __post_init__(self) -> None:
        order = (self.minimum, self.q1, self.median, self.q3, self.maximum)
        if any(b < a for a, b in zip(order, order[1:])):
            raise ValueError(f"quartiles out of order: {order}")


@dataclass(frozen=True)
class BoxStats:
    """Box-plot statistics of the shape set's areas and aspect ratios."""

    area: SeriesStats
    aspect_ratio: SeriesStats


def _shape_array(shapes) -> np.ndarray:
    arr = np.asarray(
        [(s.w, s.h) if hasattr(s, "w") else (s[0], s[1]) for s in shapes], dtype=float
    )
    if arr.size == 0:
        raise ValueError("shape set is empty")
    if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("shapes must have positive finite extents")
    return arr


def _iou_matrix(shapes: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """Pairwise co-centered IoU, shapes (N, 2) x anchors (K, 2) -> (N, K)."""
    inter = np.minimum(shapes[:, None, 0], anchors[None, :, 0]) * np.minimum(
        shapes[:, None, 1], anchors[None, :, 1]
    )
    areas = shapes[:, 0] * shapes[:, 1]
    anchor_areas = anchors[:, 0] * anchors[:, 1]
    return inter / (areas[:, None] + anchor_areas[None, :] - inter)


def mean_iou(shapes, anchors) -> float:
    """Average over shapes of the best co-centered IoU over the anchors."""
    shape_arr = _shape_array(shapes)
    anchor_arr = _shape_array(anchors)
    return float(_iou_matrix(shape_arr, anchor_arr).max(axis=1).mean())


def _lloyd_run(shapes: np.ndarray, distinct: np.ndarray, k: int, rng: np.random.Generator):
    anchors = distinct[rng.choice(len(distinct), size=k, replace=False)].copy()
    assignment = np.full(len(shapes), -1)
    for _ in range(MAX_ITERATIONS):
        best = _iou_matrix(shapes, anchors).argmax(axis=1)
        if np.array_equal(best, assignment):
            break
        assignment = best
        for j in range(k):
            members = shapes[assignment == j]
            if len(members):
                anchors[j] = np.median(members, axis=0)
            else:
                # Re-seed a starved cluster from the worst-covered shape.
                worst = _iou_matrix(shapes, anchors).max(axis=1).argmin()
                anchors[j] = shapes[worst]
    score = float(_iou_matrix(shapes, anchors).max(axis=1).mean())
    return anchors, score


def kmeans_iou(shapes, k: int, seed: int = 0, restarts: int = DEFAULT_RESTARTS) -> AnchorEstimate:
    """Best-of-restarts Lloyd clustering under distance 1 - shape IoU.

    Restarts draw their initializations from one seeded stream in order, and
    ties in the final score keep the earlier restart, so identical inputs
    reproduce identical estimates.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    shape_arr = _shape_array(shapes)
    distinct = np.unique(shape_arr, axis=0)
    if k > len(distinct):
        raise ValueError(f"k={k} exceeds the {len(distinct)} distinct shapes")

    rng = np.random.default_rng(seed)
    best_anchors, best_score = None, -1.0
    for _ in range(restarts):
        anchors, score = _lloyd_run(shape_arr, distinct, k, rng)
        if score > best_score:
            best_anchors, best_score = anchors, score

    ordered = sorted(
        (Anchor(w=float(w), h=float(h)) for w, h in best_anchors),
        key=lambda a: (a.area, a.w),
    )
    return AnchorEstimate(
        k=k, anchors=tuple(ordered), mean_iou=best_score, seed=seed, restarts=restarts
    )


def sweep(
    shapes, k_min: int, k_max: int, seed: int = 0, restarts: int = DEFAULT_RESTARTS
) -> SweepResult:
    """Run kmeans_iou for every k in [k_min, k_max]."""
    if not 1 <= k_min <= k_max:
        raise ValueError(f"need 1 <= k_min <= k_max, got [{k_min}, {k_max}]")
    entries = tuple(
        (k, kmeans_iou(shapes, k, seed=seed, restarts=restarts).mean_iou)
        for k in range(k_min, k_max + 1)
    )
    return SweepResult(entries=entries)


def _series_stats(values: np.ndarray) -> SeriesStats:
    qs = np.quantile(values, [0.0, 0.25, 0.5, 0.75, 1.0])
    centered = values - values.mean()
    m2 = float(np.mean(centered**2))
    # Fisher-Pearson g1 from sample moments; zero variance reports 0.
    skew = float(np.mean(centered**3) / m2**1.5) if m2 > 0.0 else 0.0
    return SeriesStats(
        minimum=float(qs[0]),
        q1=float(qs[1]),
        median=float(qs[2]),
        q3=float(qs[3]),
        maximum=float(qs[4]),
        skewness=skew,
    )


def box_stats(shapes) -> BoxStats:
    """Box-plot quartiles (linear interpolation) and skewness per series."""
    arr = _shape_array(shapes)
    return BoxStats(
        area=_series_stats(arr[:, 0] * arr[:, 1]),
        aspect_ratio=_series_stats(arr[:, 0] / arr[:, 1]),
    )


def shapes_from_ground_truth(records: list[GroundTruth]) -> list[tuple[float, float]]:
    """Extract the (w, h) extent pairs of annotation records."""
    return [(r.box.w, r.box.h) for r in records]


def load_synthetic_shapes() -> list[tuple[float, float]]:
    """The bundled 500-shape synthetic set (three log-normal clusters)."""
    resource = importlib.resources.files("sheardet.data") / "synthetic_shapes.csv"
    with importlib.resources.as_file(resource) as path:
        return shapes_from_ground_truth(read_ground_truth_csv(Path(path)))
