"""Axis-aligned box geometry, IoU, size classes, and anchor-grid coding."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path

DEFAULT_SMALL_MAX = 32.0**2
DEFAULT_MEDIUM_MAX = 96.0**2

GT_CSV_HEADER = ["image_id", "x", "y", "w", "h", "class"]
DET_CSV_HEADER = ["image_id", "x", "y", "w", "h", "score", "class"]


class CsvFormatError(ValueError):
    """Raised for malformed annotation CSV files; carries the line number."""

    def __init__(self, path: str | Path, line: int, message: str) -> None:
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Box:
    """Top-left corner plus extents, in continuous pixel coordinates."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"box {name} must be finite")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class Detection:
    image_id: str
    box: Box
    score: float
    class_id: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    box: Box
    class_id: int = 0


@dataclass(frozen=True)
class Anchor:
    """A prior box shape: extents only."""

    w: float
    h: float

    def __post_init__(self) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"anchor extents must be positive, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h


@dataclass(frozen=True)
class GridSpec:
    """A detection grid: cell counts, pixel stride, and prior shapes."""

    grid_w: int
    grid_h: int
    stride: float
    anchors: tuple[Anchor, ...]

    def __post_init__(self) -> None:
        if self.grid_w < 1 or self.grid_h < 1:
            raise ValueError("grid dimensions must be positive")
        if self.stride <= 0:
            raise ValueError(f"stride must be positive, got {self.stride}")
        if len(self.anchors) < 1:
            raise ValueError("grid needs at least one anchor")


class SizeClass(enum.Enum):
    SMALL = "small"
    MEDIUM = "medium"
    LARGE = "large"


def iou(a: Box, b: Box) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def shape_iou(a: Anchor | Box, b: Anchor | Box) -> float:
    """IoU of two shapes placed with coincident centers; extents only."""
    inter = min(a.w, b.w) * min(a.h, b.h)
    return inter / (a.w * a.h + b.w * b.h - inter)


def encode(
    box: Box, grid: GridSpec, anchor_index: int
) -> tuple[int, int, float, float, float, float]:
    """Parameterize a box against a grid cell and one anchor.

    Returns (cell_x, cell_y, tx, ty, tw, th) with tx, ty in [0, 1) the
    center offsets inside the cell and tw, th the log-ratios of the box
    extents to the anchor extents.
    """
    if not 0 <= anchor_index < len(grid.anchors):
        raise ValueError(f"anchor index {anchor_index} outside grid anchors")
    cx, cy = box.center
    gx = cx / grid.stride
    gy = cy / grid.stride
    if not (0.0 <= gx < grid.grid_w and 0.0 <= gy < grid.grid_h):
        raise ValueError(f"box center ({cx}, {cy}) outside grid extent")
    cell_x = int(math.floor(gx))
    cell_y = int(math.floor(gy))
    anchor = grid.anchors[anchor_index]
    return (
        cell_x,
        cell_y,
        gx - cell_x,
        gy - cell_y,
        math.log(box.w / anchor.w),
        math.log(box.h / anchor.h),
    )


def decode(
    cell_x: int,
    cell_y: int,
    tx: float,
    ty: float,
    tw: float,
    th: float,
    grid: GridSpec,
    anchor_index: int,
) -> Box:
    """Exact inverse of :func:`encode`."""
    if not 0 <= anchor_index < len(grid.anchors):
        raise ValueError(f"anchor index {anchor_index} outside grid anchors")
    if not (0 <= cell_x < grid.grid_w and 0 <= cell_y < grid.grid_h):
        raise ValueError(f"cell ({cell_x}, {cell_y}) outside grid")
    anchor = grid.anchors[anchor_index]
    w = anchor.w * math.exp(tw)
    h = anchor.h * math.exp(th)
    cx = (cell_x + tx) * grid.stride
    cy = (cell_y + ty) * grid.stride
    return Box(x=cx - w / 2.0, y=cy - h / 2.0, w=w, h=h)


def area_class(
    box: Box, small_max: float = DEFAULT_SMALL_MAX, medium_max: float = DEFAULT_MEDIUM_MAX
) -> SizeClass:
    """Small / medium / large by area; boundaries go to the larger class."""
    area = box.area
    if area < small_max:
        return SizeClass.SMALL
    if area < medium_max:
        return SizeClass.MEDIUM
    return SizeClass.LARGE


def _parse_row(
    path: str | Path, line: int, row: list[str], with_score: bool
) -> GroundTruth | Detection:
    expected = 7 if with_score else 6
    if len(row) != expected:
        raise CsvFormatError(path, line, f"expected {expected} fields, got {len(row)}")
    try:
        box = Box(x=float(row[1]), y=float(row[2]), w=float(row[3]), h=float(row[4]))
        if with_score:
            return Detection(
                image_id=row[0], box=box, score=float(row[5]), class_id=int(row[6])
            )
        return GroundTruth(image_id=row[0], box=box, class_id=int(row[5]))
    except ValueError as exc:
        raise CsvFormatError(path, line, str(exc)) from exc


def _read_rows(path: str | Path, header: list[str]) -> list[tuple[int, list[str]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CsvFormatError(path, 0, f"not UTF-8 text ({exc})") from exc
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise CsvFormatError(path, 1, "empty file")
    if [c.strip() for c in rows[0]] != header:
        raise CsvFormatError(path, 1, f"expected header {','.join(header)}")
    return [(i + 2, row) for i, row in enumerate(rows[1:]) if row]


def read_ground_truth_csv(path: str | Path) -> list[GroundTruth]:
    """Read `image_id,x,y,w,h,class` records."""
    return [
        _parse_row(path, line, row, with_score=False)
        for line, row in _read_rows(path, GT_CSV_HEADER)
    ]


def read_detections_csv(path: str | Path) -> list[Detection]:
    """Read `image_id,x,y,w,h,score,class` records."""
    return [
        _parse_row(path, line, row, with_score=True)
        for line, row in _read_rows(path, DET_CSV_HEADER)
    ]


def write_ground_truth_csv(records: list[GroundTruth], path: str | Path) -> None:
    lines = [",".join(GT_CSV_HEADER)]
    for r in records:
        lines.append(
            f"{r.image_id},{r.box.x!r},{r.box.y!r},{r.box.w!r},{r.box.h!r},{r.class_id}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_detections_csv(records: list[Detection], path: str | Path) -> None:
    lines = [",".join(DET_CSV_HEADER)]
    for r in records:
        lines.append(
            f"{r.image_id},{r.box.x!r},{r.box.y!r},{r.box.w!r},{r.box.h!r},"
            f"{r.score!r},{r.class_id}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
