"""Training-loop primitives: cosine schedule, augmentation gate, Huber loss,
affine augmentation with original-pixel fill, and the hard-example trigger.

Everything is a pure function of its inputs; random draws go through an
explicit numpy Generator so callers control reproducibility (SeedSequence
spawning gives parallel batches independent, reproducible streams).
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .boxes import Box
from .raster import Image

MINING_WINDOW = 5
DEFAULT_ZETA = 0.7
BOX_KEEP_FRACTION = 0.25


@dataclass(frozen=True)
class CosineSchedule:
    """Half-cosine decay from eta_max at t=0 to eta_min at t=T."""

    eta_min: float
    eta_max: float
    total_iterations: int

    def __post_init__(self) -> None:
        if self.eta_min > self.eta_max:
            raise ValueError(f"eta_min {self.eta_min} exceeds eta_max {self.eta_max}")
        if self.total_iterations < 1:
            raise ValueError(f"total_iterations must be >= 1, got {self.total_iterations}")


def lr_at(schedule: CosineSchedule, t: float) -> float:
    """Learning rate at iteration t of the single cosine cycle."""
    if not 0 <= t <= schedule.total_iterations:
        raise ValueError(f"iteration {t} outside [0, {schedule.total_iterations}]")
    span = schedule.eta_max - schedule.eta_min
    return schedule.eta_min + 0.5 * span * (1.0 + math.cos(math.pi * t / schedule.total_iterations))


def gamma_at(total_iterations: int, t: float) -> float:
    """The augmentation-gate signal: the cosine cycle with bounds [0, 1]."""
    return lr_at(CosineSchedule(0.0, 1.0, total_iterations), t)


@dataclass(frozen=True)
class AugmentationPolicy:
    """Ranges for the random augmentation draws.

    Rotation is only enabled in the transfer-learning profile; the detection
    profile augments with scaling and reflections and reserves saturation
    shifts for hard batches.
    """

    zeta: float = DEFAULT_ZETA
    saturation_range: tuple[float, float] = (-0.5, 0.5)
    scale_x_range: tuple[float, float] = (0.5, 1.5)
    scale_y_range: tuple[float, float] = (0.5, 1.5)
    reflect_x_enabled: bool = True
    reflect_y_enabled: bool = True
    rotation_range: tuple[float, float] = (-180.0, 180.0)
    rotation_enabled: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.zeta <= 1.0:
            raise ValueError(f"zeta must lie in [0, 1], got {self.zeta}")
        for name in ("saturation_range", "scale_x_range", "scale_y_range", "rotation_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} is not well-ordered: ({lo}, {hi})")


@dataclass(frozen=True)
class AffineParams:
    scale_x: float
    scale_y: float
    reflect_x: bool = False
    reflect_y: bool = False
    rotation_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.scale_x <= 0 or self.scale_y <= 0:
            raise ValueError("scale factors must be positive")

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls(scale_x=1.0, scale_y=1.0)


class DecisionKind(enum.Enum):
    PASS_THROUGH = "PassThrough"
    AUGMENT = "Augment"
    HARD_COLOR = "HardColor"


@dataclass(frozen=True)
class BatchDecision:
    """What to do with one mini-batch; payload matches the kind."""

    kind: DecisionKind
    affine: AffineParams | None = None
    saturation_delta: float | None = None

    def __post_init__(self) -> None:
        if (self.kind is DecisionKind.AUGMENT) != (self.affine is not None):
            raise ValueError("affine payload must accompany exactly the Augment kind")
        if (self.kind is DecisionKind.HARD_COLOR) != (self.saturation_delta is not None):
            raise ValueError("saturation payload must accompany exactly the HardColor kind")


def draw_affine_params(policy: AugmentationPolicy, rng: np.random.Generator) -> AffineParams:
    """Sample affine parameters uniformly within the policy ranges."""
    return AffineParams(
        scale_x=float(rng.uniform(*policy.scale_x_range)),
        scale_y=float(rng.uniform(*policy.scale_y_range)),
        reflect_x=bool(policy.reflect_x_enabled and rng.integers(0, 2)),
        reflect_y=bool(policy.reflect_y_enabled and rng.integers(0, 2)),
        rotation_deg=float(rng.uniform(*policy.rotation_range))
        if policy.rotation_enabled
        else 0.0,
    )


def augment_decide(
    gamma_t: float,
    hard: bool,
    u: float,
    policy: AugmentationPolicy,
    rng: np.random.Generator,
) -> BatchDecision:
    """Gate one batch: hard batches get a color shift, normal batches are
    affine-augmented when zeta - gamma_t <= u, else passed through.

    Early in training (gamma near 1) the condition always holds, so
    augmentation is certain; late it fires with probability 1 - zeta.
    """
    if not 0.0 <= gamma_t <= 1.0:
        raise ValueError(f"gamma_t must lie in [0, 1], got {gamma_t}")
    if hard:
        delta = float(rng.uniform(*policy.saturation_range))
        return BatchDecision(kind=DecisionKind.HARD_COLOR, saturation_delta=delta)
    if policy.zeta - gamma_t <= u:
        return BatchDecision(kind=DecisionKind.AUGMENT, affine=draw_affine_params(policy, rng))
    return BatchDecision(kind=DecisionKind.PASS_THROUGH)


def _affine_matrix(params: AffineParams) -> np.ndarray:
    sx = params.scale_x * (-1.0 if params.reflect_x else 1.0)
    sy = params.scale_y * (-1.0 if params.reflect_y else 1.0)
    theta = math.radians(params.rotation_deg)
    rotation = np.array(
        [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
    )
    return rotation @ np.diag([sx, sy])


def apply_affine(
    image: Image, boxes: list[Box], params: AffineParams
) -> tuple[Image, list[Box]]:
    """Resample an image about its center and map its boxes the same way.

    Nearest-neighbor resampling on an unchanged canvas; output pixels whose
    source falls outside the input are filled from the original image at the
    same coordinates, so a downscale keeps the original border instead of
    black. Boxes become the axis-aligned hull of their transformed corners,
    clipped to the canvas; a box that keeps less than a quarter of its
    transformed area is dropped.
    """
    h, w = image.height, image.width
    matrix = _affine_matrix(params)
    inverse = np.linalg.inv(matrix)
    cx, cy = w / 2.0, h / 2.0

    # Pixel centers in continuous canvas coordinates.
    xs = np.arange(w) + 0.5
    ys = np.arange(h) + 0.5
    gx, gy = np.meshgrid(xs - cx, ys - cy)
    src_x = inverse[0, 0] * gx + inverse[0, 1] * gy + cx
    src_y = inverse[1, 0] * gx + inverse[1, 1] * gy + cy
    col = np.floor(src_x).astype(int)
    row = np.floor(src_y).astype(int)
    covered = (col >= 0) & (col < w) & (row >= 0) & (row < h)

    out = image.pixels.copy()
    out[covered] = image.pixels[row[covered], col[covered]]

    mapped: list[Box] = []
    for box in boxes:
        corners = np.array(
            [
                [box.x, box.y],
                [box.x + box.w, box.y],
                [box.x, box.y + box.h],
                [box.x + box.w, box.y + box.h],
            ]
        )
        moved = (corners - [cx, cy]) @ matrix.T + [cx, cy]
        x0, y0 = moved.min(axis=0)
        x1, y1 = moved.max(axis=0)
        hull_area = (x1 - x0) * (y1 - y0)
        cx0, cy0 = max(x0, 0.0), max(y0, 0.0)
        cx1, cy1 = min(x1, float(w)), min(y1, float(h))
        if cx1 <= cx0 or cy1 <= cy0:
            continue
        if (cx1 - cx0) * (cy1 - cy0) < BOX_KEEP_FRACTION * hull_area:
            continue
        mapped.append(Box(x=cx0, y=cy0, w=cx1 - cx0, h=cy1 - cy0))
    return Image(pixels=out), mapped


def _rgb_to_hsv(rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    value = rgb.max(axis=-1)
    chroma = value - rgb.min(axis=-1)
    sat = np.where(value > 0, chroma / np.where(value > 0, value, 1.0), 0.0)
    safe = np.where(chroma > 0, chroma, 1.0)
    hue = np.where(
        value == r,
        ((g - b) / safe) % 6.0,
        np.where(value == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    hue = np.where(chroma > 0, hue / 6.0, 0.0)
    return hue, sat, value


def _hsv_to_rgb(hue: np.ndarray, sat: np.ndarray, value: np.ndarray) -> np.ndarray:
    h6 = (hue % 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = value * (1.0 - sat)
    q = value * (1.0 - sat * f)
    t = value * (1.0 - sat * (1.0 - f))
    lookup = np.stack(
        [
            np.stack([value, t, p], axis=-1),
            np.stack([q, value, p], axis=-1),
            np.stack([p, value, t], axis=-1),
            np.stack([p, q, value], axis=-1),
            np.stack([t, p, value], axis=-1),
            np.stack([value, p, q], axis=-1),
        ],
        axis=0,
    )
    return np.take_along_axis(lookup, i[np.newaxis, ..., np.newaxis], axis=0)[0]


def adjust_saturation(image: Image, delta: float) -> Image:
    """Shift HSV saturation by delta (clamped to [0, 1]); hue and value keep.

    Exactly gray pixels have no defined hue, so they stay gray for any delta.
    """
    if image.channels != 3:
        raise ValueError("saturation adjustment requires a 3-channel image")
    hue, sat, value = _rgb_to_hsv(image.pixels)
    shifted = np.clip(sat + delta, 0.0, 1.0)
    rgb = _hsv_to_rgb(hue, shifted, value)
    gray = (sat == 0.0)[..., np.newaxis]
    out = np.where(gray, image.pixels, rgb)
    return Image(pixels=np.clip(out, 0.0, 1.0))


def huber(y: float, y_pred: float, delta: float = 1.0) -> float:
    """Quadratic below delta, linear above: 0.5 e^2 or delta |e| - 0.5 delta^2."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    e = abs(y - y_pred)
    if e <= delta:
        return 0.5 * e * e
    return delta * e - 0.5 * delta * delta


@dataclass(frozen=True)
class MiningState:
    """The last few loss values, oldest first."""

    losses: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.losses) > MINING_WINDOW:
            raise ValueError(f"window holds at most {MINING_WINDOW} losses")
        for value in self.losses:
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"losses must be finite and >= 0, got {value}")

    def push(self, loss: float) -> "MiningState":
        window = (self.losses + (loss,))[-MINING_WINDOW:]
        return MiningState(losses=window)


def mining_trigger(state: MiningState, loss: float) -> bool:
    """True when the current loss reaches mean + sample stdev of the window.

    Needs a full window of 5 losses; returns False during warm-up.
    """
    if len(state.losses) < MINING_WINDOW:
        return False
    window = np.asarray(state.losses)
    mu = window.mean()
    sigma = window.std(ddof=1)
    return bool(mu + sigma <= loss)


@dataclass(frozen=True)
class DecisionRecord:
    t: int
    loss: float
    gamma: float
    decision: BatchDecision


def simulate_decisions(
    losses: list[float],
    total_iterations: int | None = None,
    zeta: float = DEFAULT_ZETA,
    seed: int = 0,
    policy: AugmentationPolicy | None = None,
) -> list[DecisionRecord]:
    """Replay a loss sequence through the gate and the mining trigger.

    The trigger fires on the loss at iteration t and marks iteration t + 1
    hard, so a flagged batch is color-augmented one step later.
    """
    if not losses:
        raise ValueError("loss sequence is empty")
    if total_iterations is None:
        total_iterations = max(len(losses) - 1, 1)
    if total_iterations < len(losses) - 1:
        raise ValueError(
            f"total_iterations {total_iterations} shorter than the loss sequence"
        )
    if policy is None:
        policy = AugmentationPolicy(zeta=zeta)
    elif policy.zeta != zeta:
        policy = dataclasses.replace(policy, zeta=zeta)

    rng = np.random.default_rng(seed)
    state = MiningState()
    hard = False
    records: list[DecisionRecord] = []
    for t, loss in enumerate(losses):
        gamma = gamma_at(total_iterations, t)
        decision = augment_decide(gamma, hard, float(rng.uniform()), policy, rng)
        records.append(DecisionRecord(t=t, loss=loss, gamma=gamma, decision=decision))
        hard = mining_trigger(state, loss)
        state = state.push(loss)
    return records
