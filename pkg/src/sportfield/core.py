"""Domain types and the low/high resolution grid geometry.

Coordinates are ``(x, y)`` with the origin at the top-left corner. A
high-resolution pixel with integer index ``(x, y)`` is evaluated at the
point ``(x, y)``; low-resolution cell ``u`` is centred at
``(u + 0.5) * stride``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


class KeypointType(enum.IntEnum):
    NOSE = 0
    LEFT_EYE = 1
    RIGHT_EYE = 2
    LEFT_EAR = 3
    RIGHT_EAR = 4
    LEFT_SHOULDER = 5
    RIGHT_SHOULDER = 6
    LEFT_ELBOW = 7
    RIGHT_ELBOW = 8
    LEFT_WRIST = 9
    RIGHT_WRIST = 10
    LEFT_HIP = 11
    RIGHT_HIP = 12
    LEFT_KNEE = 13
    RIGHT_KNEE = 14
    LEFT_ANKLE = 15
    RIGHT_ANKLE = 16
    BALL = 17
    PLY = 18

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "KeypointType":
        try:
            return cls[label.upper()]
        except KeyError:
            raise DomainError(f"unknown keypoint type {label!r}") from None


NUM_TYPES = len(KeypointType)
BODY_PARTS: Tuple[KeypointType, ...] = tuple(KeypointType)[:17]


class PosePart(enum.IntEnum):
    """The four evaluation parts of the basketball annotation convention."""

    HEAD = 0
    HIP = 1
    FOOT1 = 2
    FOOT2 = 3

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class GridSpec:
    """High-resolution image size plus the low-resolution stride.

    The low-resolution grid has ``ceil(width / stride)`` columns, so sizes
    such as 641 with stride 8 (81 cells) are accepted.
    """

    width: int
    height: int
    stride: int = 8

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0 or self.stride <= 0:
            raise DomainError(f"invalid grid {self}")

    @property
    def low_width(self) -> int:
        return -(-self.width // self.stride)

    @property
    def low_height(self) -> int:
        return -(-self.height // self.stride)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @property
    def low_shape(self) -> Tuple[int, int]:
        return (self.low_height, self.low_width)

    @property
    def num_pixels(self) -> int:
        return self.width * self.height

    def contains(self, x: float, y: float) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height


def cell_center(u: Tuple[int, int], grid: GridSpec) -> Tuple[float, float]:
    """High-resolution position of the centre of low-resolution cell ``u``."""
    ux, uy = u
    if not (0 <= ux < grid.low_width and 0 <= uy < grid.low_height):
        raise DomainError(f"cell {u} outside {grid.low_width}x{grid.low_height} grid")
    return ((ux + 0.5) * grid.stride, (uy + 0.5) * grid.stride)


def patch_cells(p: Tuple[float, float], grid: GridSpec) -> List[Tuple[int, int]]:
    """The 4x4 block of cells around ``p``, clipped to the grid.

    Columns run from ``floor(x / stride) - 1`` to ``floor(x / stride) + 2``
    and rows likewise; cells are returned in row-major order.
    """
    x, y = p
    cx = math.floor(x / grid.stride)
    cy = math.floor(y / grid.stride)
    cols = [c for c in range(cx - 1, cx + 3) if 0 <= c < grid.low_width]
    rows = [r for r in range(cy - 1, cy + 3) if 0 <= r < grid.low_height]
    return [(c, r) for r in rows for c in cols]


def _frozen(a: np.ndarray) -> np.ndarray:
    # Own a private copy so later writes by the caller cannot leak in.
    a = np.array(a, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FieldSet:
    """All network outputs (or targets) for one image.

    Shapes: ``semantic`` (H, W), ``offsets`` (H, W, 2), ``conf`` (19, h, w),
    ``loc`` (19, h, w, 2), ``log_sigma`` and ``log_scale`` (19, h, w).
    Size and scale live in log space; :attr:`sigma` and :attr:`scale`
    exponentiate on read. Arrays keep the dtype they were built with.
    """

    grid: GridSpec
    semantic: np.ndarray
    offsets: np.ndarray
    conf: np.ndarray
    loc: np.ndarray
    log_sigma: np.ndarray
    log_scale: np.ndarray

    def __post_init__(self):
        g = self.grid
        hi, lo = g.shape, (NUM_TYPES,) + g.low_shape
        expected = {
            "semantic": hi,
            "offsets": hi + (2,),
            "conf": lo,
            "loc": lo + (2,),
            "log_sigma": lo,
            "log_scale": lo,
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name))
            if arr.dtype.kind != "f":
                arr = arr.astype(np.float64)
            if arr.shape != shape:
                raise DomainError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, _frozen(arr))
        sem, conf = self.semantic, self.conf
        if np.any((sem < 0) | (sem > 1)) or np.any((conf < 0) | (conf > 1)):
            raise DomainError("semantic and conf values must lie in [0, 1]")
        active = conf > 0
        with np.errstate(invalid="ignore"):
            if not np.all(np.isfinite(self.log_sigma[active])):
                raise DomainError("sigma must be > 0 wherever conf > 0")
            if not np.all(np.isfinite(self.log_scale[active])):
                raise DomainError("scale must be > 0 wherever conf > 0")

    @classmethod
    def from_linear(cls, grid: GridSpec, semantic, offsets, conf, loc, sigma, scale) -> "FieldSet":
        """Build from linear sigma/scale; non-positive entries map to ``-inf``."""
        sigma = np.asarray(sigma, dtype=float)
        scale = np.asarray(scale, dtype=float)
        conf = np.asarray(conf)
        if np.any((sigma <= 0) & (conf > 0)):
            raise DomainError("sigma must be > 0 wherever conf > 0")
        if np.any((scale <= 0) & (conf > 0)):
            raise DomainError("scale must be > 0 wherever conf > 0")
        with np.errstate(divide="ignore", invalid="ignore"):
            log_sigma = np.where(sigma > 0, np.log(np.where(sigma > 0, sigma, 1.0)), -np.inf)
            log_scale = np.where(scale > 0, np.log(np.where(scale > 0, scale, 1.0)), -np.inf)
        return cls(grid, semantic, offsets, conf, loc, log_sigma, log_scale)

    @classmethod
    def zeros(cls, grid: GridSpec, dtype=np.float64) -> "FieldSet":
        hi, lo = grid.shape, (NUM_TYPES,) + grid.low_shape
        return cls(
            grid,
            np.zeros(hi, dtype),
            np.zeros(hi + (2,), dtype),
            np.zeros(lo, dtype),
            np.zeros(lo + (2,), dtype),
            np.zeros(lo, dtype),
            np.zeros(lo, dtype),
        )

    @property
    def sigma(self) -> np.ndarray:
        return np.exp(self.log_sigma)

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def replace(self, **changes) -> "FieldSet":
        kwargs = {name: getattr(self, name) for name in TENSOR_NAMES}
        kwargs.update(changes)
        return FieldSet(self.grid, **kwargs)


TENSOR_NAMES = ("semantic", "offsets", "conf", "loc", "log_sigma", "log_scale")


PartType = Union[KeypointType, PosePart]


@dataclass(frozen=True)
class Keypoint:
    type: PartType
    x: float
    y: float
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise DomainError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def xy(self) -> Tuple[float, float]:
        return (self.x, self.y)

    def pixel(self) -> Tuple[int, int]:
        """Nearest integer pixel index."""
        return (math.floor(self.x + 0.5), math.floor(self.y + 0.5))


@dataclass(frozen=True, eq=False)
class InstanceMask:
    """A set of high-resolution pixels, stored as sorted unique flat indices
    (``y * width + x``)."""

    pixels: np.ndarray
    instance_id: int = 0

    def __post_init__(self):
        px = np.unique(np.asarray(self.pixels, dtype=np.int64))
        object.__setattr__(self, "pixels", _frozen(px))

    @classmethod
    def from_coords(cls, xs, ys, width: int, instance_id: int = 0) -> "InstanceMask":
        xs = np.asarray(xs, dtype=np.int64)
        ys = np.asarray(ys, dtype=np.int64)
        return cls(ys * width + xs, instance_id)

    def __len__(self) -> int:
        return int(self.pixels.size)

    def __eq__(self, other):
        if not isinstance(other, InstanceMask):
            return NotImplemented
        return self.instance_id == other.instance_id and np.array_equal(self.pixels, other.pixels)

    __hash__ = None

    def coords(self, width: int) -> Tuple[np.ndarray, np.ndarray]:
        return self.pixels % width, self.pixels // width

    def centroid(self, width: int) -> Tuple[float, float]:
        xs, ys = self.coords(width)
        return (float(xs.mean()), float(ys.mean()))

    def bbox_size(self, width: int) -> float:
        """Square root of the area of the tight pixel bounding box."""
        xs, ys = self.coords(width)
        w = int(xs.max() - xs.min()) + 1
        h = int(ys.max() - ys.min()) + 1
        return math.sqrt(w * h)

    def contains(self, x: float, y: float, width: int) -> bool:
        px = math.floor(x + 0.5)
        py = math.floor(y + 0.5)
        if px < 0 or py < 0 or px >= width:
            return False
        idx = py * width + px
        pos = np.searchsorted(self.pixels, idx)
        return bool(pos < self.pixels.size and self.pixels[pos] == idx)

    def check_in(self, grid: GridSpec) -> None:
        if self.pixels.size and (self.pixels[0] < 0 or self.pixels[-1] >= grid.num_pixels):
            raise DomainError(f"mask {self.instance_id} has pixels outside the grid")


@dataclass(frozen=True)
class Skeleton:
    """Typed body-part keypoints of one player.

    ``confidence`` defaults to the mean of the present part confidences
    (0 for an empty skeleton).
    """

    keypoints: Dict[KeypointType, Keypoint]
    instance_id: int = 0
    confidence: Optional[float] = None

    def __post_init__(self):
        for k, kp in self.keypoints.items():
            if k not in BODY_PARTS or kp.type != k:
                raise DomainError(f"skeleton entry {k!r} is not a body part keypoint of that type")
        if self.confidence is None:
            object.__setattr__(self, "confidence", mean_confidence(self.keypoints.values()))

    @classmethod
    def from_keypoints(cls, kps: Iterable[Keypoint], instance_id: int = 0) -> "Skeleton":
        return cls({kp.type: kp for kp in kps}, instance_id)

    def __len__(self) -> int:
        return len(self.keypoints)


def mean_confidence(kps: Iterable[Keypoint]) -> float:
    confs = [kp.confidence for kp in kps]
    return float(sum(confs) / len(confs)) if confs else 0.0


@dataclass(frozen=True)
class Scene:
    grid: GridSpec
    ball_mask: Optional[InstanceMask] = None
    players: Tuple[Tuple[InstanceMask, Skeleton], ...] = ()
    court: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "players", tuple(tuple(p) for p in self.players))
        if self.court is not None:
            object.__setattr__(self, "court", tuple((float(x), float(y)) for x, y in self.court))
        for mask, _ in self.players:
            if len(mask) == 0:
                raise DomainError(f"player mask {mask.instance_id} is empty")
            mask.check_in(self.grid)
        if self.ball_mask is not None:
            if len(self.ball_mask) == 0:
                raise DomainError("ball mask is empty")
            self.ball_mask.check_in(self.grid)

    @property
    def masks(self) -> List[InstanceMask]:
        return [m for m, _ in self.players]

    @property
    def skeletons(self) -> List[Skeleton]:
        return [s for _, s in self.players]
