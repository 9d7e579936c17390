"""Ground-truth scene -> supervision targets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Tuple

import numpy as np

from .core import (
    NUM_TYPES,
    DomainError,
    FieldSet,
    KeypointType,
    Scene,
    cell_center,
    patch_cells,
)

# COCO per-part standard deviations, in part order.
COCO_SIGMAS = (
    0.026, 0.025, 0.025, 0.035, 0.035, 0.079, 0.079, 0.072, 0.072,
    0.062, 0.062, 0.107, 0.107, 0.087, 0.087, 0.089, 0.089,
)


def default_kappa_scale() -> Dict[KeypointType, float]:
    kappa = {KeypointType(i): s for i, s in enumerate(COCO_SIGMAS)}
    kappa[KeypointType.BALL] = 0.25
    kappa[KeypointType.PLY] = 0.1
    return kappa


@dataclass(frozen=True)
class EncodeConfig:
    kappa_scale: Mapping[KeypointType, float] = field(default_factory=default_kappa_scale)
    min_sigma: float = 1.0

    def __post_init__(self):
        if self.min_sigma <= 0:
            raise DomainError("min_sigma must be > 0")
        missing = [k for k in KeypointType if k not in self.kappa_scale]
        if missing:
            raise DomainError(f"kappa_scale missing {missing}")
        if any(v <= 0 for v in self.kappa_scale.values()):
            raise DomainError("kappa_scale values must be > 0")


def encode_semantic(scene: Scene) -> np.ndarray:
    sem = np.zeros(scene.grid.num_pixels, dtype=np.float64)
    for mask, _ in scene.players:
        sem[mask.pixels] = 1.0
    return sem.reshape(scene.grid.shape)


def _owners(scene: Scene) -> np.ndarray:
    """Per-pixel index into ``scene.players`` (-1 for background); overlaps
    go to the smaller instance_id."""
    owner = np.full(scene.grid.num_pixels, -1, dtype=np.int64)
    order = sorted(range(len(scene.players)), key=lambda i: scene.players[i][0].instance_id)
    for i in order:
        px = scene.players[i][0].pixels
        free = px[owner[px] < 0]
        owner[free] = i
    return owner


def encode_offsets(scene: Scene) -> np.ndarray:
    g = scene.grid
    off = np.zeros((g.num_pixels, 2), dtype=np.float64)
    owner = _owners(scene)
    for i, (mask, _) in enumerate(scene.players):
        cx, cy = mask.centroid(g.width)
        px = np.flatnonzero(owner == i)
        off[px, 0] = cx - (px % g.width)
        off[px, 1] = cy - (px // g.width)
    return off.reshape(g.shape + (2,))


def keypoint_instances(scene: Scene) -> List[Tuple[KeypointType, float, float, float]]:
    """Every keypoint to encode as ``(type, x, y, instance_size)``.

    Body parts come from the skeletons, ``PLY`` from each mask centroid and
    ``BALL`` from the ball-mask centroid.
    """
    g = scene.grid
    out = []
    for mask, skel in scene.players:
        size = mask.bbox_size(g.width)
        for k in sorted(skel.keypoints):
            kp = skel.keypoints[k]
            out.append((k, kp.x, kp.y, size))
        cx, cy = mask.centroid(g.width)
        out.append((KeypointType.PLY, cx, cy, size))
    if scene.ball_mask is not None:
        bx, by = scene.ball_mask.centroid(g.width)
        out.append((KeypointType.BALL, bx, by, float(np.sqrt(len(scene.ball_mask)))))
    return out


def encode_keypoint_fields(scene: Scene, cfg: EncodeConfig = EncodeConfig()):
    """Low-resolution ``(conf, loc, sigma)`` targets for all 19 types.

    Each keypoint writes its 4x4 patch; where patches of the same type
    collide, the cell keeps the keypoint nearest its centre (first wins on
    exact ties).
    """
    g = scene.grid
    lo = (NUM_TYPES,) + g.low_shape
    conf = np.zeros(lo)
    loc = np.zeros(lo + (2,))
    sigma = np.zeros(lo)
    best = np.full(lo, np.inf)
    for k, x, y, size in keypoint_instances(scene):
        if not g.contains(x, y):
            raise DomainError(f"{k.label} keypoint ({x}, {y}) outside the grid")
        s = max(cfg.min_sigma, cfg.kappa_scale[k] * size)
        for u in patch_cells((x, y), g):
            cx, cy = cell_center(u, g)
            d2 = (x - cx) ** 2 + (y - cy) ** 2
            idx = (k, u[1], u[0])
            if d2 < best[idx]:
                best[idx] = d2
                conf[idx] = 1.0
                loc[idx] = (x - cx, y - cy)
                sigma[idx] = s
    return conf, loc, sigma


def encode(scene: Scene, cfg: EncodeConfig = EncodeConfig()) -> FieldSet:
    """Full target FieldSet; scale targets are 1 everywhere."""
    conf, loc, sigma = encode_keypoint_fields(scene, cfg)
    return FieldSet.from_linear(
        scene.grid,
        encode_semantic(scene),
        encode_offsets(scene),
        conf,
        loc,
        sigma,
        np.ones_like(conf),
    )
