"""Seeded synthetic scenes: elliptical players with four-part poses and an
optional disc-shaped ball."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..core import PosePart, DomainError, GridSpec, InstanceMask, Keypoint, Scene
from ..metrics import PoseSkeleton, lift_skeleton


class InfeasibleError(DomainError):
    """The requested scene could not be packed into the grid."""


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_players: int = 3
    player_size_range: Tuple[float, float] = (28.0, 48.0)  # ellipse height in pixels
    ball: bool = True
    min_separation: float = 24.0  # gap between player boxes, pixels
    width: int = 320
    height: int = 320
    stride: int = 8
    max_tries: int = 2000


def _ellipse(cx, cy, a, b, grid: GridSpec) -> InstanceMask:
    xs = np.arange(max(0, math.floor(cx - a)), min(grid.width, math.ceil(cx + a) + 1))
    ys = np.arange(max(0, math.floor(cy - b)), min(grid.height, math.ceil(cy + b) + 1))
    gx, gy = np.meshgrid(xs, ys)
    inside = ((gx - cx) / a) ** 2 + ((gy - cy) / b) ** 2 <= 1.0
    return InstanceMask.from_coords(gx[inside], gy[inside], grid.width)


def _box_gap(p, q) -> float:
    dx = max(0.0, max(p[0], q[0]) - min(p[2], q[2]))
    dy = max(0.0, max(p[1], q[1]) - min(p[3], q[3]))
    return math.hypot(dx, dy)


def _pose(cx, cy, a, b) -> PoseSkeleton:
    return PoseSkeleton(
        head=Keypoint(PosePart.HEAD, cx, cy - 0.65 * b),
        hip=Keypoint(PosePart.HIP, cx, cy + 0.05 * b),
        foot1=Keypoint(PosePart.FOOT1, cx - 0.3 * a, cy + 0.75 * b),
        foot2=Keypoint(PosePart.FOOT2, cx + 0.3 * a, cy + 0.75 * b),
    )


def synth_scene(cfg: SynthConfig = SynthConfig()) -> Scene:
    """Random scene, identical for identical configs.

    Player boxes keep at least ``min_separation`` pixels apart and stay
    3 px inside the image. Raises :class:`InfeasibleError` when placement
    fails ``max_tries`` times in a row.
    """
    grid = GridSpec(cfg.width, cfg.height, cfg.stride)
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.player_size_range
    margin = 3.0
    boxes: List[Tuple[float, float, float, float]] = []
    players = []
    for pid in range(cfg.n_players):
        for _ in range(cfg.max_tries):
            b = rng.uniform(lo, hi) / 2.0
            a = b * rng.uniform(0.35, 0.5)
            if 2 * (a + margin) >= grid.width or 2 * (b + margin) >= grid.height:
                continue
            cx = rng.uniform(a + margin, grid.width - a - margin)
            cy = rng.uniform(b + margin, grid.height - b - margin)
            box = (cx - a, cy - b, cx + a, cy + b)
            if any(_box_gap(box, o) < cfg.min_separation for o in boxes):
                continue
            mask = InstanceMask(_ellipse(cx, cy, a, b, grid).pixels, pid)
            skel = lift_skeleton(_pose(cx, cy, a, b), pid, spread=0.2 * a)
            if all(mask.contains(kp.x, kp.y, grid.width) for kp in skel.keypoints.values()):
                break
        else:
            raise InfeasibleError(f"could not place player {pid} after {cfg.max_tries} tries")
        boxes.append(box)
        players.append((mask, skel))

    ball_mask = None
    if cfg.ball:
        for _ in range(cfg.max_tries):
            r = rng.uniform(3.0, 6.0)
            if 2 * (r + margin) >= min(grid.width, grid.height):
                continue
            bx = rng.uniform(r + margin, grid.width - r - margin)
            by = rng.uniform(r + margin, grid.height - r - margin)
            box = (bx - r, by - r, bx + r, by + r)
            if all(_box_gap(box, o) >= 2.0 for o in boxes):
                ball_mask = InstanceMask(_ellipse(bx, by, r, r, grid).pixels, -1)
                break
        else:
            raise InfeasibleError("could not place the ball")

    w, h = grid.width - 1, grid.height - 1
    court = ((0.0, 0.0), (float(w), 0.0), (float(w), float(h)), (0.0, float(h)))
    return Scene(grid, ball_mask, players, court)
