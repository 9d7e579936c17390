"""Field decoding: fused confidence maps, ball, player masks and skeletons."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .core import (
    BODY_PARTS,
    NUM_TYPES,
    DomainError,
    FieldSet,
    GridSpec,
    InstanceMask,
    Keypoint,
    KeypointType,
    Skeleton,
)


@dataclass(frozen=True)
class DecodeConfig:
    keypoint_threshold: float = 0.1
    semantic_threshold: float = 0.5
    nms_radius: Optional[float] = None  # None means one stride
    gaussian_truncation: float = 3.0
    jobs: int = 1

    def __post_init__(self):
        if not 0 <= self.keypoint_threshold <= 1 or not 0 <= self.semantic_threshold <= 1:
            raise DomainError("thresholds must lie in [0, 1]")
        if self.nms_radius is not None and self.nms_radius <= 0:
            raise DomainError("nms_radius must be > 0")
        if not self.gaussian_truncation >= 1:
            raise DomainError("gaussian_truncation must be >= 1")

    def radius(self, grid: GridSpec) -> float:
        return float(grid.stride if self.nms_radius is None else self.nms_radius)


@dataclass(frozen=True)
class DecodeResult:
    ball: Optional[Keypoint]
    masks: Tuple[InstanceMask, ...]
    skeletons: Tuple[Skeleton, ...]
    centers: Tuple[Keypoint, ...]


def source_targets(conf, loc, grid: GridSpec):
    """Target points ``cell_center(u) + loc(u)`` for every cell of one type."""
    h, w = conf.shape
    ux = (np.arange(w) + 0.5) * grid.stride
    uy = (np.arange(h) + 0.5) * grid.stride
    tx = ux[None, :] + loc[..., 0]
    ty = uy[:, None] + loc[..., 1]
    return tx, ty


def fuse_highres(conf, loc, sigma, grid: GridSpec, truncation: float = 3.0, impl=None) -> np.ndarray:
    """High-resolution confidence map for one keypoint type.

    ``conf``, ``sigma`` are ``(h, w)`` and ``loc`` is ``(h, w, 2)``. Each
    cell adds an unnormalized Gaussian of height ``conf`` centred on its
    target point, truncated at ``truncation * sigma``. Pass
    ``truncation=math.inf`` for the exact sum.
    """
    conf = np.asarray(conf, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    active = conf > 0
    if np.any(~(sigma[active] > 0)):
        raise DomainError("sigma must be > 0 at every contributing cell")
    tx, ty = source_targets(conf, np.asarray(loc, dtype=np.float64), grid)
    if math.isinf(truncation):
        truncation = 1e6  # wider than any grid, so nothing is dropped
    return _kernels.fuse_sources(
        tx[active], ty[active], conf[active], sigma[active], grid.width, grid.height, truncation, impl=impl
    )


def fuse_all(fields: FieldSet, cfg: DecodeConfig = DecodeConfig()) -> np.ndarray:
    """``(19, H, W)`` fused maps; types run on a thread pool when ``cfg.jobs > 1``."""
    sigma = fields.sigma

    def one(k):
        return fuse_highres(fields.conf[k], fields.loc[k], sigma[k], fields.grid, cfg.gaussian_truncation)

    if cfg.jobs > 1:
        with ThreadPoolExecutor(cfg.jobs) as pool:
            maps = list(pool.map(one, range(NUM_TYPES)))
    else:
        maps = [one(k) for k in range(NUM_TYPES)]
    return np.stack(maps)


def refine_peak(m: np.ndarray, ix: int, iy: int) -> Tuple[float, float]:
    """Sub-pixel peak position from a parabola fit to the log of the 3-point
    row and column through ``(ix, iy)``.

    Exact for an isotropic Gaussian; an axis is left unrefined at the image
    border or where a neighbour is zero.
    """
    h, w = m.shape

    def axis(l, c, r):
        if l <= 0 or c <= 0 or r <= 0:
            return 0.0
        ll, lc, lr = math.log(l), math.log(c), math.log(r)
        curv = ll - 2.0 * lc + lr
        if curv >= 0:
            return 0.0
        return min(0.5, max(-0.5, 0.5 * (ll - lr) / curv))

    x, y = float(ix), float(iy)
    if 0 < ix < w - 1:
        x += axis(m[iy, ix - 1], m[iy, ix], m[iy, ix + 1])
    if 0 < iy < h - 1:
        y += axis(m[iy - 1, ix], m[iy, ix], m[iy + 1, ix])
    return x, y


def _keypoint(k, m, ix, iy) -> Keypoint:
    x, y = refine_peak(m, ix, iy)
    # Fused maps are unnormalized; confidences are clipped into [0, 1].
    return Keypoint(k, x, y, min(1.0, float(m[iy, ix])))


def detect_ball(ball_map: np.ndarray) -> Keypoint:
    """Top-1 detection: the global maximum, first in row-major order on ties."""
    flat = int(np.argmax(ball_map))
    iy, ix = divmod(flat, ball_map.shape[1])
    return _keypoint(KeypointType.BALL, ball_map, ix, iy)


def local_maxima(m: np.ndarray, threshold: float) -> np.ndarray:
    """Flat indices of pixels >= threshold and >= all 8 neighbours."""
    padded = np.pad(m, 1, mode="constant", constant_values=-np.inf)
    h, w = m.shape
    is_max = m >= threshold
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx or dy:
                is_max &= m >= padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
    return np.flatnonzero(is_max)


def detect_centers(ply_map: np.ndarray, cfg: DecodeConfig = DecodeConfig(), radius: float = 8.0) -> List[Keypoint]:
    """Greedy radius NMS over the local maxima of the centre map.

    Candidates are visited by descending value, then row-major order; each
    kept peak suppresses every candidate within ``radius`` pixels.
    """
    w = ply_map.shape[1]
    cand = local_maxima(ply_map, cfg.keypoint_threshold)
    if cand.size == 0:
        return []
    vals = ply_map.ravel()[cand]
    order = np.lexsort((cand, -vals))
    kept: List[Tuple[int, int]] = []
    r2 = radius * radius
    for flat in cand[order]:
        iy, ix = divmod(int(flat), w)
        if any((ix - kx) ** 2 + (iy - ky) ** 2 <= r2 for kx, ky in kept):
            continue
        kept.append((ix, iy))
    return [_keypoint(KeypointType.PLY, ply_map, ix, iy) for ix, iy in kept]


def group_instances(
    semantic: np.ndarray,
    offsets: np.ndarray,
    centers: Sequence[Keypoint],
    cfg: DecodeConfig = DecodeConfig(),
) -> Tuple[List[InstanceMask], List[int]]:
    """Assign every foreground pixel to the centre nearest ``p + offset(p)``.

    Returns the non-empty masks and, for each, the index of its centre in
    ``centers``. Masks are numbered consecutively from 0.
    """
    h, w = semantic.shape
    fg = np.flatnonzero(np.asarray(semantic).ravel() >= cfg.semantic_threshold)
    if not centers or fg.size == 0:
        return [], []
    off = np.asarray(offsets, dtype=np.float64).reshape(-1, 2)[fg]
    ex = (fg % w) + off[:, 0]
    ey = (fg // w) + off[:, 1]
    cx = np.array([c.x for c in centers])
    cy = np.array([c.y for c in centers])
    owner = _kernels.assign_nearest(ex, ey, cx, cy)
    order = np.argsort(owner, kind="stable")
    bounds = np.searchsorted(owner[order], np.arange(len(centers) + 1))
    masks, kept = [], []
    for j in range(len(centers)):
        px = fg[order[bounds[j]:bounds[j + 1]]]
        if px.size:
            masks.append(InstanceMask(px, len(masks)))
            kept.append(j)
    return masks, kept


def assemble_skeletons(
    part_maps: np.ndarray,
    masks: Sequence[InstanceMask],
    cfg: DecodeConfig = DecodeConfig(),
) -> List[Skeleton]:
    """One skeleton per mask from the in-mask maximum of each body-part map.

    ``part_maps`` is indexed by keypoint type (at least the 17 body parts).
    """
    w = part_maps.shape[2]
    skeletons = []
    for mask in masks:
        kps = {}
        for k in BODY_PARTS:
            m = part_maps[k]
            vals = m.ravel()[mask.pixels]
            best = int(np.argmax(vals))
            if vals[best] < cfg.keypoint_threshold:
                continue
            iy, ix = divmod(int(mask.pixels[best]), w)
            kp = _keypoint(k, m, ix, iy)
            if not mask.contains(kp.x, kp.y, w):
                kp = Keypoint(k, float(ix), float(iy), kp.confidence)
            kps[k] = kp
        skeletons.append(Skeleton(kps, mask.instance_id))
    return skeletons


def decode(fields: FieldSet, cfg: DecodeConfig = DecodeConfig()) -> DecodeResult:
    maps = fuse_all(fields, cfg)
    ball = detect_ball(maps[KeypointType.BALL])
    centers = detect_centers(maps[KeypointType.PLY], cfg, cfg.radius(fields.grid))
    masks, kept = group_instances(fields.semantic, fields.offsets, centers, cfg)
    skeletons = assemble_skeletons(maps, masks, cfg)
    return DecodeResult(ball, tuple(masks), tuple(skeletons), tuple(centers[j] for j in kept))
