"""JSON scene documents (ground truth and decoded results).

Masks are run-length encoded as ``[[start, length], ...]`` over row-major
flat pixel indices, runs strictly increasing and non-overlapping.
Keypoint ``type`` is a COCO part label (``left_ear`` ...) or one of the
four-part labels ``head``, ``hip``, ``foot1``, ``foot2``; four-part
annotations are stored as coincident left/right COCO pairs so that
conversion gives them back unchanged.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import jsonschema
import numpy as np

from ..core import (
    BODY_PARTS,
    PosePart,
    DomainError,
    GridSpec,
    InstanceMask,
    Keypoint,
    KeypointType,
    Scene,
    Skeleton,
)
from ..decode import DecodeResult
from ..metrics import PoseSkeleton, lift_skeleton

FORMAT = "sportfield-scene"
VERSION = 1


class SchemaError(DomainError):
    """Scene document that fails validation."""


_POINT = {
    "type": "object",
    "required": ["x", "y"],
    "properties": {
        "x": {"type": "number"},
        "y": {"type": "number"},
        "confidence": {"type": "number", "minimum": 0, "maximum": 1},
    },
}
_RLE = {
    "type": "array",
    "items": {
        "type": "array",
        "items": {"type": "integer", "minimum": 0},
        "minItems": 2,
        "maxItems": 2,
    },
}
SCHEMA = {
    "type": "object",
    "required": ["format", "version", "grid", "players"],
    "properties": {
        "format": {"const": FORMAT},
        "version": {"const": VERSION},
        "grid": {
            "type": "object",
            "required": ["width", "height", "stride"],
            "properties": {k: {"type": "integer", "minimum": 1} for k in ("width", "height", "stride")},
        },
        "court": {
            "oneOf": [
                {"type": "null"},
                {"type": "array", "minItems": 3, "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}},
            ]
        },
        "ball_mask": {"oneOf": [{"type": "null"}, _RLE]},
        "ball_detection": {"oneOf": [{"type": "null"}, _POINT]},
        "players": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "mask", "keypoints"],
                "properties": {
                    "id": {"type": "integer"},
                    "mask": _RLE,
                    "confidence": {"type": "number", "minimum": 0, "maximum": 1},
                    "center": _POINT,
                    "keypoints": {
                        "type": "array",
                        "items": {
                            "allOf": [
                                _POINT,
                                {"required": ["type"], "properties": {"type": {"type": "string"}}},
                            ]
                        },
                    },
                },
            },
        },
    },
}

_FOUR_PART_LABELS = {p.label: p for p in PosePart}
_COCO_LABELS = {k.label: k for k in BODY_PARTS}


# --- RLE ----------------------------------------------------------------


def rle_encode(pixels) -> List[List[int]]:
    px = np.unique(np.asarray(pixels, dtype=np.int64))
    if px.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(px) != 1) + 1
    starts = np.concatenate([[0], breaks])
    ends = np.concatenate([breaks, [px.size]])
    return [[int(px[s]), int(e - s)] for s, e in zip(starts, ends)]


def rle_decode(runs, num_pixels: Optional[int] = None) -> np.ndarray:
    out = []
    prev_end = -1
    for start, length in runs:
        if length < 1:
            raise SchemaError(f"run length {length} < 1")
        if start < prev_end:
            raise SchemaError("runs must be strictly ordered and non-overlapping")
        prev_end = start + length
        if num_pixels is not None and prev_end > num_pixels:
            raise SchemaError("run extends past the grid")
        out.append(np.arange(start, start + length, dtype=np.int64))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


# --- documents ----------------------------------------------------------


def _num(v: float):
    return float(v)


def _point(kp: Keypoint, with_conf=True) -> dict:
    d = {"x": _num(kp.x), "y": _num(kp.y)}
    if with_conf:
        d["confidence"] = _num(kp.confidence)
    return d


def _header(grid: GridSpec) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "grid": {"width": grid.width, "height": grid.height, "stride": grid.stride},
    }


def scene_to_doc(scene: Scene) -> dict:
    doc = _header(scene.grid)
    doc["court"] = [list(v) for v in scene.court] if scene.court is not None else None
    doc["ball_mask"] = rle_encode(scene.ball_mask.pixels) if scene.ball_mask is not None else None
    doc["players"] = [
        {
            "id": mask.instance_id,
            "mask": rle_encode(mask.pixels),
            "keypoints": [
                dict(type=k.label, **_point(skel.keypoints[k], with_conf=False)) for k in sorted(skel.keypoints)
            ],
        }
        for mask, skel in scene.players
    ]
    return doc


def result_to_doc(result: DecodeResult, grid: GridSpec) -> dict:
    doc = _header(grid)
    doc["court"] = None
    doc["ball_mask"] = None
    doc["ball_detection"] = _point(result.ball) if result.ball is not None else None
    doc["players"] = [
        {
            "id": mask.instance_id,
            "mask": rle_encode(mask.pixels),
            "confidence": _num(skel.confidence),
            "center": _point(center),
            "keypoints": [dict(type=k.label, **_point(skel.keypoints[k])) for k in sorted(skel.keypoints)],
        }
        for mask, skel, center in zip(result.masks, result.skeletons, result.centers)
    ]
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=1) + "\n"


def validate(doc) -> None:
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"{'/'.join(map(str, exc.absolute_path)) or '<root>'}: {exc.message}") from None


def _skeleton(entries, instance_id: int) -> Skeleton:
    coco, ds = [], {}
    for e in entries:
        label = e["type"]
        conf = float(e.get("confidence", 1.0))
        if label in _COCO_LABELS:
            coco.append(Keypoint(_COCO_LABELS[label], float(e["x"]), float(e["y"]), conf))
        elif label in _FOUR_PART_LABELS:
            ds[label] = Keypoint(_FOUR_PART_LABELS[label], float(e["x"]), float(e["y"]), conf)
        else:
            raise SchemaError(f"unknown keypoint type {label!r}")
    kps = list(coco)
    if ds:
        kps += lift_skeleton(PoseSkeleton(**ds), instance_id).keypoints.values()
    types = [kp.type for kp in kps]
    if len(set(types)) != len(types):
        raise SchemaError(f"player {instance_id} has duplicate keypoint types")
    return Skeleton.from_keypoints(kps, instance_id)


@dataclass(frozen=True)
class Prediction:
    """Decoded output for one image as read back from a result document."""

    grid: GridSpec
    ball: Optional[Keypoint]
    masks: Tuple[InstanceMask, ...]
    skeletons: Tuple[Skeleton, ...]


def _parse(doc):
    validate(doc)
    g = doc["grid"]
    try:
        grid = GridSpec(g["width"], g["height"], g["stride"])
        players = []
        for p in doc["players"]:
            mask = InstanceMask(rle_decode(p["mask"], grid.num_pixels), p["id"])
            players.append((mask, _skeleton(p["keypoints"], p["id"])))
        ball_mask = None
        if doc.get("ball_mask") is not None:
            ball_mask = InstanceMask(rle_decode(doc["ball_mask"], grid.num_pixels), -1)
        return grid, players, ball_mask
    except SchemaError:
        raise
    except DomainError as exc:
        raise SchemaError(str(exc)) from None


def doc_to_scene(doc) -> Scene:
    grid, players, ball_mask = _parse(doc)
    try:
        return Scene(grid, ball_mask, players, doc.get("court"))
    except DomainError as exc:
        raise SchemaError(str(exc)) from None


def doc_to_prediction(doc) -> Prediction:
    grid, players, _ = _parse(doc)
    det = doc.get("ball_detection")
    ball = None
    if det is not None:
        ball = Keypoint(KeypointType.BALL, float(det["x"]), float(det["y"]), float(det.get("confidence", 1.0)))
    return Prediction(grid, ball, tuple(m for m, _ in players), tuple(s for _, s in players))


def load_doc(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None


def write_doc(doc: dict, path) -> None:
    Path(path).write_text(dumps(doc))
