"""Evaluation: ball ROC/AUC, mask matching quality, OKS-based pose AP/AR,
COCO to four-part skeleton conversion, and court filtering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
from shapely.geometry import LinearRing, Point, Polygon

from .core import (
    PosePart,
    DomainError,
    InstanceMask,
    Keypoint,
    KeypointType,
    Scene,
    Skeleton,
)

DEFAULT_KAPPA = {
    PosePart.HEAD: 0.15,
    PosePart.HIP: 0.2,
    PosePart.FOOT1: 0.2,
    PosePart.FOOT2: 0.2,
}
DEFAULT_OKS_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class OksConfig:
    kappa: Mapping[PosePart, float] = field(default_factory=lambda: dict(DEFAULT_KAPPA))
    oks_thresholds: Tuple[float, ...] = DEFAULT_OKS_THRESHOLDS

    def __post_init__(self):
        if any(self.kappa.get(p, 0) <= 0 for p in PosePart):
            raise DomainError("kappa must be > 0 for every part")
        t = self.oks_thresholds
        if not t or any(not 0 < x < 1 for x in t) or any(a >= b for a, b in zip(t, t[1:])):
            raise DomainError("oks thresholds must be strictly increasing in (0, 1)")


@dataclass(frozen=True)
class PoseSkeleton:
    head: Optional[Keypoint] = None
    hip: Optional[Keypoint] = None
    foot1: Optional[Keypoint] = None
    foot2: Optional[Keypoint] = None
    confidence: float = 1.0

    def parts(self) -> Dict[PosePart, Keypoint]:
        out = {}
        for p in PosePart:
            kp = getattr(self, p.label)
            if kp is not None:
                out[p] = kp
        return out

    def swapped_feet(self) -> "PoseSkeleton":
        return PoseSkeleton(self.head, self.hip, self.foot2, self.foot1, self.confidence)


@dataclass
class EvalReport:
    bDQ: float
    pSQ: float
    pDQ: float
    PQ: float
    ap: float
    ar: float
    f1: float
    roc: List[Tuple[float, float, float]]  # (fpr, tpr, tau)
    per_threshold: List[Tuple[float, float, float]]  # (tau, precision, recall)
    oks: List[float] = field(default_factory=list)  # matched pairs, image order
    n_pred: int = 0
    n_gt: int = 0


# --- ball ---------------------------------------------------------------


def _ball_hit(det: Keypoint, mask: Optional[InstanceMask], width: int) -> bool:
    return mask is not None and mask.contains(det.x, det.y, width)


def ball_roc(records: Sequence[Tuple[Optional[Keypoint], Scene]]):
    """ROC of top-1 ball detections over a set of images, and its area.

    Returns ``(curve, auc)`` where ``curve`` lists ``(fpr, tpr, tau)`` for
    ``tau`` = +inf, every distinct detection confidence (descending) and 0.
    The area is the trapezoid rule over the curve, closed by a horizontal
    segment to ``fpr = 1``.
    """
    if not records:
        raise DomainError("ball_roc needs at least one image")
    n_all = len(records)
    n_ball = sum(1 for _, s in records if s.ball_mask is not None)
    conf, hit = [], []
    for det, scene in records:
        if det is None:
            continue
        conf.append(det.confidence)
        hit.append(_ball_hit(det, scene.ball_mask, scene.grid.width))
    conf = np.asarray(conf, dtype=np.float64)
    hit = np.asarray(hit, dtype=bool)

    taus = np.unique(np.concatenate([conf, [0.0]]))[::-1]
    order = np.argsort(-conf, kind="stable")
    sorted_conf = conf[order]
    tp_cum = np.concatenate([[0], np.cumsum(hit[order])])
    fp_cum = np.concatenate([[0], np.cumsum(~hit[order])])
    # number of detections with conf >= tau
    n_ge = np.searchsorted(-sorted_conf, -taus, side="right")
    tpr = tp_cum[n_ge] / n_ball if n_ball else np.zeros(len(taus))
    fpr = fp_cum[n_ge] / n_all

    curve = [(0.0, 0.0, math.inf)] + [(float(f), float(t), float(u)) for f, t, u in zip(fpr, tpr, taus)]
    return curve, roc_auc(curve)


def roc_auc(curve: Sequence[Tuple[float, float, float]]) -> float:
    xs = [c[0] for c in curve]
    ys = [c[1] for c in curve]
    if xs[-1] < 1.0:
        xs.append(1.0)
        ys.append(ys[-1])
    return float(sum((x1 - x0) * (y0 + y1) / 2.0 for x0, x1, y0, y1 in zip(xs, xs[1:], ys, ys[1:])))


# --- masks --------------------------------------------------------------


def iou(a: InstanceMask, b: InstanceMask) -> float:
    inter = np.intersect1d(a.pixels, b.pixels, assume_unique=True).size
    union = len(a) + len(b) - inter
    return inter / union if union else 0.0


def _iou_table(pred, gt):
    inter = np.zeros((len(pred), len(gt)), dtype=np.int64)
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            inter[i, j] = np.intersect1d(p.pixels, g.pixels, assume_unique=True).size
    sizes_p = np.array([len(p) for p in pred], dtype=np.int64)
    sizes_g = np.array([len(g) for g in gt], dtype=np.int64)
    union = sizes_p[:, None] + sizes_g[None, :] - inter
    return inter, union


@dataclass(frozen=True)
class MaskMatches:
    pairs: Tuple[Tuple[int, int, float], ...]  # (pred index, gt index, iou)
    unmatched_pred: Tuple[int, ...]
    unmatched_gt: Tuple[int, ...]


def _max_matching(edges: Dict[int, List[int]], rows, cols) -> int:
    """Maximum bipartite matching size restricted to ``rows`` x ``cols``."""
    owner: Dict[int, int] = {}

    def augment(i, seen):
        for j in edges.get(i, ()):
            if j in cols and j not in seen:
                seen.add(j)
                if j not in owner or augment(owner[j], seen):
                    owner[j] = i
                    return True
        return False

    return sum(1 for i in rows if augment(i, set()))


def _tie_matching(edges: Dict[int, List[int]], rows: List[int], cols: Set[int]) -> List[Tuple[int, int]]:
    """Lexicographically smallest maximum matching over IoU-0.5 edges."""
    target = _max_matching(edges, rows, cols)
    chosen: List[Tuple[int, int]] = []
    free_cols = set(cols)
    for n, i in enumerate(rows):
        for j in edges.get(i, ()):
            if j not in free_cols:
                continue
            rest = free_cols - {j}
            if len(chosen) + 1 + _max_matching(edges, rows[n + 1:], rest) == target:
                chosen.append((i, j))
                free_cols = rest
                break
    return chosen


def match_masks(pred: Sequence[InstanceMask], gt: Sequence[InstanceMask]) -> MaskMatches:
    """Pairs with IoU >= 0.5.

    Pairs above 0.5 are taken greedily by descending IoU (for disjoint
    masks each mask has at most one such partner, so this is exact). The
    remaining masks are then paired over exact-0.5 edges by the
    lexicographically smallest maximum matching, which keeps the result
    optimal and deterministic when ties occur.
    """
    pairs = []
    if pred and gt:
        inter, union = _iou_table(pred, gt)
        strict = [
            (inter[i, j] / union[i, j], i, j)
            for i in range(len(pred))
            for j in range(len(gt))
            if union[i, j] and 2 * inter[i, j] > union[i, j]
        ]
        strict.sort(key=lambda c: (-c[0], c[1], c[2]))
        used_p, used_g = set(), set()
        for v, i, j in strict:
            if i not in used_p and j not in used_g:
                used_p.add(i)
                used_g.add(j)
                pairs.append((i, j, float(v)))
        edges: Dict[int, List[int]] = {}
        for i in range(len(pred)):
            if i in used_p:
                continue
            for j in range(len(gt)):
                if j not in used_g and union[i, j] and 2 * inter[i, j] == union[i, j]:
                    edges.setdefault(i, []).append(j)
        if edges:
            cols = set(range(len(gt))) - used_g
            pairs += [(i, j, 0.5) for i, j in _tie_matching(edges, sorted(edges), cols)]
        pairs.sort()
    mp = {i for i, _, _ in pairs}
    mg = {j for _, j, _ in pairs}
    return MaskMatches(
        tuple(pairs),
        tuple(i for i in range(len(pred)) if i not in mp),
        tuple(j for j in range(len(gt)) if j not in mg),
    )


def psq_pdq(ious: Sequence[float], n_pred: int, n_gt: int) -> Tuple[float, float, float]:
    """``(pSQ, pDQ, PQ)`` from the IoUs of all matched pairs over a dataset."""
    psq = float(np.mean(ious)) if len(ious) else 0.0
    denom = n_pred + n_gt
    pdq = 2.0 * len(ious) / denom if denom else 0.0
    return psq, pdq, psq * pdq


# --- poses --------------------------------------------------------------


def _midpoint(a: Optional[Keypoint], b: Optional[Keypoint], part: PosePart) -> Optional[Keypoint]:
    if a is None or b is None:
        return None
    return Keypoint(part, (a.x + b.x) / 2.0, (a.y + b.y) / 2.0, (a.confidence + b.confidence) / 2.0)


def _relabel(kp: Optional[Keypoint], part: PosePart) -> Optional[Keypoint]:
    return None if kp is None else Keypoint(part, kp.x, kp.y, kp.confidence)


def convert_skeleton(coco: Skeleton) -> PoseSkeleton:
    """Ear midpoint -> head, hip midpoint -> hip, left/right ankle -> foot1/foot2."""
    k = coco.keypoints.get
    return PoseSkeleton(
        head=_midpoint(k(KeypointType.LEFT_EAR), k(KeypointType.RIGHT_EAR), PosePart.HEAD),
        hip=_midpoint(k(KeypointType.LEFT_HIP), k(KeypointType.RIGHT_HIP), PosePart.HIP),
        foot1=_relabel(k(KeypointType.LEFT_ANKLE), PosePart.FOOT1),
        foot2=_relabel(k(KeypointType.RIGHT_ANKLE), PosePart.FOOT2),
        confidence=coco.confidence,
    )


def lift_skeleton(ds: PoseSkeleton, instance_id: int = 0, spread: float = 0.0) -> Skeleton:
    """COCO skeleton whose conversion gives back ``ds``.

    Ears and hips are placed ``spread`` pixels either side of the head and
    hip points.
    """
    kps = []
    pairs = (
        (ds.head, KeypointType.LEFT_EAR, KeypointType.RIGHT_EAR),
        (ds.hip, KeypointType.LEFT_HIP, KeypointType.RIGHT_HIP),
    )
    for kp, left, right in pairs:
        if kp is not None:
            kps.append(Keypoint(left, kp.x - spread, kp.y, kp.confidence))
            kps.append(Keypoint(right, kp.x + spread, kp.y, kp.confidence))
    if ds.foot1 is not None:
        kps.append(Keypoint(KeypointType.LEFT_ANKLE, ds.foot1.x, ds.foot1.y, ds.foot1.confidence))
    if ds.foot2 is not None:
        kps.append(Keypoint(KeypointType.RIGHT_ANKLE, ds.foot2.x, ds.foot2.y, ds.foot2.confidence))
    return Skeleton.from_keypoints(kps, instance_id)


def skeleton_scale(gt: PoseSkeleton) -> float:
    """Square root of the tight bounding-box area of the annotated parts, at least 1."""
    pts = [kp.xy for kp in gt.parts().values()]
    if not pts:
        return 1.0
    xs, ys = zip(*pts)
    return max(1.0, math.sqrt((max(xs) - min(xs)) * (max(ys) - min(ys))))


def ks(pred_kp: Keypoint, gt_kp: Keypoint, s: float, kappa: float) -> float:
    """Similarity of a single keypoint pair."""
    d2 = (pred_kp.x - gt_kp.x) ** 2 + (pred_kp.y - gt_kp.y) ** 2
    return math.exp(-d2 / (2.0 * s * s * kappa * kappa))


def _oks_fixed(pred: PoseSkeleton, gt: PoseSkeleton, cfg: OksConfig, s: float) -> float:
    gparts = gt.parts()
    pparts = pred.parts()
    total = 0.0
    for part, g in gparts.items():
        p = pparts.get(part)
        if p is not None:
            total += ks(p, g, s, cfg.kappa[part])
    return total / len(gparts)


def align_feet(pred: PoseSkeleton, gt: PoseSkeleton, cfg: OksConfig = OksConfig()) -> PoseSkeleton:
    """``pred`` with its feet in whichever order gives the higher OKS (kept on ties)."""
    s = skeleton_scale(gt)
    swapped = pred.swapped_feet()
    if _oks_fixed(swapped, gt, cfg, s) > _oks_fixed(pred, gt, cfg, s):
        return swapped
    return pred


def oks(pred: PoseSkeleton, gt: PoseSkeleton, cfg: OksConfig = OksConfig()) -> float:
    """Mean keypoint similarity over the annotated gt parts, best of both foot
    assignments."""
    if not gt.parts():
        raise DomainError("ground-truth skeleton has no annotated parts")
    s = skeleton_scale(gt)
    return max(_oks_fixed(pred, gt, cfg, s), _oks_fixed(pred.swapped_feet(), gt, cfg, s))


def match_skeletons(
    preds: Sequence[PoseSkeleton],
    gts: Sequence[PoseSkeleton],
    cfg: OksConfig = OksConfig(),
) -> List[Tuple[int, int, float]]:
    """Greedy one-to-one matching within an image.

    Predictions in descending confidence order (stable) each claim the
    unmatched gt with the highest positive OKS, lower gt index on ties.
    Returns ``(pred index, gt index, oks)`` sorted by pred index.
    """
    valid = [j for j, g in enumerate(gts) if g.parts()]
    table = {(i, j): oks(p, gts[j], cfg) for i, p in enumerate(preds) for j in valid}
    order = sorted(range(len(preds)), key=lambda i: -preds[i].confidence)
    free = list(valid)
    pairs = []
    for i in order:
        best_j, best = None, 0.0
        for j in free:
            if table[i, j] > best:
                best_j, best = j, table[i, j]
        if best_j is not None:
            free.remove(best_j)
            pairs.append((i, best_j, best))
    return sorted(pairs)


def pose_scores(
    oks_values: Sequence[float], n_pred: int, n_gt: int, cfg: OksConfig = OksConfig()
):
    """``(AP, AR, F1, table)`` from the OKS of all matched pairs.

    ``table`` lists ``(tau, precision, recall)``; a pair is a true positive
    at ``tau`` when its OKS is >= tau. F1 is the harmonic mean of AP and AR.
    """
    vals = np.asarray(oks_values, dtype=np.float64)
    table = []
    for tau in cfg.oks_thresholds:
        tp = int(np.sum(vals >= tau))
        pr = tp / n_pred if n_pred else 0.0
        re = tp / n_gt if n_gt else 0.0
        table.append((tau, pr, re))
    ap = float(np.mean([t[1] for t in table]))
    ar = float(np.mean([t[2] for t in table]))
    f1 = 2 * ap * ar / (ap + ar) if ap + ar > 0 else 0.0
    return ap, ar, f1, table


def peq(
    preds: Sequence[Sequence[PoseSkeleton]],
    gts: Sequence[Sequence[PoseSkeleton]],
    cfg: OksConfig = OksConfig(),
):
    """Pose AP / AR / F1 over a set of images (lists aligned by image)."""
    if len(preds) != len(gts):
        raise DomainError("preds and gts must list the same images")
    values = []
    for p, g in zip(preds, gts):
        values.extend(v for _, _, v in match_skeletons(p, g, cfg))
    n_pred = sum(len(p) for p in preds)
    n_gt = sum(len(g) for g in gts)
    return pose_scores(values, n_pred, n_gt, cfg)


# --- court --------------------------------------------------------------


def court_polygon(court: Sequence[Tuple[float, float]]) -> Polygon:
    if len(court) < 3:
        raise DomainError("court polygon needs at least 3 vertices")
    if not LinearRing(court).is_simple:
        raise DomainError("court polygon is self-intersecting")
    return Polygon(court)


def reference_point(item, width: Optional[int] = None) -> Optional[Tuple[float, float]]:
    if isinstance(item, InstanceMask):
        if width is None:
            raise DomainError("mask reference point needs the grid width")
        return item.centroid(width)
    if isinstance(item, Keypoint):
        return item.xy
    if isinstance(item, Skeleton):
        pts = [kp.xy for kp in item.keypoints.values()]
    elif isinstance(item, PoseSkeleton):
        pts = [kp.xy for kp in item.parts().values()]
    else:
        raise TypeError(f"cannot place {type(item).__name__} on the court")
    if not pts:
        return None
    xs, ys = zip(*pts)
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def inside_court(item, court, width: Optional[int] = None) -> bool:
    """Closed-region test of the item's reference point; items without one
    (empty skeletons) are outside."""
    if court is None:
        return True
    poly = court if isinstance(court, Polygon) else court_polygon(court)
    ref = reference_point(item, width)
    return ref is not None and poly.covers(Point(ref))


def filter_court(items, court, width: Optional[int] = None) -> list:
    """Keep the items whose reference point lies in the court (identity without one)."""
    if court is None:
        return list(items)
    poly = court_polygon(court)
    return [it for it in items if inside_court(it, poly, width)]
