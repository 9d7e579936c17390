"""Dataset-level evaluation of decoded results against ground-truth scenes."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

from ..breakdown import BreakdownReport, classify_image
from ..core import Keypoint, Scene
from ..metrics import (
    PoseSkeleton,
    EvalReport,
    OksConfig,
    ball_roc,
    convert_skeleton,
    court_polygon,
    inside_court,
    match_masks,
    match_skeletons,
    pose_scores,
    psq_pdq,
)
from .scenefile import Prediction

JOBS_ENV = "SPORTFIELD_JOBS"


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ImageEval:
    ball: Tuple[Optional[Keypoint], Scene]
    ious: List[float]
    n_pred_masks: int
    n_gt_masks: int
    oks: List[float]
    n_pred_poses: int
    n_gt_poses: int
    breakdown: BreakdownReport


def _poses(pred: Prediction, gt: Scene, court: bool):
    poly = court_polygon(gt.court) if court and gt.court is not None else None
    w = gt.grid.width
    pmasks = [m for m in pred.masks if inside_court(m, poly, w)]
    gmasks = [m for m in gt.masks if inside_court(m, poly, w)]
    pposes = [convert_skeleton(s) for s in pred.skeletons]
    gposes = [convert_skeleton(s) for s in gt.skeletons]
    pposes = [p for p in pposes if inside_court(p, poly)]
    # Ground truth without any annotated part cannot be scored by OKS.
    gposes = [g for g in gposes if g.parts() and inside_court(g, poly)]
    return pmasks, gmasks, pposes, gposes


def evaluate_image(pred: Prediction, gt: Scene, court: bool = False, cfg: OksConfig = OksConfig()) -> ImageEval:
    pmasks, gmasks, pposes, gposes = _poses(pred, gt, court)
    mm = match_masks(pmasks, gmasks)
    sm = match_skeletons(pposes, gposes, cfg)
    return ImageEval(
        ball=(pred.ball, gt),
        ious=[v for _, _, v in mm.pairs],
        n_pred_masks=len(pmasks),
        n_gt_masks=len(gmasks),
        oks=[v for _, _, v in sm],
        n_pred_poses=len(pposes),
        n_gt_poses=len(gposes),
        breakdown=classify_image(pposes, gposes, cfg, sm),
    )


def evaluate(
    pairs: Sequence[Tuple[Prediction, Scene]],
    court: bool = False,
    cfg: OksConfig = OksConfig(),
    jobs: Optional[int] = None,
) -> Tuple[EvalReport, BreakdownReport]:
    """Evaluate ``(prediction, ground truth)`` pairs; results are reduced in
    input order whatever the worker count."""
    jobs = default_jobs() if jobs is None else jobs
    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(jobs) as pool:
            per_image = list(pool.map(lambda pg: evaluate_image(pg[0], pg[1], court, cfg), pairs))
    else:
        per_image = [evaluate_image(p, g, court, cfg) for p, g in pairs]

    roc, bdq = ball_roc([im.ball for im in per_image])
    ious = [v for im in per_image for v in im.ious]
    psq, pdq, pq = psq_pdq(ious, sum(im.n_pred_masks for im in per_image), sum(im.n_gt_masks for im in per_image))
    oks_values = [v for im in per_image for v in im.oks]
    n_pred = sum(im.n_pred_poses for im in per_image)
    n_gt = sum(im.n_gt_poses for im in per_image)
    ap, ar, f1, table = pose_scores(oks_values, n_pred, n_gt, cfg)
    breakdown = BreakdownReport()
    for im in per_image:
        breakdown.merge(im.breakdown)
    report = EvalReport(bdq, psq, pdq, pq, ap, ar, f1, roc, table, oks_values, n_pred, n_gt)
    return report, breakdown


def report_to_doc(report: EvalReport, n_images: int) -> dict:
    def tau(v):
        return "inf" if math.isinf(v) else v

    return {
        "n_images": n_images,
        "bDQ": report.bDQ,
        "pSQ": report.pSQ,
        "pDQ": report.pDQ,
        "PQ": report.PQ,
        "AP": report.ap,
        "AR": report.ar,
        "F1": report.f1,
        "n_pred_poses": report.n_pred,
        "n_gt_poses": report.n_gt,
        "oks": report.oks,
        "roc": [{"tau": tau(t), "fpr": f, "tpr": r} for f, r, t in report.roc],
        "per_threshold": [{"tau": t, "precision": p, "recall": r} for t, p, r in report.per_threshold],
    }


def summary_line(report: EvalReport) -> str:
    return (
        f"bDQ {100 * report.bDQ:.2f}  pSQ {100 * report.pSQ:.2f}  pDQ {100 * report.pDQ:.2f}  "
        f"PQ {100 * report.PQ:.2f}  AP {100 * report.ap:.2f}  AR {100 * report.ar:.2f}  F1 {100 * report.f1:.2f}"
    )


def roc_csv(report: EvalReport) -> str:
    lines = ["tau,fpr,tpr"]
    lines += [f"{'inf' if math.isinf(t) else repr(t)},{f!r},{r!r}" for f, r, t in report.roc]
    return "\n".join(lines) + "\n"


def pr_csv(report: EvalReport) -> str:
    lines = ["tau,precision,recall"]
    lines += [f"{t!r},{p!r},{r!r}" for t, p, r in report.per_threshold]
    return "\n".join(lines) + "\n"


def breakdown_csv(report: BreakdownReport) -> str:
    lines = ["category,keypoint_type,count"]
    lines += [f"{c},{k},{n}" for c, k, n in report.rows()]
    return "\n".join(lines) + "\n"
