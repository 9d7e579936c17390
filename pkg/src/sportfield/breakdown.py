"""Keypoint error taxonomy: Good / Jitter / Swap / Miss / FnKp.

Every annotated part of every ground-truth skeleton gets exactly one
category. Left/right inversions cannot occur because the feet of each
matched prediction are aligned to the better assignment first.
"""
from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .core import PosePart
from .metrics import (
    PoseSkeleton,
    OksConfig,
    align_feet,
    ks,
    match_skeletons,
    skeleton_scale,
)

GOOD_KS = 0.85
MISS_KS = 0.5
FEET = (PosePart.FOOT1, PosePart.FOOT2)


class ErrorCategory(enum.Enum):
    GOOD = "good"
    JITTER = "jitter"
    SWAP = "swap"
    MISS = "miss"
    FN_KP = "fn_kp"


@dataclass
class BreakdownReport:
    by_category: Counter = field(default_factory=Counter)
    by_type: Counter = field(default_factory=Counter)  # (part, category) -> count

    @property
    def total(self) -> int:
        return sum(self.by_category.values())

    def add(self, part: PosePart, cat: ErrorCategory) -> None:
        self.by_category[cat] += 1
        self.by_type[(part, cat)] += 1

    def merge(self, other: "BreakdownReport") -> None:
        self.by_category.update(other.by_category)
        self.by_type.update(other.by_type)

    def rows(self) -> List[Tuple[str, str, int]]:
        """``(category, keypoint_type, count)`` rows, totals under ``all``."""
        out = []
        for cat in ErrorCategory:
            out.append((cat.value, "all", self.by_category[cat]))
            for part in PosePart:
                out.append((cat.value, part.label, self.by_type[(part, cat)]))
        return out


def _swap_candidates(part: PosePart, other: PoseSkeleton):
    # Feet are interchangeable, so either foot of another player counts.
    parts = other.parts()
    keys = FEET if part in FEET else (part,)
    return [parts[k] for k in keys if k in parts]


def classify_image(
    preds: Sequence[PoseSkeleton],
    gts: Sequence[PoseSkeleton],
    cfg: OksConfig = OksConfig(),
    matches: Optional[Sequence[Tuple[int, int, float]]] = None,
) -> BreakdownReport:
    if matches is None:
        matches = match_skeletons(preds, gts, cfg)
    by_gt = {j: i for i, j, _ in matches}
    scales = [skeleton_scale(g) for g in gts]
    report = BreakdownReport()
    for j, gt in enumerate(gts):
        gparts = gt.parts()
        if j not in by_gt:
            for part in gparts:
                report.add(part, ErrorCategory.FN_KP)
            continue
        pparts = align_feet(preds[by_gt[j]], gt, cfg).parts()
        for part, g in gparts.items():
            p = pparts.get(part)
            if p is None:
                report.add(part, ErrorCategory.FN_KP)
                continue
            kappa = cfg.kappa[part]
            v = ks(p, g, scales[j], kappa)
            if v >= GOOD_KS:
                cat = ErrorCategory.GOOD
            elif v >= MISS_KS:
                cat = ErrorCategory.JITTER
            elif any(
                ks(p, o, scales[m], kappa) >= MISS_KS
                for m, other in enumerate(gts)
                if m != j
                for o in _swap_candidates(part, other)
            ):
                cat = ErrorCategory.SWAP
            else:
                cat = ErrorCategory.MISS
            report.add(part, cat)
    return report


def classify(
    images: Sequence[Tuple[Sequence[PoseSkeleton], Sequence[PoseSkeleton]]],
    cfg: OksConfig = OksConfig(),
) -> BreakdownReport:
    """Breakdown over ``(preds, gts)`` pairs, one per image."""
    report = BreakdownReport()
    for preds, gts in images:
        report.merge(classify_image(preds, gts, cfg))
    return report
