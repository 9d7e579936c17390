import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sportfield.breakdown import GOOD_KS, MISS_KS, BreakdownReport, ErrorCategory, classify, classify_image
from sportfield.core import PosePart
from sportfield.metrics import PoseSkeleton, OksConfig, ks, match_skeletons, skeleton_scale
from sportfield.core import Keypoint

P = PosePart
CFG = OksConfig()


def _ds(pts, confidence=1.0):
    kps = {p: None for p in ("head", "hip", "foot1", "foot2")}
    for part, xy in pts.items():
        kps[part.name.lower()] = Keypoint(part, *xy)
    return PoseSkeleton(**kps, confidence=confidence)


GT = _ds({P.HEAD: (50, 0), P.HIP: (50, 40), P.FOOT1: (40, 80), P.FOOT2: (60, 80)})


def _moved(sk, part, dx, dy):
    pts = {p: kp.xy for p, kp in sk.parts().items()}
    x, y = pts[part]
    pts[part] = (x + dx, y + dy)
    return _ds(pts)


def test_ks_examples():
    g = Keypoint(P.HEAD, 0, 0)
    assert ks(g, g, 10, 0.15) == 1.0
    d = 10 * 0.15 * math.sqrt(2 * math.log(1 / 0.85))
    assert ks(Keypoint(P.HEAD, d, 0), g, 10, 0.15) == pytest.approx(0.85, abs=1e-12)
    assert ks(Keypoint(P.HEAD, 1e9, 0), g, 10, 0.15) == 0.0


def test_exact_prediction_all_good():
    r = classify_image([GT], [GT])
    assert r.by_category == Counter({ErrorCategory.GOOD: 4})


def test_good_jitter_boundary():
    s, kappa = skeleton_scale(GT), CFG.kappa[P.HEAD]
    d = s * kappa * math.sqrt(2 * math.log(1 / GOOD_KS))
    inside = classify_image([_moved(GT, P.HEAD, 0, d * (1 - 1e-6))], [GT])
    outside = classify_image([_moved(GT, P.HEAD, 0, d * (1 + 1e-6))], [GT])
    assert inside.by_type[(P.HEAD, ErrorCategory.GOOD)] == 1
    assert outside.by_type[(P.HEAD, ErrorCategory.JITTER)] == 1


def test_jitter_at_ks_06():
    s, kappa = skeleton_scale(GT), CFG.kappa[P.HIP]
    d = s * kappa * math.sqrt(2 * math.log(1 / 0.6))
    r = classify_image([_moved(GT, P.HIP, d, 0)], [GT])
    assert r.by_type[(P.HIP, ErrorCategory.JITTER)] == 1


def test_swap_and_miss():
    other = _ds({P.HEAD: (250, 0), P.HIP: (250, 40), P.FOOT1: (240, 80), P.FOOT2: (260, 80)})
    pred = _moved(GT, P.HEAD, 200, 0)  # lands on the other player's head
    r = classify_image([pred, other], [GT, other])
    assert r.by_type[(P.HEAD, ErrorCategory.SWAP)] == 1
    assert r.by_category[ErrorCategory.GOOD] == 7
    miss = classify_image([_moved(GT, P.HEAD, 0, -100), other], [GT, other])
    assert miss.by_type[(P.HEAD, ErrorCategory.MISS)] == 1


def test_fn_kp_for_missing_part_and_unmatched_skeleton():
    partial = _ds({P.HEAD: (50, 0), P.HIP: (50, 40)})
    far = _ds({P.HEAD: (900, 900)})
    r = classify_image([partial], [GT, far])
    assert r.by_category[ErrorCategory.FN_KP] == 3
    assert r.total == 5


def test_rows_and_merge():
    r = BreakdownReport()
    r.merge(classify_image([GT], [GT]))
    r.merge(classify_image([], [GT]))
    rows = r.rows()
    assert ("good", "all", 4) in rows and ("fn_kp", "all", 4) in rows
    assert len(rows) == 5 * 5


def _oracle(preds, gts, matches):
    """Re-derive categories from raw KS tables."""
    out = Counter()
    by_gt = {j: i for i, j, _ in matches}
    for j, g in enumerate(gts):
        gp = g.parts()
        if j not in by_gt:
            out[ErrorCategory.FN_KP] += len(gp)
            continue
        p = preds[by_gt[j]]
        s = skeleton_scale(g)
        options = []
        for order in ((P.FOOT1, P.FOOT2), (P.FOOT2, P.FOOT1)):
            rename = {P.HEAD: P.HEAD, P.HIP: P.HIP, P.FOOT1: order[0], P.FOOT2: order[1]}
            pp = {rename[k]: v for k, v in p.parts().items()}
            total = sum(ks(pp[k], v, s, CFG.kappa[k]) for k, v in gp.items() if k in pp)
            options.append((total, pp))
        pp = options[1][1] if options[1][0] > options[0][0] else options[0][1]
        for k, v in gp.items():
            if k not in pp:
                out[ErrorCategory.FN_KP] += 1
                continue
            val = ks(pp[k], v, s, CFG.kappa[k])
            if val >= 0.85:
                out[ErrorCategory.GOOD] += 1
            elif val >= 0.5:
                out[ErrorCategory.JITTER] += 1
            else:
                same = (P.FOOT1, P.FOOT2) if k in (P.FOOT1, P.FOOT2) else (k,)
                cross = [
                    ks(pp[k], o.parts()[q], skeleton_scale(o), CFG.kappa[k])
                    for m, o in enumerate(gts)
                    if m != j
                    for q in same
                    if q in o.parts()
                ]
                out[ErrorCategory.SWAP if any(c >= 0.5 for c in cross) else ErrorCategory.MISS] += 1
    return out


def _random_image(rng):
    n = rng.integers(1, 4)
    gts, preds = [], []
    for _ in range(n):
        x0, y0 = rng.uniform(0, 150, 2)
        pts = {
            P.HEAD: (x0, y0),
            P.HIP: (x0 + rng.normal(0, 3), y0 + 30),
            P.FOOT1: (x0 - 8, y0 + 60),
            P.FOOT2: (x0 + 8, y0 + 60),
        }
        keep = {k: v for k, v in pts.items() if rng.random() < 0.85} or {P.HEAD: pts[P.HEAD]}
        gts.append(_ds(keep))
        noisy = {k: (v[0] + rng.normal(0, rng.choice([0.5, 4, 20])), v[1] + rng.normal(0, 4)) for k, v in pts.items() if rng.random() < 0.9}
        if noisy and rng.random() < 0.9:
            preds.append(_ds(noisy, confidence=float(rng.random())))
    return preds, gts


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_classify_matches_bruteforce(seed):
    preds, gts = _random_image(np.random.default_rng(seed))
    matches = match_skeletons(preds, gts)
    r = classify_image(preds, gts, CFG, matches)
    assert r.by_category == _oracle(preds, gts, matches) - Counter()
    assert r.total == sum(len(g.parts()) for g in gts)
    assert sum(r.by_type.values()) == r.total


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.25, 8.0))
def test_classify_scale_invariant(seed, a):
    preds, gts = _random_image(np.random.default_rng(seed))
    if any(skeleton_scale(g) <= 1.0 or a * skeleton_scale(g) <= 1.0 for g in gts):
        return

    def sc(sk):
        return _ds({k: (a * v.x, a * v.y) for k, v in sk.parts().items()}, sk.confidence)

    base = classify_image(preds, gts)
    scaled = classify_image([sc(p) for p in preds], [sc(g) for g in gts])
    assert base.by_category == scaled.by_category


def test_classify_over_images():
    r = classify([([GT], [GT]), ([], [GT])])
    assert r.total == 8 and r.by_category[ErrorCategory.GOOD] == 4
    assert MISS_KS == 0.5
