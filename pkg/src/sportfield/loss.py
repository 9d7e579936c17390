"""Training losses over FieldSets and their analytic gradients.

The three keypoint losses are plain sums (no normalisation); the two
segmentation losses are per-pixel means. Localisation and size losses
only see cells whose target confidence is 1.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Dict

import numpy as np

from .core import DomainError, FieldSet

EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    w_sem: float = 10.0
    w_off: float = 0.1
    w_cnf: float = 20.0
    w_loc: float = 10.0
    w_sig: float = 10.0

    def __post_init__(self):
        if any(getattr(self, f.name) < 0 for f in fields(self)):
            raise DomainError(f"loss weights must be non-negative: {self}")

    def scaled(self, factor: float) -> "LossWeights":
        return LossWeights(*(getattr(self, f.name) * factor for f in fields(self)))


@dataclass(frozen=True)
class LossBreakdown:
    sem: float
    off: float
    cnf: float
    loc: float
    sig: float
    total: float

    @classmethod
    def combine(cls, w: LossWeights, sem, off, cnf, loc, sig) -> "LossBreakdown":
        total = w.w_sem * sem + w.w_off * off + w.w_cnf * cnf + w.w_loc * loc + w.w_sig * sig
        return cls(sem, off, cnf, loc, sig, float(total))

    def as_dict(self) -> Dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _same_shape(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DomainError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def _bce(pred, target):
    # Clamping the log arguments (not the prediction) keeps exact 0/1 matches at zero loss.
    return -(
        target * np.log(np.maximum(pred, EPS))
        + (1.0 - target) * np.log(np.maximum(1.0 - pred, EPS))
    )


def _bce_grad(pred, target):
    g = np.zeros_like(pred)
    lo = pred > EPS
    hi = 1.0 - pred > EPS
    g[lo] -= target[lo] / pred[lo]
    g[hi] += (1.0 - target[hi]) / (1.0 - pred[hi])
    return g


def loss_sem(pred, target) -> float:
    pred, target = _same_shape(pred, target)
    return float(_bce(pred, target).mean())


def loss_off(pred, target) -> float:
    pred, target = _same_shape(pred, target)
    if pred.shape[-1] != 2:
        raise DomainError("offsets must have a trailing dimension of 2")
    return float(((pred - target) ** 2).sum(axis=-1).mean())


def loss_cnf(pred, target) -> float:
    pred, target = _same_shape(pred, target)
    return float(_bce(pred, target).sum())


def loss_sig(pred_sigma, target_sigma, mask) -> float:
    """``mask`` marks supervised cells (target confidence 1)."""
    pred_sigma, target_sigma = _same_shape(pred_sigma, target_sigma)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pred_sigma.shape:
        raise DomainError("mask shape mismatch")
    return float(np.abs(pred_sigma[mask] - target_sigma[mask]).sum())


def loss_loc(pred_loc, target_loc, log_scale, mask) -> float:
    """Sum over supervised cells of ``|d|^2 / B^2 + ln B`` with ``B = exp(log_scale)``."""
    pred_loc, target_loc = _same_shape(pred_loc, target_loc)
    log_scale = np.asarray(log_scale, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if log_scale.shape != pred_loc.shape[:-1] or mask.shape != log_scale.shape:
        raise DomainError("scale / mask shape mismatch")
    d2 = ((pred_loc - target_loc) ** 2).sum(axis=-1)[mask]
    b = log_scale[mask]
    return float((d2 * np.exp(-2.0 * b) + b).sum())


def supervised(target: FieldSet) -> np.ndarray:
    return target.conf == 1.0


def _check_grids(pred: FieldSet, target: FieldSet):
    if pred.grid != target.grid:
        raise DomainError(f"grid mismatch {pred.grid} vs {target.grid}")


def _weighted_total(w, sem_p, sem_t, off_p, off_t, cnf_p, cnf_t, loc_p, loc_t, sig_p, sig_t, log_b, mask):
    sem = loss_sem(sem_p, sem_t)
    off = loss_off(off_p, off_t)
    cnf = loss_cnf(cnf_p, cnf_t)
    loc = loss_loc(loc_p, loc_t, log_b, mask)
    sig = loss_sig(sig_p, sig_t, mask)
    return LossBreakdown.combine(w, sem, off, cnf, loc, sig)


def loss_total(pred: FieldSet, target: FieldSet, w: LossWeights = LossWeights()) -> LossBreakdown:
    _check_grids(pred, target)
    mask = supervised(target)
    # Unsupervised target sigmas may be zero (log -inf); they are masked out.
    return _weighted_total(
        w,
        pred.semantic, target.semantic,
        pred.offsets, target.offsets,
        pred.conf, target.conf,
        pred.loc, target.loc,
        pred.sigma, np.where(mask, target.sigma, 0.0),
        pred.log_scale, mask,
    )


def grad_total(pred: FieldSet, target: FieldSet, w: LossWeights = LossWeights()) -> Dict[str, np.ndarray]:
    """Gradients of the weighted total with respect to the predicted tensors.

    Keys: ``semantic``, ``offsets``, ``conf``, ``loc``, ``sigma`` (linear
    size) and ``log_scale``. The sub-gradient of ``|x|`` at 0 is 0.
    """
    _check_grids(pred, target)
    mask = supervised(target)
    f64 = lambda a: np.asarray(a, dtype=np.float64)
    sem_p, sem_t = f64(pred.semantic), f64(target.semantic)
    n_px = sem_p.size

    g_sem = w.w_sem * _bce_grad(sem_p, sem_t) / n_px
    g_off = w.w_off * 2.0 * (f64(pred.offsets) - f64(target.offsets)) / n_px
    g_cnf = w.w_cnf * _bce_grad(f64(pred.conf), f64(target.conf))

    delta = f64(pred.loc) - f64(target.loc)
    log_b = np.where(mask, f64(pred.log_scale), 0.0)
    inv_b2 = np.where(mask, np.exp(-2.0 * log_b), 0.0)
    g_loc = w.w_loc * 2.0 * delta * inv_b2[..., None]
    d2 = (delta ** 2).sum(axis=-1)
    g_logb = w.w_loc * np.where(mask, -2.0 * d2 * inv_b2 + 1.0, 0.0)

    diff = f64(pred.sigma) - np.where(mask, f64(target.sigma), 0.0)
    g_sig = w.w_sig * np.where(mask, np.sign(diff), 0.0)

    return {
        "semantic": g_sem,
        "offsets": g_off,
        "conf": g_cnf,
        "loc": g_loc,
        "sigma": g_sig,
        "log_scale": g_logb,
    }


def finite_difference_check(
    pred: FieldSet,
    target: FieldSet,
    w: LossWeights = LossWeights(),
    step: float = 1e-4,
    max_entries: int | None = None,
    seed: int = 0,
    kink_tol: float = 1e-6,
    floor: float = 1e-3,
) -> Dict[str, float]:
    """Max relative error per tensor between :func:`grad_total` and central
    differences of :func:`loss_total`.

    Relative error is ``|a - n| / max(|a|, |n|, floor)``. Entries within
    ``kink_tol`` of a non-differentiable point (``|sigma - sigma*| = 0`` or a
    BCE clamp edge) are skipped. ``max_entries`` samples that many entries
    per tensor instead of visiting all of them.
    """
    analytic = grad_total(pred, target, w)
    rng = np.random.default_rng(seed)
    base = {
        "semantic": np.array(pred.semantic, np.float64),
        "offsets": np.array(pred.offsets, np.float64),
        "conf": np.array(pred.conf, np.float64),
        "loc": np.array(pred.loc, np.float64),
        "sigma": np.array(pred.sigma, np.float64),
        "log_scale": np.array(pred.log_scale, np.float64),
    }
    mask = supervised(target)
    target_sigma = np.where(mask, target.sigma, 0.0)
    fixed = (target.semantic, target.offsets, target.conf, target.loc, target_sigma)

    # Each tensor feeds exactly one weighted term; differencing that term
    # alone equals differencing the total without cancellation against it.
    term = {"semantic": "sem", "offsets": "off", "conf": "cnf", "loc": "loc", "log_scale": "loc", "sigma": "sig"}
    weight = {"sem": w.w_sem, "off": w.w_off, "cnf": w.w_cnf, "loc": w.w_loc, "sig": w.w_sig}

    def total_with(name, arr):
        t = dict(base, **{name: arr})
        parts = _weighted_total(
            w,
            t["semantic"], fixed[0],
            t["offsets"], fixed[1],
            t["conf"], fixed[2],
            t["loc"], fixed[3],
            t["sigma"], fixed[4],
            t["log_scale"], mask,
        )
        return weight[term[name]] * getattr(parts, term[name])

    report = {}
    for name, arr in base.items():
        flat_idx = np.arange(arr.size)
        if max_entries is not None and arr.size > max_entries:
            flat_idx = np.sort(rng.choice(arr.size, max_entries, replace=False))
        worst = 0.0
        for i in flat_idx:
            idx = np.unravel_index(i, arr.shape)
            v = arr[idx]
            if name in ("semantic", "conf") and not (EPS + kink_tol < v - step and v + step < 1 - EPS - kink_tol):
                continue
            if name == "sigma" and mask[idx] and abs(v - target_sigma[idx]) < kink_tol + step:
                continue
            if name == "sigma" and v - step <= 0:
                continue
            plus = arr.copy()
            plus[idx] = v + step
            minus = arr.copy()
            minus[idx] = v - step
            numeric = (total_with(name, plus) - total_with(name, minus)) / (2.0 * step)
            a = float(analytic[name][idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
            worst = max(worst, err)
        report[name] = float(worst)
    return report
