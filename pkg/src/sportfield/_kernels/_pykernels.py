"""Pure numpy implementations of the hot loops."""
import math

import numpy as np


def fuse_sources(tx, ty, conf, sigma, width, height, truncation):
    """Accumulate truncated unnormalized Gaussians onto a ``(height, width)`` map.

    Source ``i`` adds ``conf[i] * exp(-d^2 / (2 sigma[i]^2))`` at every
    pixel within ``truncation * sigma[i]`` of ``(tx[i], ty[i])``.
    """
    out = np.zeros((height, width), dtype=np.float64)
    for i in np.flatnonzero(conf):
        c, s, px, py = conf[i], sigma[i], tx[i], ty[i]
        r = truncation * s
        x0, x1 = max(math.ceil(px - r), 0), min(math.floor(px + r), width - 1)
        y0, y1 = max(math.ceil(py - r), 0), min(math.floor(py + r), height - 1)
        if x0 > x1 or y0 > y1:
            continue
        dx = np.arange(x0, x1 + 1, dtype=np.float64) - px
        dy = np.arange(y0, y1 + 1, dtype=np.float64)[:, None] - py
        d2 = dx * dx + dy * dy
        contrib = np.where(d2 <= r * r, c * np.exp(-d2 / (2.0 * s * s)), 0.0)
        out[y0:y1 + 1, x0:x1 + 1] += contrib
    return out


def assign_nearest(ex, ey, cx, cy, chunk=65536):
    """Index of the nearest centre for every embedding; ties go to the lower index."""
    out = np.empty(len(ex), dtype=np.int64)
    for start in range(0, len(ex), chunk):
        sl = slice(start, start + chunk)
        dx = cx[None, :] - ex[sl, None]
        dy = cy[None, :] - ey[sl, None]
        out[sl] = np.argmin(dx * dx + dy * dy, axis=1)
    return out
