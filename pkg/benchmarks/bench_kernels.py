"""Compare the compiled and numpy kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--size PX] [--players N]
"""
import argparse
import timeit

import numpy as np

from sportfield import _kernels
from sportfield.core import KeypointType
from sportfield.decode import DecodeConfig, decode, source_targets
from sportfield.encode import encode
from sportfield.harness.synth import SynthConfig, synth_scene


def _sources_encoded(fields, k):
    conf = np.asarray(fields.conf[k], np.float64)
    active = conf > 0
    tx, ty = source_targets(conf, np.asarray(fields.loc[k], np.float64), fields.grid)
    return tx[active], ty[active], conf[active], fields.sigma[k][active]


def _sources_dense(rng, grid):
    # network-like output: every cell contributes with a small confidence
    h, w = grid.low_shape
    conf = rng.uniform(0.0, 0.2, (h, w))
    tx, ty = source_targets(conf, rng.normal(0, 4, (h, w, 2)), grid)
    return tx.ravel(), ty.ravel(), conf.ravel(), rng.uniform(1.0, 4.0, h * w)


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--size", type=int, default=641)
    ap.add_argument("--players", type=int, default=10)
    args = ap.parse_args()

    scene = synth_scene(SynthConfig(seed=0, n_players=args.players, width=args.size, height=args.size))
    fields = encode(scene)
    g = fields.grid
    rng = np.random.default_rng(0)
    fg = np.flatnonzero(np.asarray(fields.semantic).ravel() > 0.5)
    ex = (fg % g.width) + rng.normal(0, 1, fg.size)
    ey = (fg // g.width) + rng.normal(0, 1, fg.size)
    centres = np.array([m.centroid(g.width) for m in scene.masks])

    cases = {
        "fuse (encoded ply field)": lambda impl: _kernels.fuse_sources(
            *_sources_encoded(fields, KeypointType.PLY), g.width, g.height, 3.0, impl=impl
        ),
        "fuse (dense field)": lambda impl, s=_sources_dense(rng, g): _kernels.fuse_sources(
            *s, g.width, g.height, 3.0, impl=impl
        ),
        "assign_nearest": lambda impl: _kernels.assign_nearest(ex, ey, centres[:, 0], centres[:, 1], impl=impl),
    }
    backends = ["python"] + (["cython"] if _kernels.ckernels is not None else [])
    print(f"grid {g.width}x{g.height} stride {g.stride}, {args.players} players, best of {args.repeat}")
    print(f"{'case':<28}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases.items():
        t = [_time(lambda: fn(b), args.repeat) for b in backends]
        row = f"{name:<28}" + "".join(f"{1000 * v:>10.2f}ms" for v in t)
        if len(t) == 2:
            row += f"{t[0] / t[1]:>11.1f}x"
        print(row)

    default = _kernels._impl
    t = []
    for b in backends:
        _kernels._impl = _kernels._resolve(b)
        t.append(_time(lambda: decode(fields, DecodeConfig(jobs=1)), args.repeat))
    _kernels._impl = default
    row = f"{'full decode':<28}" + "".join(f"{1000 * v:>10.2f}ms" for v in t)
    if len(t) == 2:
        row += f"{t[0] / t[1]:>11.1f}x"
    print(row)


if __name__ == "__main__":
    main()
