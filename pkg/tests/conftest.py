import numpy as np
import pytest

from sportfield.core import (
    NUM_TYPES,
    FieldSet,
    GridSpec,
    InstanceMask,
    Keypoint,
    KeypointType,
    Scene,
    Skeleton,
)


def square_mask(x0, y0, side, width, instance_id=0):
    xs, ys = np.meshgrid(np.arange(x0, x0 + side), np.arange(y0, y0 + side))
    return InstanceMask.from_coords(xs.ravel(), ys.ravel(), width, instance_id)


def dense_fuse(conf, loc, sigma, grid):
    """Untruncated sum of Gaussians, every cell against every pixel."""
    ys, xs = np.mgrid[0:grid.height, 0:grid.width].astype(float)
    out = np.zeros(grid.shape)
    h, w = conf.shape
    for uy in range(h):
        for ux in range(w):
            c = conf[uy, ux]
            if c == 0:
                continue
            tx = (ux + 0.5) * grid.stride + loc[uy, ux, 0]
            ty = (uy + 0.5) * grid.stride + loc[uy, ux, 1]
            s = sigma[uy, ux]
            out += c * np.exp(-((xs - tx) ** 2 + (ys - ty) ** 2) / (2 * s * s))
    return out


def random_fieldset(rng, grid, supervised_frac=0.3):
    """Random prediction / target pair on ``grid`` for loss tests."""
    lo = (NUM_TYPES,) + grid.low_shape
    hi = grid.shape
    target_conf = (rng.random(lo) < supervised_frac).astype(float)
    target = FieldSet.from_linear(
        grid,
        (rng.random(hi) < 0.4).astype(float),
        rng.normal(0, 5, hi + (2,)),
        target_conf,
        rng.normal(0, 3, lo + (2,)),
        np.where(target_conf > 0, rng.uniform(1, 6, lo), 0.0),
        np.ones(lo),
    )
    pred = FieldSet.from_linear(
        grid,
        rng.uniform(0.05, 0.95, hi),
        rng.normal(0, 5, hi + (2,)),
        rng.uniform(0.05, 0.95, lo),
        rng.normal(0, 3, lo + (2,)),
        rng.uniform(0.5, 8, lo),
        rng.uniform(0.3, 3, lo),
    )
    return pred, target


@pytest.fixture
def grid():
    return GridSpec(128, 96, 8)


@pytest.fixture
def two_player_scene(grid):
    m0 = square_mask(10, 10, 20, grid.width, 0)
    m1 = square_mask(70, 40, 24, grid.width, 1)
    s0 = Skeleton.from_keypoints(
        [Keypoint(KeypointType.LEFT_EAR, 15.3, 14.2), Keypoint(KeypointType.RIGHT_ANKLE, 22.7, 27.1)], 0
    )
    s1 = Skeleton.from_keypoints([Keypoint(KeypointType.NOSE, 80.0, 45.5)], 1)
    ball = square_mask(50, 70, 5, grid.width, -1)
    return Scene(grid, ball, [(m0, s0), (m1, s1)])


# --- acceptance verdict lines -------------------------------------------------

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(name, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
