import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from sportfield.core import (
    BODY_PARTS,
    NUM_TYPES,
    DomainError,
    FieldSet,
    GridSpec,
    InstanceMask,
    Keypoint,
    KeypointType,
    Scene,
    Skeleton,
    cell_center,
    patch_cells,
)


def test_keypoint_vocabulary():
    assert NUM_TYPES == 19
    assert [k.value for k in KeypointType] == list(range(19))
    assert KeypointType.BALL == 17 and KeypointType.PLY == 18
    assert len(BODY_PARTS) == 17 and BODY_PARTS[0] == KeypointType.NOSE
    assert KeypointType.from_label("left_ankle") == KeypointType.LEFT_ANKLE
    with pytest.raises(DomainError):
        KeypointType.from_label("tail")


def test_grid_low_res():
    g = GridSpec(640, 480, 8)
    assert g.low_shape == (60, 80)
    assert g.low_width * g.low_height == g.num_pixels // 64
    # non-divisible sizes round up
    assert GridSpec(641, 641, 8).low_shape == (81, 81)


@pytest.mark.parametrize(
    "u, stride, expected",
    [((0, 0), 8, (4.0, 4.0)), ((12, 12), 8, (100.0, 100.0)), ((1, 0), 4, (6.0, 2.0))],
)
def test_cell_center(u, stride, expected):
    assert cell_center(u, GridSpec(256, 256, stride)) == expected


def test_cell_center_out_of_grid():
    with pytest.raises(DomainError):
        cell_center((32, 0), GridSpec(256, 256, 8))
    with pytest.raises(DomainError):
        cell_center((-1, 0), GridSpec(256, 256, 8))


def test_patch_cells_interior():
    cells = patch_cells((100, 100), GridSpec(256, 256, 8))
    assert sorted(cells) == sorted((c, r) for c in range(11, 15) for r in range(11, 15))


@pytest.mark.parametrize("p", [(4, 4), (0.1, 0.1)])
def test_patch_cells_corner(p):
    cells = patch_cells(p, GridSpec(256, 256, 8))
    assert sorted(cells) == sorted((c, r) for c in range(3) for r in range(3))


@given(
    st.floats(0, 255.999, allow_nan=False),
    st.floats(0, 199.999, allow_nan=False),
    st.sampled_from([4, 8]),
)
def test_patch_centres_near_point(x, y, stride):
    g = GridSpec(256, 200, stride)
    cells = patch_cells((x, y), g)
    assert 1 <= len(cells) <= 16
    for u in cells:
        cx, cy = cell_center(u, g)
        assert math.hypot(cx - x, cy - y) <= 2.5 * stride * math.sqrt(2)
        assert abs(cx - x) <= 2.5 * stride and abs(cy - y) <= 2.5 * stride


@given(st.integers(0, 31), st.integers(0, 24))
def test_patch_contains_own_cell(ux, uy):
    g = GridSpec(256, 200, 8)
    assert (ux, uy) in patch_cells(cell_center((ux, uy), g), g)


def test_fieldset_rejects_bad_sigma_and_scale(grid):
    z = FieldSet.zeros(grid)
    conf = np.zeros_like(z.conf)
    conf[3, 2, 2] = 0.5
    sigma = np.ones_like(conf)
    sigma[3, 2, 2] = 0.0
    with pytest.raises(DomainError):
        FieldSet.from_linear(grid, z.semantic, z.offsets, conf, z.loc, sigma, np.ones_like(conf))
    with pytest.raises(DomainError):
        FieldSet.from_linear(grid, z.semantic, z.offsets, conf, z.loc, np.ones_like(conf), -sigma)
    # zero size is fine where nothing is predicted
    sigma[3, 2, 2] = 2.0
    sigma[0] = 0.0
    f = FieldSet.from_linear(grid, z.semantic, z.offsets, conf, z.loc, sigma, np.ones_like(conf))
    assert f.sigma[3, 2, 2] == pytest.approx(2.0)
    assert f.sigma[0].max() == 0.0


def test_fieldset_shape_and_range_checks(grid):
    z = FieldSet.zeros(grid)
    with pytest.raises(DomainError):
        z.replace(semantic=np.zeros((3, 3)))
    with pytest.raises(DomainError):
        z.replace(conf=np.full(z.conf.shape, 1.5))
    assert not z.semantic.flags.writeable


def test_keypoint_confidence_range():
    with pytest.raises(DomainError):
        Keypoint(KeypointType.NOSE, 1, 1, 1.2)


def test_skeleton_confidence_is_mean_of_parts():
    s = Skeleton.from_keypoints(
        [Keypoint(KeypointType.NOSE, 0, 0, 0.2), Keypoint(KeypointType.LEFT_HIP, 1, 1, 0.6)]
    )
    assert s.confidence == pytest.approx(0.4)
    assert Skeleton({}).confidence == 0.0
    with pytest.raises(DomainError):
        Skeleton({KeypointType.BALL: Keypoint(KeypointType.BALL, 0, 0)})


def test_instance_mask_geometry():
    m = InstanceMask.from_coords([0, 1, 0, 1, 1], [0, 0, 1, 1, 1], width=10)
    assert len(m) == 4
    assert m.centroid(10) == (0.5, 0.5)
    assert m.bbox_size(10) == 2.0
    assert m.contains(0.4, 1.2, 10) and not m.contains(2.0, 0.0, 10)


def test_scene_rejects_empty_or_outside_masks(grid):
    with pytest.raises(DomainError):
        Scene(grid, None, [(InstanceMask([]), Skeleton({}))])
    with pytest.raises(DomainError):
        Scene(grid, InstanceMask([grid.num_pixels]))
