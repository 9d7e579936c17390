"""Field encoding, training losses, decoding and evaluation for joint ball
detection, player instance segmentation and pose estimation."""
from ._kernels import BACKEND
from .core import (
    BODY_PARTS,
    PosePart,
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
from .decode import DecodeConfig, DecodeResult, decode
from .encode import EncodeConfig, encode
from .loss import LossBreakdown, LossWeights, grad_total, loss_total

__version__ = "0.1.0"
