"""Tactile imagery to pin-display and compliant-stage commands."""

from .core import DepthMap, GelFrame, SensorGeometry, MM_PER_PX
from .synthgel import ContactShape, MarkerField, apply_shear, press_shape, render_frame
from .depthmap import GradientLUT, calibrate, infer_gradients, integrate, marker_mask
from .markers import CorrectionThresholds, MarkerState, correct, init_markers, track
from .shear import ShearEstimate, estimate
from .stagekin import (
    StageCalibration,
    StagePose,
    TabAngles,
    forward,
    jacobian,
    reference_calibration,
    solve_ik,
)
from .actuation import PinDisplayModel, PinTargets, SamplingGrid, encode_command, sample
from .pipeline import Pipeline, PipelineConfig

__version__ = "0.1.0"
