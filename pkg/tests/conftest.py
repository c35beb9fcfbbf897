import numpy as np
import pytest

from gelpins import depthmap as dm
from gelpins import scenarios
from gelpins import stagekin as sk
from gelpins.core import SensorGeometry
from gelpins.synthgel import ContactShape, make_marker_field, press_shape, render_frame


@pytest.fixture(scope="session")
def geometry():
    return SensorGeometry()


@pytest.fixture(scope="session")
def lut():
    frames = [f for f, _ in scenarios.generate("calibration")]
    return dm.calibrate(frames)


@pytest.fixture(scope="session")
def stage_cal():
    return sk.reference_calibration()


@pytest.fixture(scope="session")
def marker_field():
    return make_marker_field()


@pytest.fixture(scope="session")
def rest_frame(marker_field):
    flat = press_shape(ContactShape("sphere", 4.0, 0.0))
    return render_frame(flat, marker_field)


@pytest.fixture(scope="session")
def flat_depth():
    return press_shape(ContactShape("sphere", 4.0, 0.0))


@pytest.fixture(scope="session")
def sphere_depth():
    return press_shape(ContactShape("sphere", 4.0, 1.0))
