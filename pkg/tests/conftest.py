import numpy as np
import pytest

from waterline.features import ChartQuery, ImuSample
from waterline.geometry import CameraModel


@pytest.fixture
def camera():
    return CameraModel.default()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_imu(rng, pitch_roll=10.0):
    return ImuSample(
        pitch_deg=rng.uniform(-pitch_roll, pitch_roll),
        roll_deg=rng.uniform(-pitch_roll, pitch_roll),
        heading_deg=rng.uniform(-180.0, 180.0),
    )


def random_query(rng, max_bearing=40.0):
    return ChartQuery(
        distance_m=rng.uniform(5.0, 1000.0),
        bearing_deg=rng.uniform(-max_bearing, max_bearing),
    )
