import numpy as np
import pytest

from helpers import ROW_PERIOD
from rsgeom import quaternion as quat
from rsgeom.camera import ReadoutClock
from rsgeom.errors import AlreadyInCameraFrame, CoverageGap
from rsgeom.imu import (ImuSeries, gyro_integrate_rowposes, integrate_rotation,
                        per_row_interpolate, rotate_to_camera)

CLOCK = ReadoutClock(ROW_PERIOD, 1024, 256)
Z90 = quat.from_rotvec([0, 0, np.pi / 2])


def _series(gyro_fn, t0=-0.01, t1=0.05, rate=200.0, frame="camera"):
    t = np.arange(t0, t1 + 1e-12, 1 / rate)
    g = np.array([gyro_fn(x) for x in t])
    return ImuSeries(t, g, np.zeros_like(g), frame)


def test_rotate_to_camera_examples():
    s = ImuSeries([0.0, 1.0], [[1, 0, 0], [1, 0, 0]], [[0, 0, 9.81]] * 2)
    same = rotate_to_camera(s, quat.IDENTITY)
    assert np.allclose(same.gyro, s.gyro) and same.frame == "camera"
    rot = rotate_to_camera(s, Z90)
    assert np.allclose(rot.gyro, [[0, 1, 0]] * 2, atol=1e-15)
    assert np.allclose(rot.accel, s.accel, atol=1e-15)
    with pytest.raises(AlreadyInCameraFrame):
        rotate_to_camera(rot, Z90)


def test_per_row_interpolate_examples():
    s = _series(lambda t: [0.3, -0.2, 1.0])
    g, a = per_row_interpolate(s, CLOCK)
    assert g.shape == (256, 3) and np.allclose(g, [0.3, -0.2, 1.0])
    T = CLOCK.image_row_times()[-1]
    mid = ImuSeries([0.0, 2 * CLOCK.image_row_times()[128]], [[0, 0, 0], [2, 0, 0]], np.zeros((2, 3)))
    g, _ = per_row_interpolate(mid, CLOCK)
    assert np.allclose(g[128], [1, 0, 0])
    late = ImuSeries([1e-6, T + 1], np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(CoverageGap):
        per_row_interpolate(late, CLOCK)


def test_zero_gyro_gives_identity():
    table = gyro_integrate_rowposes(_series(lambda t: [0, 0, 0]), CLOCK)
    assert np.array_equal(table.quats, np.tile([1.0, 0, 0, 0], (256, 1)))
    assert np.array_equal(table.translations, np.zeros((256, 3)))


def test_constant_rate_closed_form():
    table = gyro_integrate_rowposes(_series(lambda t: [0, 0, 10.0]), CLOCK)
    expected = 10 * 255 * 4 * 29.4737e-6
    rv = quat.to_rotvec(table.quats[-1])
    assert abs(rv[2] - expected) < 1e-9
    assert np.allclose(rv[:2], 0, atol=1e-15)


def test_gyro_requires_camera_frame():
    with pytest.raises(ValueError):
        gyro_integrate_rowposes(_series(lambda t: [0, 0, 1], frame="imu"), CLOCK)


def test_bias_is_subtracted():
    s = _series(lambda t: [0.1, 0.2, 0.3])
    table = gyro_integrate_rowposes(s, CLOCK, bias=[0.1, 0.2, 0.3])
    assert np.allclose(table.quats, [1, 0, 0, 0], atol=1e-15)


def sinusoid(t):
    t = np.asarray(t)
    return np.stack([3 * np.sin(40 * t), 2 * np.cos(25 * t), 5 + np.sin(60 * t)], axis=-1)


def midpoint_errors(times, levels):
    ref = integrate_rotation(sinusoid, times, substeps=4096)[-1]
    return [float(quat.angle_between(integrate_rotation(sinusoid, times, s)[-1], ref))
            for s in levels]


def test_midpoint_rule_is_second_order():
    times = np.linspace(0.0, 0.03, 9)
    errs = midpoint_errors(times, [1, 2, 4, 8])
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), orders


def test_imu_series_validation():
    with pytest.raises(ValueError):
        ImuSeries([0.0, 0.0], np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ImuSeries([0.0, 1.0], np.zeros((2, 3)), np.zeros((3, 3)))
