import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import random_pose
from rsgeom import fileio
from rsgeom.errors import FormatError
from rsgeom.geometry import CoordinateMap, DepthMap
from rsgeom.se3 import RowPoseTable

f32 = st.floats(-1e6, 1e6, allow_nan=False, width=32)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=f32))
def test_pfm_round_trip_gray(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("pfm") / "a.pfm"
    fileio.write_pfm(p, a)
    assert np.array_equal(fileio.read_pfm(p), a)


def test_pfm_color_and_orientation(tmp_path):
    a = np.arange(24, dtype=np.float32).reshape(2, 4, 3)
    fileio.write_pfm(tmp_path / "c.pfm", a)
    raw = (tmp_path / "c.pfm").read_bytes()
    assert raw.startswith(b"PF\n4 2\n-1.0\n")
    # first stored row is the bottom image row
    assert np.frombuffer(raw[-96:-48], "<f4")[0] == 12.0
    assert np.array_equal(fileio.read_pfm(tmp_path / "c.pfm"), a)


def test_pfm_big_endian(tmp_path):
    a = np.array([[1.5, -2.0]], dtype=">f4")
    (tmp_path / "b.pfm").write_bytes(b"Pf\n2 1\n1.0\n" + a.tobytes())
    assert np.array_equal(fileio.read_pfm(tmp_path / "b.pfm"), a.astype(np.float32))


def test_pfm_errors(tmp_path):
    (tmp_path / "x.pfm").write_bytes(b"P6\n1 1\n255\n\0\0\0")
    with pytest.raises(FormatError):
        fileio.read_pfm(tmp_path / "x.pfm")
    (tmp_path / "t.pfm").write_bytes(b"Pf\n4 4\n-1.0\n\0\0\0\0")
    with pytest.raises(FormatError):
        fileio.read_pfm(tmp_path / "t.pfm")


@settings(max_examples=30, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 5), st.integers(1, 5), st.just(2)), elements=f32))
def test_flo_round_trip(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("flo") / "a.flo"
    fileio.write_flo(p, a)
    assert np.array_equal(fileio.read_flo(p), a)


def test_flo_layout_and_errors(tmp_path):
    a = np.zeros((2, 3, 2), np.float32)
    a[0, 1] = [1.5, -2.5]
    fileio.write_flo(tmp_path / "a.flo", a)
    raw = (tmp_path / "a.flo").read_bytes()
    assert raw[:4] == b"PIEH" and np.frombuffer(raw[4:12], "<i4").tolist() == [3, 2]
    assert np.frombuffer(raw[12:], "<f4")[2:4].tolist() == [1.5, -2.5]
    (tmp_path / "b.flo").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(FormatError):
        fileio.read_flo(tmp_path / "b.flo")
    (tmp_path / "c.flo").write_bytes(raw[:-4])
    with pytest.raises(FormatError):
        fileio.read_flo(tmp_path / "c.flo")


def test_image_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (5, 7)).astype(float)
    fileio.write_image(tmp_path / "a.png", img)
    assert np.array_equal(fileio.read_image(tmp_path / "a.png"), img)
    fileio.write_image(tmp_path / "b.png", [[-3.0, 300.0, np.nan]])
    assert fileio.read_image(tmp_path / "b.png").tolist() == [[0, 255, 0]]


def test_depth_and_map_round_trip(tmp_path):
    d = DepthMap(np.array([[1.0, 0.0], [np.nan, 2.5]]))
    fileio.write_depth(tmp_path / "d.pfm", d)
    back = fileio.read_depth(tmp_path / "d.pfm")
    assert back.valid.tolist() == [[True, False], [False, True]]
    m = CoordinateMap(np.array([[[1.5, 2.0], [np.nan, np.nan]]]), np.array([[True, False]]))
    fileio.write_coordinate_map(tmp_path / "m.pfm", m)
    back = fileio.read_coordinate_map(tmp_path / "m.pfm")
    assert back.valid.tolist() == [[True, False]]
    assert back.coords[0, 0].tolist() == [1.5, 2.0]


def test_trajectory_round_trip(tmp_path, rng):
    poses = [random_pose(rng) for _ in range(5)]
    times = np.arange(5) * 0.1 + 1e9
    fileio.write_trajectory(tmp_path / "t.txt", times, poses)
    back = fileio.read_trajectory(tmp_path / "t.txt")
    assert np.allclose(back.timestamps, times, atol=1e-9, rtol=0)
    for a, b in zip(back.poses, poses):
        assert a.almost_equal(b, 1e-10)


def test_trajectory_parsing(tmp_path):
    (tmp_path / "t.txt").write_text("# comment\n0.0 1 2 3 0 0 0 1\n\n0.1 1 2 3 0 0 1 0\n")
    traj = fileio.read_trajectory(tmp_path / "t.txt")
    assert np.allclose(traj.positions[0], [1, 2, 3])
    assert np.allclose(traj.quaternions[1], [0, 0, 0, 1])
    (tmp_path / "bad.txt").write_text("0.0 1 2 3\n")
    with pytest.raises(FormatError):
        fileio.read_trajectory(tmp_path / "bad.txt")


def test_rowposes_round_trip(tmp_path, rng):
    table = RowPoseTable.from_poses([random_pose(rng, 0.1, 0.1) for _ in range(4)])
    fileio.write_rowposes(tmp_path / "r.txt", table)
    back = fileio.read_rowposes(tmp_path / "r.txt")
    assert np.allclose(back.translations, table.translations, atol=1e-11)
    assert np.allclose(back.matrices, table.matrices, atol=1e-11)


def test_imu_csv(tmp_path):
    t = np.array([0.0, 0.005])
    fileio.write_imu_csv(tmp_path / "i.csv", t, [[1, 2, 3], [4, 5, 6]], [[0, 0, 9.81]] * 2)
    s = fileio.read_imu_csv(tmp_path / "i.csv")
    assert s.frame == "imu" and s.gyro[1].tolist() == [4, 5, 6]
    (tmp_path / "bad.csv").write_text("t,a,b\n")
    with pytest.raises(FormatError):
        fileio.read_imu_csv(tmp_path / "bad.csv")


def test_config_parsing(tmp_path):
    (tmp_path / "c.cfg").write_text(
        "# camera\nfx = 250\nfy=250\ncx = 159.5\ncy = 127.5\nwidth = 320\nheight = 256\n"
        "row_period_us = 29.4737  # per sensor row\nsensor_rows = 1024\n"
        "cam_from_imu = 0 0 0 1\n")
    K, clock, cfg = fileio.load_camera(tmp_path / "c.cfg")
    assert (K.fx, K.cx, K.width) == (250, 159.5, 320)
    assert clock.scale == 4 and clock.row_period == pytest.approx(29.4737e-6)
    assert fileio.quaternion_from_config(cfg["cam_from_imu"]).tolist() == [1, 0, 0, 0]
    p = fileio.pose_from_config("0.1 0 0 0 0 0 1")
    assert p.translation.tolist() == [0.1, 0, 0]
    with pytest.raises(FormatError):
        fileio.pose_from_config("1 2 3")
    (tmp_path / "bad.cfg").write_text("no equals sign\n")
    with pytest.raises(FormatError):
        fileio.read_config(tmp_path / "bad.cfg")
    (tmp_path / "nok.cfg").write_text("fx = 1\n")
    with pytest.raises(FormatError):
        fileio.load_camera(tmp_path / "nok.cfg")
