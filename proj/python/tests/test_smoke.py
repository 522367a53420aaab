import math

import numpy as np
import pytest

import dpcc


def small_model():
    return dpcc.Model(widths=[2, 4], lambdas=[2.0, 6.0], hyper_width=2, seed=1)


def test_synth_and_voxel_ranges():
    frames = dpcc.synth_sequence("two-blob", points=800, frames=3, translation=(1, 0, 0), seed=4)
    assert len(frames) == 3
    for f in frames:
        assert f.shape[1] == 3
        assert f.min() >= 0 and f.max() < 64
    again = dpcc.synth_sequence("two-blob", points=800, frames=3, translation=(1, 0, 0), seed=4)
    assert all(np.array_equal(a, b) for a, b in zip(frames, again))


def test_ply_round_trip(tmp_path):
    pts = np.random.default_rng(0).integers(0, 1024, size=(1000, 3)).astype(float)
    path = str(tmp_path / "a.ply")
    dpcc.write_ply(path, pts, bit_depth=10)
    assert np.array_equal(dpcc.read_ply(path), pts)


def test_encode_decode_fixed_route():
    model = small_model()
    frames = dpcc.synth_sequence("sphere", points=600, frames=3, translation=(1, 0, 0), seed=2)
    out = dpcc.encode(model, frames, route=1, gof_size=2)
    assert isinstance(out["bitstream"], bytes)
    assert out["routes"] == [1, 1, 1]
    decoded = dpcc.decode(model, out["bitstream"])
    assert len(decoded) == 3
    for a, b in zip(decoded, out["reconstructions"]):
        assert np.array_equal(a, b)
    assert dpcc.encode(model, frames, route=1, gof_size=2)["bitstream"] == out["bitstream"]


def test_encode_needs_route_or_target():
    with pytest.raises(dpcc.Error):
        dpcc.encode(small_model(), [np.zeros((1, 3))])


def test_metrics():
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 0.0, 0.0]])
    assert dpcc.d1_psnr(a, b, 10) == pytest.approx(10 * math.log10(3 * 1023**2), abs=1e-9)
    assert dpcc.d1_psnr(a, a, 10) == 100.0
    curve = [(0.05, 58.0), (0.1, 61.2), (0.2, 64.1), (0.4, 66.8)]
    assert dpcc.bd_rate(curve, curve) == 0.0
    doubled = [(2 * r, p) for r, p in curve]
    assert dpcc.bd_rate(curve, doubled) == pytest.approx(100.0, abs=0.5)
    assert dpcc.bitrate_error(0.202, 0.2) == pytest.approx(1.0)


def test_rate_control_formulas():
    assert dpcc.allocate_target(0.2, 10, 1.9, 4) == pytest.approx(0.225)
    assert dpcc.select_route([0.1, 0.2, 0.3], 0.25, 0.2, 10, 1.9) == 2
    assert dpcc.select_route([0.1, 0.2, 0.3], 0.15, 0.2, 10, 2.1) == 0


def test_tiny_training_run():
    cfg = "\n".join([
        "pretrain_iters = 1", "joint_iters = 1", "posttrain_iters = 1",
        "sequences = 1", "frames = 2", "points = 300",
        "widths = 2,4", "lambdas = 2,6", "hyper_width = 2",
    ])
    model = dpcc.train(cfg, seed=3, gof_size=2)
    assert model.routes == 2
    frames = dpcc.synth_sequence(points=300, frames=2, seed=5)
    out = dpcc.encode(model, frames, target_bpp=1.0, gof_size=2)
    assert len(out["trace"]) == 2
    assert out["trace"][0]["route"] == 1
