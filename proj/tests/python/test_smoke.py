import numpy as np
import pytest

import posevid as pa


def test_cfg_anchors_and_affine():
    pos = np.array([[1.0, -2.0, 3.5]])
    neg = np.array([[0.5, 4.0, -1.0]])
    assert np.array_equal(pa.cfg_paired(pos, neg, 1.0), pos)
    assert np.array_equal(pa.cfg_paired(pos, neg, 0.0), neg)
    out = pa.cfg_decoupled(np.array([1.0, 1.0]), np.array([2.0, 1.0]), np.array([1.0, 3.0]), 1.0, 1.0)
    assert out.tolist() == [2.0, -1.0]
    with pytest.raises(pa.DimensionError):
        pa.cfg_paired(np.zeros(3), np.zeros(2), 1.0)


def test_masks():
    a = np.zeros((7, 7), dtype=np.uint8)
    a[3, 3] = 1
    grown = pa.dilate(a, 1)
    assert grown.sum() == 9
    assert pa.iou(a, grown) == pytest.approx(1 / 9)
    assert pa.iou(np.zeros((2, 2)), np.zeros((2, 2))) == 0.0
    body = pa.dilate(a, 2)
    assert pa.adaptive_dilation_radius([(3, 3)], body) == 2


def test_sparse_mask_is_seeded():
    a = pa.sparse_pose_mask(81, 7)
    assert a == pa.sparse_pose_mask(81, 7)
    assert a["indices"][0] == 0
    assert len(a["indices"]) == a["keep_count"]


def test_matching_and_metrics():
    attn = np.array([[1.0, 9.0], [9.0, 1.0]])
    matches = pa.match_parts(attn, [[0], [1]], [[0], [1]])
    assert [m[1] for m in matches] == [1, 0]

    frame = np.full((16, 16), 100.0)
    assert pa.psnr(frame, frame) == 100.0
    assert pa.ssim(frame, frame) == pytest.approx(1.0)
    assert pa.l1(np.zeros((4, 4)), np.full((4, 4), 255.0)) == 1.0
    with pytest.raises(pa.DomainError):
        pa.psnr(frame, np.full((16, 16), 300.0))


def test_gradcheck():
    assert pa.ptcm_gradcheck(3)["worst"] < 1e-4


def test_sample_round_trip(tmp_path):
    cfg = {"frames": 3, "steps": 2, "mode": "decoupled", "s_s": 1.5, "s_c": 0.5}
    latent, assignment = pa.sample(cfg, 5)
    again, _ = pa.sample(cfg, 5)
    assert latent.shape == (3, 8, 8, 4)
    assert np.array_equal(latent, again)
    assert assignment["seed"] == 5
    path = str(tmp_path / "z.patn")
    pa.write_patn(path, latent)
    assert np.allclose(pa.read_patn(path), latent.astype(np.float32))
