import numpy as np
import pytest

from hrec import autodiff as ad
from hrec.autodiff import ParamSet, ShapeError, Tensor, grad_check
from hrec.segnet import bottleneck_width, encode_frames, fuse_segment, init_segnet, segnet_forward


def _params(seed, fd=4, wd=3, sfd=6, k=3, jitter=0.1):
    rng = np.random.default_rng(seed)
    p = ParamSet(init_segnet(rng, fd, wd, sfd, k))
    return p.replace({name: t.data + jitter * rng.standard_normal(t.shape) for name, t in p.items()})


def _zero(p):
    return p.replace({name: np.zeros(t.shape) for name, t in p.items()})


@pytest.mark.parametrize("sfd", [1, 4, 5, 256])
def test_bottleneck_is_narrower(sfd):
    assert bottleneck_width(sfd) == -(-sfd // 4)
    assert bottleneck_width(sfd) < sfd + 1


def test_zero_params_give_zero_output(rng):
    p = _zero(_params(0))
    frames = Tensor(rng.standard_normal((3, 8, 4)))
    out = segnet_forward(frames, Tensor(rng.standard_normal((3, 3))), p)
    assert out.shape == (3, 6)
    assert not out.data.any()
    assert not encode_frames(frames, p).data.any()


@pytest.mark.parametrize("fd,wd,sfd", [(1, 1, 1), (4, 3, 6), (7, 2, 9)])
def test_output_width_is_sfd(fd, wd, sfd):
    rng = np.random.default_rng(fd)
    p = _params(1, fd, wd, sfd)
    out = segnet_forward(Tensor(rng.standard_normal((2, 5, fd))), Tensor(rng.standard_normal((2, wd))), p)
    assert out.shape == (2, sfd)


def test_constant_sequence_is_length_invariant():
    p = _params(2)
    row = np.random.default_rng(3).standard_normal(4)
    outs = [encode_frames(Tensor(np.tile(row, (t_g, 1))), p).data for t_g in (5, 6, 11, 32)]
    for o in outs[1:]:
        np.testing.assert_allclose(o, outs[0], rtol=1e-12, atol=1e-12)


def test_short_sequence_rejected(rng):
    with pytest.raises(ShapeError, match="shorter than kernel"):
        encode_frames(Tensor(rng.standard_normal((4, 4))), _params(0))


def test_fusion_width_mismatch(rng):
    p = _params(0)
    with pytest.raises(ShapeError, match="fuse_segment"):
        fuse_segment(Tensor(rng.standard_normal(6)), Tensor(rng.standard_normal(5)), p)


def test_segments_are_encoded_independently(rng):
    p = _params(4)
    frames = rng.standard_normal((4, 7, 4))
    feats = Tensor(rng.standard_normal((4, 3)))
    base = segnet_forward(Tensor(frames), feats, p).data
    edited = frames.copy()
    edited[2] += rng.standard_normal((7, 4))
    out = segnet_forward(Tensor(edited), feats, p).data
    np.testing.assert_array_equal(np.delete(out, 2, axis=0), np.delete(base, 2, axis=0))
    assert np.abs(out[2] - base[2]).max() > 1e-3


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4, 5])
def test_gradient_check(seed):
    rng = np.random.default_rng(seed)
    p = _params(seed).merged(ParamSet({"frames": rng.standard_normal((2, 6, 4)), "feats": rng.standard_normal((2, 3))}))
    R = rng.standard_normal((2, 6))

    def loss(ps):
        return ad.sum_all(ad.mul(segnet_forward(ps["frames"], ps["feats"], ps), Tensor(R)))

    assert grad_check(loss, p) <= 1e-4


def test_segment_features_influence_output():
    rng = np.random.default_rng(5)
    p = _params(5)
    v_r = Tensor(rng.standard_normal(6))
    v_w = rng.standard_normal(3)
    h = 1e-4
    worst = 0.0
    for j in range(3):
        up, down = v_w.copy(), v_w.copy()
        up[j] += h
        down[j] -= h
        diff = (fuse_segment(v_r, Tensor(up), p).data - fuse_segment(v_r, Tensor(down), p).data) / (2 * h)
        worst = max(worst, np.abs(diff).max())
    assert worst >= 1e-6


def test_dropout_mask_applies(rng):
    p = _params(0)
    v_r, v_w = Tensor(rng.standard_normal(6)), Tensor(rng.standard_normal(3))
    out = fuse_segment(v_r, v_w, p, dropout_mask=np.zeros(6))
    np.testing.assert_allclose(out.data, p["out.b"].data)
