import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrec import autodiff as ad
from hrec.autodiff import ParamSet, ShapeError, Tensor
from hrec.videonet import augment_portions, encode_video, init_videonet, num_layers, portion_groups, swap_directions


def _params(seed, sfd=4, d_h=3, vd=2, layers=1, jitter=0.1):
    rng = np.random.default_rng(seed)
    p = ParamSet(init_videonet(rng, sfd, d_h, vd, layers))
    return p.replace({k: t.data + jitter * rng.standard_normal(t.shape) for k, t in p.items()})


def test_layer_count_and_direction_shapes():
    p = _params(0, layers=3)
    assert num_layers(p) == 3
    for path in p:
        if ".fwd." in path:
            assert p[path].shape == p[path.replace(".fwd.", ".bwd.")].shape


def test_singleton_sequence(rng):
    p = _params(1)
    seg = rng.standard_normal((1, 4))
    ctx = encode_video(Tensor(seg), p)
    assert ctx.per_step.shape == (1, 6) and ctx.vector.shape == (2,)
    fwd = ad.gru_cell(Tensor(seg[0]), Tensor(np.zeros(3)), p.scope("gru.l0.fwd"))
    bwd = ad.gru_cell(Tensor(seg[0]), Tensor(np.zeros(3)), p.scope("gru.l0.bwd"))
    expected = np.concatenate([fwd.data, bwd.data]) @ p["context.W"].data + p["context.b"].data
    np.testing.assert_allclose(ctx.vector.data, expected, rtol=1e-12)
    np.testing.assert_array_equal(ctx.per_step.data[0], np.concatenate([fwd.data, bwd.data]))


def test_zero_params_give_zero_context(rng):
    p = _params(0, layers=2)
    p = p.replace({k: np.zeros(t.shape) for k, t in p.items()})
    ctx = encode_video(Tensor(rng.standard_normal((5, 4))), p)
    assert not ctx.vector.data.any() and not ctx.per_step.data.any()


def test_empty_sequence_rejected():
    with pytest.raises(ShapeError, match="non-empty"):
        encode_video(Tensor(np.zeros((0, 4))), _params(0))


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_reversal_swaps_directions(layers):
    rng = np.random.default_rng(9)
    p = _params(9, layers=layers, jitter=0.5)
    seq = rng.standard_normal((6, 4))
    a = encode_video(Tensor(seq), p).per_step.data
    b = encode_video(Tensor(seq[::-1].copy()), swap_directions(p)).per_step.data
    expected = np.concatenate([a[:, 3:], a[:, :3]], axis=1)[::-1]
    np.testing.assert_allclose(b, expected, rtol=1e-12, atol=1e-14)


def test_single_portion_is_bit_identical(rng):
    p = _params(2)
    seq = Tensor(rng.standard_normal((5, 4)))
    assert augment_portions(seq, 1, p, seed=3).data.tobytes() == encode_video(seq, p).vector.data.tobytes()


@settings(max_examples=50, deadline=None)
@given(sfd=st.integers(1, 40), data=st.data())
def test_portion_groups_partition(sfd, data):
    portions = data.draw(st.integers(1, sfd))
    groups = portion_groups(sfd, portions, data.draw(st.integers(0, 2**16)))
    assert len(groups) == portions
    sizes = [len(g) for g in groups]
    assert max(sizes) - min(sizes) <= 1
    assert sorted(np.concatenate(groups).tolist()) == list(range(sfd))


def test_too_many_portions():
    with pytest.raises(ValueError, match="portions"):
        portion_groups(4, 5, 0)


def test_two_portions_match_manual_encodes(rng):
    p = _params(4)
    seq = rng.standard_normal((3, 4))
    g0, g1 = portion_groups(4, 2, seed=11)
    m0, m1 = seq.copy(), seq.copy()
    m0[:, g1] = 0
    m1[:, g0] = 0
    manual = (encode_video(Tensor(m0), p).vector.data + encode_video(Tensor(m1), p).vector.data) / 2
    np.testing.assert_allclose(augment_portions(Tensor(seq), 2, p, seed=11).data, manual, rtol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_context_depends_on_every_segment(seed):
    rng = np.random.default_rng(seed)
    p = _params(seed, layers=2, jitter=0.5)
    seq = rng.standard_normal((5, 4))
    base = encode_video(Tensor(seq), p).vector.data
    for i in range(5):
        moved = seq.copy()
        moved[i] += 1e-3
        assert np.abs(encode_video(Tensor(moved), p).vector.data - base).max() >= 1e-7


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), t_n=st.integers(1, 30), scale=st.floats(0.1, 50))
def test_hidden_states_stay_bounded(seed, t_n, scale):
    rng = np.random.default_rng(seed)
    p = _params(seed, jitter=scale)
    seq = scale * rng.standard_normal((t_n, 4))
    steps = encode_video(Tensor(seq), p).per_step.data
    assert (np.abs(steps) < 1).all()
