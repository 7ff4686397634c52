import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hrec import autodiff as ad
from hrec.autodiff import ParamSet, ShapeError, Tensor, grad_check
from hrec.evaluator import top_k_summary
from hrec.highlightnet import hidden_widths, init_highlight, predict_importance, supervised_loss


def _params(seed, sfd=5, vd=3):
    rng = np.random.default_rng(seed)
    p = ParamSet(init_highlight(rng, sfd, vd))
    return p.replace({k: t.data + 0.1 * rng.standard_normal(t.shape) for k, t in p.items()})


def test_hidden_widths():
    assert hidden_widths(256, 256) == (256, 128)
    assert hidden_widths(5, 3) == (4, 2)
    assert ParamSet(init_highlight(np.random.default_rng(0), 5, 3))["fc1.W"].shape == (8, 4)


def test_zero_params_give_zero_scores(rng):
    p = _params(0)
    p = p.replace({k: np.zeros(t.shape) for k, t in p.items()})
    out = predict_importance(Tensor(rng.standard_normal((4, 5))), Tensor(rng.standard_normal(3)), p)
    assert out.shape == (4,) and not out.data.any()


def test_identical_segments_score_identically(rng):
    row = rng.standard_normal(5)
    segs = np.stack([row, rng.standard_normal(5), row])
    out = predict_importance(Tensor(segs), Tensor(rng.standard_normal(3)), _params(1)).data
    assert out[0] == out[2]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**16), t_n=st.integers(1, 9))
def test_permutation_equivariance(seed, t_n):
    rng = np.random.default_rng(seed)
    p = _params(seed)
    segs, ctx = rng.standard_normal((t_n, 5)), Tensor(rng.standard_normal(3))
    perm = rng.permutation(t_n)
    a = predict_importance(Tensor(segs), ctx, p).data
    b = predict_importance(Tensor(segs[perm]), ctx, p).data
    np.testing.assert_array_equal(b, a[perm])


def test_context_gradient_matches_finite_differences():
    rng = np.random.default_rng(6)
    p = _params(6).merged(ParamSet({"ctx": rng.standard_normal(3)}))
    segs = Tensor(rng.standard_normal((4, 5)))
    assert grad_check(lambda ps: ad.sum_all(predict_importance(segs, ps["ctx"], ps)), p) <= 1e-4


def test_width_mismatch(rng):
    with pytest.raises(ShapeError, match="input width"):
        predict_importance(Tensor(rng.standard_normal((2, 4))), Tensor(rng.standard_normal(3)), _params(0))


def test_supervised_loss_cases():
    target = np.array([0.2, 0.5, 0.9])
    assert supervised_loss(Tensor(target), target).item() == 0.0
    assert supervised_loss(Tensor(target + 0.25), target).item() == pytest.approx(0.0625, abs=1e-15)


def test_supervised_loss_matches_oracle(rng):
    import oracles

    pred, target = rng.standard_normal(7), rng.standard_normal(7)
    assert supervised_loss(Tensor(pred), target).item() == pytest.approx(oracles.mse(pred, target), rel=1e-12)


def test_top_k_depends_only_on_score_order(rng):
    scores = predict_importance(Tensor(rng.standard_normal((8, 5))), Tensor(rng.standard_normal(3)), _params(2)).data
    assert top_k_summary(scores, 3) == top_k_summary(scores + 7.5, 3) == top_k_summary(2 * scores, 3)
