"""Register-token initialisation, projection and input augmentation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from salvqa import functional as F
from salvqa.registers import RegisterTokens, augment_input, init_tokens, project_tokens
from salvqa.rng import RngState
from salvqa.saliency import SaliencyNet, SaliencyNetConfig
from salvqa.tensor import Tensor


def box_muller(u: np.ndarray) -> np.ndarray:
    """Independent Box-Muller: pair (u1, u2) -> (r cos, r sin)."""
    out = []
    for u1, u2 in u.reshape(-1, 2):
        r = math.sqrt(-2.0 * math.log(1.0 - u1))
        out += [r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2)]
    return np.array(out)


def test_init_shapes():
    assert init_tokens(4, 8, RngState(0)).R.shape == (1, 4, 8, 1, 1)
    assert init_tokens(1, 1, RngState(0)).R.shape == (1, 1, 1, 1, 1)
    for n, d in [(0, 8), (4, 0)]:
        with pytest.raises(ValueError):
            init_tokens(n, d, RngState(0))


def test_tokens_are_box_muller_normals():
    tokens = init_tokens(3, 4, RngState(11))
    expected = box_muller(RngState(11).uniform(12))
    assert np.max(np.abs(tokens.R.data.ravel() - expected)) < 1e-15


def test_seed7_redraw_mean_within_three_sigma():
    draws = np.array([init_tokens(1, 1, RngState(7).spawn(i)).R.data.item() for i in range(10_000)])
    assert abs(draws.mean()) < 3.0 / math.sqrt(10_000)


def test_projection_shape_and_zero_case():
    tokens = init_tokens(4, 8, RngState(0))
    assert project_tokens(tokens, 8, 16, 16).shape == (4, 8, 16, 16)
    tokens.R.data[...] = 0.0
    assert not project_tokens(tokens, 2, 3, 3).data.any()  # proj_b starts at zero
    with pytest.raises(ValueError):
        project_tokens(tokens, 0, 3, 3)


def test_two_token_projection_hand_oracle():
    tokens = RegisterTokens(2, 2, RngState(0))
    tokens.R.data[...] = np.array([[1.0, -2.0], [0.5, 3.0]]).reshape(1, 2, 2, 1, 1)
    tokens.proj_w.data[...] = np.array([[0.25, 1.0], [-1.0, 2.0]]).reshape(2, 2, 1, 1, 1)
    tokens.proj_b.data[...] = [0.1, -0.2]
    # token 0: 1*0.25 + -2*1 + 0.1 = -1.65; token 1: 0.5*-1 + 3*2 - 0.2 = 5.3
    out = project_tokens(tokens, 2, 3, 4).data
    assert np.array_equal(out[0], np.full((2, 3, 4), 1.0 * 0.25 + -2.0 * 1.0 + 0.1))
    assert np.array_equal(out[1], np.full((2, 3, 4), 0.5 * -1.0 + 3.0 * 2.0 - 0.2))


def test_projection_equals_grouped_conv():
    tokens = RegisterTokens(3, 5, RngState(2))
    per_token = [
        F.conv3d(tokens.R[:, i].reshape(1, 5, 1, 1, 1), tokens.proj_w[i : i + 1], tokens.proj_b[i : i + 1]).data.item()
        for i in range(3)
    ]
    out = project_tokens(tokens, 1, 2, 2).data
    np.testing.assert_allclose(out[:, 0, 0, 0], per_token, atol=1e-14)


def test_augment_channels_and_identity_slice():
    video = Tensor(RngState(1).uniform(3 * 4 * 16 * 16).reshape(3, 4, 16, 16))
    proj = project_tokens(init_tokens(4, 8, RngState(3)), 4, 16, 16)
    aug = augment_input(video, proj)
    assert aug.shape == (7, 4, 16, 16)
    assert np.array_equal(aug.data[:3], video.data)
    assert np.array_equal(aug.data[3:], proj.data)
    assert augment_input(video, None) is video
    with pytest.raises(ValueError):
        augment_input(video, project_tokens(init_tokens(4, 8, RngState(3)), 4, 8, 16))


def test_augment_batched_shares_tokens():
    video = Tensor(np.zeros((2, 3, 2, 4, 4)))
    proj = project_tokens(init_tokens(2, 3, RngState(4)), 2, 4, 4)
    aug = augment_input(video, proj).data
    assert aug.shape == (2, 5, 2, 4, 4)
    assert np.array_equal(aug[0, 3:], aug[1, 3:])


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 3), st.integers(1, 5), st.integers(1, 4), st.integers(0, 2**32))
def test_augment_slice_identity_property(c, t, n, seed):
    rng = RngState(seed)
    video = Tensor(rng.normal((c, t, 3, 2)))
    aug = augment_input(video, project_tokens(init_tokens(n, 2, rng), t, 3, 2))
    assert aug.shape[0] == c + n
    assert np.array_equal(aug.data[:c], video.data)


@pytest.mark.parametrize("n_tok", [2, 4, 8, 16])
def test_saliency_shape_independent_of_token_count(n_tok):
    cfg = SaliencyNetConfig(n_tokens=n_tok, token_dim=4, stage_channels=(2, 4), bottleneck_channels=4)
    net = SaliencyNet(cfg, RngState(0))
    out = net(np.full((1, 3, 2, 8, 8), 0.5))
    assert out.shape == (1, 1, 2, 8, 8)
    assert net.enc[0].weight.shape[1] == 3 + n_tok


def test_checkpoint_names():
    net = SaliencyNet(SaliencyNetConfig(n_tokens=4), RngState(0))
    names = [n for n, _ in net.named_parameters()]
    assert {"reg.R", "reg.proj_w", "reg.proj_b"} <= set(names)
    assert all(n.startswith(("reg.", "sal.")) for n in names)


def test_gradient_reaches_tokens():
    from salvqa.gradsuite import run_case

    assert run_case("pipeline_register_tokens", 0).error < 1e-4
