"""Acceptance criteria, each at its stated tolerance.

Tests sharing a ``criterion`` marker are folded into one PASS/FAIL line in
the terminal summary (see conftest.py).
"""

import csv
import time

import numpy as np
import pytest
from scipy import stats as sps

from oracles import (
    auc_judd_bruteforce,
    nss_bruteforce,
    pearson,
    ranks_bruteforce,
    t_two_sided_series,
    wilcoxon_bruteforce,
)
from salvqa.ablation import ALPHA_GRID, N_TOK_GRID, SyntheticRunner, sweep_ablation, write_sweep_csv
from salvqa.cli import main
from salvqa.data import SyntheticSpec, generate_synthetic, sample_frames
from salvqa.flops import MODELS, flops_table, vivit_dagr_ratio
from salvqa.gradsuite import CASES, run_suite
from salvqa.objectives import (
    SaliencyLossConfig,
    auc_judd,
    cc_loss,
    cc_metric,
    kl_loss,
    normalize_map,
    nss,
    saliency_loss,
)
from salvqa.rng import RngState
from salvqa.saliency import SaliencyNet, SaliencyNetConfig
from salvqa.serialize import tree_digest
from salvqa.stats import paired_t_test, plcc, srcc, wilcoxon_signed_rank
from salvqa.tensor import Tensor, no_grad
from salvqa.training import (
    SaliencyTrainConfig,
    VQATrainConfig,
    fused_inputs,
    predict_vqa,
    train_saliency,
    train_vqa,
)
from salvqa.vqa import VQAConfig, VQAModel, fuse_clip, vqa_loss

GRADIENT = pytest.mark.criterion("Gradient integrity")
LOSSES = pytest.mark.criterion("Loss identities")
METRICS = pytest.mark.criterion("Metric oracles")
OVERFIT = pytest.mark.criterion("Overfit capability")
REGISTERS = pytest.mark.criterion("Register-token mechanics")
FUSION = pytest.mark.criterion("Fusion mechanics")
COMPLEXITY = pytest.mark.criterion("Complexity reproduction")
DETERMINISM = pytest.mark.criterion("Determinism")
SAMPLER = pytest.mark.criterion("Frame sampler")


# -- gradient integrity ------------------------------------------------------------

OPS = {
    "add", "sub", "mul", "div", "neg", "pow", "matmul", "exp", "log", "sqrt", "abs", "sigmoid", "relu",
    "tanh", "getitem", "sum_mean", "reshape_transpose_broadcast", "conv3d", "conv2d", "max_pool",
    "avg_pool", "global_avg_pool", "adaptive_avg_pool", "resize_bilinear", "upsample_trilinear",
    "concat", "softmax", "layernorm", "linear", "pad",
}
PIPELINES = {"pipeline_saliency_loss", "pipeline_vqa_loss", "pipeline_register_tokens"}


@GRADIENT
def test_gradient_suite():
    assert OPS | PIPELINES <= set(CASES)
    start = time.perf_counter()
    results = run_suite(seed=0)
    elapsed = time.perf_counter() - start
    worst = max(results, key=lambda r: r.error)
    print(f"gradcheck: {len(results)} cases, worst {worst.name} {worst.error:.2e}, {elapsed:.1f} s")
    assert all(r.error < 1e-4 for r in results), [(r.name, r.error) for r in results if r.error >= 1e-4]
    assert elapsed < 120


# -- loss identities ---------------------------------------------------------------

@LOSSES
def test_saliency_loss_identities():
    rng = np.random.default_rng(0)
    for _ in range(20):
        s = normalize_map(rng.random((3, 6, 5)))
        other = normalize_map(rng.random((3, 6, 5)))
        assert abs(kl_loss(s, s).item()) <= 1e-9
        assert abs(cc_loss(s, s).item() + 1) <= 1e-6
        assert saliency_loss(s, other, SaliencyLossConfig(gamma=0)).item() == cc_loss(s, other).item()


@LOSSES
def test_vqa_loss_identity():
    rng = np.random.default_rng(1)
    for n in (2, 3, 5, 8):
        y = rng.uniform(1, 5, size=n)
        assert vqa_loss(y, y).item() == 0.0


# -- metric oracles ----------------------------------------------------------------

def _fixations(rng, shape):
    fix = rng.random(shape) < 0.2
    fix.flat[0], fix.flat[-1] = True, False
    return fix.astype(float)


@METRICS
def test_saliency_metrics_match_bruteforce():
    rng = np.random.default_rng(10)
    for i in range(60):
        m = rng.random((5, 6))
        if i % 3 == 0:
            m = np.round(m * 4) / 4
        fix = _fixations(rng, m.shape)
        gt = rng.random(m.shape)
        assert abs(nss(m, fix) - nss_bruteforce(m, fix)) < 1e-9
        assert abs(auc_judd(m, fix) - auc_judd_bruteforce(m, fix)) < 1e-9
        assert abs(cc_metric(gt, m) - pearson(gt, m)) < 1e-9
    assert auc_judd(np.full((5, 6), 0.4), _fixations(rng, (5, 6))) == 0.5


@METRICS
def test_correlations_match_bruteforce():
    rng = np.random.default_rng(11)
    for i in range(60):
        n = int(rng.integers(3, 25))
        a, b = rng.normal(size=n), rng.normal(size=n)
        if i % 2:
            a, b = np.round(a), np.round(2 * b)
        if np.ptp(a) == 0 or np.ptp(b) == 0:
            a[0], b[0] = a[0] + 1, b[0] + 1
        assert abs(plcc(a, b) - pearson(a, b)) < 1e-9
        assert abs(srcc(a, b) - pearson(ranks_bruteforce(list(a)), ranks_bruteforce(list(b)))) < 1e-9
        # monotone transforms leave SRCC unchanged
        assert srcc(np.exp(a), b ** 3) == srcc(a, b)


@METRICS
def test_paired_t_matches_series_and_tables():
    rng = np.random.default_rng(12)
    for _ in range(60):
        n = int(rng.integers(2, 30))
        a, b = rng.normal(size=n), rng.normal(size=n) + 0.4
        res = paired_t_test(a, b)
        d = a - b
        t = d.mean() / (d.std(ddof=1) / np.sqrt(n))
        assert abs(res["statistic"] - t) < 1e-9
        assert abs(res["p_value"] - t_two_sided_series(t, n - 1)) < 1e-9
    # printed two-sided critical values
    for t, df, p in [(12.706, 1, 0.05), (2.776, 4, 0.05), (4.604, 4, 0.01), (2.228, 10, 0.05), (2.086, 20, 0.05)]:
        d = np.arange(df + 1, dtype=float)
        d -= d.mean()
        d += t * d.std(ddof=1) / np.sqrt(df + 1)
        assert abs(paired_t_test(d, np.zeros_like(d))["p_value"] - p) < 1e-3


@METRICS
def test_wilcoxon_matches_enumeration_and_tables():
    rng = np.random.default_rng(13)
    checked = 0
    while checked < 60:
        n = int(rng.integers(5, 14))
        a, b = rng.normal(size=n), rng.normal(size=n) + 0.4
        if checked % 2:
            a, b = np.round(2 * a) / 2, np.round(2 * b) / 2
        d = a - b
        if np.count_nonzero(d) < 5:
            continue
        assert abs(wilcoxon_signed_rank(a, b)["p_value"] - wilcoxon_bruteforce(list(d))) < 1e-9
        checked += 1
    # all-positive differences: 2 / 2^n; n = 5 cannot reach 0.05, n = 6 can
    assert abs(wilcoxon_signed_rank(np.arange(1, 6.0), np.zeros(5))["p_value"] - 0.0625) < 1e-3
    assert abs(wilcoxon_signed_rank(np.arange(1, 7.0), np.zeros(6))["p_value"] - 0.03125) < 1e-3
    # normal approximation agrees with the standard large-sample formula
    a, b = rng.normal(size=40), rng.normal(size=40) + 0.3
    ref = sps.wilcoxon(a, b, method="approx", correction=True).pvalue
    assert abs(wilcoxon_signed_rank(a, b)["p_value"] - ref) < 1e-9


# -- overfit capability ------------------------------------------------------------

def _overfit_saliency():
    sal, qual = generate_synthetic(SyntheticSpec(seed=0, num_saliency_videos=4, num_quality_videos=16))
    net = SaliencyNet(SaliencyNetConfig(n_tokens=4), RngState(0).spawn(1))
    history = train_saliency(net, sal, SaliencyTrainConfig(epochs=500, stop_below=-0.95))
    with no_grad():
        pred = net(np.stack([c.frames for c in sal]))
        final = saliency_loss(Tensor(np.stack([c.saliency for c in sal])[:, None]), pred).item()
    return net, history, qual, final


@pytest.fixture(scope="module")
def overfit_saliency():
    start = time.perf_counter()
    net, history, qual, final = _overfit_saliency()
    return net, history, qual, final, time.perf_counter() - start


@OVERFIT
def test_saliency_overfits_four_clips(overfit_saliency):
    _, history, _, final, elapsed = overfit_saliency
    iterations = len(history)  # four clips, batch four: one update per epoch
    print(f"saliency overfit: total {final:.4f} after {iterations} iterations, {elapsed:.1f} s")
    assert history[-1]["total"] < -0.95 and final < -0.95
    assert iterations <= 500 and elapsed < 300


@OVERFIT
def test_vqa_overfits_sixteen_videos(overfit_saliency):
    net, _, qual, _, _ = overfit_saliency
    start = time.perf_counter()
    x = fused_inputs(qual, net, 0.5)
    y = np.array([c.mos for c in qual])
    model = VQAModel(VQAConfig(), RngState(0).spawn(2))
    train_vqa(model, x, y, VQATrainConfig(lr=3e-3, epochs=40, batch_size=8))
    score = srcc(predict_vqa(model, x), y)
    elapsed = time.perf_counter() - start
    print(f"vqa overfit: train SRCC {score:.4f} on {len(qual)} videos, {elapsed:.1f} s")
    assert len(qual) == 16 and score >= 0.99 and elapsed < 600


# -- register-token mechanics ------------------------------------------------------

@REGISTERS
@pytest.mark.parametrize("n_tok", [0, *N_TOK_GRID])
def test_output_shape_independent_of_tokens(n_tok):
    net = SaliencyNet(SaliencyNetConfig(n_tokens=n_tok, token_dim=4, stage_channels=(4, 6),
                                        bottleneck_channels=8), RngState(n_tok))
    video = RngState(99).uniform(3 * 3 * 12 * 20).reshape(1, 3, 3, 12, 20)
    with no_grad():
        assert net(video).shape == (1, 1, 3, 12, 20)


@REGISTERS
def test_tokenless_equals_token_free_baseline():
    cfg = SaliencyNetConfig(n_tokens=0, stage_channels=(4, 6), bottleneck_channels=8)
    net = SaliencyNet(cfg, RngState(3))
    video = Tensor(RngState(4).uniform(3 * 2 * 8 * 12).reshape(1, 3, 2, 8, 12))
    # plain U-Net: encoder, attention-gated bottleneck, decoder on the raw clip
    z, skips = net.encode(video)
    baseline = net.decode(net.bottleneck_attention(z)[0], skips)
    assert net.reg is None and net.enc[0].weight.shape[1] == 3
    assert np.array_equal(net(video).data, baseline.data)


def _small_runner(**overrides):
    kw = dict(
        data=SyntheticSpec(seed=0, num_saliency_videos=4, num_quality_videos=12, frames_per_video=4),
        saliency=SaliencyNetConfig(stage_channels=(8, 16), bottleneck_channels=16),
        saliency_train=SaliencyTrainConfig(epochs=8),
        vqa_train=VQATrainConfig(lr=3e-3, epochs=15, batch_size=8),
        eval_split="heldout",
    )
    kw.update(overrides)
    return SyntheticRunner(**kw)


@REGISTERS
def test_token_count_sweep_table(tmp_path):
    rows = sweep_ablation("n_tok", _small_runner())
    path = write_sweep_csv(tmp_path / "sweep_n_tok.csv", rows)
    table = list(csv.DictReader(open(path)))
    assert [int(r["value"]) for r in table] == [2, 4, 8, 16]
    assert all(np.isfinite(float(r["srcc"])) and np.isfinite(float(r["plcc"])) for r in table)


# -- fusion mechanics --------------------------------------------------------------

@FUSION
def test_alpha_zero_equals_no_saliency():
    _, qual = generate_synthetic(SyntheticSpec(seed=1, num_saliency_videos=0, num_quality_videos=4,
                                               frames_per_video=3, height=12, width=12))
    net = SaliencyNet(SaliencyNetConfig(stage_channels=(4, 6), bottleneck_channels=8), RngState(2))
    with_net = fused_inputs(qual, net, 0.0)
    without = fused_inputs(qual, None, 0.0)
    assert np.array_equal(with_net, without)
    assert np.array_equal(with_net[0], np.moveaxis(qual[0].frames, 1, 0))
    maps = RngState(5).uniform(3 * 12 * 12).reshape(3, 12, 12)
    assert np.array_equal(fuse_clip(qual[0].frames, maps, 0.0), np.moveaxis(qual[0].frames, 1, 0))
    model = VQAModel(VQAConfig(alpha=0.0), RngState(6))
    assert np.array_equal(predict_vqa(model, with_net), predict_vqa(model, without))


@FUSION
def test_alpha_sweep_curve(tmp_path):
    rows = sweep_ablation("alpha", _small_runner())
    path = write_sweep_csv(tmp_path / "sweep_alpha.csv", rows)
    table = list(csv.DictReader(open(path)))
    assert [float(r["value"]) for r in table] == list(ALPHA_GRID)
    assert all(np.isfinite(float(r["srcc"])) for r in table)
    # saliency changes the inputs for every alpha > 0, so the curve is not flat
    assert len({round(float(r["plcc"]), 12) for r in table}) > 1


# -- complexity --------------------------------------------------------------------

@COMPLEXITY
def test_flops_table():
    start = time.perf_counter()
    rows = flops_table()
    ratio = vivit_dagr_ratio()
    elapsed = time.perf_counter() - start
    published = {"dagr": 59, "vivit": 141, "fastvqa": 279, "fastvqa_m": 46}
    assert [r["model"] for r in rows] == list(MODELS)
    for r in rows:
        assert abs(r["gflops"] / published[r["model"]] - 1) <= 0.15, r
    assert abs(ratio / 2.4 - 1) <= 0.10
    assert elapsed < 1.0


# -- determinism -------------------------------------------------------------------

MICRO = ["--frames", "2", "--height", "8", "--width", "8"]
MICRO_SAL = ["--num-saliency-videos", "2", *MICRO, "--stage-channels", "2,3", "--bottleneck-channels", "4",
             "--n-tok", "2", "--token-dim", "2", "--epochs", "2"]


def _twice(tmp_path, name, argv):
    dirs = [tmp_path / f"{name}-{i}" for i in (1, 2)]
    for d in dirs:
        assert main([*argv, "--run-dir", str(d)]) == 0
    a, b = (tree_digest(d) for d in dirs)
    assert a and a == b, name
    return dirs[0]


@DETERMINISM
def test_every_command_is_byte_reproducible(tmp_path):
    sal = _twice(tmp_path, "sal", ["train-saliency", "--seed", "3", *MICRO_SAL])
    ck = str(sal / "saliency_checkpoint")
    vqa = _twice(tmp_path, "vqa", ["train-vqa", "--seed", "3", "--saliency-checkpoint", ck,
                                   "--num-quality-videos", "6", *MICRO, "--epochs", "2"])
    _twice(tmp_path, "eval", ["eval", "--seed", "3", "--saliency-checkpoint", ck, "--num-quality-videos", "6",
                              *MICRO, "--vqa-checkpoint", str(vqa / "vqa_checkpoint")])
    _twice(tmp_path, "flops", ["flops"])
    _twice(tmp_path, "gradcheck", ["gradcheck", "--seed", "3", "--cases", "conv3d,pipeline_register_tokens"])
    _twice(tmp_path, "synth", ["synth", "--seed", "3", "--num-saliency-videos", "2", "--num-quality-videos", "3",
                               *MICRO])
    _twice(tmp_path, "sweep", ["sweep", "--seed", "3", "--axis", "components", "--values", "spatial-only,full",
                               "--num-quality-videos", "6", "--saliency-epochs", "1", "--vqa-epochs", "1",
                               "--eval-split", "all"])
    _twice(tmp_path, "emb", ["export-embeddings", "--seed", "3", "--saliency-checkpoint", ck,
                             "--num-saliency-videos", "2", *MICRO])


@DETERMINISM
def test_training_is_deterministic_in_process():
    spec = SyntheticSpec(seed=2, num_saliency_videos=2, num_quality_videos=2, frames_per_video=2,
                         height=8, width=8)
    sal, _ = generate_synthetic(spec)
    cfg = SaliencyNetConfig(stage_channels=(2, 3), bottleneck_channels=4)
    states = []
    for _ in range(2):
        net = SaliencyNet(cfg, RngState(7))
        train_saliency(net, sal, SaliencyTrainConfig(epochs=2))
        states.append(net.state_dict())
    assert all(np.array_equal(states[0][k], states[1][k]) for k in states[0])


# -- frame sampler -----------------------------------------------------------------

@SAMPLER
def test_frame_sampler():
    assert sample_frames(240, 8) == [15, 45, 75, 105, 135, 165, 195, 225]
    rng = np.random.default_rng(20)
    for _ in range(1000):
        L, N = int(rng.integers(1, 3000)), int(rng.integers(1, 300))
        idx = sample_frames(L, N)
        assert len(idx) == N and all(0 <= i < L for i in idx) and idx == sorted(idx)
        if N <= L:
            # evenly spread centres: each index sits within half a stride of its segment centre
            centres = (np.arange(N) + 0.5) * L / N - 0.5
            assert np.all(np.abs(np.array(idx) - centres) <= 0.5 + 1e-9)
    for n in (1, 7, 8, 60, 240):
        assert sample_frames(n, n) == list(range(n))
