"""Command-line entry point.

Every subcommand resolves its configuration as defaults < JSON file
(``--config``) < flags, writes the resolved configuration to a fresh run
directory ``<out>/<timestamp>-seed<seed>`` before doing any work, then writes
its artifacts and a ``report.json``. Artifacts never contain timestamps, so a
re-run with the same configuration and seed reproduces them byte for byte.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 verification failure.
Failures print ``{"error": {...}}`` on stderr (and into the run directory when
one exists).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .ablation import (
    AXES,
    SyntheticRunner,
    export_register_embeddings,
    sweep_ablation,
    write_csv,
    write_embeddings_csv,
    write_predictions_csv,
    write_sweep_csv,
)
from .data import SyntheticSpec, generate_synthetic, load_dataset, split_ids, write_dataset
from .flops import flops_table, vivit_dagr_ratio
from .gradsuite import CASES, run_suite
from .objectives import auc_judd, cc_metric, nss
from .rng import RngState
from .saliency import SaliencyNet, SaliencyNetConfig
from .serialize import load_tensors, read_manifest, save_tensors, tree_digest
from .stats import paired_t_test, plcc, srcc, wilcoxon_signed_rank
from .training import (
    SaliencyTrainConfig,
    VQATrainConfig,
    fused_inputs,
    predict_saliency,
    predict_vqa,
    train_saliency,
    train_vqa,
)
from .vqa import VQAConfig, VQAModel

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class VerificationError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _synthetic_defaults() -> dict:
    spec = SyntheticSpec().to_dict()
    spec.pop("seed")  # the run seed is used
    return spec


def _without_seed(d: dict) -> dict:
    d = dict(d)
    d.pop("seed", None)
    return d


def default_config(command: str) -> dict:
    data = {"path": None, "synthetic": _synthetic_defaults()}
    if command == "train-saliency":
        return {"seed": None, "data": data, "split": "train",
                "model": SaliencyNetConfig().to_dict(), "train": _without_seed(SaliencyTrainConfig().to_dict())}
    if command == "train-vqa":
        return {"seed": None, "data": data, "split": "train", "saliency_checkpoint": None,
                "model": VQAConfig().to_dict(), "train": _without_seed(VQATrainConfig().to_dict())}
    if command == "eval":
        return {"seed": None, "data": data, "split": "test", "saliency_checkpoint": None,
                "vqa_checkpoint": None, "predictions": None, "baseline": None, "baseline_checkpoint": None}
    if command == "flops":
        return {"seed": 0, "flop_per_mac": 1.0}
    if command == "gradcheck":
        return {"seed": None, "cases": None, "tolerance": 1e-4}
    if command == "synth":
        return {"seed": None, "synthetic": _synthetic_defaults()}
    if command == "sweep":
        runner = SyntheticRunner.__dataclass_fields__
        return {
            "seed": None,
            "axis": "n_tok",
            "values": None,
            "synthetic": _synthetic_defaults(),
            "saliency": SaliencyNetConfig().to_dict(),
            "saliency_train": _without_seed(runner["saliency_train"].default_factory().to_dict()),
            "vqa": VQAConfig().to_dict(),
            "vqa_train": _without_seed(runner["vqa_train"].default_factory().to_dict()),
            "eval_split": "heldout",
        }
    if command == "export-embeddings":
        return {"seed": None, "data": data, "split": "all", "saliency_checkpoint": None}
    raise UsageError(f"unknown command {command!r}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes"):
        return True
    if text.lower() in ("0", "false", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


_DATA_FLAGS = [
    ("--data", "data.path", str, "dataset root (omit to generate synthetic data from the seed)"),
    ("--num-saliency-videos", "data.synthetic.num_saliency_videos", int, None),
    ("--num-quality-videos", "data.synthetic.num_quality_videos", int, None),
    ("--frames", "data.synthetic.frames_per_video", int, None),
    ("--height", "data.synthetic.height", int, None),
    ("--width", "data.synthetic.width", int, None),
]

FLAGS = {
    "train-saliency": _DATA_FLAGS + [
        ("--split", "split", str, "split to train on"),
        ("--lr", "train.lr", float, None),
        ("--batch-size", "train.batch_size", int, None),
        ("--epochs", "train.epochs", int, None),
        ("--gamma", "train.gamma", float, "KL weight"),
        ("--warmup-steps", "train.warmup_steps", int, None),
        ("--stop-below", "train.stop_below", float, "stop once the epoch loss is below this"),
        ("--n-tok", "model.n_tokens", int, "register tokens (0 disables)"),
        ("--token-dim", "model.token_dim", int, None),
        ("--stage-channels", "model.stage_channels", _int_list, "comma-separated widths"),
        ("--bottleneck-channels", "model.bottleneck_channels", int, None),
    ],
    "train-vqa": _DATA_FLAGS + [
        ("--split", "split", str, "split to train on"),
        ("--saliency-checkpoint", "saliency_checkpoint", str, "frozen saliency checkpoint directory"),
        ("--alpha", "model.alpha", float, "saliency fusion weight"),
        ("--use-spatial", "model.use_spatial", _bool, None),
        ("--use-temporal", "model.use_temporal", _bool, None),
        ("--beta", "train.beta", float, "rank-loss weight"),
        ("--temperature", "train.temperature", float, "soft-rank temperature"),
        ("--lr", "train.lr", float, None),
        ("--lr-min", "train.lr_min", float, None),
        ("--batch-size", "train.batch_size", int, None),
        ("--epochs", "train.epochs", int, None),
    ],
    "eval": _DATA_FLAGS + [
        ("--split", "split", str, None),
        ("--saliency-checkpoint", "saliency_checkpoint", str, None),
        ("--vqa-checkpoint", "vqa_checkpoint", str, None),
        ("--predictions", "predictions", str, "prediction CSV (video_id, mos_true, mos_pred)"),
        ("--baseline", "baseline", str, "baseline prediction CSV for paired tests"),
        ("--baseline-checkpoint", "baseline_checkpoint", str, "baseline VQA checkpoint for paired tests"),
    ],
    "flops": [("--flop-per-mac", "flop_per_mac", float, "1 counts MACs, 2 counts multiply and add")],
    "gradcheck": [
        ("--cases", "cases", _str_list, "comma-separated case names (default: all)"),
        ("--tolerance", "tolerance", float, None),
    ],
    "synth": [
        ("--num-saliency-videos", "synthetic.num_saliency_videos", int, None),
        ("--num-quality-videos", "synthetic.num_quality_videos", int, None),
        ("--frames", "synthetic.frames_per_video", int, None),
        ("--source-length", "synthetic.source_length", int, None),
        ("--height", "synthetic.height", int, None),
        ("--width", "synthetic.width", int, None),
        ("--max-noise", "synthetic.max_noise", float, None),
    ],
    "sweep": [
        ("--axis", "axis", str, f"one of {sorted(AXES)}"),
        ("--values", "values", _str_list, "comma-separated values (default: the axis grid)"),
        ("--num-quality-videos", "synthetic.num_quality_videos", int, None),
        ("--saliency-epochs", "saliency_train.epochs", int, None),
        ("--vqa-epochs", "vqa_train.epochs", int, None),
        ("--vqa-lr", "vqa_train.lr", float, None),
        ("--eval-split", "eval_split", str, "heldout or all"),
    ],
    "export-embeddings": _DATA_FLAGS + [
        ("--split", "split", str, None),
        ("--saliency-checkpoint", "saliency_checkpoint", str, None),
    ],
}

HELP = {
    "train-saliency": "train the register-token saliency net",
    "train-vqa": "train the quality model on frozen saliency",
    "eval": "score predictions and run paired significance tests",
    "flops": "print the analytic compute table",
    "gradcheck": "run the finite-difference gradient suite",
    "synth": "write a seeded synthetic dataset",
    "sweep": "run an ablation sweep on synthetic data",
    "export-embeddings": "export per-video register-token embeddings",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="salvqa", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"salvqa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, flags in FLAGS.items():
        p = sub.add_parser(command, help=HELP[command])
        p.add_argument("--config", help="JSON config file (overridden by flags)")
        p.add_argument("--seed", type=int, help="random seed (required unless in --config)")
        p.add_argument("--out", default="runs", help="root for run directories")
        p.add_argument("--run-dir", help="explicit run directory instead of <out>/<timestamp>-seed<seed>")
        for flag, path, typ, help_text in flags:
            p.add_argument(flag, dest="set:" + path, type=typ, default=None, help=help_text)
    return parser


def _merge(base: dict, override: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in out:
            raise UsageError(f"unknown config key {where + key!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _set(cfg: dict, path: str, value) -> None:
    node = cfg
    keys = path.split(".")
    for k in keys[:-1]:
        node = node[k]
    node[keys[-1]] = value


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = default_config(args.command)
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must hold a JSON object")
        file_cfg.pop("command", None)
        cfg = _merge(cfg, file_cfg)
    for key, value in vars(args).items():
        if key.startswith("set:") and value is not None:
            _set(cfg, key[4:], value)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if cfg.get("seed") is None:
        raise UsageError("a seed is required (--seed or 'seed' in --config)")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise UsageError(f"seed must be a non-negative integer, got {cfg['seed']!r}")
    return {"command": args.command, **cfg}


# ---------------------------------------------------------------------------
# run directory and report helpers
# ---------------------------------------------------------------------------

def make_run_dir(args, seed: int) -> Path:
    if args.run_dir:
        path = Path(args.run_dir)
        if path.exists() and any(path.iterdir()):
            raise UsageError(f"run directory {path} is not empty")
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = Path(args.out) / f"{stamp}-seed{seed}"
        n = 1
        while path.exists():
            n += 1
            path = Path(args.out) / f"{stamp}-seed{seed}-{n}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def write_report(run_dir: Path, cfg: dict, metrics: dict) -> dict:
    report = {
        "experiment": cfg["command"],
        "config": cfg,
        "metrics": metrics,
        "seeds": [cfg["seed"]],
        "version": f"v{__version__}",
    }
    write_json(run_dir / "report.json", report)
    return report


def schema_path() -> Path:
    return Path(__file__).parent / "schemas" / "report.schema.json"


# ---------------------------------------------------------------------------
# data and checkpoints
# ---------------------------------------------------------------------------

def _synthetic_spec(cfg: dict, section: dict) -> SyntheticSpec:
    return SyntheticSpec(seed=cfg["seed"], **section)


def load_clips(cfg: dict, kind: str, split: str) -> list:
    data = cfg["data"]
    if data["path"]:
        return load_dataset(data["path"], kind, split)
    sal, qual = generate_synthetic(_synthetic_spec(cfg, data["synthetic"]))
    clips = sal if kind == "saliency" else qual
    parts = split_ids([c.source_id for c in clips], cfg["seed"])
    by_id = {c.source_id: c for c in clips}
    if split == "all":
        ids = parts["train"] + parts["val"] + parts["test"]
    elif split in parts:
        ids = parts[split]
    else:
        raise UsageError(f"unknown split {split!r}")
    return [by_id[i] for i in ids]


def save_model(model, path: Path, kind: str, model_cfg: dict, extra: dict | None = None) -> None:
    meta = {"kind": kind, "model": model_cfg, **(extra or {})}
    save_tensors(model.state_dict(), path, meta=json.loads(json.dumps(meta, default=_json_default)))


def load_saliency(path) -> SaliencyNet:
    if path is None or not Path(path).exists():
        raise FileNotFoundError(f"saliency checkpoint not found: {path}")
    meta = read_manifest(path)["meta"]
    if meta.get("kind") != "saliency":
        raise ValueError(f"{path} is not a saliency checkpoint")
    net = SaliencyNet(SaliencyNetConfig(**meta["model"]), RngState(0))
    net.load_state_dict(load_tensors(path))
    return net


def load_vqa(path) -> VQAModel:
    if path is None or not Path(path).exists():
        raise FileNotFoundError(f"VQA checkpoint not found: {path}")
    meta = read_manifest(path)["meta"]
    if meta.get("kind") != "vqa":
        raise ValueError(f"{path} is not a VQA checkpoint")
    model = VQAModel(VQAConfig(**meta["model"]), RngState(0))
    model.load_state_dict(load_tensors(path))
    return model


def _safe_corr(fn, a, b):
    try:
        return fn(a, b)
    except ValueError:
        return None


def read_predictions(path) -> list[tuple[str, float, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = {"video_id", "mos_true", "mos_pred"} - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        return [(r["video_id"], float(r["mos_true"]), float(r["mos_pred"])) for r in reader]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_train_saliency(cfg: dict, run_dir: Path) -> dict:
    clips = load_clips(cfg, "saliency", cfg["split"])
    if not clips or any(c.saliency is None for c in clips):
        raise ValueError("training saliency needs clips with ground-truth maps")
    net = SaliencyNet(SaliencyNetConfig(**cfg["model"]), RngState(cfg["seed"]).spawn(1))
    history = train_saliency(net, clips, SaliencyTrainConfig(seed=cfg["seed"], **cfg["train"]))
    save_model(net, run_dir / "saliency_checkpoint", "saliency", cfg["model"])
    write_csv(run_dir / "loss_curve.csv", ["epoch", "kl", "cc", "total"],
              [[r["epoch"], r["kl"], r["cc"], r["total"]] for r in history])
    metrics = {"epochs_run": len(history), **{k: history[-1][k] for k in ("kl", "cc", "total")}}
    maps = [predict_saliency(net, c.frames) for c in clips]
    if all(c.fixations is not None for c in clips):
        metrics["train_nss"] = float(np.mean([nss(m, c.fixations) for m, c in zip(maps, clips)]))
        metrics["train_auc_judd"] = float(np.mean([auc_judd(m, c.fixations) for m, c in zip(maps, clips)]))
    metrics["train_cc"] = float(np.mean([cc_metric(c.saliency, m) for m, c in zip(maps, clips)]))
    return metrics


def _predictions(model, net, clips, alpha) -> list[tuple[str, float, float]]:
    if not clips:
        return []
    pred = predict_vqa(model, fused_inputs(clips, net, alpha))
    return [(c.source_id, float(c.mos), float(p)) for c, p in zip(clips, pred)]


def _scores(rows) -> dict:
    if len(rows) < 2:
        return {"n": len(rows), "srcc": None, "plcc": None}
    truth = [r[1] for r in rows]
    pred = [r[2] for r in rows]
    return {"n": len(rows), "srcc": _safe_corr(srcc, pred, truth), "plcc": _safe_corr(plcc, pred, truth)}


def cmd_train_vqa(cfg: dict, run_dir: Path) -> dict:
    net = load_saliency(cfg["saliency_checkpoint"])
    model_cfg = VQAConfig(**cfg["model"])
    train_clips = load_clips(cfg, "quality", cfg["split"])
    if any(c.mos is None for c in train_clips):
        raise ValueError("quality clips need MOS labels")
    model = VQAModel(model_cfg, RngState(cfg["seed"]).spawn(2))
    fused = fused_inputs(train_clips, net, model_cfg.alpha)
    history = train_vqa(model, fused, np.array([c.mos for c in train_clips]),
                        VQATrainConfig(seed=cfg["seed"], **cfg["train"]))
    save_model(model, run_dir / "vqa_checkpoint", "vqa", model_cfg.to_dict(),
               {"saliency_checkpoint_hash": read_manifest(cfg["saliency_checkpoint"])["content_hash"]})
    write_csv(run_dir / "loss_curve.csv", ["epoch", "loss", "lr"],
              [[r["epoch"], r["loss"], r["lr"]] for r in history])
    train_rows = _predictions(model, net, train_clips, model_cfg.alpha)
    write_predictions_csv(run_dir / "predictions_train.csv", train_rows)
    metrics = {"final_loss": history[-1]["loss"] if history else None,
               **{f"train_{k}": v for k, v in _scores(train_rows).items()}}
    if cfg["split"] != "all":
        val_rows = _predictions(model, net, load_clips(cfg, "quality", "val"), model_cfg.alpha)
        write_predictions_csv(run_dir / "predictions_val.csv", val_rows)
        metrics.update({f"val_{k}": v for k, v in _scores(val_rows).items()})
    return metrics


def paired_tests(a, b) -> dict:
    """Paired t and Wilcoxon p-values; identical samples give p = 1 for both."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    out = {"paired_t_p": None, "wilcoxon_p": None}
    if a.size >= 2:
        try:
            out["paired_t_p"] = paired_t_test(a, b)["p_value"]
        except ValueError:
            pass
    if np.array_equal(a, b):
        out["wilcoxon_p"] = 1.0
    else:
        try:
            out["wilcoxon_p"] = wilcoxon_signed_rank(a, b)["p_value"]
        except ValueError:
            pass
    return out


def cmd_eval(cfg: dict, run_dir: Path) -> dict:
    metrics: dict = {}
    need_quality = cfg["predictions"] is None or (cfg["baseline"] is None and cfg["baseline_checkpoint"])
    net = load_saliency(cfg["saliency_checkpoint"]) if cfg["saliency_checkpoint"] else None
    clips = load_clips(cfg, "quality", cfg["split"]) if need_quality else None

    def from_checkpoint(path):
        if net is None:
            raise FileNotFoundError("--saliency-checkpoint is required to evaluate a VQA checkpoint")
        model = load_vqa(path)
        return _predictions(model, net, clips, model.cfg.alpha)

    if cfg["predictions"]:
        rows = read_predictions(cfg["predictions"])
    elif cfg["vqa_checkpoint"]:
        rows = from_checkpoint(cfg["vqa_checkpoint"])
        write_predictions_csv(run_dir / "predictions.csv", rows)
    else:
        raise UsageError("eval needs --predictions or --vqa-checkpoint")
    metrics.update(_scores(rows))

    base = None
    if cfg["baseline"]:
        base = read_predictions(cfg["baseline"])
    elif cfg["baseline_checkpoint"]:
        base = from_checkpoint(cfg["baseline_checkpoint"])
        write_predictions_csv(run_dir / "predictions_baseline.csv", base)
    if base is not None:
        if [r[0] for r in rows] != [r[0] for r in base] or [r[1] for r in rows] != [r[1] for r in base]:
            raise ValueError("model and baseline predictions cover different videos or labels")
        metrics.update({f"baseline_{k}": v for k, v in _scores(base).items() if k != "n"})
        err_a = [abs(r[2] - r[1]) for r in rows]
        err_b = [abs(r[2] - r[1]) for r in base]
        metrics.update(paired_tests(err_a, err_b))

    if net is not None:
        sal_clips = [c for c in load_clips(cfg, "saliency", cfg["split"]) if c.fixations is not None]
        if sal_clips:
            maps = [predict_saliency(net, c.frames) for c in sal_clips]
            metrics["nss"] = float(np.mean([nss(m, c.fixations) for m, c in zip(maps, sal_clips)]))
            metrics["cc"] = float(np.mean([cc_metric(c.saliency, m) for m, c in zip(maps, sal_clips)]))
            metrics["auc_judd"] = float(np.mean([auc_judd(m, c.fixations) for m, c in zip(maps, sal_clips)]))
    return metrics


def cmd_flops(cfg: dict, run_dir: Path) -> dict:
    rows = flops_table(cfg["flop_per_mac"])
    cols = ["model", "gflops", "T", "N", "d", "G_f", "layers", "flop_per_mac"]
    write_csv(run_dir / "flops.csv", cols, [[r[c] for c in cols] for r in rows])
    for r in rows:
        print(f"{r['model']:<10} {r['gflops']:10.2f} GFLOPs")
    ratio = vivit_dagr_ratio()
    print(f"vivit/dagr {ratio:.3f}")
    return {**{r["model"]: r["gflops"] for r in rows}, "vivit_dagr_ratio": ratio}


def cmd_gradcheck(cfg: dict, run_dir: Path) -> dict:
    names = cfg["cases"] or list(CASES)
    unknown = [n for n in names if n not in CASES]
    if unknown:
        raise UsageError(f"unknown gradcheck cases {unknown}")
    results = run_suite(cfg["seed"], names, cfg["tolerance"])
    write_csv(run_dir / "gradcheck.csv", ["case", "relative_error", "passed"],
              [[r.name, r.error, r.passed] for r in results])
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name:<28} {r.error:.3e}")
    failed = [r.name for r in results if not r.passed]
    metrics = {"cases": len(results), "worst_relative_error": max(r.error for r in results), "failed": failed}
    if failed:
        write_report(run_dir, cfg, metrics)
        raise VerificationError(f"gradient check failed for: {', '.join(failed)}")
    return metrics


def cmd_synth(cfg: dict, run_dir: Path) -> dict:
    spec = _synthetic_spec(cfg, cfg["synthetic"])
    sal, qual = generate_synthetic(spec)
    root = write_dataset(run_dir / "dataset", sal, qual, cfg["seed"], spec)
    digest = hashlib.sha256(json.dumps(tree_digest(root), sort_keys=True).encode()).hexdigest()
    return {"saliency_videos": len(sal), "quality_videos": len(qual), "dataset_digest": digest}


def _sweep_value(axis: str, text):
    if axis == "n_tok":
        return int(text)
    if axis == "alpha":
        return float(text)
    if text not in AXES["components"]:
        raise UsageError(f"unknown component set {text!r}")
    return text


def cmd_sweep(cfg: dict, run_dir: Path) -> dict:
    axis = cfg["axis"]
    if axis not in AXES:
        raise UsageError(f"unknown axis {axis!r}; choose from {sorted(AXES)}")
    values = None if cfg["values"] is None else [_sweep_value(axis, v) for v in cfg["values"]]
    runner = SyntheticRunner(
        data=_synthetic_spec(cfg, cfg["synthetic"]),
        saliency=SaliencyNetConfig(**cfg["saliency"]),
        saliency_train=SaliencyTrainConfig(seed=cfg["seed"], **cfg["saliency_train"]),
        vqa=VQAConfig(**cfg["vqa"]),
        vqa_train=VQATrainConfig(seed=cfg["seed"], **cfg["vqa_train"]),
        seed=cfg["seed"],
        eval_split=cfg["eval_split"],
    )
    rows = sweep_ablation(axis, runner, values)
    write_sweep_csv(run_dir / f"sweep_{axis}.csv", rows)
    for r in rows:
        print(f"{axis}={r['value']!s:<18} srcc {r['srcc']:+.4f}  plcc {r['plcc']:+.4f}")
    return {"rows": rows}


def cmd_export_embeddings(cfg: dict, run_dir: Path) -> dict:
    net = load_saliency(cfg["saliency_checkpoint"])
    clips = load_clips(cfg, "saliency", cfg["split"])
    emb = export_register_embeddings(net, clips)
    write_embeddings_csv(run_dir / "embeddings.csv", emb)
    return {"videos": len(emb), "dim": int(len(emb[0][1])) if emb else 0}


COMMANDS = {
    "train-saliency": cmd_train_saliency,
    "train-vqa": cmd_train_vqa,
    "eval": cmd_eval,
    "flops": cmd_flops,
    "gradcheck": cmd_gradcheck,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "export-embeddings": cmd_export_embeddings,
}


def _fail(code: int, exc: BaseException, run_dir: Path | None) -> int:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    if run_dir is not None:
        write_json(run_dir / "error.json", payload)
    return code


def main(argv=None) -> int:
    run_dir = None
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
        run_dir = make_run_dir(args, cfg["seed"])
        write_json(run_dir / "config.json", cfg)
        metrics = COMMANDS[args.command](cfg, run_dir)
        write_report(run_dir, cfg, metrics)
        print(f"run directory: {run_dir}")
        return EXIT_OK
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except UsageError as exc:
        return _fail(EXIT_USAGE, exc, run_dir)
    except VerificationError as exc:
        return _fail(EXIT_VERIFY, exc, run_dir)
    except Exception as exc:
        return _fail(EXIT_RUNTIME, exc, run_dir)


if __name__ == "__main__":
    sys.exit(main())
