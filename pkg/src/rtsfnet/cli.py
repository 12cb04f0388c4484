"""Command-line entry point: prepare, train, eval, features, gradcheck, report."""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .errors import ConfigError, InputError, RtsfError, UsageError

ROOT_ENV = "RTSFNET_DATA_ROOT"
MANIFEST = "manifest.txt"
REPORT = "report.txt"
CONFUSION = "confusion.csv"
EXIT_CODES = {"E_USAGE": 2, "E_CONFIG": 3, "E_INPUT": 4, "E_DOMAIN": 5, "E_TRAIN": 6, "E_CHECK": 7}


class CheckFailed(RtsfError):
    code = "E_CHECK"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures through the common error path
        raise UsageError(f"{self.prog}: {message}")


def _git_hash() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "HEAD"], capture_output=True, text=True, timeout=5,
                             cwd=Path(__file__).resolve().parent)
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_manifest(out_dir: Path, command: str, /, **fields) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"command: {command}", f"version: {__version__}", f"git: {_git_hash()}",
             f"argv: {' '.join(sys.argv[1:])}"]
    lines += [f"{k}: {v}" for k, v in fields.items()]
    path = out_dir / MANIFEST
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _append_manifest(out: Path, **fields) -> None:
    with open(out / MANIFEST, "a", encoding="utf-8") as fh:
        for k, v in fields.items():
            fh.write(f"{k}: {v}\n")


def _out_dir(p: str) -> Path:
    out = Path(p)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _data_dir(p: str) -> Path:
    d = Path(p)
    if not d.is_dir():
        raise InputError(f"data directory not found: {d}")
    return d


# --------------------------------------------------------------------------
# prepare


def cmd_prepare(args) -> int:
    from .data import datasets as ds
    from .data.store import SegmentStore, store_path, write_split_manifest, write_store
    from .data.streams import SPLITS, split_streams
    from .synthetic import SYNTHETIC_CLASSES, SYNTHETIC_LAYOUT, synthetic_splits

    name = args.dataset
    if name != "synthetic":
        ds.dataset_info(name)  # rejects unknown ids before touching the file system
    out = _out_dir(args.out)
    root = args.root or os.environ.get(ROOT_ENV)
    if name != "synthetic" and not root:
        raise UsageError(f"--root is required (or set {ROOT_ENV})")
    write_manifest(out, "prepare", dataset=name, root=root or "-", seed=args.seed, out=out)

    split_rule = None
    if name == "synthetic":
        parts = synthetic_splits(seed=args.seed)
        layout, classes, window, stride = SYNTHETIC_LAYOUT, SYNTHETIC_CLASSES, 64, 64
    elif name == "ucihar":
        info = ds.dataset_info(name)
        parts = ds.load_ucihar(root)
        layout, classes, window, stride, split_rule = info.layout, info.class_names, info.window, info.stride, info.split
    else:
        info = ds.dataset_info(name)
        streams = ds.ingest_raw(name, ds.find_raw_files(name, root))
        parts = split_streams(streams, info.split, info.window, info.stride)
        layout, classes, window, stride, split_rule = info.layout, info.class_names, info.window, info.stride, info.split

    stores = {}
    for split in SPLITS:
        st = SegmentStore(name, split, window, stride, layout, tuple(classes), parts[split])
        write_store(store_path(out, split), st)
        stores[split] = st
    write_split_manifest(out, name, split_rule, stores)
    print(f"dataset={name} window={window} stride={stride} channels={len(layout)}")
    print("split,segments," + ",".join(classes))
    for split, st in stores.items():
        print(f"{split},{len(st)}," + ",".join(str(c) for c in st.class_histogram()))
    return 0


# --------------------------------------------------------------------------
# train / eval


def _load_train_data(data: Path):
    from .data.store import load_split

    return load_split(data, "train"), load_split(data, "validation")


def cmd_train(args) -> int:
    from .config import load_config, validate_config
    from .model import RTsfNet
    from .train import TrainSchedule, select_final_model, train

    cfg = load_config(args.config)  # validation errors surface before any data is read
    data = _data_dir(args.data)
    tr, va = _load_train_data(data)
    if cfg.layout is not None and cfg.layout != tr.layout:
        raise ConfigError(f"config channel layout does not match the data in {data}")
    cfg = validate_config(cfg.with_data(tr.layout, tr.window, len(tr.class_names), tr.class_names))
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seed=args.seed)
    sched = TrainSchedule(
        initial_lr=args.lr, max_epochs=args.epochs, batch_size=args.batch_size, seed=cfg.seed,
    )
    out = _out_dir(args.out)
    write_manifest(out, "train", config=args.config, config_sha256=cfg.digest(), dataset=tr.dataset,
                   data=data, seed=cfg.seed, out=out, max_epochs=sched.max_epochs,
                   batch_size=sched.batch_size, initial_lr=sched.initial_lr, workers=args.workers)
    model = RTsfNet(cfg)
    log = (lambda s: print(s, flush=True)) if not args.quiet else None
    t0 = time.perf_counter()
    res = train(model, tr.segments, va.segments, sched, out_dir=out, log=log)
    sel = select_final_model(model, res.best_state, res.final_state, va.segments)
    _append_manifest(out, epochs_run=len(res.history), best_epoch=res.history.best_epoch,
                     stop_reason=res.history.stop_reason, selected=sel.choice,
                     val_mf1_best=f"{sel.best.mf1:.6f}", val_mf1_final=f"{sel.final.mf1:.6f}",
                     seconds=f"{time.perf_counter() - t0:.1f}")
    print(f"epochs={len(res.history)} best_epoch={res.history.best_epoch} selected={sel.choice} "
          f"val_mf1={max(sel.best.mf1, sel.final.mf1):.4f}")
    return 0


def _checkpoint_path(p: str) -> Path:
    path = Path(p)
    if path.is_dir():
        from .train import BEST_CHECKPOINT

        path = path / BEST_CHECKPOINT
    if not path.is_file():
        raise UsageError(f"checkpoint not found: {path}")
    return path


def _write_eval(out: Path, report) -> None:
    (out / REPORT).write_text(report.to_text(), encoding="utf-8")
    (out / CONFUSION).write_text(report.confusion_csv(), encoding="utf-8")


def cmd_eval(args) -> int:
    from .data.store import load_split
    from .train import evaluate, load_model

    ckpt = _checkpoint_path(args.checkpoint)
    model, _ = load_model(ckpt)
    store = load_split(_data_dir(args.data), args.split)
    if model.cfg.layout is not None and model.cfg.layout != store.layout:
        raise ConfigError("checkpoint channel layout does not match the data")
    report = evaluate(model, store.segments, store.class_names)
    report.extra = {"checkpoint": ckpt.name, "split": args.split, "dataset": store.dataset, **report.extra}
    out = _out_dir(args.out)
    _write_eval(out, report)
    print(f"split={args.split} acc={report.accuracy:.4f} mf1={report.mf1:.6f} wf1={report.wf1:.6f}")
    return 0


# --------------------------------------------------------------------------
# features


def _parse_blockspec(text: str, features):
    from .tsf import BlockSpec

    parts = text.split(":")
    try:
        length = int(parts[0])
        overlap = int(parts[1]) if len(parts) > 1 else 0
    except ValueError:
        raise ConfigError(f"block spec must be LENGTH or LENGTH:OVERLAP, got {text!r}") from None
    if len(parts) > 2:
        raise ConfigError(f"block spec must be LENGTH or LENGTH:OVERLAP, got {text!r}")
    return BlockSpec(length, overlap, features)


def _read_segments_for_features(data: Path, split: str):
    """A segment store directory, or a text file holding one (time, channels) segment."""
    from .channels import ChannelLayout, ChannelSpec
    from .data.store import load_split

    if data.is_dir():
        st = load_split(data, split)
        return st.segments.values, st.layout
    if not data.is_file():
        raise InputError(f"data not found: {data}")
    try:
        arr = np.loadtxt(data, delimiter="," if data.suffix == ".csv" else None, ndmin=2)
    except ValueError as exc:
        raise InputError(f"{data}: {exc}") from None
    layout = ChannelLayout(tuple(ChannelSpec(f"ch{i}") for i in range(arr.shape[1])))
    return arr[None, :, :], layout


def cmd_features(args) -> int:
    import csv

    from .tsf import SELECTED_FEATURES, extract_block_features, parse_feature_list, read_feature_file

    if args.features is None:
        feats = SELECTED_FEATURES
    elif Path(args.features).is_file():
        feats = read_feature_file(args.features)
    else:
        feats = parse_feature_list([f.strip() for f in args.features.split(",") if f.strip()])
    for f in feats:
        f.validate()
    spec = _parse_blockspec(args.blockspec, feats)
    values, layout = _read_segments_for_features(Path(args.data), args.split)
    if args.limit is not None:
        values = values[: args.limit]
    tags = layout.tags()
    out = _out_dir(args.out)
    path = out / "features.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = None
        for s, seg in enumerate(values):
            ft = extract_block_features(np.asarray(seg, dtype=np.float64), spec, tags)
            if header is None:
                header = ["segment", "axis", "channel", "block", *ft.feature_names]
                w.writerow(header)
            vals = ft.values
            for a in range(vals.shape[0]):
                for b in range(vals.shape[1]):
                    w.writerow([s, a, layout.channels[a].name, b, *[repr(float(v)) for v in vals[a, b]]])
    print(f"wrote {path} ({len(values)} segments, {spec.n_blocks(values.shape[1])} blocks, "
          f"{spec.n_features()} feature columns)")
    return 0


# --------------------------------------------------------------------------
# gradcheck


def cmd_gradcheck(args) -> int:
    from .gradcheck import GRAD_TOLERANCE, check_model_gradients, tiny_batch, tiny_config
    from .model import RTsfNet

    cfg = tiny_config(args.seed)
    if args.config:
        from dataclasses import replace

        from .config import load_config

        user = load_config(args.config)
        cfg = replace(user, dropout=0.0, layout=user.layout or cfg.layout,
                      segment_length=user.segment_length or cfg.segment_length,
                      class_count=user.class_count or cfg.class_count)
    t0 = time.perf_counter()
    model = RTsfNet(cfg)
    g = torch.Generator().manual_seed(args.seed)
    if args.config:
        x = torch.randn(4, cfg.segment_length, len(cfg.layout), generator=g, dtype=torch.float64)
        y = torch.arange(4) % cfg.class_count
    else:
        x, y = tiny_batch(args.seed)
    res = check_model_gradients(model, x, y, args.eps)
    status = "PASS" if res.max_error < GRAD_TOLERANCE else "FAIL"
    print(f"params={res.n_params} eps={args.eps:g} max_rel_error={res.max_error:.3e} "
          f"rotation_path={res.rotation_error:.3e} classifier_path={res.classifier_error:.3e} "
          f"reduced_step={res.reduced_step} skipped={res.skipped} "
          f"seconds={time.perf_counter() - t0:.1f} {status} (threshold {GRAD_TOLERANCE:g})")
    if status == "FAIL":
        raise CheckFailed(f"gradient check failed: {res.max_error:.3e} >= {GRAD_TOLERANCE:g}")
    return 0


# --------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    from .data.store import load_split
    from .report import per_class_csv, plot_confusion, plot_history, summary_lines
    from .train import (BEST_CHECKPOINT, FINAL_CHECKPOINT, HISTORY_FILE, TrainHistory, evaluate, load_model,
                        select_final_model)

    run = Path(args.run)
    best, final = run / BEST_CHECKPOINT, run / FINAL_CHECKPOINT
    for p in (best, final):
        if not p.is_file():
            raise UsageError(f"missing checkpoint: {p}")
    data = _data_dir(args.data)
    val = load_split(data, "validation")
    test = load_split(data, args.split)
    model, _ = load_model(final)
    sel = select_final_model(model, best, final, val.segments)
    report = evaluate(model, test.segments, test.class_names)
    report.extra = {"run": run.name, "selected": sel.choice, "split": args.split, "dataset": test.dataset,
                    **report.extra}
    history = None
    if (run / HISTORY_FILE).is_file():
        history = TrainHistory.from_csv((run / HISTORY_FILE).read_text(encoding="utf-8"))
    out = _out_dir(args.out or run)
    _write_eval(out, report)
    (out / "per_class.csv").write_text(per_class_csv(report), encoding="utf-8")
    figures = [plot_confusion(report, out / "confusion.png")]
    if history is not None:
        figures.append(plot_history(history, out / "history.png"))
    for line in summary_lines(report, history):
        print(line)
    print("figures=" + ",".join(f.name for f in figures))
    return 0


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rtsfnet", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--workers", type=int, default=1, help="intra-op thread cap (default 1)")
        sp.add_argument("--seed", type=int, default=None, help="default 42 (train: the config's seed)")

    sp = sub.add_parser("prepare", help="parse, segment and split a dataset into segment stores")
    sp.add_argument("--dataset", required=True, help="ucihar, pamap2, daphnet, opportunity or synthetic")
    sp.add_argument("--root", default=None, help=f"dataset root (default: ${ROOT_ENV})")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("train", help="train a model on a prepared dataset")
    sp.add_argument("--config", required=True, help="YAML file or preset name")
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--epochs", type=int, default=350)
    sp.add_argument("--batch-size", type=int, default=64)
    sp.add_argument("--lr", type=float, default=0.001)
    sp.add_argument("--quiet", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint on one split")
    sp.add_argument("--checkpoint", required=True, help="checkpoint file or run directory")
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="test", choices=["train", "validation", "test"])
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("features", help="dump block features to CSV")
    sp.add_argument("--data", required=True, help="segment store directory or a text file with one segment")
    sp.add_argument("--blockspec", required=True, help="LENGTH or LENGTH:OVERLAP")
    sp.add_argument("--features", default=None, help="comma-separated feature ids or a feature file")
    sp.add_argument("--split", default="train", choices=["train", "validation", "test"])
    sp.add_argument("--limit", type=int, default=None, help="first N segments only")
    sp.add_argument("--out", required=True)
    common(sp)
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the network gradients")
    sp.add_argument("--config", default=None, help="config to check instead of the built-in tiny one")
    sp.add_argument("--eps", type=float, default=1e-4)
    common(sp)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("report", help="select the final model, evaluate it and render figures")
    sp.add_argument("--run", required=True, help="output directory of a train run")
    sp.add_argument("--data", required=True)
    sp.add_argument("--split", default="test", choices=["train", "validation", "test"])
    sp.add_argument("--out", default=None, help="defaults to the run directory")
    common(sp)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        if args.seed is None and args.command != "train":
            args.seed = 42
        torch.set_num_threads(args.workers)
        return args.func(args)
    except RtsfError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.code, 1)
    except KeyboardInterrupt:
        print("E_USAGE: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
