"""Training loop, learning-rate plateau schedule, early stopping and model selection."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import torch

from . import autodiff as ad
from .config import ModelConfig, config_from_dict
from .data.metrics import EvalReport, compute_metrics, confusion_matrix
from .data.streams import Segments
from .errors import ConfigError, TrainingError, UsageError
from .model import RTsfNet

BEST_CHECKPOINT = "checkpoint-best.bin"
FINAL_CHECKPOINT = "checkpoint-final.bin"
HISTORY_FILE = "history.csv"


@dataclass(frozen=True)
class TrainSchedule:
    initial_lr: float = 0.001
    max_epochs: int = 350
    plateau_patience: int = 10
    plateau_factor: float = 0.8
    early_stop_patience: int = 50
    bootstrap_epochs: int = 150
    batch_size: int = 64
    seed: int = 42
    plateau_rel_tol: float = 1e-4

    def __post_init__(self) -> None:
        for name in ("initial_lr", "max_epochs", "plateau_patience", "early_stop_patience", "batch_size"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"schedule {name} must be positive, got {getattr(self, name)}")
        if self.bootstrap_epochs < 0:
            raise ConfigError("schedule bootstrap_epochs must be non-negative")
        if not 0.0 < self.plateau_factor < 1.0:
            raise ConfigError(f"plateau_factor must lie in (0, 1), got {self.plateau_factor}")


@dataclass
class EpochDecision:
    lr: float  # rate for the next epoch
    reduced: bool
    val_improved: bool
    stop: bool


class ScheduleState:
    """Plateau reduction on train loss and bootstrap-protected early stop on validation loss.

    Feed one (train_loss, val_loss) pair per epoch, epochs numbered from 1.
    The plateau counter resets after every reduction. Early-stop patience only
    counts non-improving epochs after the bootstrap period, so a validation
    loss that is flat from the start stops at bootstrap + patience.
    """

    def __init__(self, schedule: TrainSchedule):
        self.s = schedule
        self.lr = schedule.initial_lr
        self.epoch = 0
        self.best_train = math.inf
        self.plateau_wait = 0
        self.best_val = math.inf
        self.stop_wait = 0

    def _train_improved(self, loss: float) -> bool:
        if not math.isfinite(self.best_train):
            return True
        return (self.best_train - loss) > self.s.plateau_rel_tol * abs(self.best_train)

    def update(self, train_loss: float, val_loss: float) -> EpochDecision:
        self.epoch += 1
        if self._train_improved(train_loss):
            self.best_train = train_loss
            self.plateau_wait = 0
        else:
            self.plateau_wait += 1
        reduced = False
        if self.plateau_wait >= self.s.plateau_patience:
            self.lr *= self.s.plateau_factor
            self.plateau_wait = 0
            reduced = True

        val_improved = val_loss < self.best_val
        if val_improved:
            self.best_val = val_loss
            self.stop_wait = 0
        elif self.epoch > self.s.bootstrap_epochs:
            self.stop_wait += 1
        stop = self.epoch > self.s.bootstrap_epochs and self.stop_wait >= self.s.early_stop_patience
        stop = stop or self.epoch >= self.s.max_epochs
        return EpochDecision(self.lr, reduced, val_improved, stop)


@dataclass
class TrainHistory:
    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    lr: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    def append(self, epoch: int, train_loss: float, val_loss: float, lr: float, val_acc: float) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.lr.append(lr)
        self.val_acc.append(val_acc)

    def __len__(self) -> int:
        return len(self.epochs)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_loss", "lr", "val_acc"])
        for row in zip(self.epochs, self.train_loss, self.val_loss, self.lr, self.val_acc):
            w.writerow([row[0], f"{row[1]:.8f}", f"{row[2]:.8f}", f"{row[3]:.8g}", f"{row[4]:.4f}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainHistory":
        h = cls()
        for row in csv.DictReader(io.StringIO(text)):
            h.append(int(row["epoch"]), float(row["train_loss"]), float(row["val_loss"]),
                     float(row["lr"]), float(row.get("val_acc") or "nan"))
        return h


# --------------------------------------------------------------------------
# data plumbing


def fit_normalization(model: RTsfNet, train_values: np.ndarray) -> None:
    """Train-split statistics only: one RMS scale per rotatable triad (no centering,
    so rotations stay rotations) and mean/std z-normalization for other channels."""
    x = np.asarray(train_values, dtype=np.float64)
    c = x.shape[-1]
    offset = np.zeros(c)
    scale = np.ones(c)
    for t in model.triads:
        rms = float(np.sqrt(np.mean(x[..., t] ** 2)))
        scale[t] = rms if rms > 0 else 1.0
    for i in model.others:
        offset[i] = float(x[..., i].mean())
        sd = float(x[..., i].std())
        scale[i] = sd if sd > 0 else 1.0
    model.set_normalization(offset, scale)


def _tensor(seg: Segments) -> tuple[torch.Tensor, torch.Tensor]:
    return torch.from_numpy(np.ascontiguousarray(seg.values, dtype=np.float32)), torch.from_numpy(
        seg.labels.astype(np.int64))


@torch.no_grad()
def mean_loss(model: RTsfNet, x: torch.Tensor, y: torch.Tensor, batch_size: int = 256) -> tuple[float, np.ndarray]:
    """Eval-mode cross-entropy and argmax predictions."""
    was = model.training
    model.eval()
    total, preds = 0.0, []
    for i in range(0, x.shape[0], batch_size):
        probs = model(x[i : i + batch_size])
        yb = y[i : i + batch_size]
        total += float(ad.cross_entropy(probs, yb)) * yb.shape[0]
        preds.append(probs.argmax(dim=-1))
    model.train(was)
    pred = torch.cat(preds).numpy() if preds else np.zeros(0, dtype=np.int64)
    return total / max(x.shape[0], 1), pred


def check_compatible(model: RTsfNet, seg: Segments) -> None:
    if seg.values.ndim != 3 or seg.values.shape[1:] != (model.segment_length, model.n_channels):
        raise ConfigError(
            f"data segments {tuple(seg.values.shape[1:])} do not match the model "
            f"({model.segment_length}, {model.n_channels})"
        )
    if len(seg) and (seg.labels.min() < 0 or seg.labels.max() >= model.cfg.class_count):
        raise ConfigError(f"labels outside 0..{model.cfg.class_count - 1}")


# --------------------------------------------------------------------------
# checkpoints


def save_model(path, model: RTsfNet, meta: dict | None = None) -> None:
    tensors = {k: v for k, v in model.state_dict().items()}
    ad.save_checkpoint(path, tensors, model.cfg.to_text(), meta or {})


def load_model(path) -> tuple[RTsfNet, dict]:
    config_text, meta, tensors = ad.load_checkpoint(path)
    cfg = config_from_dict(json.loads(config_text))
    model = RTsfNet(cfg)
    state = model.state_dict()
    missing = sorted(set(state) - set(tensors))
    if missing:
        raise ConfigError(f"{path}: checkpoint lacks tensors {missing[:3]}")
    for k, v in tensors.items():
        if k not in state or state[k].shape != v.shape:
            raise ConfigError(f"{path}: tensor {k} does not fit the configured model")
    model.load_state_dict({k: v.to(state[k].dtype) for k, v in tensors.items()})
    model.eval()
    return model, meta


# --------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: RTsfNet
    history: TrainHistory
    best_state: dict
    final_state: dict


def train(model: RTsfNet, train_set: Segments, val_set: Segments, schedule: TrainSchedule | None = None,
          out_dir=None, log: Callable[[str], None] | None = None, normalize: bool = True) -> TrainResult:
    """Adam with the plateau/early-stop schedule; keeps best-validation and final states.

    With ``out_dir`` the best checkpoint is rewritten whenever validation loss
    improves and the final checkpoint and history CSV are written at the end.
    """
    schedule = schedule or TrainSchedule()
    if len(train_set) == 0 or len(val_set) == 0:
        raise UsageError("training needs non-empty train and validation splits")
    check_compatible(model, train_set)
    check_compatible(model, val_set)
    torch.manual_seed(schedule.seed)
    if normalize:
        fit_normalization(model, train_set.values)
    xt, yt = _tensor(train_set)
    xv, yv = _tensor(val_set)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=schedule.initial_lr, betas=(0.9, 0.999), eps=1e-8)
    state = ScheduleState(schedule)
    history = TrainHistory()
    order_gen = torch.Generator().manual_seed(schedule.seed)
    out = Path(out_dir) if out_dir is not None else None
    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}

    for epoch in range(1, schedule.max_epochs + 1):
        t0 = time.perf_counter()
        model.train()
        lr_used = state.lr
        for g in opt.param_groups:
            g["lr"] = lr_used
        perm = torch.randperm(xt.shape[0], generator=order_gen)
        total = 0.0
        for b in range(0, xt.shape[0], schedule.batch_size):
            idx = perm[b : b + schedule.batch_size]
            loss = ad.cross_entropy(model(xt[idx]), yt[idx])
            if not torch.isfinite(loss):
                snap = {"epoch": epoch, "batch": b // schedule.batch_size, "lr": lr_used,
                        "last_train_loss": history.train_loss[-1] if len(history) else None}
                if out is not None:
                    save_model(out / "checkpoint-nan.bin", model, {"snapshot": snap})
                raise TrainingError(f"non-finite loss at epoch {epoch}: {json.dumps(snap)}")
            opt.zero_grad(set_to_none=True)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * idx.shape[0]
        train_loss = total / xt.shape[0]
        val_loss, pred = mean_loss(model, xv, yv)
        val_acc = 100.0 * float((pred == yv.numpy()).mean())
        decision = state.update(train_loss, val_loss)
        history.append(epoch, train_loss, val_loss, lr_used, val_acc)
        if decision.val_improved:
            history.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            if out is not None:
                save_model(out / BEST_CHECKPOINT, model, {"epoch": epoch, "val_loss": val_loss})
        if log is not None:
            log(f"epoch {epoch:3d}  train {train_loss:.4f}  val {val_loss:.4f}  acc {val_acc:6.2f}  "
                f"lr {lr_used:.2e}  {time.perf_counter() - t0:.1f}s")
        if decision.stop:
            history.stop_reason = "max_epochs" if epoch >= schedule.max_epochs else "early_stop"
            break

    final_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
    if out is not None:
        save_model(out / FINAL_CHECKPOINT, model, {"epoch": len(history), "val_loss": history.val_loss[-1]})
        (out / HISTORY_FILE).write_text(history.to_csv(), encoding="utf-8")
    return TrainResult(model, history, best_state, final_state)


# --------------------------------------------------------------------------
# selection and evaluation


def evaluate(model: RTsfNet, data: Segments, class_names=()) -> EvalReport:
    check_compatible(model, data)
    x, y = _tensor(data)
    loss, pred = mean_loss(model, x, y)
    cm = confusion_matrix(data.labels, pred, model.cfg.class_count)
    report = compute_metrics(cm, class_names or model.cfg.class_names)
    report.extra["loss"] = f"{loss:.6f}"
    return report


@dataclass
class Selection:
    choice: str  # "best" or "final"
    best: EvalReport
    final: EvalReport


def select_final_model(model: RTsfNet, best_state, final_state, val_set: Segments) -> Selection:
    """Keep the candidate with higher validation mf1; ties go to lower validation loss.

    Candidates are state dicts or checkpoint paths. The chosen state is loaded
    into ``model``.
    """
    states = {}
    for name, cand in (("best", best_state), ("final", final_state)):
        if cand is None:
            raise UsageError(f"missing {name} checkpoint")
        if isinstance(cand, (str, Path)):
            if not Path(cand).is_file():
                raise UsageError(f"missing {name} checkpoint: {cand}")
            cand = load_model(cand)[0].state_dict()
        states[name] = cand
    reports = {}
    for name, st in states.items():
        model.load_state_dict(st)
        reports[name] = evaluate(model, val_set)

    def key(name: str):
        r = reports[name]
        return (-r.mf1, float(r.extra["loss"]))

    choice = "best" if key("best") <= key("final") else "final"
    model.load_state_dict(states[choice])
    return Selection(choice, reports["best"], reports["final"])


def schedule_to_dict(s: TrainSchedule) -> dict:
    return asdict(s)


def config_for_data(cfg: ModelConfig, layout, length: int, class_names) -> ModelConfig:
    return cfg.with_data(layout, length, len(class_names), tuple(class_names))
