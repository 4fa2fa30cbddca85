"""Evaluation plumbing shared by every tuner: the [0,1] <-> learning-rate map,
per-epoch traces, reward normalization, comparison metrics, trace persistence,
and the external-worker wire protocol."""

from __future__ import annotations

import csv
import json
import math
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

LR_SCALES = ("linear", "log")
REWARD_SOURCES = ("negative_loss", "accuracy")
CSV_COLUMNS = ("round", "coord", "lr", "epoch", "loss", "accuracy")


class EvaluationError(RuntimeError):
    """An evaluation could not be completed.

    Carries whatever partial trace was collected (flagged diverged) and, once
    known, the tuning round in which the failure happened.
    """

    def __init__(self, message: str, *, trace: "EvalTrace | None" = None,
                 round: int | None = None) -> None:
        super().__init__(message)
        self.trace = trace
        self.round = round


@dataclass(frozen=True)
class LrMap:
    """Monotone bijection between normalized coordinates and learning rates."""

    lo: float = 1e-4
    hi: float = 1.0
    scale: str = "linear"

    def __post_init__(self) -> None:
        if self.scale not in LR_SCALES:
            raise ValueError(f"scale must be one of {LR_SCALES}, got {self.scale!r}")
        if self.lo < 0.0:
            raise ValueError("lo must be nonnegative")
        if not self.lo < self.hi:
            raise ValueError("lo must be smaller than hi")
        if self.scale == "log" and self.lo <= 0.0:
            raise ValueError("log scale requires lo > 0")


def denormalize(coord: float, lr_map: LrMap) -> float:
    """Learning rate at a normalized coordinate in [0, 1]."""
    if not 0.0 <= coord <= 1.0:
        raise ValueError(f"coord must lie in [0, 1], got {coord}")
    if lr_map.scale == "linear":
        return lr_map.lo + coord * (lr_map.hi - lr_map.lo)
    return lr_map.lo * (lr_map.hi / lr_map.lo) ** coord


def normalize(lr: float, lr_map: LrMap) -> float:
    """Inverse of :func:`denormalize`."""
    if lr_map.scale == "linear":
        return (lr - lr_map.lo) / (lr_map.hi - lr_map.lo)
    return math.log(lr / lr_map.lo) / math.log(lr_map.hi / lr_map.lo)


@dataclass
class EvalTrace:
    """Per-epoch outcome of training once at a fixed learning rate.

    ``final_loss`` is the last finite recorded loss (``inf`` when none exists);
    a non-finite recorded loss forces ``diverged``.
    """

    lr: float
    epoch_losses: list[float]
    epoch_accuracies: list[float] | None = None
    diverged: bool = False
    final_loss: float | None = None
    final_accuracy: float | None = None

    def __post_init__(self) -> None:
        self.epoch_losses = [float(x) for x in self.epoch_losses]
        if any(not math.isfinite(x) for x in self.epoch_losses):
            self.diverged = True
        if not self.epoch_losses and not self.diverged:
            raise ValueError("a trace without epochs must be flagged diverged")
        if self.epoch_accuracies is not None:
            self.epoch_accuracies = [float(a) for a in self.epoch_accuracies]
        if self.final_loss is None:
            finite = [x for x in self.epoch_losses if math.isfinite(x)]
            self.final_loss = finite[-1] if finite else math.inf
        if self.final_accuracy is None and self.epoch_accuracies:
            self.final_accuracy = self.epoch_accuracies[-1]


@dataclass(frozen=True)
class RewardSpec:
    """How raw evaluation outcomes become rewards in [0, 1]."""

    source: str = "negative_loss"
    clip_lo: float = 0.0
    clip_hi: float = 1.0

    def __post_init__(self) -> None:
        if self.source not in REWARD_SOURCES:
            raise ValueError(f"source must be one of {REWARD_SOURCES}, got {self.source!r}")
        if not self.clip_lo < self.clip_hi:
            raise ValueError("clip_lo must be smaller than clip_hi")


def reward_of(trace: EvalTrace, spec: RewardSpec) -> float:
    """Normalized reward of a completed trace; diverged traces score 0."""
    if trace.diverged:
        return 0.0
    if spec.source == "accuracy":
        if trace.final_accuracy is None:
            raise ValueError("trace records no accuracy")
        value = trace.final_accuracy / 100.0
    else:
        value = (spec.clip_hi - trace.final_loss) / (spec.clip_hi - spec.clip_lo)
    return min(1.0, max(0.0, value))


def auc(trace: EvalTrace) -> float:
    """Area under the loss-vs-epoch curve at unit spacing; inf when diverged."""
    if trace.diverged:
        return math.inf
    if not trace.epoch_losses:
        raise ValueError("trace records no epochs")
    return float(sum(trace.epoch_losses))


@dataclass(frozen=True)
class TuneEntry:
    round: int
    coord: float
    lr: float
    reward: float
    trace: EvalTrace


@dataclass
class TuneHistory:
    """Ordered per-round record of one tuning run."""

    entries: list[TuneEntry] = field(default_factory=list)

    def append(self, entry: TuneEntry) -> None:
        expected = len(self.entries) + 1
        if entry.round != expected:
            raise ValueError(f"round {entry.round} out of order, expected {expected}")
        if not 0.0 <= entry.reward <= 1.0:
            raise ValueError(f"reward {entry.reward} outside [0, 1]")
        self.entries.append(entry)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[TuneEntry]:
        return iter(self.entries)

    def __getitem__(self, idx: int) -> TuneEntry:
        return self.entries[idx]


class BestFound(NamedTuple):
    entry: TuneEntry
    all_diverged: bool


def best_trace(history: TuneHistory) -> TuneEntry:
    """Entry with the least area under its convergence curve (earliest on ties)."""
    if not history.entries:
        raise ValueError("empty history")
    best = history.entries[0]
    best_auc = auc(best.trace)
    for entry in history.entries[1:]:
        a = auc(entry.trace)
        if a < best_auc:
            best, best_auc = entry, a
    return best


def best_found(history: TuneHistory) -> BestFound:
    """Entry with the smallest final loss among non-diverged evaluations.

    Falls back to the first entry, flagged, when every evaluation diverged.
    """
    if not history.entries:
        raise ValueError("empty history")
    survivors = [e for e in history.entries if not e.trace.diverged]
    if not survivors:
        return BestFound(history.entries[0], True)
    best = survivors[0]
    for entry in survivors[1:]:
        if entry.trace.final_loss < best.trace.final_loss:
            best = entry
    return BestFound(best, False)


# --- external-worker protocol -------------------------------------------------
#
# One evaluation per worker process, newline-delimited JSON:
#   request  -> {"eval_id": int, "learning_rate": float, "epochs": int, "seed": int}
#   per-epoch <- {"eval_id": int, "epoch": int, "loss": float, "accuracy": float|null}
#   terminal  <- {"eval_id": int, "done": true, "diverged": bool}


def _as_command(command: Sequence[str] | str) -> list[str]:
    if isinstance(command, str):
        return shlex.split(command)
    return list(command)


def evaluate_external(lr: float, epochs: int, command: Sequence[str] | str, *,
                      seed: int = 0, eval_id: int = 1,
                      timeout: float = 300.0) -> EvalTrace:
    """Run one evaluation through an external worker process.

    Protocol violations, worker crashes, and timeouts raise
    :class:`EvaluationError` carrying the partial trace collected so far.
    """
    if lr < 0.0:
        raise ValueError("learning rate must be nonnegative")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    request = json.dumps({"eval_id": eval_id, "learning_rate": lr,
                          "epochs": epochs, "seed": seed})

    losses: list[float] = []
    accuracies: list[float | None] = []

    def partial() -> EvalTrace:
        accs = [a for a in accuracies if a is not None]
        keep = accs if len(accs) == len(accuracies) and accs else None
        return EvalTrace(lr=lr, epoch_losses=list(losses),
                         epoch_accuracies=keep, diverged=True)

    try:
        proc = subprocess.Popen(_as_command(command), stdin=subprocess.PIPE,
                                stdout=subprocess.PIPE, stderr=subprocess.PIPE,
                                text=True)
    except OSError as exc:
        raise EvaluationError(f"cannot launch worker: {exc}") from exc

    timed_out = False
    try:
        stdout, stderr = proc.communicate(request + "\n", timeout=timeout)
    except subprocess.TimeoutExpired:
        proc.kill()
        stdout, stderr = proc.communicate()
        timed_out = True

    done = False
    worker_diverged = False
    for line in stdout.splitlines():
        line = line.strip()
        if not line:
            continue
        if done:
            break
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EvaluationError(f"malformed worker record: {line[:120]!r}",
                                  trace=partial()) from exc
        if not isinstance(record, dict) or record.get("eval_id") != eval_id:
            raise EvaluationError(f"record for unexpected eval_id: {line[:120]!r}",
                                  trace=partial())
        if record.get("done"):
            done = True
            worker_diverged = bool(record.get("diverged", False))
            continue
        epoch = record.get("epoch")
        loss = record.get("loss")
        if not isinstance(epoch, int) or epoch != len(losses) + 1:
            raise EvaluationError(f"epoch records out of order: {line[:120]!r}",
                                  trace=partial())
        if isinstance(loss, bool) or not isinstance(loss, (int, float)):
            raise EvaluationError(f"missing or non-numeric loss: {line[:120]!r}",
                                  trace=partial())
        accuracy = record.get("accuracy")
        if accuracy is not None and (isinstance(accuracy, bool)
                                     or not isinstance(accuracy, (int, float))):
            raise EvaluationError(f"non-numeric accuracy: {line[:120]!r}",
                                  trace=partial())
        losses.append(float(loss))
        accuracies.append(None if accuracy is None else float(accuracy))

    if timed_out:
        raise EvaluationError(f"worker timed out after {timeout}s", trace=partial())
    if not done:
        detail = stderr.strip().splitlines()
        suffix = f": {detail[-1]}" if detail else ""
        raise EvaluationError(
            f"worker exited (code {proc.returncode}) before terminal record{suffix}",
            trace=partial())

    accs = [a for a in accuracies if a is not None]
    keep = accs if accuracies and len(accs) == len(accuracies) else None
    return EvalTrace(lr=lr, epoch_losses=losses, epoch_accuracies=keep,
                     diverged=worker_diverged)


# --- trace persistence ----------------------------------------------------------


def write_history_csv(path: str | Path, history: TuneHistory) -> None:
    """Persist every epoch of every round; empty traces get one epoch-0 row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for entry in history:
            trace = entry.trace
            if not trace.epoch_losses:
                writer.writerow([entry.round, repr(entry.coord), repr(entry.lr),
                                 0, "nan", ""])
                continue
            for i, loss in enumerate(trace.epoch_losses):
                acc = ""
                if trace.epoch_accuracies is not None:
                    acc = repr(trace.epoch_accuracies[i])
                writer.writerow([entry.round, repr(entry.coord), repr(entry.lr),
                                 i + 1, repr(loss), acc])


class HistoryRows(NamedTuple):
    round: int
    coord: float
    lr: float
    losses: list[float]
    accuracies: list[float] | None


def read_history_csv(path: str | Path) -> list[HistoryRows]:
    """Raw per-round reconstruction of a persisted history CSV."""
    rounds: dict[int, dict] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}")
        for row in reader:
            t = int(row["round"])
            rec = rounds.setdefault(t, {"coord": float(row["coord"]),
                                        "lr": float(row["lr"]),
                                        "losses": [], "accuracies": []})
            epoch = int(row["epoch"])
            if epoch == 0:
                continue  # sentinel row for a trace with no recorded epochs
            if epoch != len(rec["losses"]) + 1:
                raise ValueError(f"epoch rows out of order in {path} round {t}")
            rec["losses"].append(float(row["loss"]))
            rec["accuracies"].append(float(row["accuracy"]) if row["accuracy"] else None)
    result = []
    for t in sorted(rounds):
        rec = rounds[t]
        accs = [a for a in rec["accuracies"] if a is not None]
        keep = accs if rec["accuracies"] and len(accs) == len(rec["accuracies"]) else None
        result.append(HistoryRows(t, rec["coord"], rec["lr"], rec["losses"], keep))
    return result


def replication_seeds(base_seed: int, run_index: int) -> tuple[int, int]:
    """Independent (tuner, objective) seeds for one replication."""
    ss = np.random.SeedSequence(base_seed + run_index)
    tuner_seed, objective_seed = ss.generate_state(2, dtype=np.uint64)
    return int(tuner_seed), int(objective_seed)


Objective = Callable[[float], tuple[float, EvalTrace]]
