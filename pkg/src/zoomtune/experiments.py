"""Study runner: seeded replications of one tuner against one objective,
trace persistence, recomputable summaries, and cross-study comparison."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import baselines, teacher_student, zooming
from .objective import (EvalTrace, EvaluationError, LrMap, RewardSpec,
                        TuneEntry, TuneHistory, auc, best_found, best_trace,
                        denormalize, evaluate_external, read_history_csv,
                        replication_seeds, reward_of, write_history_csv)
from .teacher_student import NetConfig

ALGORITHMS = ("zooming", "random", "grid")
OBJECTIVES = ("teacher_student", "synthetic", "external")

# Center of the built-in synthetic reward landscape 1 - |x - peak|.
SYNTHETIC_PEAK = 0.7


@dataclass(frozen=True)
class StudyConfig:
    """Everything needed to reproduce one study bit-for-bit."""

    algorithm: str = "zooming"
    radius_scale: float = 0.1
    lr_map: LrMap = field(default_factory=LrMap)
    budget_evals: int = 5
    epochs_per_eval: int = 100
    objective: str = "teacher_student"
    net: NetConfig | None = None
    external_cmd: tuple[str, ...] | None = None
    grid_arms: int | None = None
    noise_sd: float = 0.0
    runs: int = 1
    base_seed: int = 0
    reward_clip: tuple[float, float] | None = None
    timeout: float = 300.0
    label: str | None = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.objective not in OBJECTIVES:
            raise ValueError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if self.budget_evals < 1:
            raise ValueError("budget_evals must be >= 1")
        if self.epochs_per_eval < 1:
            raise ValueError("epochs_per_eval must be >= 1")
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.noise_sd < 0.0:
            raise ValueError("noise_sd must be nonnegative")
        if self.objective == "external" and not self.external_cmd:
            raise ValueError("external objective requires external_cmd")
        if self.objective == "teacher_student" and self.net is None:
            object.__setattr__(self, "net", NetConfig())
        if self.grid_arms is not None and self.grid_arms < 2:
            raise ValueError("grid_arms must be >= 2")

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        if self.algorithm == "zooming":
            return f"zooming(scale={self.radius_scale:g})"
        if self.algorithm == "grid":
            return f"grid(K={self.resolved_grid_arms()})"
        return self.algorithm

    def resolved_grid_arms(self) -> int:
        if self.grid_arms is not None:
            return self.grid_arms
        return baselines.default_grid_size(self.budget_evals)

    def expected_epochs(self) -> int:
        """Epoch rows a completed, non-diverged trace must carry."""
        return 1 if self.objective == "synthetic" else self.epochs_per_eval

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "radius_scale": self.radius_scale,
            "lr_map": {"lo": self.lr_map.lo, "hi": self.lr_map.hi,
                       "scale": self.lr_map.scale},
            "budget_evals": self.budget_evals,
            "epochs_per_eval": self.epochs_per_eval,
            "objective": self.objective,
            "net": None if self.net is None else {
                "d": self.net.d, "k": self.net.k,
                "activation": self.net.activation,
                "n_samples": self.net.n_samples},
            "external_cmd": None if self.external_cmd is None else list(self.external_cmd),
            "grid_arms": self.grid_arms,
            "noise_sd": self.noise_sd,
            "runs": self.runs,
            "base_seed": self.base_seed,
            "reward_clip": None if self.reward_clip is None else list(self.reward_clip),
            "timeout": self.timeout,
            "label": self.label,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        net = data.get("net")
        cmd = data.get("external_cmd")
        clip = data.get("reward_clip")
        return cls(
            algorithm=data["algorithm"],
            radius_scale=data["radius_scale"],
            lr_map=LrMap(**data["lr_map"]),
            budget_evals=data["budget_evals"],
            epochs_per_eval=data["epochs_per_eval"],
            objective=data["objective"],
            net=None if net is None else NetConfig(**net),
            external_cmd=None if cmd is None else tuple(cmd),
            grid_arms=data.get("grid_arms"),
            noise_sd=data.get("noise_sd", 0.0),
            runs=data["runs"],
            base_seed=data["base_seed"],
            reward_clip=None if clip is None else tuple(clip),
            timeout=data.get("timeout", 300.0),
            label=data.get("label"),
        )


def synthetic_reward(coord: float) -> float:
    """Noise-free level of the built-in landscape at a coordinate."""
    return 1.0 - abs(coord - SYNTHETIC_PEAK)


def _make_synthetic_objective(config: StudyConfig, seed: int):
    rng = np.random.default_rng(seed)

    def evaluate(coord: float) -> tuple[float, EvalTrace]:
        reward = synthetic_reward(coord)
        if config.noise_sd > 0.0:
            reward += config.noise_sd * float(rng.standard_normal())
        reward = min(1.0, max(0.0, reward))
        trace = EvalTrace(lr=denormalize(coord, config.lr_map),
                          epoch_losses=[1.0 - reward])
        return reward, trace

    return evaluate, {}


class _ExternalObjective:
    """Sequential external evaluations with lazily resolved reward clipping.

    Protocol failures become diverged zero-reward entries so budget accounting
    survives a flaky worker; the failure count is reported per run.
    """

    def __init__(self, config: StudyConfig, seed: int) -> None:
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.eval_id = 0
        self.protocol_errors = 0
        self.clip: tuple[float, float] | None = config.reward_clip

    def __call__(self, coord: float) -> tuple[float, EvalTrace]:
        cfg = self.config
        self.eval_id += 1
        lr = denormalize(coord, cfg.lr_map)
        # 32-bit seeds survive JSON number handling in any worker language
        seed = int(self.rng.integers(2 ** 32))
        try:
            trace = evaluate_external(lr, cfg.epochs_per_eval, cfg.external_cmd,
                                      seed=seed, eval_id=self.eval_id,
                                      timeout=cfg.timeout)
        except EvaluationError as err:
            self.protocol_errors += 1
            trace = err.trace if err.trace is not None else EvalTrace(
                lr=lr, epoch_losses=[], diverged=True)
            return 0.0, trace
        if self.clip is None and trace.epoch_losses:
            first = trace.epoch_losses[0]
            self.clip = (0.0, first if math.isfinite(first) and first > 0.0 else 1.0)
        if trace.diverged:
            return 0.0, trace
        clip = self.clip if self.clip is not None else (0.0, 1.0)
        spec = RewardSpec("negative_loss", *clip)
        return reward_of(trace, spec), trace


def _make_objective(config: StudyConfig, seed: int):
    if config.objective == "teacher_student":
        return teacher_student.make_objective(
            config.net, config.lr_map, config.epochs_per_eval, seed,
            config.reward_clip)
    if config.objective == "synthetic":
        return _make_synthetic_objective(config, seed)
    external = _ExternalObjective(config, seed)
    return external, {"external": external}


def _make_tuner(config: StudyConfig):
    if config.algorithm == "zooming":
        return zooming.make_tuner(config.radius_scale)
    if config.algorithm == "random":
        return baselines.random_search
    return baselines.make_grid_tuner(config.resolved_grid_arms())


def run_one(config: StudyConfig, run_index: int) -> tuple[TuneHistory, int]:
    """One replication; returns its history and the protocol-error count."""
    tuner_seed, objective_seed = replication_seeds(config.base_seed, run_index)
    objective, meta = _make_objective(config, objective_seed)
    tuner = _make_tuner(config)
    history = tuner(config.budget_evals, objective, tuner_seed)
    external = meta.get("external")
    errors = external.protocol_errors if external is not None else 0
    return history, errors


def samples_to_best(history: TuneHistory) -> int:
    """Distinct arms evaluated up to and including the minimum-AUC round."""
    best = best_trace(history)
    return len({entry.coord for entry in history.entries[:best.round]})


@dataclass
class RunSummary:
    run: int
    evals: int
    best_trace: dict
    best_found: dict
    samples_to_best: int
    best_trace_diverged: bool

    def to_dict(self) -> dict:
        return {"run": self.run, "evals": self.evals,
                "best_trace": self.best_trace, "best_found": self.best_found,
                "samples_to_best": self.samples_to_best,
                "best_trace_diverged": self.best_trace_diverged}


@dataclass
class StudyReport:
    """Aggregated study outcome; everything here is recomputable from the
    persisted trace CSVs plus the study config."""

    config: StudyConfig
    runs: list[RunSummary]
    aggregate: dict
    protocol_errors: int = 0
    histories: list[TuneHistory] | None = None

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(),
                "aggregate": self.aggregate,
                "runs": [r.to_dict() for r in self.runs]}


def summarize_run(history: TuneHistory, run_index: int) -> RunSummary:
    bt = best_trace(history)
    bf = best_found(history)
    return RunSummary(
        run=run_index,
        evals=len(history),
        best_trace={"round": bt.round, "coord": bt.coord, "lr": bt.lr,
                    "auc": auc(bt.trace)},
        best_found={"round": bf.entry.round, "coord": bf.entry.coord,
                    "lr": bf.entry.lr, "final_loss": bf.entry.trace.final_loss,
                    "all_diverged": bf.all_diverged},
        samples_to_best=samples_to_best(history),
        best_trace_diverged=bt.trace.diverged,
    )


def aggregate_runs(config: StudyConfig, summaries: Sequence[RunSummary]) -> dict:
    best_bt = min(summaries, key=lambda s: (s.best_trace["auc"], s.run))
    found = [s for s in summaries if not s.best_found["all_diverged"]]
    pool = found if found else list(summaries)
    best_bf = min(pool, key=lambda s: (s.best_found["final_loss"], s.run))
    return {
        "algorithm": config.algorithm,
        "label": config.display_label,
        "objective": config.objective,
        "budget_evals": config.budget_evals,
        "runs": len(summaries),
        "divergence_fraction": sum(s.best_trace_diverged for s in summaries) / len(summaries),
        "best_trace": dict(best_bt.best_trace, run=best_bt.run),
        "best_found": dict(best_bf.best_found, run=best_bf.run),
        "samples_to_best": best_bt.samples_to_best,
    }


def _dump_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def run_study(config: StudyConfig, out_dir: str | Path | None = None,
              workers: int = 1) -> StudyReport:
    """Execute every replication, optionally persisting traces and summary."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1 or config.runs == 1:
        results = [run_one(config, i) for i in range(config.runs)]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, config.runs)) as pool:
            results = list(pool.map(run_one, [config] * config.runs,
                                    range(config.runs)))
    histories = [h for h, _ in results]
    protocol_errors = sum(e for _, e in results)
    summaries = [summarize_run(h, i) for i, h in enumerate(histories)]
    report = StudyReport(config=config, runs=summaries,
                         aggregate=aggregate_runs(config, summaries),
                         protocol_errors=protocol_errors, histories=histories)
    if out_dir is not None:
        persist_study(Path(out_dir), report)
    return report


def run_csv_name(run_index: int) -> str:
    return f"run_{run_index:03d}.csv"


def persist_study(out_dir: Path, report: StudyReport) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump_json(out_dir / "config.json", report.config.to_dict())
    assert report.histories is not None
    for i, history in enumerate(report.histories):
        write_history_csv(out_dir / run_csv_name(i), history)
    _dump_json(out_dir / "summary.json", report.to_dict())


def _run_divergence_limit(config: StudyConfig, run_index: int) -> float | None:
    """Loss threshold for the run, rebuilt from the seed schedule."""
    if config.objective != "teacher_student":
        return None
    _, objective_seed = replication_seeds(config.base_seed, run_index)
    _, data, student = teacher_student.generate(config.net, objective_seed)
    initial = teacher_student.mse(student, data, config.net.activation)
    return teacher_student.DIVERGENCE_FACTOR * initial


def _run_reward_spec(config: StudyConfig, run_index: int,
                     rounds) -> RewardSpec:
    if config.objective == "synthetic":
        return RewardSpec("negative_loss", 0.0, 1.0)
    if config.objective == "teacher_student":
        if config.reward_clip is not None:
            return RewardSpec("negative_loss", *config.reward_clip)
        _, objective_seed = replication_seeds(config.base_seed, run_index)
        _, data, student = teacher_student.generate(config.net, objective_seed)
        initial = teacher_student.mse(student, data, config.net.activation)
        hi = initial if initial > 0.0 else 1.0
        return RewardSpec("negative_loss", 0.0, hi)
    if config.reward_clip is not None:
        return RewardSpec("negative_loss", *config.reward_clip)
    for rec in rounds:
        if rec.losses and math.isfinite(rec.losses[0]) and rec.losses[0] > 0.0:
            return RewardSpec("negative_loss", 0.0, rec.losses[0])
    return RewardSpec("negative_loss", 0.0, 1.0)


def load_run_history(out_dir: Path, config: StudyConfig,
                     run_index: int) -> TuneHistory:
    """Rebuild one run's history, re-deriving divergence flags and rewards."""
    rounds = read_history_csv(out_dir / run_csv_name(run_index))
    limit = _run_divergence_limit(config, run_index)
    spec = _run_reward_spec(config, run_index, rounds)
    expected = config.expected_epochs()
    history = TuneHistory()
    for rec in rounds:
        diverged = (any(not math.isfinite(x) for x in rec.losses)
                    or len(rec.losses) < expected
                    or (limit is not None and rec.losses
                        and rec.losses[-1] > limit))
        trace = EvalTrace(lr=rec.lr, epoch_losses=rec.losses,
                          epoch_accuracies=rec.accuracies, diverged=diverged)
        reward = reward_of(trace, spec)
        history.append(TuneEntry(round=rec.round, coord=rec.coord, lr=rec.lr,
                                 reward=reward, trace=trace))
    return history


def load_study(out_dir: str | Path) -> StudyReport:
    """Reload a persisted study as reported (summary taken at face value)."""
    out_dir = Path(out_dir)
    data = json.loads((out_dir / "summary.json").read_text())
    config = StudyConfig.from_dict(data["config"])
    runs = [RunSummary(run=r["run"], evals=r["evals"], best_trace=r["best_trace"],
                       best_found=r["best_found"],
                       samples_to_best=r["samples_to_best"],
                       best_trace_diverged=r["best_trace_diverged"])
            for r in data["runs"]]
    return StudyReport(config=config, runs=runs, aggregate=data["aggregate"])


def regenerate_report(out_dir: str | Path, write: bool = True) -> StudyReport:
    """Recompute the summary purely from config.json plus the trace CSVs."""
    out_dir = Path(out_dir)
    config = StudyConfig.from_dict(json.loads((out_dir / "config.json").read_text()))
    histories = [load_run_history(out_dir, config, i) for i in range(config.runs)]
    summaries = [summarize_run(h, i) for i, h in enumerate(histories)]
    report = StudyReport(config=config, runs=summaries,
                         aggregate=aggregate_runs(config, summaries),
                         histories=histories)
    if write:
        _dump_json(out_dir / "summary.json", report.to_dict())
    return report


def compare(reports: Sequence[StudyReport]) -> dict:
    """Side-by-side best-trace table; the strictly smallest AUC wins."""
    if len(reports) < 2:
        raise ValueError("compare needs at least two studies")
    budgets = {r.config.budget_evals for r in reports}
    if len(budgets) != 1:
        raise ValueError(f"mismatched budgets: {sorted(budgets)}")
    objectives = {r.config.objective for r in reports}
    if len(objectives) != 1:
        raise ValueError(f"mismatched objectives: {sorted(objectives)}")
    rows = []
    for report in reports:
        agg = report.aggregate
        rows.append({"algorithm": agg["label"], "lr": agg["best_trace"]["lr"],
                     "auc": agg["best_trace"]["auc"],
                     "samples": agg["samples_to_best"]})
    best = min(row["auc"] for row in rows)
    winners = [row["algorithm"] for row in rows if row["auc"] == best]
    winner = winners[0] if len(winners) == 1 else "tie"
    for row in rows:
        row["winner"] = row["algorithm"] == winner
    return {"rows": rows, "winner": winner, "tie": len(winners) > 1}
