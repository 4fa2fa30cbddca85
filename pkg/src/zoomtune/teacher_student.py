"""Planted single-hidden-layer regression benchmark: a hidden teacher network
labels Gaussian inputs, and a student of the same shape is trained with
full-batch gradient descent under MSE."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .objective import (EvalTrace, LrMap, RewardSpec, TuneHistory, best_trace,
                        denormalize, replication_seeds, reward_of)

ACTIVATIONS = ("relu", "sigmoid")

# A run is declared diverged once its loss is non-finite or exceeds this many
# times the student's starting loss.
DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class NetConfig:
    """Input width, hidden width, activation, and dataset size."""

    d: int = 10
    k: int = 10
    activation: str = "relu"
    n_samples: int = 1000

    def __post_init__(self) -> None:
        if min(self.d, self.k, self.n_samples) < 1:
            raise ValueError("d, k and n_samples must all be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")


@dataclass(frozen=True)
class Dataset:
    """Inputs and the teacher's exact outputs for them."""

    X: np.ndarray  # (N, d)
    Y: np.ndarray  # (N,)


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return 1.0 / (1.0 + np.exp(-z))


def _act_grad(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (z > 0.0).astype(float)  # subgradient 0 at the kink
    s = 1.0 / (1.0 + np.exp(-z))
    return s * (1.0 - s)


def forward(w: np.ndarray, x: np.ndarray, activation: str) -> float:
    """Network output for one input: sum of the hidden activations."""
    return float(np.sum(_act(w @ x, activation)))


def forward_batch(w: np.ndarray, X: np.ndarray, activation: str) -> np.ndarray:
    return np.sum(_act(X @ w.T, activation), axis=1)


def generate(config: NetConfig, seed: int) -> tuple[np.ndarray, Dataset, np.ndarray]:
    """Sample (teacher weights, labelled dataset, student init) for one run."""
    rng = np.random.default_rng(seed)
    teacher = rng.standard_normal((config.k, config.d))
    X = rng.standard_normal((config.n_samples, config.d))
    Y = forward_batch(teacher, X, config.activation)
    student = rng.standard_normal((config.k, config.d))
    return teacher, Dataset(X=X, Y=Y), student


def mse(w: np.ndarray, data: Dataset, activation: str) -> float:
    residual = forward_batch(w, data.X, activation) - data.Y
    return float(np.mean(residual * residual))


def grad_mse(w: np.ndarray, data: Dataset, activation: str) -> np.ndarray:
    """Exact MSE gradient with respect to the first-layer weights."""
    n = data.X.shape[0]
    z = data.X @ w.T
    residual = np.sum(_act(z, activation), axis=1) - data.Y
    weighted = residual[:, None] * _act_grad(z, activation)  # (N, k)
    return (2.0 / n) * weighted.T @ data.X


def train_gd(student: np.ndarray, data: Dataset, lr: float, epochs: int,
             activation: str) -> EvalTrace:
    """Full-batch gradient descent, recording the loss after every epoch.

    Stops early, flagging the trace, once the loss is non-finite or exceeds
    ``DIVERGENCE_FACTOR`` times the starting loss.
    """
    if lr < 0.0:
        raise ValueError("learning rate must be nonnegative")
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    w = np.array(student, dtype=float)
    initial = mse(w, data, activation)
    limit = DIVERGENCE_FACTOR * initial
    losses: list[float] = []
    diverged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            w -= lr * grad_mse(w, data, activation)
            loss = mse(w, data, activation)
            losses.append(loss)
            if not math.isfinite(loss) or loss > limit:
                diverged = True
                break
    return EvalTrace(lr=lr, epoch_losses=losses, diverged=diverged)


def make_objective(net: NetConfig, lr_map: LrMap, epochs: int, seed: int,
                   reward_clip: tuple[float, float] | None = None):
    """Objective callable over one freshly sampled teacher/dataset/student.

    Rewards are the negated final loss mapped onto [0, 1]; by default the clip
    window runs from 0 up to the student's starting loss.
    """
    _, data, student = generate(net, seed)
    initial = mse(student, data, net.activation)
    if reward_clip is None:
        reward_clip = (0.0, initial if initial > 0.0 else 1.0)
    spec = RewardSpec("negative_loss", *reward_clip)

    def evaluate(coord: float) -> tuple[float, EvalTrace]:
        lr = denormalize(coord, lr_map)
        trace = train_gd(student, data, lr, epochs, net.activation)
        return reward_of(trace, spec), trace

    meta = {"initial_loss": initial, "reward_clip": reward_clip}
    return evaluate, meta


Tuner = Callable[[int, Callable[[float], tuple[float, EvalTrace]], int], TuneHistory]


def divergence_fraction(net: NetConfig, tuner: Tuner, evals: int, runs: int,
                        base_seed: int = 0, *, lr_map: LrMap = LrMap(),
                        epochs: int = 100,
                        reward_clip: tuple[float, float] | None = None) -> float:
    """Fraction of replications whose minimum-AUC evaluation diverged.

    Each replication resamples teacher, dataset, and student from its own seed
    and runs the tuner for the full evaluation budget.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    diverged = 0
    for i in range(runs):
        tuner_seed, objective_seed = replication_seeds(base_seed, i)
        evaluate, _ = make_objective(net, lr_map, epochs, objective_seed, reward_clip)
        history = tuner(evals, evaluate, tuner_seed)
        if best_trace(history).trace.diverged:
            diverged += 1
    return diverged / runs
