"""Comparison tuners sharing the history format: uniform random search and a
pre-committed uniform grid driven by the same confidence index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .objective import EvaluationError, Objective, TuneEntry, TuneHistory
from .zooming import confidence_radius


def random_search(budget: int, objective: Objective, seed: int) -> TuneHistory:
    """Evaluate ``budget`` i.i.d. uniform coordinates."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    history = TuneHistory()
    for t in range(1, budget + 1):
        coord = float(rng.random())
        try:
            reward, trace = objective(coord)
        except EvaluationError as err:
            if err.round is None:
                err.round = t
            raise
        history.append(TuneEntry(round=t, coord=coord, lr=trace.lr,
                                 reward=reward, trace=trace))
    return history


@dataclass
class GridBanditState:
    """Fixed uniform grid of arms with per-arm play statistics."""

    n_arms: int
    plays: list[int] = field(default_factory=list)
    reward_sums: list[float] = field(default_factory=list)
    round: int = 1

    def __post_init__(self) -> None:
        if self.n_arms < 2:
            raise ValueError("grid needs at least 2 arms")
        if not self.plays:
            self.plays = [0] * self.n_arms
        if not self.reward_sums:
            self.reward_sums = [0.0] * self.n_arms

    @property
    def coords(self) -> list[float]:
        return [i / (self.n_arms - 1) for i in range(self.n_arms)]

    def pick(self) -> int:
        """Next arm: round-robin warm-up, then the largest index (ties: lowest)."""
        for i, n in enumerate(self.plays):
            if n == 0:
                return i
        best, best_index = 0, -math.inf
        for i, (n, s) in enumerate(zip(self.plays, self.reward_sums)):
            idx = s / n + 2.0 * confidence_radius(n, 1.0)
            if idx > best_index:
                best, best_index = i, idx
        return best


def default_grid_size(budget: int) -> int:
    """Half the budget, rounded up, never fewer than 2 arms."""
    return max(2, math.ceil(budget / 2))


def grid_ucb(budget: int, n_arms: int, objective: Objective,
             seed: int | None = None) -> TuneHistory:
    """Static uniform discretization with a mean-plus-radius selection rule.

    ``seed`` is accepted for tuner-interface uniformity; the policy itself is
    deterministic.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    del seed
    state = GridBanditState(n_arms)
    coords = state.coords
    history = TuneHistory()
    for t in range(1, budget + 1):
        arm = state.pick()
        try:
            reward, trace = objective(coords[arm])
        except EvaluationError as err:
            if err.round is None:
                err.round = t
            raise
        state.plays[arm] += 1
        state.reward_sums[arm] += reward
        state.round += 1
        history.append(TuneEntry(round=t, coord=coords[arm], lr=trace.lr,
                                 reward=reward, trace=trace))
    return history


def make_grid_tuner(n_arms: int | None = None):
    """Tuner callable ``(budget, objective, seed) -> TuneHistory``."""
    def tune(budget: int, objective: Objective, seed: int) -> TuneHistory:
        k = n_arms if n_arms is not None else default_grid_size(budget)
        return grid_ucb(budget, k, objective, seed)
    return tune
