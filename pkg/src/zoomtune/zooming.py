"""Adaptive-discretization bandit over [0, 1]: arms are activated wherever the
union of confidence balls stops covering the space, and the arm with the
largest optimism index is played each round."""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .objective import EvaluationError, Objective, TuneEntry, TuneHistory

# Index value standing in for the empirical mean of an arm that has never been
# played. Rewards are normalized to [0, 1], so 1.0 treats fresh arms
# optimistically and keeps them competitive at any radius scale.
UNPLAYED_INDEX_MEAN = 1.0


@dataclass
class ActiveArm:
    """One activated arm: normalized position plus play statistics."""

    coord: float
    plays: int = 0
    reward_sum: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.coord <= 1.0:
            raise ValueError(f"coord must lie in [0, 1], got {self.coord}")
        if self.plays < 0:
            raise ValueError("plays must be nonnegative")
        if not math.isfinite(self.reward_sum):
            raise ValueError("reward_sum must be finite")

    @property
    def mean(self) -> float:
        """Empirical mean reward; 0 before the first play."""
        return self.reward_sum / self.plays if self.plays else 0.0


def confidence_radius(plays: int, radius_scale: float = 1.0) -> float:
    """Ball radius of an arm after ``plays`` completed evaluations.

    ``radius_scale`` shrinks the radius uniformly (1 keeps the base rule,
    0.1 is the tighter variant); the result is clamped at 1 so one fresh arm
    can never cover more than the whole space.
    """
    if plays < 0:
        raise ValueError("plays must be nonnegative")
    if not 0.0 < radius_scale <= 1.0:
        raise ValueError(f"radius_scale must lie in (0, 1], got {radius_scale}")
    return min(1.0, radius_scale * math.sqrt(2.0 / (plays + 1)))


@dataclass(frozen=True)
class Ball:
    """Closed confidence ball around an arm's coordinate."""

    center: float
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0.0:
            raise ValueError("radius must be positive")

    def contains(self, x: float) -> bool:
        return abs(x - self.center) <= self.radius


def ball_of(arm: ActiveArm, radius_scale: float) -> Ball:
    return Ball(arm.coord, confidence_radius(arm.plays, radius_scale))


class ZoomingState:
    """Active arms, round counter, radius scale, and the activation RNG."""

    def __init__(self, seed: int, radius_scale: float = 0.1) -> None:
        if not 0.0 < radius_scale <= 1.0:
            raise ValueError(f"radius_scale must lie in (0, 1], got {radius_scale}")
        self.arms: list[ActiveArm] = []  # kept sorted by coord, coords distinct
        self.round = 1
        self.radius_scale = radius_scale
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def coords(self) -> list[float]:
        return [arm.coord for arm in self.arms]

    def total_plays(self) -> int:
        return sum(arm.plays for arm in self.arms)

    def insert(self, arm: ActiveArm) -> None:
        coords = self.coords()
        idx = bisect.bisect_left(coords, arm.coord)
        if idx < len(coords) and coords[idx] == arm.coord:
            raise ValueError(f"arm already active at {arm.coord}")
        self.arms.insert(idx, arm)

    def find(self, coord: float) -> ActiveArm:
        coords = self.coords()
        idx = bisect.bisect_left(coords, coord)
        if idx == len(coords) or coords[idx] != coord:
            raise ValueError(f"arm not active: {coord}")
        return self.arms[idx]

    def to_json(self) -> str:
        """Snapshot for resume; restores arms, round, and the RNG stream."""
        state = {
            "round": self.round,
            "radius_scale": self.radius_scale,
            "seed": self.seed,
            "arms": [[a.coord, a.plays, a.reward_sum] for a in self.arms],
            "rng": self.rng.bit_generator.state,
        }
        return json.dumps(state, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ZoomingState":
        data = json.loads(text)
        state = cls(data["seed"], data["radius_scale"])
        state.round = data["round"]
        state.arms = [ActiveArm(c, p, s) for c, p, s in data["arms"]]
        state.rng.bit_generator.state = data["rng"]
        return state


def arm_index(arm: ActiveArm, radius_scale: float) -> float:
    """Optimism index: (empirical or optimistic) mean plus twice the radius."""
    mean = arm.mean if arm.plays else UNPLAYED_INDEX_MEAN
    return mean + 2.0 * confidence_radius(arm.plays, radius_scale)


def is_covered(x: float, state: ZoomingState) -> bool:
    """Whether some active arm's closed confidence ball contains ``x``."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    return any(ball_of(arm, state.radius_scale).contains(x) for arm in state.arms)


def covered_intervals(state: ZoomingState) -> list[tuple[float, float]]:
    """Union of the arms' balls clipped to [0, 1], merged and sorted."""
    spans = []
    for arm in state.arms:
        ball = ball_of(arm, state.radius_scale)
        spans.append((max(0.0, ball.center - ball.radius),
                      min(1.0, ball.center + ball.radius)))
    spans.sort()
    merged: list[tuple[float, float]] = []
    for lo, hi in spans:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


def uncovered_region(state: ZoomingState) -> list[tuple[float, float]]:
    """Closure of the part of [0, 1] no confidence ball reaches.

    Returned intervals are sorted, disjoint, and maximal; zero-length gaps
    (ball boundaries that touch) are dropped because their single point is
    covered.
    """
    gaps: list[tuple[float, float]] = []
    cursor = 0.0
    for lo, hi in covered_intervals(state):
        if lo > cursor:
            gaps.append((cursor, lo))
        cursor = max(cursor, hi)
    if cursor < 1.0:
        gaps.append((cursor, 1.0))
    return gaps


def activation_step(state: ZoomingState) -> Optional[ActiveArm]:
    """Activate one uniformly drawn arm inside the uncovered region, if any."""
    gaps = uncovered_region(state)
    if not gaps:
        return None
    lengths = [hi - lo for lo, hi in gaps]
    total = sum(lengths)
    u = state.rng.random() * total
    coord = gaps[-1][1]
    for (lo, hi), length in zip(gaps, lengths):
        if u < length:
            coord = lo + u
            break
        u -= length
    arm = ActiveArm(coord)
    state.insert(arm)
    return arm


def select_arm(state: ZoomingState) -> float:
    """Coordinate of the active arm with the largest index (ties: smallest)."""
    if not state.arms:
        raise ValueError("no active arms: activate before selecting")
    best = state.arms[0]
    best_index = arm_index(best, state.radius_scale)
    for arm in state.arms[1:]:  # arms sorted by coord, so first max wins ties
        idx = arm_index(arm, state.radius_scale)
        if idx > best_index:
            best, best_index = arm, idx
    return best.coord


def update(state: ZoomingState, coord: float, reward: float) -> ZoomingState:
    """Record one observed reward for an active arm and advance the round."""
    if not 0.0 <= reward <= 1.0:
        raise ValueError(f"unnormalized reward: {reward} outside [0, 1]")
    arm = state.find(coord)
    arm.plays += 1
    arm.reward_sum += reward
    state.round += 1
    return state


def run(budget: int, objective: Objective, state: ZoomingState) -> TuneHistory:
    """Drive the activate/select/evaluate/update loop for ``budget`` rounds."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    history = TuneHistory()
    for _ in range(budget):
        while activation_step(state) is not None:
            pass
        coord = select_arm(state)
        try:
            reward, trace = objective(coord)
        except EvaluationError as err:
            if err.round is None:
                err.round = state.round
            raise
        update(state, coord, reward)
        # history rounds are run-local; state.round keeps the algorithm's
        # lifetime clock so resumed states stay consistent
        history.append(TuneEntry(round=len(history) + 1, coord=coord,
                                 lr=trace.lr, reward=reward, trace=trace))
    return history


def make_tuner(radius_scale: float = 0.1):
    """Tuner callable ``(budget, objective, seed) -> TuneHistory``."""
    def tune(budget: int, objective: Objective, seed: int) -> TuneHistory:
        return run(budget, objective, ZoomingState(seed, radius_scale))
    return tune
