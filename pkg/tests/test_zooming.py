import math

import numpy as np
import pytest

from zoomtune.objective import EvalTrace, EvaluationError
from zoomtune.zooming import (ActiveArm, Ball, ZoomingState, activation_step,
                              arm_index, ball_of, confidence_radius,
                              covered_intervals, is_covered, make_tuner, run,
                              select_arm, uncovered_region, update)


def make_state(arms, radius_scale=1.0, seed=0):
    state = ZoomingState(seed, radius_scale)
    for arm in arms:
        state.insert(arm)
    return state


def landscape(coord):
    reward = 1.0 - abs(coord - 0.7)
    return reward, EvalTrace(lr=coord, epoch_losses=[1.0 - reward])


class TestConfidenceRadius:
    def test_known_values(self):
        assert confidence_radius(0, 1.0) == 1.0  # clamp resolves sqrt(2)
        assert confidence_radius(1, 1.0) == 1.0
        assert confidence_radius(7, 1.0) == 0.5
        assert confidence_radius(31, 1.0) == 0.25
        assert confidence_radius(7, 0.1) == pytest.approx(0.05, abs=1e-15)

    def test_monotone_nonincreasing_and_halving(self):
        values = [confidence_radius(n, 0.37) for n in range(200)]
        assert all(a >= b for a, b in zip(values, values[1:]))
        # strictly decreasing once below the clamp
        assert all(a > b for a, b in zip(values, values[1:]) if a < 1.0)
        assert confidence_radius(31, 1.0) == confidence_radius(7, 1.0) / 2

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            confidence_radius(-1, 1.0)
        with pytest.raises(ValueError):
            confidence_radius(3, 0.0)
        with pytest.raises(ValueError):
            confidence_radius(3, 1.5)


class TestBall:
    def test_membership_is_closed(self):
        ball = ball_of(ActiveArm(0.5, plays=7), 1.0)
        assert ball == Ball(0.5, 0.5)
        assert ball.contains(1.0) and ball.contains(0.0)
        assert not ball.contains(1.0 + 1e-9)
        assert not Ball(0.5, 0.2).contains(0.71)

    def test_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            Ball(0.5, 0.0)


class TestCoverage:
    def test_empty_state_covers_nothing(self):
        state = make_state([])
        assert not is_covered(0.5, state)
        assert uncovered_region(state) == [(0.0, 1.0)]

    def test_ball_membership_is_closed(self):
        state = make_state([ActiveArm(0.5, plays=7)])  # radius 0.5
        assert is_covered(0.9, state)
        assert is_covered(1.0, state)
        state = make_state([ActiveArm(0.5, plays=49)])  # radius 0.2
        assert not is_covered(0.9, state)
        assert is_covered(0.5, state)

    def test_fresh_arm_covers_everything_at_scale_one(self):
        state = make_state([ActiveArm(0.13)])
        assert uncovered_region(state) == []
        assert all(is_covered(x, state) for x in np.linspace(0, 1, 101))

    def test_uncovered_region_against_dense_grid_oracle(self):
        state = make_state([ActiveArm(0.2, plays=49)])  # radius 0.2
        region = uncovered_region(state)
        assert len(region) == 1
        (lo, hi), = region
        grid = np.linspace(0.0, 1.0, 100_001)
        uncovered = np.array([x for x in grid if not is_covered(x, state)])
        assert abs(lo - uncovered.min()) <= 1e-4
        assert abs(hi - uncovered.max()) <= 1e-4
        assert lo == pytest.approx(0.4, abs=1e-12)
        assert hi == 1.0

    def test_uncovered_region_multiple_gaps(self):
        state = make_state([ActiveArm(0.3, plays=49), ActiveArm(0.5, plays=49)])
        gaps = uncovered_region(state)
        assert len(gaps) == 2
        assert gaps[0] == pytest.approx((0.0, 0.1))
        assert gaps[1] == pytest.approx((0.7, 1.0))

    def test_region_complement_consistency(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            arms = [ActiveArm(float(c), plays=int(p))
                    for c, p in zip(rng.random(4), rng.integers(0, 200, 4))]
            state = make_state(arms, radius_scale=0.1, seed=1)
            gaps = uncovered_region(state)
            for x in np.linspace(0.0, 1.0, 401):
                inside = any(lo <= x <= hi for lo, hi in gaps)
                if not is_covered(x, state):
                    assert inside
                elif not inside:
                    assert is_covered(x, state)

    def test_touching_balls_merge(self):
        state = make_state([ActiveArm(0.2, plays=49), ActiveArm(0.6, plays=49)])
        # balls [0.0, 0.4] and [0.4, 0.8] share one covered point
        assert covered_intervals(state) == [(0.0, pytest.approx(0.8))]
        assert uncovered_region(state) == [(pytest.approx(0.8), 1.0)]


class TestActivation:
    def test_no_activation_when_covered(self):
        state = make_state([ActiveArm(0.5)], radius_scale=1.0)
        before = state.coords()
        assert activation_step(state) is None
        assert state.coords() == before

    def test_first_activation_covers_space_at_scale_one(self):
        state = ZoomingState(seed=5, radius_scale=1.0)
        arm = activation_step(state)
        assert arm is not None and 0.0 <= arm.coord <= 1.0
        assert arm.plays == 0
        assert uncovered_region(state) == []

    def test_activation_lands_in_uncovered_region(self):
        for seed in range(20):
            state = make_state([ActiveArm(0.2, plays=49)], seed=seed)
            arm = activation_step(state)
            assert 0.4 <= arm.coord <= 1.0

    def test_activation_is_seed_deterministic(self):
        coords = []
        for _ in range(2):
            state = ZoomingState(seed=123, radius_scale=0.1)
            while activation_step(state) is not None:
                pass
            coords.append(state.coords())
        assert coords[0] == coords[1]

    def test_activation_loop_terminates_and_covers(self):
        state = ZoomingState(seed=9, radius_scale=0.1)
        steps = 0
        while activation_step(state) is not None:
            steps += 1
            assert steps < 1000
        assert uncovered_region(state) == []
        assert all(is_covered(x, state) for x in np.linspace(0, 1, 1001))


class TestSelection:
    def test_empty_state_rejects_selection(self):
        with pytest.raises(ValueError, match="activate"):
            select_arm(make_state([]))

    def test_two_arm_index_comparison(self):
        # index 0.6 + 2*0.5 = 1.6 beats 0.9 + 2*0.2 = 1.3
        state = make_state([ActiveArm(0.3, plays=7, reward_sum=0.6 * 7),
                            ActiveArm(0.8, plays=49, reward_sum=0.9 * 49)])
        assert select_arm(state) == 0.3
        assert arm_index(state.arms[0], 1.0) == pytest.approx(1.6)
        assert arm_index(state.arms[1], 1.0) == pytest.approx(1.3)

    def test_single_arm(self):
        assert select_arm(make_state([ActiveArm(0.42, plays=3, reward_sum=1.0)])) == 0.42

    def test_tie_breaks_to_smallest_coord(self):
        state = make_state([ActiveArm(0.3, plays=5, reward_sum=2.0),
                            ActiveArm(0.7, plays=5, reward_sum=2.0)])
        assert select_arm(state) == 0.3

    def test_fresh_arm_dominates_at_scale_one(self):
        # played arm with mean <= 1 and radius < 0.5 loses to any fresh arm
        state = make_state([ActiveArm(0.2, plays=8, reward_sum=8.0), ActiveArm(0.9)])
        assert select_arm(state) == 0.9
        assert arm_index(state.arms[1], 1.0) >= 2.0

    def test_fresh_index_lower_bound(self):
        for scale in (1.0, 0.37, 0.1):
            assert arm_index(ActiveArm(0.5), scale) >= 2.0 * min(1.0, scale * math.sqrt(2.0))

    def test_argmax_invariant_under_mean_shift(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(2, 6))
            coords = np.sort(rng.random(n))
            plays = rng.integers(1, 60, n)
            means = rng.random(n)
            for shift in (-0.4, 0.3, 2.0):
                base = make_state([ActiveArm(float(c), int(p), float(m * p))
                                   for c, p, m in zip(coords, plays, means)], 0.37)
                shifted = make_state([ActiveArm(float(c), int(p), float((m + shift) * p))
                                      for c, p, m in zip(coords, plays, means)], 0.37)
                assert select_arm(base) == select_arm(shifted)


class TestUpdate:
    def test_mean_tracks_rewards(self):
        state = make_state([ActiveArm(0.4)])
        update(state, 0.4, 0.8)
        assert state.arms[0].mean == pytest.approx(0.8)
        update(state, 0.4, 0.6)
        assert state.arms[0].mean == pytest.approx(0.7)

    def test_round_counts_plays(self):
        state = make_state([ActiveArm(0.4), ActiveArm(0.6)])
        assert state.round == 1
        update(state, 0.4, 0.5)
        update(state, 0.6, 0.5)
        assert state.round == 3
        assert state.round == 1 + state.total_plays()
        assert state.arms[1].plays == 1

    def test_unknown_arm_rejected(self):
        state = make_state([ActiveArm(0.4)])
        with pytest.raises(ValueError, match="not active"):
            update(state, 0.5, 0.5)

    def test_out_of_range_reward_rejected(self):
        state = make_state([ActiveArm(0.4)])
        with pytest.raises(ValueError, match="unnormalized"):
            update(state, 0.4, 1.2)
        with pytest.raises(ValueError, match="unnormalized"):
            update(state, 0.4, -0.1)

    def test_duplicate_coord_rejected(self):
        state = make_state([ActiveArm(0.4)])
        with pytest.raises(ValueError, match="already active"):
            state.insert(ActiveArm(0.4))


class TestRun:
    def test_single_round_plays_first_activated_arm(self):
        state = ZoomingState(seed=21, radius_scale=1.0)
        history = run(1, landscape, state)
        assert len(history) == 1
        assert history[0].round == 1
        assert history[0].coord == state.arms[0].coord

    def test_seeded_determinism(self):
        outcomes = []
        for _ in range(2):
            history = run(3, landscape, ZoomingState(seed=77, radius_scale=0.1))
            outcomes.append([(e.round, e.coord, e.reward) for e in history])
        assert outcomes[0] == outcomes[1]

    def test_round_invariant_after_run(self):
        state = ZoomingState(seed=4, radius_scale=0.1)
        run(20, landscape, state)
        assert state.round == 21 == 1 + state.total_plays()

    def test_covering_holds_after_every_round(self):
        state = ZoomingState(seed=13, radius_scale=0.1)
        grid = np.linspace(0.0, 1.0, 2001)
        for t in range(30):
            while activation_step(state) is not None:
                pass
            assert all(is_covered(x, state) for x in grid), f"gap after round {t+1}"
            coord = select_arm(state)
            reward, _ = landscape(coord)
            update(state, coord, reward)

    def test_smaller_scale_activates_at_least_as_many_arms(self):
        for seed in range(10):
            wide = ZoomingState(seed, radius_scale=1.0)
            tight = ZoomingState(seed, radius_scale=0.1)
            run(50, landscape, wide)
            run(50, landscape, tight)
            assert len(tight.arms) >= len(wide.arms)

    def test_rejects_zero_budget(self):
        with pytest.raises(ValueError):
            run(0, landscape, ZoomingState(seed=1))

    def test_evaluation_error_records_round(self):
        calls = {"n": 0}

        def flaky(coord):
            calls["n"] += 1
            if calls["n"] == 2:
                raise EvaluationError("worker blew up")
            return landscape(coord)

        with pytest.raises(EvaluationError) as excinfo:
            run(5, flaky, ZoomingState(seed=2, radius_scale=0.1))
        assert excinfo.value.round == 2


class TestSnapshot:
    def test_resume_matches_uninterrupted_run(self):
        full_state = ZoomingState(seed=31, radius_scale=0.1)
        full = run(20, landscape, full_state)

        head_state = ZoomingState(seed=31, radius_scale=0.1)
        head = run(10, landscape, head_state)
        resumed_state = ZoomingState.from_json(head_state.to_json())
        tail = run(10, landscape, resumed_state)

        replayed = [(e.coord, e.reward) for e in head] + \
                   [(e.coord, e.reward) for e in tail]
        assert replayed == [(e.coord, e.reward) for e in full]
        assert resumed_state.coords() == full_state.coords()
        assert resumed_state.round == full_state.round

    def test_snapshot_round_trips_fields(self):
        state = ZoomingState(seed=8, radius_scale=0.25)
        run(5, landscape, state)
        clone = ZoomingState.from_json(state.to_json())
        assert clone.radius_scale == state.radius_scale
        assert clone.round == state.round
        assert [(a.coord, a.plays, a.reward_sum) for a in clone.arms] == \
               [(a.coord, a.plays, a.reward_sum) for a in state.arms]


def test_make_tuner_signature():
    history = make_tuner(0.1)(4, landscape, 99)
    assert [e.round for e in history] == [1, 2, 3, 4]
