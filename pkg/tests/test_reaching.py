"""Policy inference, locality scoring, imitation, and goal pursuits."""

import math

import numpy as np
import pytest

from sgimlab.environment import EnvConfig, FishingEnv, Outcome
from sgimlab.interest import DegenerateGoalError
from sgimlab.memory import Episode, EpisodeMemory
from sgimlab.primitives import N_PARAMS, PolicyParams
from sgimlab.reaching import (
    DIST_M,
    DIST_N,
    GOAL_BUDGET,
    H_MAX,
    K_MAX,
    LocalityScore,
    global_explore,
    goal_directed_optimization,
    imitate_policy,
    infer_policy,
    local_data,
    score_localities,
)


class LinearEnv:
    """Noise-free stub: the first two components place the landing."""

    def execute(self, params):
        v = params.values
        return Outcome(2.0 * v[0] - 1.0, 2.0 * v[1] - 1.0)


class ConstantEnv:
    """Lands at the same point no matter the policy."""

    def __init__(self, point=(0.0, 0.0)):
        self.point = point

    def execute(self, params):
        return Outcome(*self.point)


def flat(v0=0.5, v1=0.5, rest=0.5, **overrides):
    values = np.full(N_PARAMS, rest)
    values[0] = v0
    values[1] = v1
    for pos, val in overrides.items():
        values[int(pos.lstrip("v"))] = val
    return PolicyParams(values)


def fill(memory, rows, tag="autonomous"):
    episodes = []
    for params, outcome in rows:
        ep = Episode(index=len(memory), params=params, outcome=outcome,
                     strategy_tag=tag)
        memory.record(ep)
        episodes.append(ep)
    return episodes


# ------------------------------------------------------- global explore


def test_global_explore_is_uniform_over_the_box():
    rng = np.random.default_rng(0)
    draws = np.array([global_explore(rng).values for _ in range(2_000)])
    assert draws.shape == (2_000, N_PARAMS)
    assert draws.min() >= 0.0 and draws.max() <= 1.0
    # pooled mean of 50k uniforms: sigma ~= 0.0013
    assert abs(draws.mean() - 0.5) < 0.004
    assert draws.min() < 0.02 and draws.max() > 0.98


# ------------------------------------------------------------ locality


def test_locality_of_single_episode():
    memory = EpisodeMemory()
    (ep,) = fill(memory, [(flat(0.6, 0.4), Outcome(0.25, 0.1))])
    loc = local_data(np.array([0.2, 0.1]), memory)
    assert loc.anchor is ep
    assert loc.neighbor_set == (ep,)
    assert loc.variance == 0.0
    assert loc.score == pytest.approx(0.05, abs=1e-12)
    assert loc.mean_outcome_distance == pytest.approx(0.05, abs=1e-12)


def test_consistent_neighborhood_beats_closer_noisy_one():
    # Anchor A lands closer to the goal (0.1 vs 0.2) but sits in a
    # neighborhood whose fellow policy throws wildly (variance 0.4);
    # anchor B's neighborhood scatters four times less (variance 0.1).
    # Reliability scores: A -> 0.1 + 0.2 = 0.3, B -> 0.2 + 0.05 = 0.25.
    goal = np.array([0.0, 0.0])
    theta_a = PolicyParams(np.full(N_PARAMS, 0.2))
    theta_a2_vals = np.full(N_PARAMS, 0.2)
    theta_a2_vals[0] += 0.05
    theta_b = PolicyParams(np.full(N_PARAMS, 0.7))
    theta_b2_vals = np.full(N_PARAMS, 0.7)
    theta_b2_vals[0] += 0.05
    spread_a = 2.0 * math.sqrt(0.4)
    spread_b = 2.0 * math.sqrt(0.1)
    memory = EpisodeMemory()
    a, a2, b, b2 = fill(memory, [
        (theta_a, Outcome(0.1, 0.0)),
        (PolicyParams(theta_a2_vals), Outcome(0.1 + spread_a, 0.0)),
        (theta_b, Outcome(0.2, 0.0)),
        (PolicyParams(theta_b2_vals), Outcome(0.2 + spread_b, 0.0)),
    ])

    scored = score_localities(goal, memory)
    assert [s.anchor.index for s in scored] == [b.index, a.index]
    best, second = scored
    assert best.variance == pytest.approx(0.1, abs=1e-12)
    assert best.score == pytest.approx(0.25, abs=1e-12)
    assert tuple(e.index for e in best.neighbor_set) == (b.index, b2.index)
    assert second.variance == pytest.approx(0.4, abs=1e-12)
    assert second.score == pytest.approx(0.3, abs=1e-12)
    assert local_data(goal, memory).anchor is b


def test_far_anchors_kept_when_nothing_is_near():
    memory = EpisodeMemory()
    eps = fill(memory, [
        (flat(0.1, 0.1), Outcome(0.9, 0.9)),
        (flat(0.9, 0.9), Outcome(-1.0, 0.8)),
    ])
    loc = local_data(np.array([0.0, 0.0]), memory)
    assert loc.anchor is eps[0]
    assert loc.mean_outcome_distance > DIST_M


def _brute_localities(episodes, goal, h_max, k_max, dist_m, dist_n):
    outs = np.array([e.outcome.as_array() for e in episodes])
    thetas = np.array([e.params.values for e in episodes])
    d_out = np.linalg.norm(outs - goal, axis=1)
    order = sorted(range(len(episodes)), key=lambda i: (d_out[i], i))
    anchors = order[:h_max]
    near = [i for i in anchors if d_out[i] <= dist_m]
    if near:
        anchors = near
    rows = []
    for i in anchors:
        d_th = np.linalg.norm(thetas - thetas[i], axis=1)
        neigh = sorted(
            (j for j in range(len(episodes)) if d_th[j] < dist_n),
            key=lambda j: (d_th[j], j),
        )[:k_max]
        var = float(outs[neigh].var(axis=0).sum())
        rows.append((
            episodes[i].index,
            tuple(episodes[j].index for j in neigh),
            var,
            float(d_out[i]) + 0.5 * var,
        ))
    rows.sort(key=lambda r: (r[3], r[0]))
    return rows


def test_locality_scores_match_bruteforce():
    rng = np.random.default_rng(97)
    memory = EpisodeMemory()
    episodes = []
    for _ in range(40):
        center = rng.random(N_PARAMS)
        for _ in range(int(rng.integers(3, 9))):
            theta = np.clip(center + rng.normal(0.0, 0.02, N_PARAMS), 0.0, 1.0)
            rows = fill(memory, [(PolicyParams(theta),
                                  Outcome(*rng.uniform(-1.2, 1.2, 2)))])
            episodes.extend(rows)
    for _ in range(25):
        goal = rng.uniform(-1.2, 1.2, 2)
        got = score_localities(goal, memory)
        want = _brute_localities(episodes, goal, H_MAX, K_MAX, DIST_M, DIST_N)
        assert [s.anchor.index for s in got] == [w[0] for w in want]
        for s, w in zip(got, want):
            assert tuple(e.index for e in s.neighbor_set) == w[1]
            assert s.variance == pytest.approx(w[2], abs=1e-12)
            assert s.score == pytest.approx(w[3], abs=1e-12)


# ------------------------------------------------------------ inference


def _locality(pairs, goal):
    memory = EpisodeMemory()
    episodes = fill(memory, pairs)
    goal = np.asarray(goal, dtype=float)
    dists = [np.linalg.norm(e.outcome.as_array() - goal) for e in episodes]
    anchor = episodes[int(np.argmin(dists))]
    return LocalityScore(anchor=anchor, neighbor_set=tuple(episodes),
                         mean_outcome_distance=float(np.mean(dists)),
                         variance=0.0, score=0.0)


def test_infer_policy_single_neighbor_copies_it():
    loc = _locality([(flat(0.3, 0.8), Outcome(0.5, 0.5))], (0.0, 0.0))
    theta = infer_policy((0.0, 0.0), loc)
    assert np.array_equal(theta.values, loc.anchor.params.values)


def test_infer_policy_concentrates_on_much_closer_neighbor():
    loc = _locality([
        (flat(0.9, 0.1), Outcome(0.001, 0.0)),
        (flat(0.2, 0.6), Outcome(1.0, 0.0)),
    ], (0.0, 0.0))
    theta = infer_policy((0.0, 0.0), loc)
    assert np.allclose(theta.values, flat(0.9, 0.1).values, atol=1e-12)


def test_infer_policy_averages_equidistant_neighbors():
    loc = _locality([
        (flat(0.9, 0.1), Outcome(0.3, 0.0)),
        (flat(0.1, 0.5), Outcome(-0.3, 0.0)),
    ], (0.0, 0.0))
    theta = infer_policy((0.0, 0.0), loc)
    mean = (flat(0.9, 0.1).values + flat(0.1, 0.5).values) / 2.0
    assert np.allclose(theta.values, mean, atol=1e-15)


def test_infer_policy_underflow_falls_back_to_nearest():
    loc = _locality([
        (flat(0.9, 0.1), Outcome(7.0, 0.0)),
        (flat(0.2, 0.6), Outcome(8.0, 0.0)),
    ], (0.0, 0.0))
    theta = infer_policy((0.0, 0.0), loc)
    assert np.array_equal(theta.values, flat(0.9, 0.1).values)


# ------------------------------------------------------------ imitation


def test_imitation_records_five_tagged_episodes():
    memory = EpisodeMemory()
    fill(memory, [(flat(0.5, 0.5), Outcome(0.0, 0.0))] * 1)
    fill(memory, [(flat(0.4, 0.4), Outcome(0.1, 0.0))])
    fill(memory, [(flat(0.6, 0.6), Outcome(0.2, 0.0))])
    out = imitate_policy(flat(0.5, 0.5), memory, LinearEnv(),
                         np.random.default_rng(1))
    assert len(out) == 5
    assert len(memory) == 8
    assert [e.index for e in out] == [3, 4, 5, 6, 7]
    assert all(e.strategy_tag == "imitation" for e in out)


def test_imitation_with_zero_radius_repeats_exactly():
    memory = EpisodeMemory()
    theta_d = flat(0.3, 0.7)
    out = imitate_policy(theta_d, memory, LinearEnv(),
                         np.random.default_rng(2), eps_max=0.0)
    for e in out:
        assert np.array_equal(e.params.values, theta_d.values)


def test_imitation_perturbations_stay_inside_the_radius():
    memory = EpisodeMemory()
    theta_d = PolicyParams(np.full(N_PARAMS, 0.5))
    out = imitate_policy(theta_d, memory, LinearEnv(),
                         np.random.default_rng(3), n_im=200)
    norms = np.array([
        np.linalg.norm(e.params.values - theta_d.values) for e in out
    ])
    assert np.all(norms < 0.05)
    assert norms.max() > 0.02
    assert len({e.params.values.tobytes() for e in out}) == 200
    for e in out:
        assert e.params.values.min() >= 0.0 and e.params.values.max() <= 1.0


def test_imitation_clips_at_the_parameter_bounds():
    memory = EpisodeMemory()
    out = imitate_policy(PolicyParams(np.ones(N_PARAMS)), memory, LinearEnv(),
                         np.random.default_rng(4), n_im=50)
    for e in out:
        assert e.params.values.max() <= 1.0


def test_imitation_rejects_bad_arguments():
    memory = EpisodeMemory()
    with pytest.raises(ValueError):
        imitate_policy(flat(), memory, LinearEnv(),
                       np.random.default_rng(5), n_im=0)
    with pytest.raises(ValueError):
        imitate_policy(flat(), memory, LinearEnv(),
                       np.random.default_rng(5), eps_max=-0.1)


# -------------------------------------------------------------- pursuit


def test_pursuit_on_empty_memory_explores_globally():
    memory = EpisodeMemory()
    result = goal_directed_optimization(
        np.array([0.9, 0.9]), memory, ConstantEnv((0.0, 0.0)),
        np.random.default_rng(6), origin=(0.0, 0.0))
    assert len(result.episodes) == GOAL_BUDGET
    assert result.regimes == ("global",) * GOAL_BUDGET
    assert result.best_similarity == pytest.approx(-1.0)
    assert len(memory) == GOAL_BUDGET
    assert [e.index for e in result.episodes] == list(range(GOAL_BUDGET))
    assert all(e.strategy_tag == "autonomous" for e in result.episodes)


def test_pursuit_goes_local_and_stops_on_a_known_goal():
    memory = EpisodeMemory()
    theta = flat(0.75, 0.625)
    fill(memory, [(theta, Outcome(0.5, 0.25))])
    result = goal_directed_optimization(
        np.array([0.5, 0.25]), memory, LinearEnv(),
        np.random.default_rng(7), origin=(0.0, 0.0))
    assert result.regimes == ("local",)
    assert len(result.episodes) == 1
    # the interpolated guess is executed first, before any refinement
    assert np.array_equal(result.episodes[0].params.values, theta.values)
    assert result.best_similarity == pytest.approx(0.0)


def test_pursuit_guess_blends_equally_good_neighbors():
    memory = EpisodeMemory()
    theta_a = flat(0.75, 0.625, v2=0.4)
    theta_b = flat(0.75, 0.625, v2=0.6)
    fill(memory, [(theta_a, Outcome(0.5, 0.25)), (theta_b, Outcome(0.5, 0.25))])
    result = goal_directed_optimization(
        np.array([0.5, 0.25]), memory, LinearEnv(),
        np.random.default_rng(8), origin=(0.0, 0.0))
    assert result.regimes == ("local",)
    blend = (theta_a.values + theta_b.values) / 2.0
    assert np.allclose(result.episodes[0].params.values, blend, atol=1e-15)


def test_pursuit_regime_split_matches_distance_ratio():
    # closest stored outcome at 0.45 of the goal's distance from the
    # origin: the first attempt of each pursuit explores globally with
    # probability 0.45
    n = 2_000
    globals_seen = 0
    for seed in range(n):
        memory = EpisodeMemory()
        fill(memory, [(flat(0.72, 0.5), Outcome(0.44, 0.0))])
        result = goal_directed_optimization(
            np.array([0.8, 0.0]), memory, LinearEnv(),
            np.random.default_rng(seed), origin=(0.0, 0.0), budget=1)
        assert len(result.episodes) == 1
        if result.regimes[0] == "global":
            globals_seen += 1
    sigma = math.sqrt(n * 0.45 * 0.55)
    assert abs(globals_seen - n * 0.45) < 3 * sigma


def test_pursuit_spends_full_budget_on_unreachable_goal():
    memory = EpisodeMemory()
    fill(memory, [(flat(0.5, 0.5), Outcome(0.0, 0.0))])
    result = goal_directed_optimization(
        np.array([0.9, 0.9]), memory, ConstantEnv((0.0, 0.0)),
        np.random.default_rng(9), origin=(0.0, 0.0), budget=8)
    assert len(result.episodes) == 8
    assert len(memory) == 9


def test_pursuit_local_search_improves_on_memory():
    memory = EpisodeMemory()
    rows = [
        (flat(0.80, 0.45), Outcome(0.60, -0.10)),
        (flat(0.85, 0.52), Outcome(0.70, 0.04)),
        (flat(0.88, 0.48), Outcome(0.76, -0.04)),
        (flat(0.92, 0.55), Outcome(0.84, 0.10)),
    ]
    fill(memory, rows)
    goal = np.array([0.9, 0.0])
    best_stored = min(
        np.linalg.norm(np.array(o.as_array()) - goal) for _, o in rows
    )
    result = goal_directed_optimization(
        goal, memory, LinearEnv(), np.random.default_rng(0),
        origin=(0.0, 0.0))
    dists = [
        np.linalg.norm(e.outcome.as_array() - goal) for e in result.episodes
    ]
    assert result.regimes[0] == "local"
    assert min(dists) < best_stored
    assert result.best_similarity > -best_stored / 0.9


def test_pursuit_rejects_degenerate_and_empty_budgets():
    memory = EpisodeMemory()
    with pytest.raises(DegenerateGoalError):
        goal_directed_optimization(
            np.array([0.0, 0.0]), memory, LinearEnv(),
            np.random.default_rng(10), origin=(0.0, 0.0))
    with pytest.raises(ValueError):
        goal_directed_optimization(
            np.array([0.5, 0.5]), memory, LinearEnv(),
            np.random.default_rng(10), origin=(0.0, 0.0), budget=0)


def test_pursuit_runs_on_the_fishing_environment():
    env = FishingEnv(EnvConfig(rng_seed=13))
    rng = np.random.default_rng(13)
    memory = EpisodeMemory()
    for _ in range(50):
        params = PolicyParams(rng.random(N_PARAMS))
        fill(memory, [(params, env.execute(params))])
    origin = env.rest_outcome()
    result = goal_directed_optimization(
        np.array([0.2, 0.3]), memory, env, rng, origin=origin)
    assert 1 <= len(result.episodes) <= GOAL_BUDGET
    assert len(memory) == 50 + len(result.episodes)
    assert -1.0 <= result.best_similarity <= 0.0
    assert set(result.regimes) <= {"global", "local"}
