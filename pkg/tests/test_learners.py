"""Strategy drivers: episode accounting, cadences, determinism."""

import json
import math

import numpy as np
import pytest

from sgimlab.environment import FishingEnv, Outcome
from sgimlab.learners import (
    LearnerConfig,
    RunConfigError,
    run_imitation,
    run_learner,
    run_observation,
    run_random,
    run_sagg_riac,
    run_sgim_d,
)
from sgimlab.primitives import N_PARAMS, PolicyParams
from sgimlab.reaching import infer_policy, local_data
from sgimlab.teachers import DemoEntry, DemonstrationSet


@pytest.fixture(scope="module")
def env():
    return FishingEnv()


@pytest.fixture(scope="module")
def teacher(env):
    """Six policy demonstrations with physically consistent outcomes."""
    thetas = np.random.default_rng(3).random((6, N_PARAMS))
    landings = env.execute_batch(thetas, noise=False)
    entries = tuple(
        DemoEntry(outcome=Outcome(*landing), params=PolicyParams(theta))
        for theta, landing in zip(thetas, landings)
    )
    return DemonstrationSet(entries, "demonstrator1")


@pytest.fixture(scope="module")
def sgim_record(env, teacher):
    cfg = LearnerConfig(strategy="sgim_d", total_episodes=5000, rng_seed=0)
    return run_sgim_d(cfg, env.clone(rng_seed=100), teacher)


@pytest.fixture(scope="module")
def sagg_record(env):
    cfg = LearnerConfig(strategy="sagg_riac", total_episodes=5000, rng_seed=0)
    return run_sagg_riac(cfg, env.clone(rng_seed=100))


# ------------------------------------------------------------------ sgim_d


def test_sgim_demonstration_cadence(sgim_record):
    # one demonstration per 30 executed policies, five imitations each;
    # only the final event may be cut short by the episode budget
    events = sgim_record.demo_events
    assert 130 <= events <= 170
    imitation = sgim_record.tag_count("imitation")
    assert 5 * events - 4 <= imitation <= 5 * events


def test_sgim_explores_and_imitates(sgim_record):
    counters = sgim_record.counters()
    assert counters["episodes"] == 5000
    assert counters["autonomous_episodes"] + counters["imitation_episodes"] == 5000
    assert counters["regions"] >= 2
    assert len(sgim_record.memory) == 5000


def test_sgim_checkpoints_align_with_eval_period(sgim_record):
    assert sgim_record.checkpoints == [1000, 2000, 3000, 4000, 5000]


def test_sgim_goal_log_stays_in_task_space(sgim_record):
    assert sgim_record.goal_log
    for x, y, mode in sgim_record.goal_log:
        assert -1.0 <= x <= 1.0 and -1.0 <= y <= 1.0
        assert mode in ("uniform", "interest", "refine", "emulation")


def test_sgim_without_teacher_needs_infinite_period(env):
    cfg = LearnerConfig(strategy="sgim_d", total_episodes=50)
    with pytest.raises(RunConfigError):
        run_sgim_d(cfg, env.clone(rng_seed=1), teacher=None)
    solo = LearnerConfig(strategy="sgim_d", total_episodes=50,
                         demo_period=math.inf)
    record = run_sgim_d(solo, env.clone(rng_seed=1), teacher=None)
    assert len(record.rows) == 50


def test_sgim_with_demos_disabled_matches_sagg(env, teacher):
    kwargs = dict(total_episodes=600, rng_seed=9)
    solo = run_sgim_d(
        LearnerConfig(strategy="sgim_d", demo_period=math.inf, **kwargs),
        env.clone(rng_seed=9), teacher)
    sagg = run_sagg_riac(
        LearnerConfig(strategy="sagg_riac", **kwargs), env.clone(rng_seed=9))
    assert np.array_equal(solo.memory.param_matrix(), sagg.memory.param_matrix())
    assert np.array_equal(solo.memory.outcome_matrix(),
                          sagg.memory.outcome_matrix())
    assert [r.mode for r in solo.rows] == [r.mode for r in sagg.rows]


# --------------------------------------------------------------- sagg_riac


def test_sagg_never_imitates(sagg_record):
    assert sagg_record.tag_count("imitation") == 0
    assert sagg_record.demo_events == 0
    assert len(sagg_record.rows) == 5000


def test_sagg_goal_log_non_empty(sagg_record):
    assert sagg_record.goal_log
    for x, y, _ in sagg_record.goal_log:
        assert -1.0 <= x <= 1.0 and -1.0 <= y <= 1.0


# ------------------------------------------------------------------ random


def test_random_babbling_is_uniform(env):
    cfg = LearnerConfig(strategy="random", total_episodes=5000, rng_seed=2)
    record = run_random(cfg, env.clone(rng_seed=2))
    assert len(record.rows) == 5000
    assert not record.goal_log
    means = record.memory.param_matrix().mean(axis=0)
    assert np.all(np.abs(means - 0.5) < 0.02)


# --------------------------------------------------------------- imitation


def test_imitation_repeats_the_latest_demonstration(env, teacher):
    cfg = LearnerConfig(strategy="imitation", total_episodes=5000, rng_seed=4)
    record = run_imitation(cfg, env.clone(rng_seed=4), teacher)
    assert len(record.rows) == 5000
    assert record.tag_count("imitation") == 5000
    demo_thetas = np.array([e.params.values for e in teacher.entries])
    for row in record.rows:
        gaps = np.linalg.norm(demo_thetas - row.params.values, axis=1)
        # clamping to the box never moves a copy further from its original
        assert gaps.min() <= cfg.eps_max + 1e-12


def test_imitation_requires_a_teacher(env):
    cfg = LearnerConfig(strategy="imitation", total_episodes=10)
    with pytest.raises(RunConfigError):
        run_imitation(cfg, env.clone(rng_seed=0), None)


# ------------------------------------------------------------- observation


def test_observation_stores_demos_and_executes_nothing(teacher):
    cfg = LearnerConfig(strategy="observation", total_episodes=5000, rng_seed=6)
    record = run_observation(cfg, teacher)
    assert len(record.memory) == 5000 // 30
    assert record.tag_count("demonstration") == len(record.memory)
    assert len(record.rows) == len(record.memory)
    assert record.checkpoints == [1000, 2000, 3000, 4000, 5000]


def test_observation_memory_answers_queries(teacher):
    cfg = LearnerConfig(strategy="observation", total_episodes=600, rng_seed=6)
    record = run_observation(cfg, teacher)
    params = infer_policy(np.array([0.2, 0.4]),
                          local_data(np.array([0.2, 0.4]), record.memory))
    assert np.all(np.isfinite(params.values))
    assert np.all((params.values >= 0.0) & (params.values <= 1.0))


# ----------------------------------------------------------- conservation


@pytest.mark.parametrize("strategy", ["random", "sagg_riac", "imitation",
                                      "sgim_d"])
def test_executed_episodes_match_the_budget_exactly(env, teacher, strategy):
    cfg = LearnerConfig(strategy=strategy, total_episodes=247, rng_seed=11,
                        eval_every=100)
    record = run_learner(cfg, env.clone(rng_seed=11), teacher)
    assert len(record.rows) == 247
    assert len(record.memory) == 247
    assert record.checkpoints == [100, 200]


# ------------------------------------------------------------ determinism


def test_identical_seeds_give_identical_files(env, teacher, tmp_path):
    paths = []
    for name in ("a", "b"):
        cfg = LearnerConfig(strategy="sgim_d", total_episodes=450, rng_seed=5)
        record = run_learner(cfg, env.clone(rng_seed=5), teacher)
        csv_path = tmp_path / f"{name}.csv"
        record.save(csv_path)
        paths.append(csv_path)
    assert paths[0].read_bytes() == paths[1].read_bytes()
    assert (paths[0].with_suffix(".json").read_bytes()
            == paths[1].with_suffix(".json").read_bytes())


def test_sidecar_counters_match_record(env, teacher, tmp_path):
    cfg = LearnerConfig(strategy="sgim_d", total_episodes=120, rng_seed=13)
    record = run_learner(cfg, env.clone(rng_seed=13), teacher)
    csv_path = tmp_path / "run.csv"
    sidecar = record.save(csv_path)
    payload = json.loads(sidecar.read_text())
    assert payload["counters"] == json.loads(json.dumps(record.counters()))
    assert payload["config"]["strategy"] == "sgim_d"
    with open(csv_path) as fh:
        lines = fh.read().splitlines()
    assert len(lines) == 1 + 120


# ------------------------------------------------------------------ config


def test_config_rejects_bad_values():
    with pytest.raises(RunConfigError):
        LearnerConfig(strategy="hillclimb")
    with pytest.raises(RunConfigError):
        LearnerConfig(total_episodes=0)
    with pytest.raises(RunConfigError):
        LearnerConfig(demo_period=0)
    with pytest.raises(RunConfigError):
        LearnerConfig(demo_period=7.5)
    with pytest.raises(RunConfigError):
        LearnerConfig(strategy="imitation", demo_period=math.inf)
    with pytest.raises(RunConfigError):
        LearnerConfig(strategy="observation", demo_period=math.inf)
    with pytest.raises(RunConfigError):
        LearnerConfig(n_im=0)
    with pytest.raises(RunConfigError):
        LearnerConfig(eval_every=-1)


def test_config_social_flag_and_serialization():
    social = LearnerConfig(strategy="sgim_d", demo_period=30)
    solo = LearnerConfig(strategy="sagg_riac", demo_period=math.inf)
    assert social.social and not solo.social
    assert social.to_dict()["demo_period"] == 30
    assert solo.to_dict()["demo_period"] == "inf"


def test_drivers_check_the_strategy_field(env, teacher):
    cfg = LearnerConfig(strategy="random", total_episodes=10)
    with pytest.raises(RunConfigError):
        run_sagg_riac(cfg, env.clone(rng_seed=0))
    with pytest.raises(RunConfigError):
        run_sgim_d(cfg, env.clone(rng_seed=0), teacher)
    with pytest.raises(RunConfigError):
        run_random(LearnerConfig(strategy="sagg_riac", total_episodes=10),
                   env.clone(rng_seed=0))
