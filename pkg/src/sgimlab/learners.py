"""The five exploration strategies sharing one memory/environment plumbing.

random        executes uniform random policies.
sagg_riac     autonomous goal babbling: pick a goal from the interest map,
              pursue it, feed the achieved competence back into the map.
imitation     repeats the teacher's latest demonstration with small random
              perturbations, switching demonstrations on a fixed cadence.
observation   never moves; it only stores the teacher's demonstrations
              (mapped onto its own primitives) and answers from them.
sgim_d        interleaves sagg_riac with short imitation phases: every
              demo_period executed policies the teacher shows one
              demonstration, the learner imitates it briefly, adopts the
              demonstrated outcome as a goal, and resumes autonomy.

All drivers log one row per episode and are byte-deterministic given
(config, environment seed).
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .environment import Outcome
from .goals import MODE_PROBS, decide_goal, emulate_goal
from .interest import G_MAX, ZETA, RegionTree, similarity
from .memory import Episode, EpisodeMemory
from .primitives import PolicyParams, fit_demonstration
from .reaching import (
    EPS_GOAL,
    EPS_MAX,
    GOAL_BUDGET,
    N_IM,
    goal_directed_optimization,
    imitate_policy,
)
from .teachers import select_demonstration

log = logging.getLogger(__name__)

STRATEGIES = ("random", "sagg_riac", "imitation", "observation", "sgim_d")

MODE_RANDOM = "random"
MODE_EMULATION = "emulation"
MODE_IMITATION = "imitation"
MODE_DEMONSTRATION = "demonstration"


class RunConfigError(ValueError):
    """Learner configuration is inconsistent."""


@dataclass(frozen=True)
class LearnerConfig:
    strategy: str = "sgim_d"
    total_episodes: int = 5000
    demo_period: float = 30        # math.inf disables demonstrations
    rng_seed: int = 0
    eval_every: int = 1000         # 0 disables checkpoints
    task_lows: tuple = (-1.0, -1.0)
    task_highs: tuple = (1.0, 1.0)
    zeta: int = ZETA
    g_max: int = G_MAX
    n_im: int = N_IM
    eps_max: float = EPS_MAX
    goal_budget: int = GOAL_BUDGET
    eps_goal: float = EPS_GOAL
    mode_probs: tuple = MODE_PROBS

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise RunConfigError(f"unknown strategy {self.strategy!r}")
        if self.total_episodes <= 0:
            raise RunConfigError("total_episodes must be positive")
        period = self.demo_period
        if not (period == math.inf or (float(period).is_integer() and period > 0)):
            raise RunConfigError("demo_period must be a positive count or inf")
        if self.strategy in ("imitation", "observation") and period == math.inf:
            raise RunConfigError(f"{self.strategy} needs a finite demo_period")
        if self.eval_every < 0:
            raise RunConfigError("eval_every cannot be negative")
        if self.n_im < 1 or self.goal_budget < 1:
            raise RunConfigError("n_im and goal_budget must be positive")

    @property
    def social(self) -> bool:
        return self.demo_period != math.inf

    def to_dict(self) -> dict:
        d = asdict(self)
        d["demo_period"] = "inf" if self.demo_period == math.inf \
            else int(self.demo_period)
        for key in ("task_lows", "task_highs", "mode_probs"):
            d[key] = list(d[key])
        return d


@dataclass(frozen=True)
class EpisodeRow:
    """One logged episode; goal and similarity are blank when undefined."""

    index: int
    tag: str
    mode: str
    goal: tuple | None
    params: PolicyParams
    outcome: object
    similarity: float | None


_CSV_HEADER = (
    ["episode", "strategy", "mode", "goal_x", "goal_y"]
    + [f"theta_{i + 1}" for i in range(25)]
    + ["tau_x", "tau_y", "similarity"]
)


@dataclass
class RunRecord:
    """Everything one learner run produced."""

    config: LearnerConfig
    memory: EpisodeMemory
    rows: list
    tree: RegionTree | None
    origin: object | None
    goal_log: list = field(default_factory=list)   # (x, y, mode)
    demo_events: int = 0
    failed_fetches: int = 0
    checkpoints: list = field(default_factory=list)

    def tag_count(self, tag: str) -> int:
        return sum(1 for row in self.rows if row.tag == tag)

    def counters(self) -> dict:
        modes = {}
        for _, _, mode in self.goal_log:
            modes[mode] = modes.get(mode, 0) + 1
        return {
            "episodes": len(self.rows),
            "demo_events": self.demo_events,
            "failed_fetches": self.failed_fetches,
            "autonomous_episodes": self.tag_count("autonomous"),
            "imitation_episodes": self.tag_count("imitation"),
            "demonstration_entries": self.tag_count("demonstration"),
            "checkpoints": list(self.checkpoints),
            "goal_modes": modes,
            "regions": len(self.tree.leaves) if self.tree else 0,
        }

    def save(self, csv_path) -> Path:
        """Write the episode CSV and a JSON sidecar next to it."""
        csv_path = Path(csv_path)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_CSV_HEADER)
            for row in self.rows:
                goal = ["", ""] if row.goal is None \
                    else [repr(float(v)) for v in row.goal]
                sim = "" if row.similarity is None else repr(float(row.similarity))
                writer.writerow(
                    [row.index, row.tag, row.mode] + goal
                    + [repr(float(v)) for v in row.params.values]
                    + [repr(float(row.outcome.x)), repr(float(row.outcome.y)), sim]
                )
        sidecar = csv_path.with_suffix(".json")
        payload = {
            "config": self.config.to_dict(),
            "counters": self.counters(),
            "origin": None if self.origin is None
            else [float(self.origin.x), float(self.origin.y)],
            "goal_log": [[float(x), float(y), mode]
                         for x, y, mode in self.goal_log],
            "regions": self.tree.snapshot() if self.tree else None,
        }
        sidecar.write_text(json.dumps(payload, indent=2) + "\n")
        return sidecar


def _next_boundary(count: int, period) -> float:
    return (count // period + 1) * period


class _Driver:
    """Shared plumbing: seeds, boundaries, logging, teacher access."""

    def __init__(self, cfg: LearnerConfig, env, teacher, on_checkpoint):
        self.cfg = cfg
        self.env = env
        self.teacher = teacher
        self.on_checkpoint = on_checkpoint
        learn_seed, teach_seed = np.random.SeedSequence(cfg.rng_seed).spawn(2)
        self.rng = np.random.default_rng(learn_seed)
        self.teacher_rng = np.random.default_rng(teach_seed)
        self.memory = EpisodeMemory()
        self.rows: list[EpisodeRow] = []
        self.record = RunRecord(config=cfg, memory=self.memory, rows=self.rows,
                                tree=None, origin=None)
        self.executed = 0
        self.next_eval = cfg.eval_every if cfg.eval_every else math.inf
        self._fit_cache: dict[int, PolicyParams] = {}

    # ------------------------------------------------------------ teacher

    def fetch_demonstration(self):
        """(entry, theta_d) from the teacher, or None on failure."""
        try:
            entry = select_demonstration(
                self.teacher, self.memory.outcome_matrix(), self.teacher_rng,
            )
            return entry, self.theta_of(entry)
        except Exception:
            log.warning("demonstration fetch failed; continuing without",
                        exc_info=True)
            self.record.failed_fetches += 1
            return None

    def theta_of(self, entry) -> PolicyParams:
        if entry.params is not None:
            return entry.params
        key = id(entry.raw)
        if key not in self._fit_cache:
            self._fit_cache[key] = fit_demonstration(entry.raw).params
        return self._fit_cache[key]

    # --------------------------------------------------------- checkpoints

    def fire_checkpoints(self, count: int | None = None):
        count = self.executed if count is None else count
        while count >= self.next_eval:
            at = int(self.next_eval)
            self.record.checkpoints.append(count)
            if self.on_checkpoint is not None:
                self.on_checkpoint(count, self.memory)
            self.next_eval = at + self.cfg.eval_every

    # -------------------------------------------------------------- phases

    def phase_budget(self, *boundaries) -> int:
        limits = [self.cfg.total_episodes, self.next_eval, *boundaries]
        return int(min(limits) - self.executed)


def _log_episodes(driver, episodes, mode, goal, origin_arr):
    goal_t = None if goal is None else (float(goal[0]), float(goal[1]))
    for ep in episodes:
        sim = None
        if goal is not None:
            sim = similarity(goal, ep.outcome.as_array(), origin_arr)
        driver.rows.append(EpisodeRow(
            index=ep.index, tag=ep.strategy_tag, mode=mode, goal=goal_t,
            params=ep.params, outcome=ep.outcome, similarity=sim,
        ))


# ------------------------------------------------------------------ random


def run_random(cfg: LearnerConfig, env, on_checkpoint=None) -> RunRecord:
    """Uniform policy babbling: the floor every strategy must beat."""
    if cfg.strategy != "random":
        raise RunConfigError(f"config says {cfg.strategy!r}, not random")
    d = _Driver(cfg, env, None, on_checkpoint)
    while d.executed < cfg.total_episodes:
        n = d.phase_budget()
        thetas = d.rng.random((n, 25))
        landings = env.execute_batch(thetas, noise=None)
        for k in range(n):
            params = PolicyParams(thetas[k])
            outcome = Outcome(float(landings[k, 0]), float(landings[k, 1]))
            ep = Episode(index=len(d.memory), params=params, outcome=outcome,
                         strategy_tag="autonomous")
            d.memory.record(ep)
            d.rows.append(EpisodeRow(index=ep.index, tag="autonomous",
                                     mode=MODE_RANDOM, goal=None,
                                     params=params, outcome=outcome,
                                     similarity=None))
        d.executed += n
        d.fire_checkpoints()
    return d.record


# ----------------------------------------------------------- goal babbling


def _run_goal_babbling(cfg: LearnerConfig, env, teacher,
                       on_checkpoint) -> RunRecord:
    """Common driver for sagg_riac (no teacher) and sgim_d."""
    d = _Driver(cfg, env, teacher, on_checkpoint)
    origin = env.rest_outcome()
    origin_arr = origin.as_array()
    tree = RegionTree(cfg.task_lows, cfg.task_highs, cfg.zeta, cfg.g_max)
    d.record.tree = tree
    d.record.origin = origin
    social = cfg.social and teacher is not None
    next_demo = cfg.demo_period if social else math.inf

    while d.executed < cfg.total_episodes:
        if d.executed >= next_demo:
            fetched = d.fetch_demonstration()
            next_demo += cfg.demo_period
            if fetched is not None:
                entry, theta_d = fetched
                n = min(cfg.n_im, cfg.total_episodes - d.executed)
                episodes = imitate_policy(theta_d, d.memory, env, d.rng,
                                          n_im=n, eps_max=cfg.eps_max)
                goal = emulate_goal(entry.outcome.as_array(),
                                    cfg.task_lows, cfg.task_highs)
                if np.linalg.norm(goal - origin_arr) > 0.0:
                    _log_episodes(d, episodes, MODE_EMULATION, goal, origin_arr)
                    competence = max(
                        similarity(goal, ep.outcome.as_array(), origin_arr)
                        for ep in episodes
                    )
                    tree.insert(goal, competence)
                    d.record.goal_log.append(
                        (float(goal[0]), float(goal[1]), MODE_EMULATION))
                else:
                    _log_episodes(d, episodes, MODE_EMULATION, None, origin_arr)
                d.record.demo_events += 1
                d.executed += n
                d.fire_checkpoints()
                continue
        choice = decide_goal(tree, d.rng, cfg.mode_probs)
        goal = choice.goal
        while np.linalg.norm(goal - origin_arr) == 0.0:
            choice = decide_goal(tree, d.rng, cfg.mode_probs)
            goal = choice.goal
        budget = min(cfg.goal_budget, d.phase_budget(next_demo))
        result = goal_directed_optimization(
            goal, d.memory, env, d.rng, origin,
            budget=budget, eps_goal=cfg.eps_goal,
        )
        tree.insert(goal, result.best_similarity)
        d.record.goal_log.append((float(goal[0]), float(goal[1]), choice.mode))
        _log_episodes(d, result.episodes, choice.mode, goal, origin_arr)
        d.executed += len(result.episodes)
        d.fire_checkpoints()
    return d.record


def run_sagg_riac(cfg: LearnerConfig, env, on_checkpoint=None) -> RunRecord:
    """Autonomous goal babbling, no demonstrations."""
    if cfg.strategy != "sagg_riac":
        raise RunConfigError(f"config says {cfg.strategy!r}, not sagg_riac")
    return _run_goal_babbling(cfg, env, None, on_checkpoint)


def run_sgim_d(cfg: LearnerConfig, env, teacher,
               on_checkpoint=None) -> RunRecord:
    """Goal babbling interleaved with imitation of scripted demonstrations."""
    if cfg.strategy != "sgim_d":
        raise RunConfigError(f"config says {cfg.strategy!r}, not sgim_d")
    if cfg.social and teacher is None:
        raise RunConfigError("sgim_d with a finite demo_period needs a teacher")
    return _run_goal_babbling(cfg, env, teacher, on_checkpoint)


# --------------------------------------------------------------- imitation


def run_imitation(cfg: LearnerConfig, env, teacher,
                  on_checkpoint=None) -> RunRecord:
    """Repeat the teacher's latest demonstration with small perturbations."""
    if cfg.strategy != "imitation":
        raise RunConfigError(f"config says {cfg.strategy!r}, not imitation")
    if teacher is None:
        raise RunConfigError("imitation needs a teacher")
    d = _Driver(cfg, env, teacher, on_checkpoint)
    theta_d = None
    next_fetch = 0.0
    while d.executed < cfg.total_episodes:
        if d.executed >= next_fetch:
            fetched = d.fetch_demonstration()
            next_fetch += cfg.demo_period
            if fetched is not None:
                theta_d = fetched[1]
                d.record.demo_events += 1
        if theta_d is None:
            # no demonstration seen yet: babble until the next fetch
            params = PolicyParams.random(d.rng)
            outcome = env.execute(params)
            ep = Episode(index=len(d.memory), params=params, outcome=outcome,
                         strategy_tag="autonomous")
            d.memory.record(ep)
            d.rows.append(EpisodeRow(index=ep.index, tag="autonomous",
                                     mode=MODE_RANDOM, goal=None,
                                     params=params, outcome=outcome,
                                     similarity=None))
            d.executed += 1
        else:
            n = d.phase_budget(next_fetch)
            episodes = imitate_policy(theta_d, d.memory, env, d.rng,
                                      n_im=n, eps_max=cfg.eps_max)
            _log_episodes(d, episodes, MODE_IMITATION, None, None)
            d.executed += n
        d.fire_checkpoints()
    return d.record


# ------------------------------------------------------------- observation


def run_observation(cfg: LearnerConfig, teacher,
                    on_checkpoint=None) -> RunRecord:
    """Watch only: store fitted demonstrations on the shared time base.

    The teacher demonstrates on the same cadence as for the other social
    strategies, so checkpoint k compares memories after the same elapsed
    teaching, even though this learner never executes a policy itself.
    """
    if cfg.strategy != "observation":
        raise RunConfigError(f"config says {cfg.strategy!r}, not observation")
    if teacher is None:
        raise RunConfigError("observation needs a teacher")
    d = _Driver(cfg, None, teacher, on_checkpoint)
    period = int(cfg.demo_period)
    for virtual in range(1, cfg.total_episodes + 1):
        if virtual % period == 0:
            fetched = d.fetch_demonstration()
            if fetched is not None:
                entry, theta_d = fetched
                ep = Episode(index=len(d.memory), params=theta_d,
                             outcome=entry.outcome,
                             strategy_tag="demonstration")
                d.memory.record(ep)
                d.rows.append(EpisodeRow(
                    index=ep.index, tag="demonstration",
                    mode=MODE_DEMONSTRATION, goal=None,
                    params=theta_d, outcome=entry.outcome, similarity=None,
                ))
                d.record.demo_events += 1
        d.fire_checkpoints(virtual)
    return d.record


# ---------------------------------------------------------------- dispatch


def run_learner(cfg: LearnerConfig, env=None, teacher=None,
                on_checkpoint=None) -> RunRecord:
    """Run whichever strategy the config names."""
    if cfg.strategy == "random":
        return run_random(cfg, env, on_checkpoint)
    if cfg.strategy == "sagg_riac":
        return run_sagg_riac(cfg, env, on_checkpoint)
    if cfg.strategy == "imitation":
        return run_imitation(cfg, env, teacher, on_checkpoint)
    if cfg.strategy == "observation":
        return run_observation(cfg, teacher, on_checkpoint)
    return run_sgim_d(cfg, env, teacher, on_checkpoint)


# ------------------------------------------------------------- persistence


def load_episodes(csv_path) -> list[Episode]:
    """Episodes from a run CSV, in execution order."""
    path = Path(csv_path)
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_HEADER:
            raise RunConfigError(f"{path}: unexpected run CSV header")
        episodes = []
        for row in reader:
            theta = np.array([float(v) for v in row[5:30]])
            episodes.append(Episode(
                index=int(row[0]), params=PolicyParams(theta),
                outcome=Outcome(float(row[30]), float(row[31])),
                strategy_tag=row[1],
            ))
    return episodes
