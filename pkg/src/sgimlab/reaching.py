"""Reaching a goal outcome: local inverse-model guesses refined by search.

Given a goal, the learner either explores globally (a uniform random
policy) or optimizes locally. The local route finds the most reliable
neighborhood of past episodes around the goal, interpolates their policies
into an initial guess, executes it, and continues with a simplex search
seeded from those neighbors. The probability of exploring globally equals
the normalized distance of the best past outcome from the goal: unreachable
goals trigger exploration, familiar goals trigger optimization.

Imitation enters here too: repeating a demonstrated policy with small
random perturbations to probe its surroundings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interest import DegenerateGoalError, similarity
from .memory import Episode, EpisodeMemory
from .optimize import SimplexSearch
from .primitives import N_PARAMS, PolicyParams

H_MAX = 12          # candidate anchors per goal
K_MAX = 8           # policy neighbors per anchor
DIST_M = 0.3        # max outcome distance for an anchor to count as near
DIST_N = 0.3        # policy-space neighbor radius
H_BETA = 0.1        # interpolation kernel width in outcome distance
VAR_WEIGHT = 0.5    # weight of neighborhood variance in the reliability score
EPS_GOAL = 0.05     # a pursuit stops once |J| drops below this
GOAL_BUDGET = 12    # executions per goal pursuit
N_IM = 5            # imitation repetitions per demonstrated policy
EPS_MAX = 0.05      # imitation perturbation radius

REGIME_GLOBAL = "global"
REGIME_LOCAL = "local"


@dataclass(frozen=True)
class LocalityScore:
    """Reliability of one anchor's neighborhood for inverse inference."""

    anchor: Episode
    neighbor_set: tuple
    mean_outcome_distance: float
    variance: float
    score: float


@dataclass(frozen=True)
class PursuitResult:
    """Everything one goal pursuit produced."""

    goal: np.ndarray
    episodes: tuple
    regimes: tuple
    best_similarity: float


def global_explore(rng: np.random.Generator) -> PolicyParams:
    """A uniform random policy vector."""
    return PolicyParams(rng.random(N_PARAMS))


# ---------------------------------------------------------------- locality


def score_localities(goal, memory: EpisodeMemory,
                     h_max: int = H_MAX, k_max: int = K_MAX,
                     dist_m: float = DIST_M, dist_n: float = DIST_N
                     ) -> list[LocalityScore]:
    """Score candidate anchors around the goal, best (lowest score) first.

    Each anchor near the goal is judged by how close it landed and how
    consistent the outcomes of its policy neighborhood are: a lone lucky
    hit in a chaotic part of policy space scores worse than a slightly
    farther anchor whose neighborhood lands predictably.
    """
    goal = np.asarray(goal, dtype=float)
    anchors = memory.nearest_outcomes(goal, h_max)
    near = [e for e in anchors
            if np.linalg.norm(e.outcome.as_array() - goal) <= dist_m]
    if near:
        anchors = near
    scored = []
    for anchor in anchors:
        neighbors = memory.nearest_policies(anchor.params, dist_n)[:k_max]
        outcomes = np.array([e.outcome.as_array() for e in neighbors])
        distances = np.linalg.norm(outcomes - goal, axis=1)
        variance = float(outcomes.var(axis=0).sum())
        anchor_dist = float(np.linalg.norm(anchor.outcome.as_array() - goal))
        scored.append(LocalityScore(
            anchor=anchor,
            neighbor_set=tuple(neighbors),
            mean_outcome_distance=float(distances.mean()),
            variance=variance,
            score=anchor_dist + VAR_WEIGHT * variance,
        ))
    scored.sort(key=lambda s: (s.score, s.anchor.index))
    return scored


def local_data(goal, memory: EpisodeMemory, **kw) -> LocalityScore:
    """The most reliable locality around the goal."""
    return score_localities(goal, memory, **kw)[0]


def infer_policy(goal, locality: LocalityScore,
                 h_beta: float = H_BETA) -> PolicyParams:
    """Interpolate the locality's policies, weighted toward the goal.

    Weights fall off as a Gaussian of each neighbor's outcome distance to
    the goal; if every weight underflows, the nearest neighbor wins alone.
    """
    goal = np.asarray(goal, dtype=float)
    thetas = np.array([e.params.values for e in locality.neighbor_set])
    outcomes = np.array([e.outcome.as_array() for e in locality.neighbor_set])
    distances = np.linalg.norm(outcomes - goal, axis=1)
    weights = np.exp(-(distances**2) / (2.0 * h_beta**2))
    total = weights.sum()
    if total <= 0.0 or not np.isfinite(total):
        weights = np.zeros_like(distances)
        weights[np.argmin(distances)] = 1.0
        total = 1.0
    theta = (weights / total) @ thetas
    return PolicyParams(np.clip(theta, 0.0, 1.0))


# ---------------------------------------------------------------- pursuit


def _record(memory: EpisodeMemory, params: PolicyParams, outcome,
            tag: str) -> Episode:
    episode = Episode(index=len(memory), params=params, outcome=outcome,
                      strategy_tag=tag)
    memory.record(episode)
    return episode


def goal_directed_optimization(goal, memory: EpisodeMemory, env, rng,
                               origin, *, budget: int = GOAL_BUDGET,
                               eps_goal: float = EPS_GOAL,
                               tag: str = "autonomous") -> PursuitResult:
    """Spend up to `budget` executions trying to land on `goal`.

    Every attempt executes exactly one policy and records it. Before each
    attempt the regime is drawn afresh from the regularly updated memory:
    global exploration with probability equal to the normalized distance
    of the closest stored outcome (clamped to [0, 1]), local optimization
    otherwise. The first local attempt executes the interpolated guess
    from the most reliable locality and seeds a simplex search with that
    locality's neighbours; each later local attempt advances the simplex
    by one evaluation (a finished simplex restarts from a fresh guess).
    The pursuit stops early once a landing falls within eps_goal of the
    goal (in origin-normalized units).
    """
    if budget < 1:
        raise ValueError("a pursuit needs at least one execution")
    goal = np.asarray(goal, dtype=float)
    origin_arr = np.asarray(
        origin.as_array() if hasattr(origin, "as_array") else origin, dtype=float
    )
    goal_norm = float(np.linalg.norm(goal - origin_arr))
    if goal_norm == 0.0:
        raise DegenerateGoalError("goal coincides with the origin outcome")
    tol_dist = eps_goal * goal_norm
    episodes: list[Episode] = []
    regimes: list[str] = []
    best_dist = np.inf
    search: SimplexSearch | None = None

    def run(theta_vec) -> float:
        nonlocal best_dist
        params = PolicyParams(np.clip(np.asarray(theta_vec, float), 0.0, 1.0))
        outcome = env.execute(params)
        episodes.append(_record(memory, params, outcome, tag))
        d = float(np.linalg.norm(outcome.as_array() - goal))
        best_dist = min(best_dist, d)
        return d

    while len(episodes) < budget and best_dist > tol_dist:
        if len(memory) == 0:
            p_glob = 1.0
        else:
            closest = memory.nearest_outcomes(goal, 1)[0]
            d_close = float(np.linalg.norm(closest.outcome.as_array() - goal))
            p_glob = min(1.0, d_close / goal_norm)
        if rng.random() < p_glob:
            regimes.append(REGIME_GLOBAL)
            run(global_explore(rng).values)
            continue
        regimes.append(REGIME_LOCAL)
        candidate = search.ask() if search is not None else None
        if candidate is None:
            # fresh local phase: probe the interpolated guess, then refine
            locality = local_data(goal, memory)
            guess = infer_policy(goal, locality)
            guess_dist = run(guess.values)
            seeds = [e.params.values for e in locality.neighbor_set]
            seed_values = [
                float(np.linalg.norm(e.outcome.as_array() - goal))
                for e in locality.neighbor_set
            ]
            search = SimplexSearch(guess.values, seeds, tol=tol_dist,
                                   init_value=guess_dist,
                                   seed_values=seed_values)
        else:
            search.tell(run(candidate))

    best_sim = max(
        similarity(goal, e.outcome.as_array(), origin_arr) for e in episodes
    )
    return PursuitResult(goal=goal, episodes=tuple(episodes),
                         regimes=tuple(regimes), best_similarity=best_sim)


# --------------------------------------------------------------- imitation


def imitate_policy(theta_d: PolicyParams, memory: EpisodeMemory, env, rng,
                   n_im: int = N_IM, eps_max: float = EPS_MAX) -> list[Episode]:
    """Repeat a demonstrated policy n_im times with small perturbations."""
    if n_im < 1:
        raise ValueError("imitation needs at least one repetition")
    if eps_max < 0:
        raise ValueError("perturbation radius cannot be negative")
    episodes = []
    for _ in range(n_im):
        direction = rng.standard_normal(N_PARAMS)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            direction[0] = 1.0
            norm = 1.0
        step = (direction / norm) * (eps_max * rng.random())
        params = PolicyParams(np.clip(theta_d.values + step, 0.0, 1.0))
        outcome = env.execute(params)
        episodes.append(_record(memory, params, outcome, "imitation"))
    return episodes
