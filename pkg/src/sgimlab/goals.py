"""Goal self-generation: where in the task space to try to land next.

Three goal modes mix: mostly the learner follows the interest map (regions
whose competence is moving attract goals in proportion to their progress),
sometimes it draws a uniform goal anywhere to keep discovering, and
occasionally it re-attacks the worst goal of an interesting region at close
range. Demonstrated outcomes enter the same pipeline as emulated goals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interest import MissingAttemptsError, Region, RegionTree

MODE_INTEREST = "interest"
MODE_UNIFORM = "uniform"
MODE_REFINE = "refine"
MODE_PROBS = (0.7, 0.2, 0.1)

REFINE_RADIUS_FACTOR = 0.05     # of the task-space diameter


@dataclass(frozen=True)
class GoalChoice:
    """A self-generated goal and how it was picked."""

    goal: np.ndarray
    mode: str
    source_region: int | None = None


def region_probabilities(regions) -> np.ndarray:
    """Selection probabilities proportional to interest above the minimum.

    The least interesting region always gets probability zero; when every
    region is equally interesting the choice degenerates to uniform.
    """
    interests = np.array([r.interest for r in regions], dtype=float)
    shifted = interests - interests.min()
    total = shifted.sum()
    if total <= 0.0:
        return np.full(len(interests), 1.0 / len(interests))
    return shifted / total


def _pick_region(tree: RegionTree, rng: np.random.Generator) -> Region:
    probs = region_probabilities(tree.leaves)
    r = rng.random()
    acc = 0.0
    for leaf, p in zip(tree.leaves, probs):
        acc += p
        if r < acc:
            return leaf
    return tree.leaves[-1]  # guard against accumulated rounding


def _uniform_in(lows, highs, rng) -> np.ndarray:
    return rng.uniform(lows, highs)


def decide_goal(tree: RegionTree, rng: np.random.Generator,
                mode_probs=MODE_PROBS) -> GoalChoice:
    """Sample a goal mode, then a goal, from the current interest partition."""
    r = rng.random()
    if r < mode_probs[0]:
        region = _pick_region(tree, rng)
        goal = _uniform_in(region.lows, region.highs, rng)
        return GoalChoice(goal=goal, mode=MODE_INTEREST,
                          source_region=region.region_id)
    if r < mode_probs[0] + mode_probs[1]:
        return GoalChoice(goal=_uniform_in(tree.lows, tree.highs, rng),
                          mode=MODE_UNIFORM)
    region = _pick_region(tree, rng)
    radius = REFINE_RADIUS_FACTOR * float(np.linalg.norm(tree.highs - tree.lows))
    try:
        center = region.lowest_competence_goal()
    except MissingAttemptsError:
        # a freshly split child may hold no goals yet; refine its middle
        center = (region.lows + region.highs) / 2.0
    angle = rng.uniform(0.0, 2.0 * np.pi)
    rho = radius * np.sqrt(rng.random())
    goal = center + rho * np.array([np.cos(angle), np.sin(angle)])
    goal = np.clip(goal, tree.lows, tree.highs)
    return GoalChoice(goal=goal, mode=MODE_REFINE,
                      source_region=region.region_id)


def emulate_goal(demo_outcome, lows, highs) -> np.ndarray:
    """Adopt a demonstrated outcome as the current goal, clipped into T."""
    goal = np.asarray(demo_outcome, dtype=float)
    if not np.all(np.isfinite(goal)):
        raise ValueError("demonstrated outcome must be finite")
    return np.clip(goal, np.asarray(lows, float), np.asarray(highs, float))
