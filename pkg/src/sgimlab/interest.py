"""Competence bookkeeping and the adaptive partition of the task space.

The learner scores every finished goal pursuit with a similarity value in
[-1, 0] (0 = goal reached exactly, -1 = no better than the starting
position). A region tree partitions the task space into axis-aligned boxes;
each box keeps the time-ordered competences of the goals chosen inside it
and summarizes them as an interest value: the absolute change in competence
between the older and newer halves of a sliding window. Regions that stop
teaching anything (constant competence, whether high or low) decay to zero
interest; regions where competence is moving stay attractive.

A box splits once it has collected more than ``g_max`` goals, along the
candidate cut that maximizes the interest contrast between the two sides.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

ZETA = 10       # sliding window length (even)
G_MAX = 30      # goals a region may hold before it must split

_QUANTILES = np.linspace(0.1, 0.9, 9)


class DegenerateGoalError(ValueError):
    """Goal coincides with the origin outcome; similarity is undefined."""


class MissingAttemptsError(ValueError):
    """Competence asked for a goal with no recorded attempts."""


class OutOfBoundsError(ValueError):
    """Goal lies outside the task space covered by the region tree."""


class ConfigError(ValueError):
    """Invalid window or split configuration."""


# ---------------------------------------------------------------- measures


def similarity(goal, reached, origin) -> float:
    """How well `reached` matches `goal`, normalized by the origin distance.

    Returns -min(1, D(reached, goal) / D(goal, origin)), so 0 means the goal
    was hit exactly and -1 means the attempt got no closer than the float's
    resting position would.
    """
    goal = np.asarray(goal, dtype=float)
    reached = np.asarray(reached, dtype=float)
    origin = np.asarray(origin, dtype=float)
    norm = float(np.linalg.norm(goal - origin))
    if norm == 0.0:
        raise DegenerateGoalError("goal equals the origin outcome")
    ratio = float(np.linalg.norm(reached - goal)) / norm
    return -min(1.0, ratio)


def best_competence(similarities) -> float:
    """Competence of a pursuit: the best similarity over its episodes."""
    values = list(similarities)
    if not values:
        raise MissingAttemptsError("no attempts recorded for this goal")
    return max(values)


def interest_of(competences, zeta: int = ZETA) -> float:
    """Absolute competence progress over the last `zeta` entries.

    `competences` is time-ordered, oldest first. Windows shorter than
    `zeta` are padded by repeating the oldest entry, so a young region
    starts at zero interest and earns it as evidence accumulates.
    """
    if zeta <= 0 or zeta % 2 != 0:
        raise ConfigError("window length must be positive and even")
    values = list(competences)
    if not values:
        raise MissingAttemptsError("interest needs at least one competence")
    window = values[-zeta:]
    if len(window) < zeta:
        window = [window[0]] * (zeta - len(window)) + window
    half = zeta // 2
    return abs(sum(window[:half]) - sum(window[half:])) / zeta


# ------------------------------------------------------------------ regions


class Region:
    """Axis-aligned box with the time-ordered goal history it has absorbed."""

    __slots__ = ("region_id", "lows", "highs", "closed_hi", "history", "interest")

    def __init__(self, region_id, lows, highs, closed_hi):
        self.region_id = int(region_id)
        self.lows = np.asarray(lows, dtype=float)
        self.highs = np.asarray(highs, dtype=float)
        self.closed_hi = tuple(closed_hi)
        self.history: list[tuple[np.ndarray, float]] = []
        self.interest = 0.0

    def contains(self, point) -> bool:
        point = np.asarray(point, dtype=float)
        for d in range(point.shape[0]):
            if point[d] < self.lows[d]:
                return False
            if point[d] > self.highs[d]:
                return False
            if point[d] == self.highs[d] and not self.closed_hi[d]:
                return False
        return True

    def competences(self) -> list[float]:
        return [c for _, c in self.history]

    def lowest_competence_goal(self) -> np.ndarray:
        """Goal with the worst recorded competence (first on ties)."""
        if not self.history:
            raise MissingAttemptsError("region has no goals yet")
        pos = int(np.argmin([c for _, c in self.history]))
        return self.history[pos][0].copy()

    def __repr__(self):
        return (f"Region(id={self.region_id}, lows={self.lows.tolist()}, "
                f"highs={self.highs.tolist()}, n={len(self.history)}, "
                f"interest={self.interest:.4f})")


class RegionTree:
    """Exact partition of the task space into interest-scored leaf boxes."""

    def __init__(self, lows=(-1.0, -1.0), highs=(1.0, 1.0),
                 zeta: int = ZETA, g_max: int = G_MAX):
        if zeta <= 0 or zeta % 2 != 0:
            raise ConfigError("window length must be positive and even")
        if g_max < zeta:
            raise ConfigError("regions must hold at least one full window")
        self.lows = np.asarray(lows, dtype=float)
        self.highs = np.asarray(highs, dtype=float)
        if not np.all(self.lows < self.highs):
            raise ConfigError("task space box must have positive extent")
        self.zeta = zeta
        self.g_max = g_max
        self._next_id = 0
        root = self._new_region(self.lows, self.highs, (True, True))
        self.leaves: list[Region] = [root]
        self.split_log: list[dict] = []

    def _new_region(self, lows, highs, closed_hi) -> Region:
        region = Region(self._next_id, lows, highs, closed_hi)
        self._next_id += 1
        return region

    # ------------------------------------------------------------- lookup

    def region_of(self, goal) -> Region:
        goal = np.asarray(goal, dtype=float)
        for leaf in self.leaves:
            if leaf.contains(goal):
                return leaf
        raise OutOfBoundsError(f"goal {goal.tolist()} outside the task space")

    # ------------------------------------------------------------- insert

    def insert(self, goal, competence: float) -> Region:
        """Record a finished pursuit; returns the leaf now holding the goal."""
        goal = np.asarray(goal, dtype=float).copy()
        leaf = self.region_of(goal)
        leaf.history.append((goal, float(competence)))
        leaf.interest = interest_of(leaf.competences(), self.zeta)
        if len(leaf.history) > self.g_max:
            left, right = self._split(leaf)
            return left if left.contains(goal) else right
        return leaf

    # -------------------------------------------------------------- split

    def _split(self, region: Region):
        dim, cut = self._choose_cut(region)
        left_hi = region.highs.copy()
        left_hi[dim] = cut
        right_lo = region.lows.copy()
        right_lo[dim] = cut
        left_closed = list(region.closed_hi)
        left_closed[dim] = False  # the cut edge belongs to the right child
        left = self._new_region(region.lows.copy(), left_hi, tuple(left_closed))
        right = self._new_region(right_lo, region.highs.copy(), region.closed_hi)
        for goal, competence in region.history:
            side = left if goal[dim] < cut else right
            side.history.append((goal, competence))
        for child in (left, right):
            if child.history:
                child.interest = interest_of(child.competences(), self.zeta)
        pos = self.leaves.index(region)
        self.leaves[pos: pos + 1] = [left, right]
        self.split_log.append({
            "parent": region.region_id,
            "children": (left.region_id, right.region_id),
            "dim": dim,
            "cut": cut,
            "sizes": (len(left.history), len(right.history)),
        })
        return left, right

    def _choose_cut(self, region: Region):
        """Cut maximizing the interest contrast between the two sides.

        Candidates are the coordinate quantiles along each dimension. Each
        side must keep at least half a window of goals; if no candidate
        qualifies (coincident goals), fall back to the box midpoint on
        dimension 0.
        """
        goals = np.array([g for g, _ in region.history])
        competences = [c for _, c in region.history]
        min_side = self.zeta // 2
        best = None  # (score, -imbalance, -dim, -cut) maximized
        best_cut = None
        for dim in range(goals.shape[1]):
            for cut in np.quantile(goals[:, dim], _QUANTILES):
                if not (region.lows[dim] < cut < region.highs[dim]):
                    continue
                mask = goals[:, dim] < cut
                n_left = int(mask.sum())
                n_right = len(mask) - n_left
                if n_left < min_side or n_right < min_side:
                    continue
                left_c = [c for c, m in zip(competences, mask) if m]
                right_c = [c for c, m in zip(competences, mask) if not m]
                score = abs(interest_of(left_c, self.zeta)
                            - interest_of(right_c, self.zeta))
                key = (score, -abs(n_left - n_right), -dim, -cut)
                if best is None or key > best:
                    best = key
                    best_cut = (dim, float(cut))
        if best_cut is None:
            return 0, float((region.lows[0] + region.highs[0]) / 2.0)
        return best_cut

    # ----------------------------------------------------------- snapshot

    def snapshot(self) -> list[dict]:
        """JSON-ready leaf summary for plotting goal distributions."""
        return [
            {
                "bounds": [leaf.lows.tolist(), leaf.highs.tolist()],
                "interest": float(leaf.interest),
                "n_goals": len(leaf.history),
            }
            for leaf in self.leaves
        ]

    def save_snapshot(self, path) -> None:
        Path(path).write_text(json.dumps(self.snapshot(), indent=1))
