"""Episodic memory with nearest-neighbor retrieval in two spaces.

Every executed movement is kept forever as an (index, policy, outcome)
record. Learning never edits or forgets; all generalization happens at
retrieval time, by looking up neighbors either around a target outcome
(who has landed near where I want to land?) or around a policy vector
(what do small variations of this movement do?).

Retrieval is exact. A KD-tree pair over the two spaces is rebuilt every
`_REBUILD_EVERY` insertions; records newer than the last rebuild sit in a
linear side buffer that every query also scans.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .environment import Outcome
from .primitives import N_PARAMS, PolicyParams

STRATEGY_TAGS = ("autonomous", "imitation", "demonstration")

_REBUILD_EVERY = 64


class DuplicateIndexError(ValueError):
    """Episode index does not extend the strictly increasing sequence."""


class EmptyMemoryError(LookupError):
    """Neighbor retrieval requires at least one stored episode."""


@dataclass(frozen=True)
class Episode:
    """One learning exemplar: the movement tried and where the float landed."""

    index: int
    params: PolicyParams
    outcome: Outcome
    strategy_tag: str
    context: str = "rest"

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("episode index must be non-negative")
        if not isinstance(self.params, PolicyParams):
            raise TypeError("params must be a PolicyParams")
        if self.strategy_tag not in STRATEGY_TAGS:
            raise ValueError(f"unknown strategy tag {self.strategy_tag!r}")
        object.__setattr__(
            self, "outcome", Outcome(float(self.outcome[0]), float(self.outcome[1]))
        )


class EpisodeMemory:
    """Append-only episode store; single writer, reads between writes."""

    def __init__(self):
        self._episodes: list[Episode] = []
        self._by_index: dict[int, Episode] = {}
        self._params = np.empty((0, N_PARAMS))
        self._outcomes = np.empty((0, 2))
        self._tree_outcomes: cKDTree | None = None
        self._tree_params: cKDTree | None = None
        self._n_indexed = 0

    def __len__(self) -> int:
        return len(self._episodes)

    def __iter__(self):
        return iter(self._episodes)

    @property
    def last_index(self) -> int:
        if not self._episodes:
            raise EmptyMemoryError("no episodes recorded")
        return self._episodes[-1].index

    def by_index(self, index: int) -> Episode:
        return self._by_index[index]

    def outcome_matrix(self) -> np.ndarray:
        """All outcomes in insertion order, shape (n, 2)."""
        return self._outcomes[: len(self._episodes)].copy()

    def param_matrix(self) -> np.ndarray:
        """All policy vectors in insertion order, shape (n, 25)."""
        return self._params[: len(self._episodes)].copy()

    # ------------------------------------------------------------- writes

    def record(self, episode: Episode) -> None:
        if self._episodes and episode.index <= self._episodes[-1].index:
            raise DuplicateIndexError(
                f"index {episode.index} does not follow {self._episodes[-1].index}"
            )
        n = len(self._episodes)
        if n == self._params.shape[0]:
            grow = max(256, 2 * self._params.shape[0])
            self._params = np.vstack([self._params, np.empty((grow, N_PARAMS))])
            self._outcomes = np.vstack([self._outcomes, np.empty((grow, 2))])
        self._params[n] = episode.params.values
        self._outcomes[n] = episode.outcome.as_array()
        self._episodes.append(episode)
        self._by_index[episode.index] = episode
        if len(self._episodes) - self._n_indexed >= _REBUILD_EVERY:
            self._fold_buffer()

    def _fold_buffer(self) -> None:
        n = len(self._episodes)
        if n == self._n_indexed or n == 0:
            return
        self._tree_outcomes = cKDTree(self._outcomes[:n])
        self._tree_params = cKDTree(self._params[:n])
        self._n_indexed = n

    # -------------------------------------------------------------- reads

    def nearest_outcomes(self, target, h_max: int) -> list[Episode]:
        """Up to h_max episodes whose outcomes are closest to target, in order."""
        if not self._episodes:
            raise EmptyMemoryError("no episodes recorded")
        if h_max < 1:
            return []
        target = np.asarray(target, dtype=float).reshape(2)
        n = len(self._episodes)
        candidates: list[int] = []
        if self._tree_outcomes is not None:
            k = min(h_max, self._n_indexed)
            _, idx = self._tree_outcomes.query(target, k=k)
            candidates.extend(np.atleast_1d(idx).tolist())
        candidates.extend(range(self._n_indexed, n))
        dists = np.linalg.norm(self._outcomes[candidates] - target, axis=1)
        order = np.lexsort((candidates, dists))[:h_max]
        return [self._episodes[candidates[i]] for i in order]

    def nearest_policies(self, center, dist_n: float) -> list[Episode]:
        """All episodes with ||params - center|| < dist_n, closest first."""
        if dist_n <= 0:
            raise ValueError("dist_n must be positive")
        if isinstance(center, PolicyParams):
            center = center.values
        center = np.asarray(center, dtype=float).reshape(N_PARAMS)
        n = len(self._episodes)
        candidates: list[int] = []
        if self._tree_params is not None:
            candidates.extend(self._tree_params.query_ball_point(center, dist_n))
        candidates.extend(range(self._n_indexed, n))
        if not candidates:
            return []
        dists = np.linalg.norm(self._params[candidates] - center, axis=1)
        keep = dists < dist_n  # strict: the ball boundary is out
        kept = [(dists[i], candidates[i]) for i in np.nonzero(keep)[0]]
        kept.sort()
        return [self._episodes[pos] for _, pos in kept]

    # ----------------------------------------------------------------- IO

    def dump(self, path) -> None:
        """Write the memory as CSV: index, strategy_tag, policy, outcome."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["index", "strategy_tag"]
            header += [f"theta_{i}" for i in range(1, N_PARAMS + 1)]
            header += ["tau_x", "tau_y"]
            writer.writerow(header)
            for e in self._episodes:
                row = [e.index, e.strategy_tag]
                row += [repr(float(v)) for v in e.params.values]
                row += [repr(e.outcome.x), repr(e.outcome.y)]
                writer.writerow(row)

    @classmethod
    def load(cls, path, context: str = "rest") -> "EpisodeMemory":
        memory = cls()
        path = Path(path)
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            expected = 2 + N_PARAMS + 2
            if len(header) != expected:
                raise ValueError(f"expected {expected} columns, got {len(header)}")
            for row in reader:
                theta = np.array([float(v) for v in row[2 : 2 + N_PARAMS]])
                memory.record(
                    Episode(
                        index=int(row[0]),
                        params=PolicyParams(theta),
                        outcome=Outcome(float(row[-2]), float(row[-1])),
                        strategy_tag=row[1],
                        context=context,
                    )
                )
        return memory
