"""Scripted demonstrators standing in for the human teacher.

Three builders produce demonstration sets of increasing character:

1. random exemplars drawn from an autonomous learner's memory,
2. the most reliable exemplar per outcome tile, judged by re-execution
   variance,
3. synthetic human-like raw trajectories: every joint follows one shared
   smooth monotone profile, scaled per demonstration so the landing hits a
   target tile; the learner has to map these onto its own primitive
   parameters before it can use them.

A fourth piece picks which demonstration to show next: one from the tile
the learner has visited least.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .environment import Outcome
from .memory import EpisodeMemory
from .primitives import (
    ANGLE_HALF_RANGE,
    N_JOINTS,
    REST_ANGLES,
    JointTrajectory,
    PolicyParams,
    RawDemonstration,
)

log = logging.getLogger(__name__)

TEACH_GRID_N = 8            # tiles per axis for teaching bookkeeping
DEMO_SET_SIZE = 127         # exemplars in a random teaching set
K_REP_MIN = 5               # re-executions per reliability estimate
DEMO3_GRID_N = 12           # target tiles per axis for synthetic demos
DEMO3_SEARCH_SAMPLES = 2000
DEMO3_MATCH_RADIUS = 0.3    # max landing-to-target distance before skipping
DEMO3_SAMPLES = 100         # time samples per emitted raw trajectory
DEMO3_DURATION = 1.25       # seconds, shared by all synthetic demos

TASK_LOWS = (-1.0, -1.0)
TASK_HIGHS = (1.0, 1.0)


class TeachingSetError(ValueError):
    """Demonstration set cannot be built or parsed."""


@dataclass(frozen=True)
class DemoEntry:
    """One demonstration: either a policy vector or a raw trajectory."""

    outcome: Outcome
    params: PolicyParams | None = None
    raw: RawDemonstration | None = None

    def __post_init__(self):
        if (self.params is None) == (self.raw is None):
            raise TeachingSetError(
                "an entry carries exactly one of a policy or a raw trajectory"
            )
        arr = self.outcome.as_array()
        if not np.all(np.isfinite(arr)):
            raise TeachingSetError("demonstrated outcome must be finite")


@dataclass(frozen=True)
class DemonstrationSet:
    entries: tuple
    provenance: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.entries:
            raise TeachingSetError("a demonstration set cannot be empty")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self):
        return len(self.entries)


# ------------------------------------------------------------------ tiles


def tile_of(point, n: int = TEACH_GRID_N,
            lows=TASK_LOWS, highs=TASK_HIGHS):
    """(row, col) tile of a point, or None when it falls off the grid."""
    point = np.asarray(point, dtype=float)
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    if np.any(point < lows) or np.any(point > highs):
        return None
    frac = (point - lows) / (highs - lows)
    idx = np.minimum((frac * n).astype(int), n - 1)
    return int(idx[0]), int(idx[1])


def tile_centers(n: int, lows=TASK_LOWS, highs=TASK_HIGHS) -> np.ndarray:
    """Centers of an n x n tiling, row-major, shape (n*n, 2)."""
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    steps = (highs - lows) / n
    axes = [lows[d] + steps[d] * (np.arange(n) + 0.5) for d in range(2)]
    xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


# --------------------------------------------------------------- builders


def build_demonstrator1(memory: EpisodeMemory,
                        rng: np.random.Generator) -> DemonstrationSet:
    """Random teaching set: uniform exemplars from an autonomous memory."""
    if len(memory) < DEMO_SET_SIZE:
        raise TeachingSetError(
            f"need at least {DEMO_SET_SIZE} exemplars, memory holds {len(memory)}"
        )
    picks = np.sort(rng.choice(len(memory), size=DEMO_SET_SIZE, replace=False))
    episodes = list(memory)
    entries = [
        DemoEntry(outcome=episodes[i].outcome, params=episodes[i].params)
        for i in picks
    ]
    return DemonstrationSet(tuple(entries), "demonstrator1",
                            {"source_size": len(memory)})


def build_demonstrator2(memory: EpisodeMemory, env,
                        k_rep: int = K_REP_MIN) -> DemonstrationSet:
    """Reliable teaching set: per tile, the exemplar whose landing scatters
    least over k_rep noisy re-executions."""
    if k_rep < K_REP_MIN:
        raise TeachingSetError(f"k_rep must be at least {K_REP_MIN}")
    if len(memory) < DEMO_SET_SIZE:
        raise TeachingSetError(
            f"need at least {DEMO_SET_SIZE} exemplars, memory holds {len(memory)}"
        )
    by_tile: dict[tuple, list] = {}
    for ep in memory:
        tile = tile_of(ep.outcome.as_array())
        if tile is not None:
            by_tile.setdefault(tile, []).append(ep)

    entries = []
    variances = {}
    for tile in sorted(by_tile):
        candidates = by_tile[tile]
        thetas = np.repeat(
            np.array([c.params.values for c in candidates]), k_rep, axis=0
        )
        landings = env.execute_batch(thetas, noise=True)
        landings = landings.reshape(len(candidates), k_rep, 2)
        spread = landings.var(axis=1, ddof=0).sum(axis=1)
        best = int(np.argmin(spread))
        entries.append(DemoEntry(outcome=candidates[best].outcome,
                                 params=candidates[best].params))
        variances[tile] = [float(s) for s in spread]
    return DemonstrationSet(
        tuple(entries), "demonstrator2",
        {"k_rep": int(k_rep), "tiles": len(entries),
         "tile_variances": {str(t): v for t, v in variances.items()}},
    )


def min_jerk(u):
    """Smooth monotone 0 -> 1 ramp with zero end velocities."""
    u = np.asarray(u, dtype=float)
    return 10.0 * u**3 - 15.0 * u**4 + 6.0 * u**5


def build_demonstrator3(env, rng: np.random.Generator, targets=None,
                        n_search: int = DEMO3_SEARCH_SAMPLES,
                        match_radius: float = DEMO3_MATCH_RADIUS
                        ) -> DemonstrationSet:
    """Human-like teaching set: shared-shape monotone raw trajectories.

    Candidate movements ramp every joint from rest to a random final angle
    along one min-jerk profile; a coarse search keeps, per target tile
    center, the candidate landing nearest it. Targets with no candidate
    within match_radius are skipped.
    """
    if targets is None:
        targets = tile_centers(DEMO3_GRID_N)
    targets = np.asarray(targets, dtype=float)
    rest = np.asarray(REST_ANGLES)
    times = np.linspace(0.0, DEMO3_DURATION, DEMO3_SAMPLES)
    profile = min_jerk(times / DEMO3_DURATION)

    finals = rng.uniform(-ANGLE_HALF_RANGE, ANGLE_HALF_RANGE,
                         (n_search, N_JOINTS))
    angles = rest[None, :, None] + finals[:, :, None] * profile[None, None, :]
    landings, _ = env.execute_angle_profiles(
        angles, np.full(n_search, DEMO3_DURATION), noise=False
    )

    entries = []
    skipped = 0
    for target in targets:
        dists = np.linalg.norm(landings - target, axis=1)
        best = int(np.argmin(dists))
        if dists[best] > match_radius:
            skipped += 1
            log.warning("no demonstration lands within %.2f of (%.2f, %.2f)",
                        match_radius, target[0], target[1])
            continue
        trajectories = tuple(
            JointTrajectory(joint_index=j, times=times,
                            angles=angles[best, j].copy())
            for j in range(N_JOINTS)
        )
        entries.append(DemoEntry(
            outcome=Outcome(float(landings[best, 0]), float(landings[best, 1])),
            raw=RawDemonstration(trajectories=trajectories,
                                 outcome=(float(landings[best, 0]),
                                          float(landings[best, 1]))),
        ))
    return DemonstrationSet(
        tuple(entries), "demonstrator3",
        {"targets": int(len(targets)), "skipped": int(skipped),
         "coverage": float(len(entries) / len(targets))},
    )


# -------------------------------------------------------------- selection


def select_demonstration(demo_set: DemonstrationSet, learner_outcomes,
                         rng: np.random.Generator,
                         grid_n: int = TEACH_GRID_N,
                         lows=TASK_LOWS, highs=TASK_HIGHS) -> DemoEntry:
    """A demonstration from the least-visited tile that has one to offer."""
    demo_tiles: dict[tuple, list] = {}
    for entry in demo_set.entries:
        tile = tile_of(entry.outcome.as_array(), grid_n, lows, highs)
        if tile is not None:
            demo_tiles.setdefault(tile, []).append(entry)
    if not demo_tiles:
        return demo_set.entries[int(rng.integers(len(demo_set.entries)))]

    if isinstance(learner_outcomes, np.ndarray):
        points = learner_outcomes.reshape(-1, 2)
    else:
        points = np.array([
            o.as_array() if hasattr(o, "as_array") else np.asarray(o, float)
            for o in learner_outcomes
        ]).reshape(-1, 2)
    counts = np.zeros((grid_n, grid_n), dtype=int)
    if points.size:
        lo = np.asarray(lows, dtype=float)
        hi = np.asarray(highs, dtype=float)
        inside = np.all((points >= lo) & (points <= hi), axis=1)
        frac = (points[inside] - lo) / (hi - lo)
        idx = np.minimum((frac * grid_n).astype(int), grid_n - 1)
        np.add.at(counts, (idx[:, 0], idx[:, 1]), 1)
    visits = {tile: int(counts[tile]) for tile in demo_tiles}
    least = min(visits.values())
    candidates = sorted(t for t, v in visits.items() if v == least)
    tile = candidates[int(rng.integers(len(candidates)))]
    options = demo_tiles[tile]
    return options[int(rng.integers(len(options)))]


# ------------------------------------------------------------ persistence


_CSV_FIELDS = [f"theta_{i + 1}" for i in range(25)] + ["tau_x", "tau_y"]


def save_demonstrations(demo_set: DemonstrationSet, path) -> None:
    """Write a set to disk: CSV for policy entries, a directory of raw
    trajectory files (plus meta.json) for raw entries."""
    path = Path(path)
    if any(e.raw is not None for e in demo_set.entries):
        path.mkdir(parents=True, exist_ok=True)
        for k, entry in enumerate(demo_set.entries):
            entry.raw.save(path / f"demo_{k:03d}.txt")
        meta = dict(demo_set.meta, provenance=demo_set.provenance,
                    count=len(demo_set.entries))
        (path / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
        return
    with open(path, "w", newline="") as fh:
        fh.write(f"# provenance={demo_set.provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(_CSV_FIELDS)
        for entry in demo_set.entries:
            row = [repr(float(v)) for v in entry.params.values]
            row += [repr(float(entry.outcome.x)), repr(float(entry.outcome.y))]
            writer.writerow(row)


def load_demonstrations(path) -> DemonstrationSet:
    path = Path(path)
    if path.is_dir():
        meta_path = path / "meta.json"
        if not meta_path.exists():
            raise TeachingSetError(f"{path}: missing meta.json")
        meta = json.loads(meta_path.read_text())
        entries = []
        for file in sorted(path.glob("demo_*.txt")):
            raw = RawDemonstration.load(file)
            entries.append(DemoEntry(outcome=Outcome(*raw.outcome), raw=raw))
        if not entries:
            raise TeachingSetError(f"{path}: no demonstration files")
        provenance = meta.pop("provenance", "unknown")
        meta.pop("count", None)
        return DemonstrationSet(tuple(entries), provenance, meta)

    with open(path) as fh:
        first = fh.readline()
        provenance = "unknown"
        if first.startswith("#"):
            key, _, value = first[1:].strip().partition("=")
            if key.strip() == "provenance":
                provenance = value.strip()
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _CSV_FIELDS:
            raise TeachingSetError(f"{path}: unexpected header")
        entries = []
        for row in reader:
            if len(row) != len(_CSV_FIELDS):
                raise TeachingSetError(f"{path}: malformed row {row!r}")
            values = np.array([float(v) for v in row[:25]])
            entries.append(DemoEntry(
                outcome=Outcome(float(row[25]), float(row[26])),
                params=PolicyParams(values),
            ))
    return DemonstrationSet(tuple(entries), provenance)
