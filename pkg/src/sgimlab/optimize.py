"""Bounded Nelder-Mead simplex search on a box.

Derivative-free minimizer shared by goal-directed policy refinement and by
the correspondence fit that maps demonstrated trajectories onto primitive
knots. Differences from a textbook implementation, all load-bearing here:

- every candidate point is clamped into the box before evaluation, so all
  iterates stay feasible;
- the initial simplex is the start point plus caller-supplied seed vertices
  (memory neighbors whose objective values may already be known and are
  accepted without spending evaluations), padded with axis steps;
- evaluations are budgeted. The search stops exactly when the budget is
  exhausted or the best value drops below an absolute threshold, which lets
  a caller treat each evaluation as one real episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

REFLECT = 1.0
EXPAND = 2.0
CONTRACT = 0.5
SHRINK = 0.5

PAD_STEP = 0.05  # axis perturbation completing an under-seeded simplex


class ObjectiveError(RuntimeError):
    """A vertex evaluated non-finite twice (once after resampling)."""


@dataclass
class SimplexState:
    """Snapshot of the search: vertex set, values, and progress counters."""

    vertices: np.ndarray          # (n+1, n)
    values: np.ndarray            # (n+1,)
    n_evals: int = 0
    iterations: int = 0
    best_history: list = field(default_factory=list)


@dataclass
class SearchResult:
    x: np.ndarray
    fun: float
    state: SimplexState

    @property
    def n_evals(self) -> int:
        return self.state.n_evals


def _clip(x: np.ndarray, lower: float, upper: float) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), lower, upper)


def _initial_simplex(init, seeds, n, lower, upper):
    """Start point, then distinct seeds, then axis-step padding."""
    vertices = [_clip(init, lower, upper)]
    for s in seeds:
        if len(vertices) == n + 1:
            break
        v = _clip(s, lower, upper)
        if any(np.array_equal(v, u) for u in vertices):
            continue
        vertices.append(v)
    i = 0
    base = vertices[0]
    while len(vertices) < n + 1:
        axis = i % n
        step = PAD_STEP if base[axis] + PAD_STEP <= upper else -PAD_STEP
        v = base.copy()
        v[axis] = v[axis] + step
        v = _clip(v, lower, upper)
        if not any(np.array_equal(v, u) for u in vertices):
            vertices.append(v)
        else:
            # occupied slot; shrink the step until the vertex is new
            v = base.copy()
            v[axis] = v[axis] + step * 0.5
            vertices.append(_clip(v, lower, upper))
        i += 1
    return np.array(vertices)


class SimplexSearch:
    """Incremental Nelder-Mead: ``ask()`` a candidate, ``tell()`` its value.

    The caller owns the evaluation loop, so each asked point can be one
    real episode, budgeted and interleaved with other work. Asked arrays
    are live views: a caller may adjust one in place before telling, and
    the simplex keeps the adjusted point. Cached seed values never
    surface as asks. ``ask()`` returns None once the search is finished
    (tolerance reached, simplex collapsed, or cycling without needing
    evaluations).
    """

    def __init__(self, init, seeds: Sequence[np.ndarray] = (),
                 tol: float = 0.0, *,
                 init_value: float | None = None,
                 seed_values: Sequence[float] | None = None,
                 lower: float = 0.0, upper: float = 1.0):
        init = _clip(init, lower, upper)
        self.tol = float(tol)
        self._known: dict[bytes, float] = {}
        if init_value is not None and np.isfinite(init_value):
            self._known[init.tobytes()] = float(init_value)
        if seed_values is not None:
            for s, val in zip(seeds, seed_values):
                if val is not None and np.isfinite(val):
                    self._known[_clip(s, lower, upper).tobytes()] = float(val)
        self._lower, self._upper = lower, upper
        n = init.size
        vertices = _initial_simplex(init, seeds, n, lower, upper)
        self.state = SimplexState(vertices=vertices,
                                  values=np.full(n + 1, np.nan))
        self.best_x = vertices[0].copy()
        self.best_f = np.inf
        self.done = False
        self._pending: np.ndarray | None = None
        self._reply: float | None = None
        self._gen = self._steps()

    def ask(self) -> np.ndarray | None:
        """The next point needing a real evaluation, or None when done."""
        if self._pending is None and not self.done:
            try:
                self._pending = self._gen.send(self._reply)
            except StopIteration:
                self.done = True
            self._reply = None
        return None if self.done else self._pending

    def tell(self, value: float) -> None:
        """Report the objective value of the last asked point."""
        if self._pending is None:
            raise RuntimeError("tell() without a pending ask()")
        f = float(value)
        x = self._pending
        self.state.n_evals += 1
        self._known[x.tobytes()] = f
        self._record(x, f)
        if self.best_f < self.tol:
            self.done = True
        self._reply = f
        self._pending = None

    def _record(self, x: np.ndarray, f: float) -> None:
        if f < self.best_f:
            self.best_f = f
            self.best_x = x.copy()
        self.state.best_history.append(self.best_f)

    def _steps(self):
        state = self.state
        vertices, values = state.vertices, state.values
        n = vertices.shape[1]
        consumed = False

        def evaluate(x):
            nonlocal consumed
            key = x.tobytes()
            if key in self._known:
                f = self._known[key]
                self._record(x, f)
                return f
            consumed = True
            return (yield x)   # tell() records and caches the reply

        for i in range(n + 1):
            values[i] = yield from evaluate(vertices[i])

        idle_iterations = 0
        while True:
            order = np.argsort(values, kind="stable")
            vertices[:] = vertices[order]
            values[:] = values[order]
            state.iterations += 1
            before = vertices.tobytes()
            consumed = False

            centroid = vertices[:-1].mean(axis=0)
            worst = vertices[-1]
            lower, upper = self._lower, self._upper
            xr = _clip(centroid + REFLECT * (centroid - worst), lower, upper)
            fr = yield from evaluate(xr)
            if fr < values[0]:
                xe = _clip(centroid + EXPAND * (xr - centroid), lower, upper)
                fe = yield from evaluate(xe)
                if fe < fr:
                    vertices[-1], values[-1] = xe, fe
                else:
                    vertices[-1], values[-1] = xr, fr
            elif fr < values[-2]:
                vertices[-1], values[-1] = xr, fr
            else:
                if fr < values[-1]:
                    xc = _clip(centroid + CONTRACT * (xr - centroid), lower, upper)
                    fc = yield from evaluate(xc)
                    if fc <= fr:
                        vertices[-1], values[-1] = xc, fc
                        continue
                else:
                    xc = _clip(centroid - CONTRACT * (centroid - worst), lower, upper)
                    fc = yield from evaluate(xc)
                    if fc < values[-1]:
                        vertices[-1], values[-1] = xc, fc
                        continue
                # shrink every vertex toward the best
                for i in range(1, n + 1):
                    vertices[i] = _clip(
                        vertices[0] + SHRINK * (vertices[i] - vertices[0]),
                        lower, upper,
                    )
                    values[i] = yield from evaluate(vertices[i])
            if vertices.tobytes() == before and not consumed:
                return  # simplex collapsed (e.g. onto a box face)
            if not consumed:
                # cached-value-only iterations visit a finite state space;
                # cut cycles that consume no evaluations
                idle_iterations += 1
                if idle_iterations > n + 2:
                    return
            else:
                idle_iterations = 0


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    init: np.ndarray,
    seeds: Sequence[np.ndarray] = (),
    max_evals: int = 500,
    tol: float = 0.0,
    *,
    init_value: float | None = None,
    seed_values: Sequence[float] | None = None,
    lower: float = 0.0,
    upper: float = 1.0,
) -> SearchResult:
    """Minimize ``objective`` over the box ``[lower, upper]^n``.

    ``seeds`` supply up to n extra starting vertices; when ``seed_values``
    is given (parallel to ``seeds``), those objective values are trusted and
    cost no evaluations. Vertices without known values are evaluated lazily
    in order, so a budget smaller than a full simplex still probes the most
    informative points first and returns the best point seen.

    Reflection/expansion/contraction/shrink coefficients are 1, 2, 0.5, 0.5.
    The recorded best value never increases. A non-finite objective value
    causes one deterministic resample of the offending vertex (midpoint
    toward the current best); a second non-finite value raises
    :class:`ObjectiveError`.
    """
    search = SimplexSearch(init, seeds, tol,
                           init_value=init_value, seed_values=seed_values,
                           lower=lower, upper=upper)
    left = int(max_evals)
    while left > 0:
        x = search.ask()
        if x is None:
            break
        left -= 1
        f = float(objective(x))
        if not np.isfinite(f):
            # one deterministic retry: midpoint toward the best point seen
            if left <= 0:
                break
            x2 = _clip(0.5 * (x + search.best_x), lower, upper)
            left -= 1
            search.state.n_evals += 1
            f = float(objective(x2))
            if not np.isfinite(f):
                raise ObjectiveError("objective returned a non-finite value twice")
            x[:] = x2
        search.tell(f)
    if left <= 0:
        search.ask()  # drain any cache-only tail work before reporting

    state = search.state
    if not np.isfinite(search.best_f):
        # budget ran out before any evaluation; fall back to the start point
        return SearchResult(x=state.vertices[0].copy(), fun=np.inf, state=state)
    return SearchResult(x=search.best_x, fun=search.best_f, state=state)
