"""Motor primitives for the six-joint arm.

A policy is a flat vector of 25 numbers in [0, 1]: four control knots per
joint plus one duration component. Each joint follows a smooth curve that
blends its knots with Gaussian weights centered at t = 0, delta/3,
2*delta/3, delta:

    u(t) = sum_i w_i(t) u_i / sum_j w_j(t),   w_i(t) = exp(-sigma (t - t_i)^2)

with sigma = 40 / delta^2, so the blend sharpness scales with the movement
duration. Curves live in normalized knot units; the affine decode to joint
radians (ANGLE_HALF_RANGE) is owned here and shared with the environment,
which keeps demonstration fitting and execution consistent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .optimize import nelder_mead

N_JOINTS = 6
KNOTS_PER_JOINT = 4
N_PARAMS = N_JOINTS * KNOTS_PER_JOINT + 1

DELTA_MIN = 0.5   # seconds
DELTA_MAX = 2.0
KNOT_SHARPNESS = 40.0          # sigma = KNOT_SHARPNESS / delta^2

# joint range is rest-centered: knot 0 -> rest - range, knot 1 -> rest + range
ANGLE_HALF_RANGE = 0.7         # radians
REST_ANGLES = (0.0, 0.5, 0.0, 0.5, 0.0, 0.5)  # forward lean over the water


class InvalidParamsError(ValueError):
    """Policy vector has the wrong shape or leaves [0, 1]."""


class DomainError(ValueError):
    """A query time lies outside the movement's [0, delta] window."""


class DemonstrationFormatError(ValueError):
    """A raw-demonstration file or record violates the format."""


def decode_duration(value):
    """Duration component(s) in [0,1] -> seconds in [DELTA_MIN, DELTA_MAX]."""
    return DELTA_MIN + np.asarray(value, dtype=float) * (DELTA_MAX - DELTA_MIN)


def encode_duration(delta: float) -> float:
    return float(np.clip((delta - DELTA_MIN) / (DELTA_MAX - DELTA_MIN), 0.0, 1.0))


def decode_angle(u, rest: float = 0.0):
    """Normalized knot value(s) in [0,1] -> joint angle in radians."""
    return rest + (2.0 * np.asarray(u, dtype=float) - 1.0) * ANGLE_HALF_RANGE


def encode_angle(angle, rest: float = 0.0):
    """Joint angle in radians -> normalized knot value(s), clipped to [0,1]."""
    u = (np.asarray(angle, dtype=float) - rest) / ANGLE_HALF_RANGE / 2.0 + 0.5
    return np.clip(u, 0.0, 1.0)


@dataclass(frozen=True, eq=False)
class PolicyParams:
    """Immutable 25-vector: 6 joints x 4 knots, then the duration component."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (N_PARAMS,):
            raise InvalidParamsError(f"expected shape ({N_PARAMS},), got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidParamsError("non-finite parameter value")
        if v.min() < 0.0 or v.max() > 1.0:
            raise InvalidParamsError("parameters must lie in [0, 1]")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def duration(self) -> float:
        return float(decode_duration(self.values[N_PARAMS - 1]))

    def knots(self, joint: int) -> np.ndarray:
        if not 0 <= joint < N_JOINTS:
            raise IndexError(f"joint index {joint} out of range")
        return self.values[joint * KNOTS_PER_JOINT:(joint + 1) * KNOTS_PER_JOINT]

    def knot_matrix(self) -> np.ndarray:
        """All knots as a (N_JOINTS, KNOTS_PER_JOINT) view."""
        return self.values[: N_JOINTS * KNOTS_PER_JOINT].reshape(
            N_JOINTS, KNOTS_PER_JOINT
        )

    @classmethod
    def random(cls, rng: np.random.Generator) -> "PolicyParams":
        return cls(rng.random(N_PARAMS))


def clamp_params(raw) -> PolicyParams:
    """Project an arbitrary real vector onto the valid policy box."""
    v = np.asarray(raw, dtype=float)
    if v.shape != (N_PARAMS,):
        raise InvalidParamsError(f"expected shape ({N_PARAMS},), got {v.shape}")
    return PolicyParams(np.clip(v, 0.0, 1.0))


def knot_times(delta: float) -> np.ndarray:
    return np.array([0.0, delta / 3.0, 2.0 * delta / 3.0, delta])


def knot_curve(knots, delta: float, times, sharpness: float | None = None) -> np.ndarray:
    """Evaluate the Gaussian knot blend at ``times`` (normalized units).

    ``sharpness`` overrides sigma (default KNOT_SHARPNESS / delta^2), which
    the tests use to check the interpolation limit: for large sigma the
    curve passes through the knots.
    """
    if delta <= 0.0:
        raise InvalidParamsError("duration must be positive")
    k = np.asarray(knots, dtype=float)
    t = np.atleast_1d(np.asarray(times, dtype=float))
    if t.size and (t.min() < -1e-12 or t.max() > delta + 1e-12):
        raise DomainError("query time outside [0, delta]")
    sigma = KNOT_SHARPNESS / delta**2 if sharpness is None else float(sharpness)
    centers = knot_times(delta)
    w = np.exp(-sigma * (t[:, None] - centers[None, :]) ** 2)
    return (w @ k) / w.sum(axis=1)


@dataclass(frozen=True)
class JointTrajectory:
    """Sampled angle curve of one joint: times in seconds, angles in radians."""

    joint_index: int
    times: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        a = np.asarray(self.angles, dtype=float)
        if t.ndim != 1 or t.shape != a.shape or t.size < 2:
            raise DemonstrationFormatError("need matching 1-D times/angles, >= 2 samples")
        if np.any(np.diff(t) <= 0):
            raise DemonstrationFormatError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "angles", a)

    @property
    def duration(self) -> float:
        return float(self.times[-1])


def generate_trajectory(params: PolicyParams, joint: int, times,
                        rest_angles=REST_ANGLES) -> JointTrajectory:
    """Decode one joint's primitive curve to a radian trajectory."""
    delta = params.duration
    u = knot_curve(params.knots(joint), delta, times)
    return JointTrajectory(joint_index=joint, times=np.asarray(times, float),
                           angles=decode_angle(u, rest_angles[joint]))


@dataclass(frozen=True)
class RawDemonstration:
    """Six per-joint trajectories sharing one duration, plus the observed landing."""

    trajectories: tuple
    outcome: tuple  # (x, y)

    def __post_init__(self):
        trajs = tuple(self.trajectories)
        if len(trajs) != N_JOINTS:
            raise DemonstrationFormatError(f"expected {N_JOINTS} trajectories")
        delta = trajs[0].duration
        for tr in trajs:
            if abs(tr.times[0]) > 1e-9 or abs(tr.duration - delta) > 1e-9:
                raise DemonstrationFormatError(
                    "trajectories must share [0, delta] support"
                )
        x, y = self.outcome
        if not (np.isfinite(x) and np.isfinite(y)):
            raise DemonstrationFormatError("non-finite outcome")
        object.__setattr__(self, "trajectories", trajs)
        object.__setattr__(self, "outcome", (float(x), float(y)))

    @property
    def duration(self) -> float:
        return self.trajectories[0].duration

    def save(self, path):
        lines = [f"delta={float(self.duration)!r}"]
        for tr in self.trajectories:
            lines.append("")
            lines.extend(f"{float(t)!r},{float(a)!r}" for t, a in zip(tr.times, tr.angles))
        lines.append("")
        lines.append(f"tau={self.outcome[0]!r},{self.outcome[1]!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "RawDemonstration":
        with open(path) as fh:
            text = fh.read()
        m = re.match(r"\s*delta=([^\n]+)\n", text)
        if not m:
            raise DemonstrationFormatError(f"{path}: missing delta header")
        blocks = [b.strip() for b in text[m.end():].split("\n\n") if b.strip()]
        if not blocks or not blocks[-1].startswith("tau="):
            raise DemonstrationFormatError(f"{path}: missing tau line")
        tau = tuple(float(v) for v in blocks[-1][len("tau="):].split(","))
        trajs = []
        for j, block in enumerate(blocks[:-1]):
            rows = [line.split(",") for line in block.splitlines()]
            t = np.array([float(r[0]) for r in rows])
            a = np.array([float(r[1]) for r in rows])
            trajs.append(JointTrajectory(joint_index=j, times=t, angles=a))
        return cls(trajectories=tuple(trajs), outcome=tau)


@dataclass
class FitResult:
    params: PolicyParams
    residuals: np.ndarray        # (N_JOINTS,) L2 residual in knot units
    used_fallback: np.ndarray    # (N_JOINTS,) bool, constant-mean fallback


def _fit_joint(times, target_u, delta, max_evals, tol):
    """Fit 4 knots to one normalized joint curve; returns (knots, residual, fb)."""

    def residual(knots):
        return float(np.linalg.norm(target_u - knot_curve(knots, delta, times)))

    init = np.clip(np.interp(knot_times(delta), times, target_u), 0.0, 1.0)
    fallback = np.full(KNOTS_PER_JOINT, float(np.mean(target_u)))
    fb_res = residual(fallback)

    best, best_res = init, residual(init)
    for _ in range(3):
        out = nelder_mead(residual, best, max_evals=max_evals, tol=tol,
                          init_value=best_res)
        if out.fun < best_res:
            best, best_res = out.x, out.fun
        if best_res < 1e-8:
            break
    if best_res > fb_res:
        return fallback, fb_res, True
    return best, best_res, False


def fit_demonstration(demo: RawDemonstration, *, rest_angles=REST_ANGLES,
                      max_evals: int = 900, tol: float = 1e-10) -> FitResult:
    """Map a raw demonstration onto primitive parameters (the correspondence step).

    Each joint's radian trajectory is normalized to knot units and its four
    knots are found with a bounded simplex search started from the curve's
    values at the knot times. If the search cannot beat a constant-mean
    knot vector for some joint, that initialization is returned instead and
    flagged. The demonstration's duration is copied (clipped into the valid
    range by the affine encode).

    Returns a :class:`FitResult` whose ``residuals`` are per-joint L2 errors
    in normalized units over the demonstration's sample times.
    """
    delta = demo.duration
    flat = np.empty(N_PARAMS)
    residuals = np.empty(N_JOINTS)
    used_fb = np.zeros(N_JOINTS, dtype=bool)
    for j, tr in enumerate(demo.trajectories):
        target_u = encode_angle(tr.angles, rest_angles[j])
        knots, res, fb = _fit_joint(tr.times, target_u, delta, max_evals, tol)
        flat[j * KNOTS_PER_JOINT:(j + 1) * KNOTS_PER_JOINT] = knots
        residuals[j] = res
        used_fb[j] = fb
    flat[N_PARAMS - 1] = encode_duration(delta)
    return FitResult(params=PolicyParams(flat), residuals=residuals,
                     used_fallback=used_fb)
