"""Primitive curves, parameter validation, and demonstration fitting."""

import math

import numpy as np
import pytest

from sgimlab.primitives import (
    REST_ANGLES,
    ANGLE_HALF_RANGE,
    DELTA_MAX,
    DELTA_MIN,
    N_PARAMS,
    DomainError,
    InvalidParamsError,
    JointTrajectory,
    PolicyParams,
    RawDemonstration,
    clamp_params,
    decode_angle,
    encode_angle,
    fit_demonstration,
    generate_trajectory,
    knot_curve,
    knot_times,
)


def make_params(knot_matrix, duration_component=0.5):
    flat = np.concatenate([np.asarray(knot_matrix, float).ravel(),
                           [duration_component]])
    return PolicyParams(flat)


# ---------------------------------------------------------------- curves


def test_constant_knots_give_constant_curve():
    times = np.linspace(0, 1.0, 37)
    u = knot_curve([0.5, 0.5, 0.5, 0.5], 1.0, times)
    assert np.allclose(u, 0.5, atol=1e-12)


def test_symmetric_knots_give_time_symmetric_curve():
    delta = 1.4
    times = np.linspace(0, delta, 81)
    u = knot_curve([0.1, 0.9, 0.9, 0.1], delta, times)
    assert np.allclose(u, u[::-1], atol=1e-12)


def test_nearest_knot_dominates_at_knot_time():
    # independent inline evaluation of the Gaussian blend
    t, delta, sigma = 1.0 / 3.0, 1.0, 50.0
    centers = [0.0, delta / 3, 2 * delta / 3, delta]
    knots = [0.0, 1.0, 0.0, 0.0]
    w = [math.exp(-sigma * (t - c) ** 2) for c in centers]
    oracle = sum(wi * ki for wi, ki in zip(w, knots)) / sum(w)
    assert abs(oracle - 0.9923274821817133) < 1e-12  # frozen hand evaluation

    u = knot_curve(knots, delta, [t], sharpness=sigma)[0]
    assert abs(u - oracle) < 1e-12
    assert abs(u - 1.0) < 1e-2  # nearest-knot weight dominates


def test_large_sharpness_interpolates_knots():
    delta = 2.0
    knots = np.array([0.15, 0.8, 0.3, 0.65])
    u = knot_curve(knots, delta, knot_times(delta), sharpness=500.0)
    assert np.max(np.abs(u - knots)) < 1e-3


def test_curve_bounded_by_knot_range():
    rng = np.random.default_rng(11)
    for _ in range(200):
        knots = rng.random(4)
        delta = float(rng.uniform(DELTA_MIN, DELTA_MAX))
        u = knot_curve(knots, delta, np.linspace(0, delta, 50))
        assert u.min() >= knots.min() - 1e-12
        assert u.max() <= knots.max() + 1e-12


def test_curve_shift_covariance():
    rng = np.random.default_rng(5)
    knots = rng.random(4) * 0.5
    times = np.linspace(0, 0.9, 40)
    base = knot_curve(knots, 0.9, times)
    shifted = knot_curve(knots + 0.3, 0.9, times)
    assert np.allclose(shifted, base + 0.3, atol=1e-12)


def test_curve_domain_and_duration_errors():
    with pytest.raises(DomainError):
        knot_curve([0.5] * 4, 1.0, [1.5])
    with pytest.raises(InvalidParamsError):
        knot_curve([0.5] * 4, 0.0, [0.0])
    with pytest.raises(InvalidParamsError):
        knot_curve([0.5] * 4, -1.0, [0.0])


# ---------------------------------------------------------------- params


def test_policy_params_validation():
    with pytest.raises(InvalidParamsError):
        PolicyParams(np.zeros(24))
    bad = np.full(N_PARAMS, 0.5)
    bad[3] = 1.2
    with pytest.raises(InvalidParamsError):
        PolicyParams(bad)
    bad[3] = np.nan
    with pytest.raises(InvalidParamsError):
        PolicyParams(bad)


def test_duration_decode_is_affine():
    assert PolicyParams(np.full(N_PARAMS, 0.0)).duration == DELTA_MIN
    assert PolicyParams(np.full(N_PARAMS, 1.0)).duration == DELTA_MAX
    mid = PolicyParams(np.full(N_PARAMS, 0.5))
    assert math.isclose(mid.duration, (DELTA_MIN + DELTA_MAX) / 2)


def test_clamp_params_projects_onto_box():
    raw = np.linspace(-0.5, 1.5, N_PARAMS)
    p = clamp_params(raw)
    assert p.values.min() >= 0.0 and p.values.max() <= 1.0
    inside = np.full(N_PARAMS, 0.25)
    assert np.array_equal(clamp_params(inside).values, inside)


def test_params_values_read_only():
    p = PolicyParams(np.full(N_PARAMS, 0.5))
    with pytest.raises(ValueError):
        p.values[0] = 0.9


def test_generate_trajectory_decodes_angles():
    p = make_params(np.full((6, 4), 0.5))
    tr = generate_trajectory(p, 2, np.linspace(0, p.duration, 20))
    assert tr.joint_index == 2
    assert np.allclose(tr.angles, 0.0, atol=1e-12)  # 0.5 decodes to zero radians
    assert np.allclose(decode_angle(encode_angle(tr.angles)), tr.angles)


# ---------------------------------------------------------------- fitting


def _demo_from_params(params, n_samples=100):
    times = np.linspace(0, params.duration, n_samples)
    trajs = tuple(generate_trajectory(params, j, times) for j in range(6))
    return RawDemonstration(trajectories=trajs, outcome=(0.1, 0.2))


def test_fit_round_trip_recovers_policy():
    rng = np.random.default_rng(42)
    params = PolicyParams(rng.random(N_PARAMS))
    demo = _demo_from_params(params)
    fit = fit_demonstration(demo)
    assert np.all(fit.residuals < 1e-6)
    assert not fit.used_fallback.any()
    # regenerated curves match the demonstration pointwise
    for j, tr in enumerate(demo.trajectories):
        redo = generate_trajectory(fit.params, j, tr.times)
        assert np.max(np.abs(redo.angles - tr.angles)) < 1e-5
    assert math.isclose(fit.params.duration, params.duration, abs_tol=1e-9)


def test_fit_constant_demo_gives_constant_knots():
    times = np.linspace(0, 1.0, 60)
    trajs = tuple(
        JointTrajectory(j, times,
                        np.full_like(times, decode_angle(0.3, REST_ANGLES[j])))
        for j in range(6)
    )
    fit = fit_demonstration(RawDemonstration(trajectories=trajs, outcome=(0, 0)))
    assert np.allclose(fit.params.knot_matrix(), 0.3, atol=1e-6)
    assert np.all(fit.residuals < 1e-6)


def test_fit_monotone_ramp_gives_monotone_knots():
    # grid search over knots at 0.01 resolution (run offline) minimizes the
    # residual at (0.22, 0.40, 0.60, 0.78), residual 0.201359; the continuous
    # least-squares solution is (0.2177, 0.3971, 0.6029, 0.7823).
    delta = 1.2
    times = np.linspace(0, delta, 100)
    ramp_u = 0.2 + 0.6 * times / delta
    trajs = tuple(
        JointTrajectory(j, times, decode_angle(ramp_u, REST_ANGLES[j]))
        for j in range(6)
    )
    fit = fit_demonstration(RawDemonstration(trajectories=trajs, outcome=(0, 0)))
    for j in range(6):
        knots = fit.params.knots(j)
        assert np.all(np.diff(knots) >= -1e-9), "knot sequence must be monotone"
        assert np.max(np.abs(knots - [0.22, 0.40, 0.60, 0.78])) < 0.015
        assert fit.residuals[j] <= 0.201359 + 1e-4

    # coarse in-test grid agrees on the monotone pattern
    grid = np.arange(0.0, 1.0001, 0.05)
    best_val, best_knots = np.inf, None
    k34 = np.array(np.meshgrid(grid, grid, indexing="ij")).reshape(2, -1).T
    for k1 in grid:
        for k2 in grid:
            heads = np.repeat([[k1, k2]], k34.shape[0], axis=0)
            cand = np.hstack([heads, k34])
            curves = np.array([knot_curve(c, delta, times) for c in cand])
            vals = np.linalg.norm(curves - ramp_u, axis=1)
            i = int(np.argmin(vals))
            if vals[i] < best_val:
                best_val, best_knots = vals[i], cand[i]
    assert np.all(np.diff(best_knots) >= 0)


# ------------------------------------------------------- demonstration IO


def test_raw_demo_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    params = PolicyParams(rng.random(N_PARAMS))
    demo = _demo_from_params(params, n_samples=40)
    path = tmp_path / "demo_000.txt"
    demo.save(path)
    loaded = RawDemonstration.load(path)
    assert math.isclose(loaded.duration, demo.duration, rel_tol=0, abs_tol=0)
    assert loaded.outcome == demo.outcome
    for a, b in zip(loaded.trajectories, demo.trajectories):
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.angles, b.angles)


def test_raw_demo_validation():
    times = np.linspace(0, 1.0, 10)
    trajs = [JointTrajectory(j, times, np.zeros_like(times)) for j in range(5)]
    with pytest.raises(Exception):
        RawDemonstration(trajectories=tuple(trajs), outcome=(0, 0))
    # mismatched durations
    trajs = [JointTrajectory(j, times, np.zeros_like(times)) for j in range(5)]
    trajs.append(JointTrajectory(5, np.linspace(0, 2.0, 10), np.zeros(10)))
    with pytest.raises(Exception):
        RawDemonstration(trajectories=tuple(trajs), outcome=(0, 0))


def test_trajectory_validation():
    with pytest.raises(Exception):
        JointTrajectory(0, np.array([0.0, 0.0, 1.0]), np.zeros(3))  # not increasing
    with pytest.raises(Exception):
        JointTrajectory(0, np.array([0.0]), np.array([0.0]))  # too short
