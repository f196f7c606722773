import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sympro.pathint import (
    circular_rmse,
    consequence_suite,
    generate_velocity,
    grid_null,
    grid_states,
    run_batch,
    run_task,
    wrap_angle,
)
from sympro.systems import BreakingConfig, controlled_path_integrator


def test_zero_scale_gives_zero_velocity():
    for kind in ("gaussian", "piecewise_constant", "correlated_walk"):
        v = generate_velocity(kind, 50, scale=0.0)
        assert len(v) == 50 and not np.any(v.values)


def test_velocity_is_seeded():
    a = generate_velocity("correlated_walk", 100, seed=3)
    b = generate_velocity("correlated_walk", 100, seed=3)
    c = generate_velocity("correlated_walk", 100, seed=4)
    np.testing.assert_array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)


def test_velocity_argument_checks():
    with pytest.raises(ValueError):
        generate_velocity("levy", 10)
    with pytest.raises(ValueError):
        generate_velocity("gaussian", 0)


def test_piecewise_constant_holds_blocks():
    v = generate_velocity("piecewise_constant", 40, seed=1).values
    assert np.all(v[:16] == v[0]) and v[16] != v[15]


def test_correlated_walk_statistics():
    v = generate_velocity("correlated_walk", 100_000, seed=0, scale=2.0).values
    r = np.corrcoef(v[:-1], v[1:])[0, 1]
    assert 0.94 <= r <= 0.96
    assert v.std() == pytest.approx(2.0, rel=0.05)


def test_wrap_angle_and_circular_rmse():
    assert wrap_angle(math.pi) == pytest.approx(math.pi)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)
    assert wrap_angle(2 * math.pi + 0.1) == pytest.approx(0.1)
    # an error of 2 pi - 0.1 is a 0.1 miss on the circle
    assert circular_rmse([2 * math.pi - 0.1, -0.1]) == pytest.approx(0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(-100, 100), st.integers(-5, 5))
def test_wrap_is_periodic(a, k):
    assert abs(wrap_angle(a) - wrap_angle(a + 2 * math.pi * k)) <= 1e-9 * max(1.0, abs(a))
    assert -math.pi < wrap_angle(a) <= math.pi + 1e-12


def test_exact_integrator_tracks_phase():
    m = controlled_path_integrator(True)
    v = generate_velocity("correlated_walk", 256, seed=5)
    r = run_task(m, 0.4, v)
    assert r.circular_rmse <= 0.01
    assert r.per_step_error.shape == (256,)
    with pytest.raises(ValueError):
        r.per_step_error[0] = 1.0


def test_zero_velocity_holds_phase():
    v = generate_velocity("gaussian", 200, scale=0.0)
    assert run_task(controlled_path_integrator(True), 1.3, v).circular_rmse <= 1e-6


def test_broken_integrator_drifts():
    rng = np.random.default_rng(0)
    phis = rng.uniform(-np.pi, np.pi, 8)
    vs = [generate_velocity("correlated_walk", 256, seed=i) for i in range(8)]
    exact = run_batch(controlled_path_integrator(True), phis, vs)
    broken = run_batch(controlled_path_integrator(False, BreakingConfig("phase_pinning", 0.05)), phis, vs)
    assert exact.circular_rmse <= 0.01
    assert broken.circular_rmse >= 10 * exact.circular_rmse
    assert exact.per_step_error.size == 8 * 256


def test_bare_step_map_needs_readout():
    v = generate_velocity("gaussian", 10, seed=0)
    with pytest.raises(ValueError):
        run_task(lambda x, u: x, 0.0, v)
    r = run_task(lambda x, u: x + u * v.dt, 0.0, v, readout=lambda x: float(x[0]), x0=[0.0])
    assert r.circular_rmse <= 1e-12
    with pytest.raises(ValueError):
        run_task(lambda x, u: x, 0.0, v, condition="nope", readout=float, x0=[0.0])


def test_grid_null_examples():
    g = grid_null(32, (0.5,))
    assert g.discrete_error <= 1e-12
    assert g.continuous_error[0] >= 1e-2
    rows = g.csv_rows()
    assert {r["operator"] for r in rows} == {"integer_roll", "fourier_shift"}


def test_grid_null_decreases_with_resolution():
    errs = [grid_null(N, (0.5,)).continuous_error[0] for N in (16, 32, 64, 128)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] > 1e-6


def test_grid_integer_offset_is_exact_roll():
    # a whole-bin Fourier shift is a roll, so it inherits the discrete symmetry
    assert grid_null(16, (1.0, 3.0)).continuous_error == pytest.approx((0.0, 0.0), abs=1e-12)


def test_grid_states_activity_range():
    X = grid_states(64, 20, seed=1)
    rms = np.sqrt(np.mean(X ** 2, axis=1))
    assert rms.min() >= 0.5 and rms.max() <= 1.5


def test_consequence_suite_small():
    res = consequence_suite(seeds=range(3), horizons=(64,), speed_scales=(1.0, 2.0), batch=4)
    conds = {c["condition"] for c in res.cells}
    assert conds == {"in_dist", "speed_ood", "restricted_phase"}
    assert len(res.rows) == 3 * 3 * 2
    by = {(c["model"], c["condition"]): c for c in res.cells}
    assert by[("exact", "in_dist")]["mean"] <= 0.01
    assert by[("broken", "in_dist")]["mean"] > by[("exact", "in_dist")]["mean"]
    assert all(s["ratio"] > 1 for s in res.separations)


def test_consequence_suite_is_deterministic():
    a = consequence_suite(seeds=range(2), horizons=(32,), speed_scales=(1.0,), batch=2, restricted_phase=False)
    b = consequence_suite(seeds=range(2), horizons=(32,), speed_scales=(1.0,), batch=2, restricted_phase=False)
    assert a.cells == b.cells
    with pytest.raises(ValueError):
        consequence_suite(seeds=())
