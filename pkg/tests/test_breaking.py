import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from sympro.breaking import (
    EnsembleRow,
    LifetimeRecord,
    anisotropic_ensemble,
    lifetime_row,
    lifetime_sweep,
    measure_lifetime,
    measure_pseudo_gap,
    phase_reduction,
    pinned_point,
    predict_gap_perturbative,
    predict_lifetime,
    pseudo_gap_details,
    summarize_sweep,
    sweep_configs,
)
from sympro.errors import NoCircleFactor, ZeroGap
from sympro.systems import BreakingConfig, apply_breaking, coupled_irrep_rnn, s1_radial, sphere_system


def pinned(eps, family="phase_pinning", base=None, **kw):
    base = base or s1_radial()
    cfg = BreakingConfig(family, eps, **kw)
    return base, cfg, apply_breaking(base, cfg)


def test_pinning_gap_equals_minus_epsilon():
    for eps in (0.005, 0.01, 0.05):
        base, cfg, sb = pinned(eps)
        assert predict_gap_perturbative(base, cfg) == pytest.approx(-eps, rel=1e-6)
        # first-order agreement; the residual is second order in eps
        assert abs(measure_pseudo_gap(sb) + eps) <= eps ** 2


def test_doubling_epsilon_doubles_prediction():
    base = s1_radial()
    for fam in ("weak_axis", "unit_axis", "rotated_strong"):
        g1 = predict_gap_perturbative(base, BreakingConfig(fam, 0.01, rotation=40.0))
        g2 = predict_gap_perturbative(base, BreakingConfig(fam, 0.02, rotation=40.0))
        assert g2 == pytest.approx(2 * g1, rel=1e-9)


def test_zero_breaking():
    base, cfg, sb = pinned(0.0)
    assert predict_gap_perturbative(base, cfg) == 0.0
    assert abs(measure_pseudo_gap(sb)) <= 1e-8
    tau, censored = measure_lifetime(sb, T_max=50.0)
    assert censored and tau == 50.0


def test_tiny_breaking_gap():
    base, cfg, sb = pinned(1e-6)
    assert abs(measure_pseudo_gap(sb) + 1e-6) <= 1e-9


def test_reduced_phase_equation_for_pinning():
    base, cfg, _ = pinned(0.01)
    red = phase_reduction(base, cfg)
    assert red.stable == (0.0,)
    for th in (0.3, 1.0, -2.0):
        assert red.h(th) == pytest.approx(-0.01 * math.sin(th), abs=1e-12)


def test_pinned_point_lies_at_stable_phase():
    _, _, sb = pinned(0.05)
    x = pinned_point(sb)
    assert np.linalg.norm(sb.field(x)) <= 1e-9
    det = pseudo_gap_details(sb)
    assert abs(det.phase) <= 1e-6 and det.overlap >= 0.99


def test_sphere_has_no_circle_to_pin():
    with pytest.raises(NoCircleFactor):
        phase_reduction(sphere_system(3), BreakingConfig("phase_pinning", 0.1))


def test_lifetime_against_scalar_phase_oracle():
    eps, theta0, thr = 0.01, 0.1, 1.0
    _, _, sb = pinned(eps)
    tau, censored = measure_lifetime(sb, theta0, thr)

    # theta' = -eps sin(theta) started theta0 away from the unstable phase pi
    def escaped(t, y):
        return abs(y[0] - math.pi) - thr
    escaped.terminal = True
    sol = solve_ivp(lambda t, y: [-eps * math.sin(y[0])], (0, 1e4), [math.pi - theta0],
                    events=escaped, rtol=1e-10, atol=1e-12)
    ref = sol.t_events[0][0]
    assert not censored
    assert tau == pytest.approx(ref, rel=0.02)


def test_lifetime_closed_form_against_quadrature():
    gap, theta0, thr = 0.05, 0.1, 1.0
    ref = quad(lambda p: 1.0 / (gap * math.sin(p)), theta0, thr, epsabs=1e-13, epsrel=1e-13)[0]
    assert predict_lifetime(gap, theta0, thr) == pytest.approx(ref, abs=1e-6)
    assert predict_lifetime(-2 * gap, theta0, thr) == pytest.approx(ref / 2, rel=1e-12)
    assert predict_lifetime(gap, theta0, thr, closed_form=False) == pytest.approx(math.log(10) / gap)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1.0), st.floats(0.01, 0.4), st.floats(0.5, 1.5), st.sampled_from([1, 2]))
def test_lifetime_inverse_in_gap(gap, theta0, thr, k):
    if k * thr >= math.pi:
        return
    t1 = predict_lifetime(gap, theta0, thr, k)
    assert t1 > 0
    assert predict_lifetime(3 * gap, theta0, thr, k) == pytest.approx(t1 / 3, rel=1e-12)


def test_lifetime_argument_checks():
    with pytest.raises(ZeroGap):
        predict_lifetime(0.0)
    with pytest.raises(ValueError):
        predict_lifetime(0.1, 1.0, 0.5)
    with pytest.raises(ValueError):
        predict_lifetime(0.1, 0.1, 2.0, pin_order=2)


def test_large_amplitude_warns():
    with pytest.warns(UserWarning):
        predict_gap_perturbative(s1_radial(), BreakingConfig("phase_pinning", 0.5))


def test_lifetime_row_records_failures():
    rec = lifetime_row(sphere_system(3), BreakingConfig("phase_pinning", 0.1))
    assert rec.error.startswith("NoCircleFactor")
    assert math.isnan(rec.gap_measured)
    assert set(rec.csv_row()) == set(LifetimeRecord.COLUMNS)


def test_sweep_configs_share_rotation_across_epsilon():
    rows = sweep_configs(("weak_axis",), (0.01, 0.02), seeds=range(2))
    assert len(rows) == 4
    assert rows[0][0].rotation == rows[1][0].rotation
    assert rows[0][1] in (-1, 1)
    assert sweep_configs(("weak_axis",), (), seeds=range(2)) == []


def test_empty_sweep_is_undefined():
    records, summary = lifetime_sweep(s1_radial(), eps_grid=())
    assert records == [] and not summary.defined
    assert math.isnan(summarize_sweep([]).correlation)


def test_small_sweep():
    records, summary = lifetime_sweep(s1_radial(), families=("weak_axis", "unit_axis"),
                                      eps_grid=(0.02, 0.05), seeds=range(1))
    assert summary.n_rows == 4 and summary.n_errors == 0
    assert summary.uncensored_fraction == 1.0
    assert summary.lifetime_decreasing
    assert 0.8 <= summary.median_ratio <= 1.25
    for r in records:
        assert r.gap_measured == pytest.approx(r.gap_predicted, rel=0.1)


def test_small_anisotropic_ensemble():
    rows, summary = anisotropic_ensemble(coupled_irrep_rnn(), 0.02, seeds=range(4))
    assert summary["n_rows"] == 4 and summary["n_errors"] == 0
    assert all(set(r.csv_row()) == set(EnsembleRow.COLUMNS) for r in rows)
    assert all(r.equivariance_error > 0 for r in rows)
