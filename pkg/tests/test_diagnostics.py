import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sympro.diagnostics import (
    DiagnosticsSettings,
    equivariance_error,
    flow_zero_diagnostic,
    full_report,
    neutral_alignment,
    sample_states,
    step_equivariance_error,
    tangent_covariance_angle,
)
from sympro.errors import DegenerateTangent, EmptyNeutralSubspace
from sympro.groups import action_matrix, trivial_rep
from sympro.lyapunov import benettin_spectrum
from sympro.numerics import principal_angles
from sympro.systems import (
    BreakingConfig,
    SystemSpec,
    apply_breaking,
    collapse_system,
    contraction,
    coupled_irrep_rnn,
    find_orbit_point,
    relative_equilibrium,
    s1_radial,
    sphere_system,
    torus_system,
)

QUICK = DiagnosticsSettings(T=60.0, tangent_T=30.0, n_samples=50)


def test_sample_states_radii():
    X = sample_states(4, 500, np.random.default_rng(0))
    r = np.linalg.norm(X, axis=1)
    assert X.shape == (500, 4)
    assert r.min() >= 0.5 and r.max() <= 1.5


def test_equivariance_examples():
    assert equivariance_error(s1_radial(), 200, seed=0) <= 1e-13
    cb = apply_breaking(coupled_irrep_rnn(), BreakingConfig("phase_pinning", 0.01))
    assert 1e-3 <= equivariance_error(cb, 200, seed=0) <= 1e-1
    odd = SystemSpec("odd", 2, lambda x, u: np.array([x[1] ** 3, 1.0]), lambda x, u: np.zeros((2, 2)),
                     trivial_rep(2), "fixed_point_orbit")
    assert equivariance_error(odd, 50, seed=0) == 0.0


def test_equivariance_is_seeded():
    s = apply_breaking(s1_radial(), BreakingConfig("unit_axis", 0.05))
    assert equivariance_error(s, 30, seed=3) == equivariance_error(s, 30, seed=3)
    with pytest.raises(ValueError):
        equivariance_error(s, 0)


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(["phase_pinning", "weak_axis", "unit_axis", "rotated_strong"]),
       st.floats(2e-3, 0.2), st.floats(0.0, 360.0), st.sampled_from([1, 2, 3]))
def test_breaking_error_scales_with_epsilon(family, eps, rotation, k):
    for base in (s1_radial(), coupled_irrep_rnn()):
        sb = apply_breaking(base, BreakingConfig(family, eps, k, rotation))
        assert equivariance_error(sb, 200, seed=1) >= eps / 10


def test_step_equivariance_operators():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 4))

    def step(x):
        return np.tanh(x)

    perm = np.eye(4)[[1, 2, 3, 0]]
    assert step_equivariance_error(step, [perm, lambda x: np.roll(x, 2)], X) == 0.0
    assert step_equivariance_error(lambda x: x + np.arange(4.0), [perm], X) > 0.1


def test_covariance_angle_examples():
    s = s1_radial()
    assert tangent_covariance_angle(s, find_orbit_point(s), 100.0) <= 1e-4
    t = torus_system(2)
    assert tangent_covariance_angle(t, find_orbit_point(t), 100.0) <= 1e-4
    sb = apply_breaking(s, BreakingConfig("phase_pinning", 0.1))
    a = tangent_covariance_angle(sb, np.array([0.0, 1.0]), 100.0)
    assert 0.0 <= a <= 90.0
    with pytest.raises(DegenerateTangent):
        tangent_covariance_angle(s, np.zeros(2), 10.0)


def test_covariance_angle_off_orbit_state():
    # the identity holds along any trajectory, not only on the attractor
    s = sphere_system(4)
    assert tangent_covariance_angle(s, np.array([0.2, -0.1, 0.3, 0.05]), 30.0) <= 1e-6


def test_neutral_alignment_examples():
    s = s1_radial()
    rep = benettin_spectrum(s, find_orbit_point(s), T=200.0)
    (angle,) = neutral_alignment(s, rep)
    assert angle <= 0.1
    s3 = sphere_system(3)
    rep3 = benettin_spectrum(s3, find_orbit_point(s3), T=200.0)
    angles = neutral_alignment(s3, rep3)
    assert len(angles) == 2 and max(angles) <= 0.5


def test_neutral_alignment_against_transverse_direction():
    s = s1_radial()
    rep = benettin_spectrum(s, find_orbit_point(s), T=50.0)
    transverse = rep.frame[:, rep.exponents < -1.0]
    assert principal_angles(transverse, action_matrix(s.group, rep.x_final))[0] == pytest.approx(90.0, abs=1e-6)


def test_neutral_alignment_needs_neutral_block():
    s = contraction(2)
    rep = benettin_spectrum(s, np.array([0.5, 0.5]), T=10.0)
    with pytest.raises(EmptyNeutralSubspace):
        neutral_alignment(s, rep)


def test_alignment_improves_with_T():
    s = s1_radial()
    x = find_orbit_point(s)
    angles = [neutral_alignment(s, benettin_spectrum(s, x, T=T, seed=2))[0] for T in (50.0, 100.0, 200.0, 400.0)]
    floor = 1e-10  # roundoff level of the angle computation, in degrees
    for a, b in zip(angles, angles[1:]):
        assert b <= 1.2 * a + floor


def test_flow_zero_examples():
    s = s1_radial()
    fz = flow_zero_diagnostic(s, find_orbit_point(s))
    assert (fz.rank_EG, fz.rank_f_union_EG, fz.status) == (1, 1, "fixed_point")
    r = relative_equilibrium()
    fz = flow_zero_diagnostic(r, find_orbit_point(r))
    assert (fz.rank_EG, fz.rank_f_union_EG, fz.status) == (1, 1, "relative_equilibrium")
    assert fz.f_norm > 0.5 and fz.f_in_EG
    c = collapse_system()
    fz = flow_zero_diagnostic(c, np.array([1.0, 0.0, 0.2]))
    assert (fz.rank_EG, fz.rank_f_union_EG, fz.status) == (1, 2, "transverse")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_flow_zero_rank_increment(seed):
    rng = np.random.default_rng(seed)
    for s in (coupled_irrep_rnn(), sphere_system(4), torus_system(2)):
        fz = flow_zero_diagnostic(s, rng.uniform(-1.5, 1.5, s.dim))
        assert fz.rank_f_union_EG in (fz.rank_EG, fz.rank_EG + 1)


def test_full_report_torus():
    rep = full_report(torus_system(2), QUICK)
    assert rep.lyapunov.near_zero_count == 2
    assert max(rep.neutral_principal_angles_deg) <= 0.5
    assert rep.tangent_covariance_angle_deg <= 1e-4
    assert rep.flow_zero.status == "fixed_point"
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["system"] == "torus_2"
    metrics = {r["metric"] for r in rep.csv_rows()}
    assert {"equivariance_error", "near_zero_count", "rank_EG"} <= metrics


def test_full_report_coupled_pair():
    exact = full_report(coupled_irrep_rnn(), QUICK)
    assert exact.equivariance_error <= 1e-11
    assert exact.lyapunov.near_zero_count == 1
    assert exact.tangent_covariance_angle_deg <= 1e-4
    broken = full_report(apply_breaking(coupled_irrep_rnn(), BreakingConfig("phase_pinning", 0.01)), QUICK)
    assert 1e-3 <= broken.equivariance_error <= 1e-1


def test_full_report_collapse_records_notes():
    rep = full_report(collapse_system(), QUICK)
    assert rep.orbit.uniform_lower <= 1e-6
    # the attractor is the origin, a fixed point of the flow
    assert rep.flow_zero.status == "fixed_point"
    assert rep.notes
