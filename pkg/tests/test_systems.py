import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sympro.diagnostics import equivariance_error
from sympro.errors import ConfigError, NoCircleFactor, ParameterRejected
from sympro.groups import action_matrix
from sympro.lyapunov import propagate_tangent
from sympro.numerics import integrate_flow, jacobian_fd, numerical_rank, rk4_step
from sympro.systems import (
    BreakingConfig,
    apply_breaking,
    circulant_grid,
    collapse_system,
    controlled_path_integrator,
    coupled_irrep_rnn,
    exact_zoo,
    find_orbit_point,
    fourier_shift,
    relative_equilibrium,
    s1_radial,
    sphere_system,
    step_map,
    system_from_dict,
)

ZOO = exact_zoo()
ZOO_IDS = [s.name for s in ZOO]


def test_s1_field_values():
    s = s1_radial()
    np.testing.assert_array_equal(s.field([1.0, 0.0]), [0.0, 0.0])
    np.testing.assert_allclose(s.field([0.5, 0.0]), [0.375, 0.0])
    assert equivariance_error(s, 64, seed=1) <= 1e-13


def test_coupled_default_orbit_by_hand():
    # |z| = 1, w = z^2 / 2, h = 0.5 zeroes every component of the default field
    s = coupled_irrep_rnn()
    np.testing.assert_allclose(s.field([1.0, 0.0, 0.5, 0.0, 0.5]), 0.0, atol=1e-15)
    th = 0.7
    x = [math.cos(th), math.sin(th), 0.5 * math.cos(2 * th), 0.5 * math.sin(2 * th), 0.5]
    np.testing.assert_allclose(s.field(x), 0.0, atol=1e-14)


def test_coupled_examples():
    s = coupled_irrep_rnn()
    assert equivariance_error(s, 128, seed=2) <= 1e-13
    x = find_orbit_point(s)
    assert np.linalg.norm(s.field(x)) <= 1e-10
    assert numerical_rank(action_matrix(s.group, x)) == 1
    assert abs(np.hypot(x[0], x[1]) - 1.0) < 1e-8
    assert abs(x[4] - 0.5) < 1e-8


def test_coupled_rejects_collapsing_params():
    with pytest.raises(ParameterRejected):
        coupled_irrep_rnn({"a0": -5.0})
    with pytest.raises(ConfigError):
        coupled_irrep_rnn({"zz": 1.0})


def test_find_orbit_point_examples():
    x = find_orbit_point(s1_radial())
    assert abs(np.linalg.norm(x) - 1.0) <= 1e-10
    x = find_orbit_point(collapse_system())
    assert np.linalg.norm(x) <= 1e-9


def test_relative_equilibrium_flow_is_group_tangent():
    s = relative_equilibrium()
    x = find_orbit_point(s)
    f = s.field(x)
    assert np.linalg.norm(f) > 0.5
    A = action_matrix(s.group, x)
    assert numerical_rank(np.column_stack([f, A])) == numerical_rank(A) == 1


def test_path_integrator_phase_advance():
    s = controlled_path_integrator()
    omega, dt, n = 0.7, 0.05, 200
    x = np.array([1.0, 0.0])
    f = s.flow(omega)
    for _ in range(n):
        x = rk4_step(f, x, dt)
    err = math.remainder(math.atan2(x[1], x[0]) - omega * n * dt, 2 * math.pi)
    assert abs(err) <= 1e-6


def test_path_integrator_step_equivariance():
    s = controlled_path_integrator()
    rng = np.random.default_rng(0)
    for _ in range(20):
        u = rng.normal()
        step = step_map(s, 0.05, u)
        g = s.group.element([rng.uniform(-np.pi, np.pi)])
        x = rng.normal(size=2)
        assert np.linalg.norm(step(g @ x) - g @ step(x)) <= 1e-12


def test_grid_rolls_and_shift():
    s = circulant_grid(32)
    step = step_map(s, 0.1)
    x = np.random.default_rng(0).normal(size=32)
    for m in (1, 5, 31):
        assert np.abs(step(np.roll(x, m)) - np.roll(step(x), m)).max() <= 1e-12
    np.testing.assert_allclose(fourier_shift(x, 3), np.roll(x, 3), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_fourier_shift_composes_on_odd_grids(a, b, seed):
    x = np.random.default_rng(seed).normal(size=15)
    np.testing.assert_allclose(fourier_shift(fourier_shift(x, a), b), fourier_shift(x, a + b), atol=1e-10)


def test_breaking_zero_is_identity():
    rng = np.random.default_rng(4)
    for base in (s1_radial(), coupled_irrep_rnn()):
        sb = apply_breaking(base, BreakingConfig("phase_pinning", 0.0))
        for x in rng.normal(size=(100, base.dim)):
            assert np.array_equal(sb.field(x), base.field(x))
            assert np.array_equal(sb.jacobian(x), base.jacobian(x))


def test_breaking_needs_circle_factor():
    with pytest.raises(NoCircleFactor):
        apply_breaking(sphere_system(3), BreakingConfig("phase_pinning", 0.1))


def test_pinning_breaks_equivariance():
    sb = apply_breaking(s1_radial(), BreakingConfig("phase_pinning", 0.01))
    assert equivariance_error(sb, 200, seed=0) >= 1e-3
    cb = apply_breaking(coupled_irrep_rnn(), BreakingConfig("phase_pinning", 0.01))
    assert 1e-3 <= equivariance_error(cb, 200, seed=0) <= 1e-1


def test_breaking_config_validation():
    with pytest.raises(ConfigError):
        BreakingConfig("bogus", 0.1)
    with pytest.raises(ConfigError):
        BreakingConfig("phase_pinning", -0.1)
    with pytest.raises(ConfigError):
        BreakingConfig("phase_pinning", 0.1, pin_order=0)


@pytest.mark.parametrize("s", ZOO, ids=ZOO_IDS)
def test_sampled_equivariance(s):
    rng = np.random.default_rng(11)
    for _ in range(200):
        g = s.group.element(rng.uniform(-np.pi, np.pi, s.group.algebra_dim))
        x = rng.uniform(-1.5, 1.5, s.dim)
        fx = s.field(x)
        assert np.linalg.norm(s.field(g @ x) - g @ fx) <= 1e-11 * (1 + np.linalg.norm(fx))


@pytest.mark.parametrize("s", ZOO + [circulant_grid(8), collapse_system(),
                                     apply_breaking(coupled_irrep_rnn(), BreakingConfig("rotated_strong", 0.1, 2))],
                         ids=ZOO_IDS + ["grid", "collapse", "broken"])
def test_jacobian_matches_fd(s):
    rng = np.random.default_rng(5)
    for x in rng.uniform(-1.5, 1.5, (20, s.dim)):
        J = s.jacobian(x)
        assert np.abs(J - jacobian_fd(s.flow(), x)).max() <= 1e-6 * max(1.0, np.abs(J).max())


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(range(len(ZOO))), st.integers(0, 2 ** 31), st.floats(0.5, 10.0))
def test_flow_commutes_with_group(i, seed, t):
    s = ZOO[i]
    rng = np.random.default_rng(seed)
    g = s.group.element(rng.uniform(-np.pi, np.pi, s.group.algebra_dim))
    x = rng.uniform(-1.0, 1.0, s.dim)
    a = integrate_flow(s.flow(), g @ x, t, 0.01).final
    b = g @ integrate_flow(s.flow(), x, t, 0.01).final
    assert np.linalg.norm(a - b) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.sampled_from(range(len(ZOO))), st.integers(0, 2 ** 31), st.floats(1.0, 50.0))
def test_tangent_identity(i, seed, T):
    # D phi_T(x) xi_M(x) = xi_M(phi_T(x)) along any trajectory
    s = ZOO[i]
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, s.dim)
    xi = rng.normal(size=s.group.algebra_dim)
    G = s.group.algebra_element(xi)
    v0 = G @ x
    xT, vT = propagate_tangent(s, x, v0, T, 0.01)
    assert np.linalg.norm(vT - G @ xT) <= 1e-7 * max(np.linalg.norm(v0), 1e-12)


def test_system_dict_round_trip():
    for s in ZOO + [collapse_system(), circulant_grid(16)]:
        t = system_from_dict(s.to_dict())
        assert t.name == s.name
        x = np.linspace(-1, 1, s.dim)
        np.testing.assert_array_equal(t.field(x), s.field(x))
    with pytest.raises(ConfigError, match="bogus"):
        system_from_dict({"system": "torus", "q": 2, "bogus": 1})
    with pytest.raises(ConfigError):
        system_from_dict({"system": "nope"})
