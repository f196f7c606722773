"""Verification battery: equivariance error, tangent covariance, neutral
alignment and the flow-zero rank classification."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateTangent, EmptyNeutralSubspace, SymproError
from .groups import OrbitDiagnostics, action_matrix, orbit_diagnostics
from .lyapunov import LyapunovReport, benettin_spectrum, propagate_tangent
from .numerics import (
    RANK_TOL,
    derive_seed,
    integrate_flow,
    numerical_rank,
    orthonormal_basis,
    principal_angles,
)
from .systems import SystemSpec, find_orbit_point

SAMPLE_RADIUS = (0.5, 1.5)
N_SAMPLES = 200
FLOW_ZERO_TOL = 1e-8


def sample_states(dim: int, n: int, rng: np.random.Generator, radius=SAMPLE_RADIUS) -> np.ndarray:
    """Uniform random directions scaled to radii uniform in ``radius``."""
    X = rng.standard_normal((n, dim))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    return X * rng.uniform(radius[0], radius[1], size=(n, 1))


def equivariance_error(s: SystemSpec, n_samples: int = N_SAMPLES, seed: int = 0,
                       radius=SAMPLE_RADIUS, u: float = 0.0) -> float:
    """max |f(g x) - g f(x)| / (1 + |f(x)|) over seeded random (x, g).

    Group elements are exp of algebra elements with coefficients uniform
    in [-pi, pi]; the action is linear so D(g)_x = g.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    X = sample_states(s.dim, n_samples, rng, radius)
    Xi = rng.uniform(-np.pi, np.pi, size=(n_samples, s.group.algebra_dim))
    worst = 0.0
    for x, xi in zip(X, Xi):
        g = s.group.element(xi)
        fx = s.field(x, u)
        err = np.linalg.norm(s.field(g @ x, u) - g @ fx) / (1.0 + np.linalg.norm(fx))
        worst = max(worst, float(err))
    return worst


def step_equivariance_error(step, operators, states) -> float:
    """Discrete analogue: max |Step(g x) - g Step(x)| / (1 + |Step(x)|).

    ``operators`` are square matrices or callables x -> g x.
    """
    ops = [(lambda x, M=np.asarray(op): M @ x) if not callable(op) else op for op in operators]
    worst = 0.0
    for x in np.atleast_2d(states):
        sx = step(x)
        scale = 1.0 + np.linalg.norm(sx)
        for g in ops:
            worst = max(worst, float(np.linalg.norm(step(g(x)) - g(sx)) / scale))
    return worst


def tangent_covariance_angle(s: SystemSpec, x0, T: float = 100.0, dt: float = 1e-2,
                             rank_tol: float = RANK_TOL, propagated=None) -> float:
    """Largest principal angle (degrees) between the propagated group tangents
    D phi_T(x0) E^G_x0 and the group tangent space at phi_T(x0).

    ``propagated`` may supply (x_T, V_T) from an earlier run of the same
    propagation, e.g. a checkpoint of propagate_group_tangents.
    """
    A0 = action_matrix(s.group, x0)
    if np.linalg.norm(A0) <= 1e-12:
        raise DegenerateTangent(f"{s.name}: group orbit is degenerate at x0")
    xT, VT = propagate_tangent(s, x0, A0, T, dt) if propagated is None else propagated
    P = orthonormal_basis(VT, rank_tol)
    E = orthonormal_basis(action_matrix(s.group, xT), rank_tol)
    if E.shape[1] == 0:
        raise DegenerateTangent(f"{s.name}: group orbit is degenerate at phi_T(x0)")
    return float(principal_angles(P, E).max())


def neutral_alignment(s: SystemSpec, report: LyapunovReport, x_final=None,
                      rank_tol: float = RANK_TOL) -> list[float]:
    """Principal angles (degrees) between the near-zero QR frame columns and E^G."""
    if report.near_zero_count < 1:
        raise EmptyNeutralSubspace(f"{s.name}: no exponent within {report.tolerance:g} of zero")
    x = report.x_final if x_final is None else x_final
    E = orthonormal_basis(action_matrix(s.group, x), rank_tol)
    if E.shape[1] == 0:
        raise DegenerateTangent(f"{s.name}: group orbit is degenerate at the final state")
    return [float(a) for a in principal_angles(report.neutral_frame, E)]


@dataclass(frozen=True)
class FlowZero:
    rank_EG: int
    rank_f_union_EG: int
    f_norm: float
    status: str  # fixed_point | relative_equilibrium | transverse

    @property
    def f_in_EG(self) -> bool:
        return self.rank_f_union_EG == self.rank_EG

    def to_dict(self) -> dict:
        return {**asdict(self), "f_in_EG": self.f_in_EG}


def flow_zero_diagnostic(s: SystemSpec, x, rank_tol: float = RANK_TOL,
                         flow_tol: float = FLOW_ZERO_TOL) -> FlowZero:
    """Compare rank E^G_x with rank [f(x) | E^G_x].

    Equal ranks with |f| > flow_tol mean the flow itself is a group tangent
    (relative equilibrium); |f| <= flow_tol is reported as a fixed point.
    """
    A = action_matrix(s.group, x)
    f = s.field(x)
    fn = float(np.linalg.norm(f))
    r0 = numerical_rank(A, rank_tol)
    r1 = numerical_rank(np.column_stack([f, A]), rank_tol)
    if fn <= flow_tol:
        status = "fixed_point"
    elif r1 == r0:
        status = "relative_equilibrium"
    else:
        status = "transverse"
    return FlowZero(r0, r1, fn, status)


@dataclass(frozen=True)
class DiagnosticsSettings:
    T: float = 200.0
    dt: float = 1e-2
    renorm_every: int = 10
    tol: float = 1e-4
    tangent_T: float = 100.0
    orbit_T: float = 20.0
    n_samples: int = N_SAMPLES
    rank_tol: float = RANK_TOL
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DiagnosticsReport:
    system: str
    equivariance_error: float
    tangent_covariance_angle_deg: float | None
    neutral_principal_angles_deg: list
    flow_zero: FlowZero
    orbit: OrbitDiagnostics
    lyapunov: LyapunovReport | None
    settings: dict
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "equivariance_error": self.equivariance_error,
            "tangent_covariance_angle_deg": self.tangent_covariance_angle_deg,
            "neutral_principal_angles_deg": list(self.neutral_principal_angles_deg),
            "flow_zero": self.flow_zero.to_dict(),
            "orbit": self.orbit.to_dict(),
            "lyapunov": self.lyapunov.to_dict() if self.lyapunov is not None else None,
            "settings": dict(self.settings),
            "notes": list(self.notes),
        }

    def csv_rows(self) -> list[dict]:
        rows = [("equivariance_error", self.equivariance_error),
                ("tangent_covariance_angle_deg", self.tangent_covariance_angle_deg),
                ("max_neutral_angle_deg", max(self.neutral_principal_angles_deg, default=None)),
                ("rank_EG", self.flow_zero.rank_EG),
                ("rank_f_union_EG", self.flow_zero.rank_f_union_EG),
                ("orbit_rank", self.orbit.orbit_rank),
                ("uniform_lower", self.orbit.uniform_lower)]
        if self.lyapunov is not None:
            rows.append(("near_zero_count", self.lyapunov.near_zero_count))
        return [{"system": self.system, "metric": k, "value": v} for k, v in rows]


def full_report(s: SystemSpec, settings: DiagnosticsSettings | None = None) -> DiagnosticsReport:
    """Burn-in, spectrum and every diagnostic for one autonomous system.

    Diagnostics whose preconditions fail on this system (degenerate orbit,
    empty neutral block) are recorded in ``notes`` instead of raising.
    """
    st = settings or DiagnosticsSettings()
    seed = derive_seed(st.seed, s.name)
    notes = []
    try:
        eq = equivariance_error(s, st.n_samples, seed)
        x0 = np.array(s.seed_state, dtype=float)
        traj = integrate_flow(s.flow(), x0, st.orbit_T, st.dt)
        orbit = orbit_diagnostics(s.group, traj, st.rank_tol)
        x = find_orbit_point(s)
    except SymproError as exc:
        raise type(exc)(f"{s.name}: {exc}") from exc
    rep = benettin_spectrum(s, x, T=st.T, dt=st.dt, renorm_every=st.renorm_every, tol=st.tol, seed=seed)
    try:
        angles = neutral_alignment(s, rep, rank_tol=st.rank_tol)
    except (EmptyNeutralSubspace, DegenerateTangent) as exc:
        angles = []
        notes.append(f"neutral_alignment: {exc}")
    try:
        cov = tangent_covariance_angle(s, x, st.tangent_T, st.dt, st.rank_tol)
    except DegenerateTangent as exc:
        cov = None
        notes.append(f"tangent_covariance_angle: {exc}")
    fz = flow_zero_diagnostic(s, x, st.rank_tol)
    if fz.rank_EG == 0:
        # the settled point has a degenerate orbit; classify at the seed state instead
        fz = flow_zero_diagnostic(s, x0, st.rank_tol)
        notes.append("flow_zero evaluated at the seed state (orbit degenerate at the settled point)")
    return DiagnosticsReport(s.name, eq, cov, angles, fz, orbit, rep, st.to_dict(), notes)
