"""Model zoo: equivariant vector fields, controls, and breaking perturbations.

Every system carries an analytic Jacobian. Fields take ``(x, u)`` where
``u`` is a scalar input; autonomous systems ignore it.

Radial normal forms ``x (1 - |x|^2)`` are used for the S^1, T^q, SO(n) and
U(m) families because their transverse exponent on the unit orbit is
exactly -2, which makes spectral margins known in advance.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NoCircleFactor, NoConvergence, ParameterRejected
from .groups import (
    GroupSpec,
    _block_diag,
    action_matrix,
    circle_rep,
    so_n_rep,
    torus_rep,
    trivial_rep,
    u_m_rep,
    product_rep,
)
from .numerics import J2, rk4_step

KINDS = ("fixed_point_orbit", "relative_equilibrium", "collapse", "input_driven", "discrete_map")
FAMILIES = ("weak_axis", "unit_axis", "rotated_strong", "random_anisotropic", "phase_pinning")

# preset -> (amplitude multiplier on epsilon, base pin rotation in degrees)
PINNING_PRESETS = {
    "phase_pinning": (1.0, 0.0),
    "weak_axis": (0.25, 0.0),
    "unit_axis": (1.0, 90.0),
    "rotated_strong": (2.0, 45.0),
}

COUPLED_DEFAULTS = {
    "a0": 0.4, "a1": -1.0, "a2": 0.0, "a3": 0.2, "a4": 1.0,
    "b0": -0.75, "b1": 0.0, "b2": -1.0, "b3": 0.0, "b4": 0.5,
    "c0": 0.025, "c1": 0.5, "c2": 0.0, "c3": -1.0, "c4": 0.2,
}
COUPLED_SEED = (0.5, 0.2, 0.1, 0.3, 0.0)


@dataclass(frozen=True)
class BreakingConfig:
    family: str = "phase_pinning"
    epsilon: float = 0.0
    pin_order: int = 1
    rotation: float = 0.0  # degrees
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown breaking family {self.family!r}; expected one of {FAMILIES}")
        if not self.epsilon >= 0:
            raise ConfigError("breaking epsilon must be >= 0")
        if int(self.pin_order) < 1:
            raise ConfigError("pin_order must be >= 1")

    @property
    def amplitude(self) -> float:
        if self.family == "random_anisotropic":
            return self.epsilon
        return self.epsilon * PINNING_PRESETS[self.family][0]

    @property
    def pin_angle(self) -> float:
        """Stable pinned phase of the pinning template, in radians."""
        base = 0.0 if self.family == "random_anisotropic" else PINNING_PRESETS[self.family][1]
        return math.radians(base + self.rotation)

    def anisotropy(self) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        M = rng.standard_normal((2, 2))
        return 0.5 * (M + M.T)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class SystemSpec:
    name: str
    dim: int
    rhs: Callable
    jac: Callable
    group: GroupSpec
    kind: str
    breaking: BreakingConfig | None = None
    params: dict = field(default_factory=dict, compare=False)
    pin: tuple | None = None  # (offset of the realified z block, index of its circle generator)
    seed_state: tuple | None = None
    unbroken: "SystemSpec | None" = field(default=None, compare=False, repr=False)

    def field(self, x, u: float = 0.0) -> np.ndarray:
        return self.rhs(np.asarray(x, dtype=float), u)

    def jacobian(self, x, u: float = 0.0) -> np.ndarray:
        return self.jac(np.asarray(x, dtype=float), u)

    def flow(self, u: float = 0.0):
        rhs = self.rhs
        return lambda x: rhs(x, u)

    @property
    def autonomous(self) -> bool:
        return self.kind != "input_driven"

    @property
    def exact(self) -> bool:
        return self.breaking is None or self.breaking.epsilon == 0.0

    def to_dict(self) -> dict:
        out = {"system": self.params.get("system", self.name)}
        out.update({k: v for k, v in self.params.items() if k != "system"})
        if self.breaking is not None:
            out["breaking"] = self.breaking.to_dict()
        return out


# -- radial normal forms ---------------------------------------------------

def _radial_rhs(x, u):
    return x * (1.0 - x @ x)


def _radial_jac(x, u):
    J = -2.0 * (x[:, None] * x)
    J.flat[:: x.size + 1] += 1.0 - x @ x
    return J


def _unit_seed(d: int) -> tuple:
    v = np.array([0.6 / (k + 1) for k in range(d)]) + 0.05
    return tuple(0.3 * v / np.linalg.norm(v))


def s1_radial() -> SystemSpec:
    return SystemSpec("s1_radial", 2, _radial_rhs, _radial_jac, circle_rep((1,), 0),
                      "fixed_point_orbit", params={"system": "s1_radial"}, pin=(0, 0),
                      seed_state=(0.3, 0.1))


def sphere_system(n: int) -> SystemSpec:
    """x' = x (1 - |x|^2) on R^n with SO(n) acting; attracting unit sphere."""
    if n < 2:
        raise ValueError("n must be >= 2")
    pin = (0, 0) if n == 2 else None
    seed = (0.3, 0.1) if n == 2 else _unit_seed(n)
    return SystemSpec(f"sphere_{n}", n, _radial_rhs, _radial_jac, so_n_rep(n), "fixed_point_orbit",
                      params={"system": "sphere", "n": n}, pin=pin, seed_state=seed)


def complex_sphere_system(m: int) -> SystemSpec:
    if m < 1:
        raise ValueError("m must be >= 1")
    pin = (0, 0) if m == 1 else None
    seed = (0.3, 0.1) if m == 1 else _unit_seed(2 * m)
    return SystemSpec(f"complex_sphere_{m}", 2 * m, _radial_rhs, _radial_jac, u_m_rep(m),
                      "fixed_point_orbit", params={"system": "complex_sphere", "m": m}, pin=pin,
                      seed_state=seed)


def torus_system(q: int) -> SystemSpec:
    """q uncoupled radial factors; the attractor is the torus of unit circles."""
    if q < 1:
        raise ValueError("q must be >= 1")

    def rhs(x, u):
        X = x.reshape(q, 2)
        return (X * (1.0 - np.einsum("ij,ij->i", X, X))[:, None]).ravel()

    # flat positions of the 2x2 diagonal blocks in the 2q x 2q Jacobian
    base = 2 * np.arange(q)
    rows = (base[:, None, None] + np.arange(2)[None, :, None]).repeat(2, axis=2).ravel()
    cols = (base[:, None, None] + np.arange(2)[None, None, :]).repeat(2, axis=1).ravel()
    flat = rows * (2 * q) + cols
    eye2 = np.eye(2)

    def jac(x, u):
        X = x.reshape(q, 2)
        r = 1.0 - np.einsum("ij,ij->i", X, X)
        out = np.zeros(4 * q * q)
        out[flat] = (r[:, None, None] * eye2 - 2.0 * X[:, :, None] * X[:, None, :]).ravel()
        return out.reshape(2 * q, 2 * q)

    seed = tuple(np.tile([0.3, 0.1], q) * np.repeat(1.0 + 0.2 * np.arange(q), 2))
    return SystemSpec(f"torus_{q}", 2 * q, rhs, jac, torus_rep(q), "fixed_point_orbit",
                      params={"system": "torus", "q": q}, pin=(0, 0), seed_state=seed)


def relative_equilibrium(omega: float = 1.0) -> SystemSpec:
    """z' = (i omega + 1 - |z|^2) z: the unit circle is traversed at speed omega."""
    def rhs(x, u):
        return (1.0 - x @ x) * x + omega * (J2 @ x)

    def jac(x, u):
        return (1.0 - x @ x) * np.eye(2) - 2.0 * (x[:, None] * x) + omega * J2

    return SystemSpec("relative_equilibrium", 2, rhs, jac, circle_rep((1,), 0), "relative_equilibrium",
                      params={"system": "relative_equilibrium", "omega": omega}, pin=(0, 0),
                      seed_state=(0.3, 0.1))


def collapse_system() -> SystemSpec:
    """z' = -z, y' = -y + |z|^2. The S^1 orbit shrinks onto the fixed origin."""
    def rhs(x, u):
        return np.array([-x[0], -x[1], -x[2] + x[0] * x[0] + x[1] * x[1]])

    def jac(x, u):
        return np.array([[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [2.0 * x[0], 2.0 * x[1], -1.0]])

    return SystemSpec("collapse", 3, rhs, jac, circle_rep((1,), 1), "collapse",
                      params={"system": "collapse"}, pin=None, seed_state=(1.0, 0.0, 0.2))


def contraction(d: int = 1) -> SystemSpec:
    """y' = -y with the trivial group."""
    def rhs(x, u):
        return -x

    def jac(x, u):
        return -np.eye(x.size)

    return SystemSpec(f"contraction_{d}", d, rhs, jac, trivial_rep(d), "fixed_point_orbit",
                      params={"system": "contraction", "dim": d}, seed_state=tuple([0.5] * d))


def product_system(a: SystemSpec, b: SystemSpec) -> SystemSpec:
    if not (a.autonomous and b.autonomous):
        raise ValueError("product_system needs autonomous factors")
    da = a.dim

    def rhs(x, u):
        return np.concatenate([a.rhs(x[:da], u), b.rhs(x[da:], u)])

    def jac(x, u):
        return _block_diag(a.jac(x[:da], u), b.jac(x[da:], u))

    if a.pin is not None:
        pin = a.pin
    elif b.pin is not None:
        pin = (b.pin[0] + da, b.pin[1] + a.group.algebra_dim)
    else:
        pin = None
    kinds = {a.kind, b.kind}
    kind = "relative_equilibrium" if "relative_equilibrium" in kinds else (
        "collapse" if "collapse" in kinds else "fixed_point_orbit")
    seed = tuple(a.seed_state or (0.3,) * da) + tuple(b.seed_state or (0.3,) * b.dim)
    return SystemSpec(f"{a.name}x{b.name}", da + b.dim, rhs, jac, product_rep(a.group, b.group), kind,
                      params={"system": "product", "factors": [a.to_dict(), b.to_dict()]}, pin=pin,
                      seed_state=seed)


# -- coupled charge-1 / charge-2 / invariant branch ---------------------------

def _wirtinger_block(A: complex, B: complex) -> np.ndarray:
    # real 2x2 derivative of F with dF = A dz + B dzbar
    return np.array([[(A + B).real, -(A - B).imag], [(A + B).imag, (A - B).real]])


def coupled_irrep_rnn(params: dict | None = None, validate: bool | None = None) -> SystemSpec:
    """RNN-style branch on (z, w, h) in R^5, equivariant under (e^{it} z, e^{2it} w, h).

        z' = (a0 + a1 I1 + a2 I2 + a3 h) z + a4 conj(z) w
        w' = (b0 + b1 I1 + b2 I2 + b3 h) w + b4 z^2
        h' = c0 + c1 I1 + c2 I2 + c3 h - c4 h^3,     I1 = |z|^2, I2 = |w|^2

    The defaults place an attracting circle of fixed points at |z| = 1,
    |w| = 0.5, h = 0.5 with w = z^2 / 2 (transverse eigenvalues between
    -2.86 and -0.57). Non-default coefficients are checked by a burn-in
    search and rejected when no orbit with nonzero z and w is found.
    """
    P = dict(COUPLED_DEFAULTS)
    if params:
        unknown = set(params) - set(P)
        if unknown:
            raise ConfigError(f"unknown coupled_irrep parameters: {sorted(unknown)}")
        P.update({k: float(v) for k, v in params.items()})
    a0, a1, a2, a3, a4 = (P[f"a{i}"] for i in range(5))
    b0, b1, b2, b3, b4 = (P[f"b{i}"] for i in range(5))
    c0, c1, c2, c3, c4 = (P[f"c{i}"] for i in range(5))

    def rhs(x, u):
        z = complex(x[0], x[1])
        w = complex(x[2], x[3])
        h = x[4]
        I1 = x[0] * x[0] + x[1] * x[1]
        I2 = x[2] * x[2] + x[3] * x[3]
        dz = (a0 + a1 * I1 + a2 * I2 + a3 * h) * z + a4 * z.conjugate() * w
        dw = (b0 + b1 * I1 + b2 * I2 + b3 * h) * w + b4 * z * z
        dh = c0 + c1 * I1 + c2 * I2 + c3 * h - c4 * h ** 3
        return np.array([dz.real, dz.imag, dw.real, dw.imag, dh])

    def jac(x, u):
        z = complex(x[0], x[1])
        w = complex(x[2], x[3])
        h = x[4]
        I1 = x[0] * x[0] + x[1] * x[1]
        I2 = x[2] * x[2] + x[3] * x[3]
        alpha = a0 + a1 * I1 + a2 * I2 + a3 * h
        beta = b0 + b1 * I1 + b2 * I2 + b3 * h
        out = np.zeros((5, 5))
        out[0:2, 0:2] = _wirtinger_block(alpha + a1 * I1, a1 * z * z + a4 * w)
        out[0:2, 2:4] = _wirtinger_block(a2 * w.conjugate() * z + a4 * z.conjugate(), a2 * w * z)
        out[0:2, 4] = (a3 * z.real, a3 * z.imag)
        out[2:4, 0:2] = _wirtinger_block(b1 * z.conjugate() * w + 2.0 * b4 * z, b1 * z * w)
        out[2:4, 2:4] = _wirtinger_block(beta + b2 * I2, b2 * w * w)
        out[2:4, 4] = (b3 * w.real, b3 * w.imag)
        out[4, 0:2] = (2.0 * c1 * x[0], 2.0 * c1 * x[1])
        out[4, 2:4] = (2.0 * c2 * x[2], 2.0 * c2 * x[3])
        out[4, 4] = c3 - 3.0 * c4 * h * h
        return out

    stored = {k: v for k, v in P.items() if v != COUPLED_DEFAULTS[k]}
    spec = SystemSpec("coupled_irrep", 5, rhs, jac, circle_rep((1, 2), 1), "fixed_point_orbit",
                      params={"system": "coupled_irrep", **({"params": stored} if stored else {})},
                      pin=(0, 0), seed_state=COUPLED_SEED)
    if validate is None:
        validate = bool(stored)
    if validate:
        try:
            x = find_orbit_point(spec)
        except NoConvergence as exc:
            raise ParameterRejected(f"no attracting fixed-point orbit: {exc}") from None
        if math.hypot(x[0], x[1]) < 1e-3 or math.hypot(x[2], x[3]) < 1e-3:
            raise ParameterRejected("orbit search settled where z or w vanishes")
    return spec


# -- input-driven and discrete-symmetry systems -------------------------------

def controlled_path_integrator(exact: bool = True, cfg: BreakingConfig | None = None) -> SystemSpec:
    """z' = (1 - |z|^2) z + u J z: the phase integrates the input u exactly."""
    def rhs(x, u):
        return (1.0 - x @ x) * x + u * (J2 @ x)

    def jac(x, u):
        return (1.0 - x @ x) * np.eye(2) - 2.0 * (x[:, None] * x) + u * J2

    spec = SystemSpec("path_integrator", 2, rhs, jac, circle_rep((1,), 0), "input_driven",
                      params={"system": "path_integrator"}, pin=(0, 0), seed_state=(1.0, 0.0))
    if exact:
        return spec
    return apply_breaking(spec, cfg or BreakingConfig("phase_pinning", 0.05))


GRID_KERNEL = {"excitation": 6.0, "inhibition": 1.0, "width": 0.5, "dt": 0.1}


def fourier_shift(x, s: float) -> np.ndarray:
    """Band-limited shift of a periodic grid signal by ``s`` bins.

    Integer ``s`` reproduces ``np.roll(x, s)``; on even grids the Nyquist
    mode is scaled by cos(pi s), the real part of its shift phase.
    """
    x = np.asarray(x, dtype=float)
    N = x.size
    X = np.fft.rfft(x)
    k = np.arange(X.size)
    phase = np.exp(-2j * np.pi * k * s / N)
    if N % 2 == 0:
        phase[-1] = math.cos(math.pi * s)
    return np.fft.irfft(X * phase, n=N)


def _shift_generator(N: int) -> np.ndarray:
    # d/ds fourier_shift(., s) at s = 0 (Nyquist mode has zero derivative)
    k = np.arange(N // 2 + 1)
    mult = -2j * np.pi * k / N
    if N % 2 == 0:
        mult[-1] = 0.0
    return np.column_stack([np.fft.irfft(np.fft.rfft(e) * mult, n=N) for e in np.eye(N)])


def circulant_weights(N: int) -> np.ndarray:
    """Local excitation, broad inhibition: w(d) = (2pi/N)(A exp((cos d - 1)/s^2) - B)."""
    theta = 2.0 * np.pi * np.arange(N) / N
    d = theta[:, None] - theta[None, :]
    A, B, s = GRID_KERNEL["excitation"], GRID_KERNEL["inhibition"], GRID_KERNEL["width"]
    return (2.0 * np.pi / N) * (A * np.exp((np.cos(d) - 1.0) / s ** 2) - B)


def circulant_grid(N: int) -> SystemSpec:
    """Ring network x' = -x + W tanh(x) with circulant W.

    Exactly equivariant under integer rolls only; the single generator is
    the band-limited shift generator, under which the field is *not*
    equivariant.
    """
    if N < 4:
        raise ValueError("N must be >= 4")
    W = circulant_weights(N)
    W.setflags(write=False)

    def rhs(x, u):
        return -x + W @ np.tanh(x)

    def jac(x, u):
        return -np.eye(N) + W * (1.0 - np.tanh(x) ** 2)[None, :]

    group = GroupSpec("grid_shift", (_shift_generator(N),), 1, {"grid": N})
    theta = 2.0 * np.pi * np.arange(N) / N
    seed = tuple(np.exp((np.cos(theta) - 1.0) / 0.25))
    return SystemSpec(f"circulant_grid_{N}", N, rhs, jac, group, "discrete_map",
                      params={"system": "circulant_grid", "N": N}, seed_state=seed)


def step_map(s: SystemSpec, dt: float, u: float = 0.0):
    """One RK4 step of ``s`` at fixed input as a map x -> x_next."""
    f = s.flow(u)
    return lambda x: rk4_step(f, np.asarray(x, dtype=float), dt)


# -- symmetry breaking ---------------------------------------------------------

def breaking_term(s: SystemSpec, cfg: BreakingConfig):
    """Additive perturbation p(x) and its Jacobian on the pinned z block."""
    if s.pin is None:
        raise NoCircleFactor(f"system {s.name!r} has no S^1 factor to pin")
    o = s.pin[0]
    d = s.dim
    A = cfg.amplitude
    if cfg.family == "random_anisotropic":
        S = A * cfg.anisotropy()
        P = np.zeros((d, d))
        P[o:o + 2, o:o + 2] = S

        def p(x):
            return P @ x

        def dp(x):
            return P
        return p, dp

    k = int(cfg.pin_order)
    c = A * complex(math.cos(k * cfg.pin_angle), math.sin(k * cfg.pin_angle))

    def p(x):
        out = np.zeros(d)
        val = c * complex(x[o], -x[o + 1]) ** (k - 1) if k > 1 else c
        out[o], out[o + 1] = val.real, val.imag
        return out

    def dp(x):
        out = np.zeros((d, d))
        if k > 1:
            B = c * (k - 1) * complex(x[o], -x[o + 1]) ** (k - 2)
            out[o:o + 2, o:o + 2] = _wirtinger_block(0.0, B)
        return out
    return p, dp


def apply_breaking(s: SystemSpec, cfg: BreakingConfig) -> SystemSpec:
    """Add an explicit symmetry-breaking term to the z equation of ``s``.

    Pinning families add ``eps * e^{ik phi} conj(z)^(k-1)`` (a constant
    vector at angle phi when k = 1), which pins the phase at phi modulo
    2 pi / k. ``random_anisotropic`` adds ``eps * S z`` with S a seeded
    random symmetric 2x2 matrix. With epsilon = 0 the original field
    functions are returned untouched.
    """
    base = s.unbroken if s.unbroken is not None else s
    if cfg.epsilon == 0.0:
        if base.pin is None:
            raise NoCircleFactor(f"system {base.name!r} has no S^1 factor to pin")
        return dataclasses.replace(base, breaking=cfg, unbroken=base)
    p, dp = breaking_term(base, cfg)
    f0, j0 = base.rhs, base.jac

    def rhs(x, u):
        return f0(x, u) + p(x)

    def jac(x, u):
        return j0(x, u) + dp(x)

    return dataclasses.replace(base, name=f"{base.name}+{cfg.family}", rhs=rhs, jac=jac,
                               breaking=cfg, unbroken=base)


# -- orbit location ------------------------------------------------------------

def off_orbit_residual(s: SystemSpec, x) -> float:
    """Norm of the part of f(x) not tangent to the group orbit through x."""
    f = s.field(x)
    if s.kind != "relative_equilibrium":
        return float(np.linalg.norm(f))
    A = action_matrix(s.group, x)
    if not np.any(A):
        return float(np.linalg.norm(f))
    coef = np.linalg.lstsq(A, f, rcond=None)[0]
    return float(np.linalg.norm(f - A @ coef))


def find_orbit_point(s: SystemSpec, seed_state=None, tol: float = 1e-10, T_max: float = 500.0,
                     dt: float | None = None) -> np.ndarray:
    """Integrate from a seed until the point has settled on an invariant orbit.

    Fixed-point orbits settle when |f(x)| <= tol; relative equilibria when
    the component of f off the group tangent is <= tol. The default step is
    0.02, or 0.005 for relative equilibria, whose discrete invariant circle
    sits O(dt^4) off the true one.

    Broken systems drift along the former orbit at a rate of order epsilon,
    so once the residual is small the burn-in is periodically short-cut by
    Newton polishing, accepted only at a linearly stable fixed point.
    """
    if not s.autonomous:
        raise ValueError("find_orbit_point needs an autonomous system")
    if dt is None:
        dt = 0.005 if s.kind == "relative_equilibrium" else 0.02
    x = np.array(seed_state if seed_state is not None else s.seed_state, dtype=float)
    f = s.flow()
    n = int(math.ceil(T_max / dt))
    polish = not s.exact and s.kind == "fixed_point_orbit"
    polish_every = max(1, int(round(10.0 / dt)))
    for i in range(n + 1):
        r = off_orbit_residual(s, x)
        if r <= tol:
            return x
        if polish and r < 1e-3 and i % polish_every == 0:
            y, ok = newton_fixed_point(s, x)
            if ok and np.max(np.linalg.eigvals(s.jacobian(y)).real) < 0.0:
                return y
        if i < n:
            x = rk4_step(f, x, dt, t=i * dt)
    raise NoConvergence(
        f"{s.name}: residual {off_orbit_residual(s, x):.3g} > {tol:g} after T = {T_max:g}")


def newton_fixed_point(s: SystemSpec, x, tol: float = 1e-13, max_iter: int = 50,
                       max_step: float = 0.2) -> tuple[np.ndarray, bool]:
    """Damped Newton iteration for f(x) = 0 (least-squares steps, so a
    singular Jacobian along a continuous orbit is tolerated)."""
    x = np.array(x, dtype=float)
    for _ in range(max_iter):
        fx = s.field(x)
        if np.linalg.norm(fx) <= tol:
            return x, True
        step = np.linalg.lstsq(s.jacobian(x), fx, rcond=None)[0]
        norm = np.linalg.norm(step)
        if norm > max_step:
            step *= max_step / norm
        x = x - step
    return x, bool(np.linalg.norm(s.field(x)) <= tol)


# -- config round trip -----------------------------------------------------------

def system_from_dict(spec: dict) -> SystemSpec:
    spec = dict(spec)
    name = spec.pop("system", None)
    breaking = spec.pop("breaking", None)

    def take(key, default=None, required=False):
        if key in spec:
            return spec.pop(key)
        if required:
            raise ConfigError(f"system {name!r} needs field {key!r}")
        return default

    if name == "s1_radial":
        s = s1_radial()
    elif name == "torus":
        s = torus_system(int(take("q", required=True)))
    elif name == "sphere":
        s = sphere_system(int(take("n", required=True)))
    elif name == "complex_sphere":
        s = complex_sphere_system(int(take("m", required=True)))
    elif name == "coupled_irrep":
        s = coupled_irrep_rnn(take("params"))
    elif name == "relative_equilibrium":
        s = relative_equilibrium(float(take("omega", 1.0)))
    elif name == "collapse":
        s = collapse_system()
    elif name == "contraction":
        s = contraction(int(take("dim", 1)))
    elif name == "product":
        factors = take("factors", required=True)
        if len(factors) != 2:
            raise ConfigError("product needs exactly two factors")
        s = product_system(system_from_dict(factors[0]), system_from_dict(factors[1]))
    elif name == "path_integrator":
        s = controlled_path_integrator()
    elif name == "circulant_grid":
        s = circulant_grid(int(take("N", required=True)))
    else:
        raise ConfigError(f"unknown system {name!r}")
    if spec:
        raise ConfigError(f"unknown fields for system {name!r}: {sorted(spec)}")
    if breaking is not None:
        if not isinstance(breaking, dict):
            raise ConfigError("breaking must be an object")
        unknown = set(breaking) - {f.name for f in dataclasses.fields(BreakingConfig)}
        if unknown:
            raise ConfigError(f"unknown breaking fields: {sorted(unknown)}")
        s = apply_breaking(s, BreakingConfig(**breaking))
    return s


def exact_zoo() -> list[SystemSpec]:
    """Every exactly equivariant autonomous family with a nondegenerate orbit."""
    zoo = [s1_radial()]
    zoo += [torus_system(q) for q in (1, 2, 3, 4)]
    zoo += [sphere_system(n) for n in (2, 3, 4, 5)]
    zoo += [complex_sphere_system(m) for m in (1, 2, 3)]
    zoo += [product_system(s1_radial(), sphere_system(3)), coupled_irrep_rnn(), relative_equilibrium()]
    return zoo
