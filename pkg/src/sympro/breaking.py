"""Pseudo-gaps and memory lifetimes under explicit symmetry breaking.

The perturbative side is a phase reduction: on the unbroken orbit
x*(theta) = exp(theta G) x_ref of the pinned circle factor, the left null
vector l(theta) of Df(x*) (normalized against the group tangent) projects
the breaking term onto the phase, giving theta' = h(theta). Stable zeros of
h are the pinned phases and h' there is the predicted gap.

The measured side works on the broken field directly: the Jacobian at the
pinned fixed point, restricted to the eigenvector most aligned with the
former group tangent.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.optimize import brentq

from .diagnostics import equivariance_error
from .errors import AmbiguousMode, NoCircleFactor, NoConvergence, NoPinnedPoint, SymproError, ZeroGap
from .lyapunov import direct_tangent_exponent
from .numerics import derive_seed, matrix_exp, step_count, svd
from .systems import (
    BreakingConfig,
    SystemSpec,
    apply_breaking,
    breaking_term,
    find_orbit_point,
    system_from_dict,
)

THETA0 = 0.1
THETA_THRESHOLD = 1.0
LIFETIME_DT = 0.05
EPS_GRID = (0.005, 0.01, 0.02, 0.05, 0.1)
SWEEP_FAMILIES = ("weak_axis", "unit_axis", "rotated_strong")
T_MAX_FACTOR = 50.0
T_MAX_CAP = 1e5
OVERLAP_MIN = 0.9


def _wrap(a):
    return (np.asarray(a) + np.pi) % (2.0 * np.pi) - np.pi


def z_phase(s: SystemSpec, x) -> float:
    o = s.pin[0]
    return math.atan2(x[o + 1], x[o])


def _base(s: SystemSpec) -> SystemSpec:
    return s.unbroken if s.unbroken is not None else s


# -- phase reduction -------------------------------------------------------------

@dataclass(frozen=True)
class PhaseReduction:
    """theta' = h(theta) for the pinned circle factor of one breaking config."""
    system: SystemSpec
    cfg: BreakingConfig
    x_ref: np.ndarray
    left0: np.ndarray
    stable: tuple
    unstable: tuple

    def _frame(self, theta):
        G = self.system.group.generators[self.system.pin[1]]
        R = matrix_exp(theta * G)
        return G, R @ self.x_ref, R @ self.left0

    def orbit_point(self, theta: float) -> np.ndarray:
        return self._frame(theta)[1]

    def h(self, theta: float) -> float:
        if self.cfg.epsilon == 0.0:
            return 0.0
        _, x, left = self._frame(theta)
        p, _ = breaking_term(self.system, self.cfg)
        return float(left @ p(x))

    def dh(self, theta: float) -> float:
        if self.cfg.epsilon == 0.0:
            return 0.0
        G, x, left = self._frame(theta)
        p, dp = breaking_term(self.system, self.cfg)
        return float((G @ left) @ p(x) + left @ (dp(x) @ (G @ x)))

    @property
    def reference(self) -> float:
        return float(_wrap(self.cfg.pin_angle))

    def stable_phase(self) -> float:
        """Stable zero of h nearest the reference phase of the pinning template."""
        if not self.stable:
            raise NoPinnedPoint(f"{self.system.name}: reduced phase equation has no stable zero")
        return min(self.stable, key=lambda t: abs(_wrap(t - self.reference)))

    def unstable_phase(self, direction: int = 1) -> float:
        """Unstable zero bounding the basin of the chosen stable phase on one side.

        Without breaking there are no zeros; the nominal antipode of the
        reference phase (pi / k away) is returned instead.
        """
        k = int(self.cfg.pin_order)
        if not self.unstable:
            return float(_wrap(self.reference + math.pi / k))
        ts = self.stable_phase()
        # walk from the stable phase in the given direction to the first unstable zero
        gaps = [(_wrap(direction * (u - ts)) % (2.0 * np.pi), u) for u in self.unstable]
        return min(gaps)[1]


def _left_neutral_vector(s: SystemSpec, x) -> np.ndarray:
    """Left null vector of Df(x) dual to the pinned generator's tangent.

    With N an orthonormal orbit-tangent basis starting with the pinned
    tangent and L a basis of the left null space, the columns of
    L (N^T L)^-T are dual to N; the first one, rescaled, satisfies
    l . t_pin = 1 and l . t_other = 0.
    """
    J = s.jacobian(x)
    G = s.group.generators[s.pin[1]]
    t = G @ x
    others = [g @ x for i, g in enumerate(s.group.generators) if i != s.pin[1]]
    S = svd(np.column_stack([t] + others))[1]
    q = int(np.sum(S > 1e-8 * S[0]))
    # orbit tangent basis with t first: t plus the part of the rest orthogonal to it
    tn = t / np.linalg.norm(t)
    rest = [v - tn * (tn @ v) for v in others]
    N = [tn]
    for v in rest:
        for b in N[1:]:
            v = v - b * (b @ v)
        if np.linalg.norm(v) > 1e-8 and len(N) < q:
            N.append(v / np.linalg.norm(v))
    N = np.column_stack(N)
    Uj, Sj, _ = svd(J)
    L = Uj[:, Sj.size - q:] if q else Uj[:, :0]
    if np.any(Sj[Sj.size - q:] > 1e-6 * max(1.0, Sj[0])):
        raise NoConvergence(f"{s.name}: Df is not singular along the orbit (sigma = {Sj[-q:]})")
    M = N.T @ L
    dual = L @ np.linalg.inv(M).T
    left = dual[:, 0]
    return left / (left @ t)


def phase_reduction(s: SystemSpec, cfg: BreakingConfig, x_ref=None, n_phases: int = 256) -> PhaseReduction:
    """Reduced phase equation of ``cfg`` on the unbroken orbit of ``s``."""
    s0 = _base(s)
    if s0.pin is None:
        raise NoCircleFactor(f"system {s0.name!r} has no S^1 factor to pin")
    if x_ref is None:
        x_ref = find_orbit_point(s0)
    G = s0.group.generators[s0.pin[1]]
    x_ref = matrix_exp(-z_phase(s0, x_ref) * G) @ np.asarray(x_ref, dtype=float)
    left0 = _left_neutral_vector(s0, x_ref)
    red = PhaseReduction(s0, cfg, x_ref, left0, (), ())
    if cfg.epsilon == 0.0:
        return red
    grid = np.linspace(-np.pi, np.pi, n_phases + 1)
    vals = np.array([red.h(t) for t in grid])
    stable, unstable = [], []
    scale = np.max(np.abs(vals))
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0 or fa * fb < 0.0:
            root = a if fa == 0.0 else brentq(red.h, a, b, xtol=1e-14, rtol=1e-14)
            slope = red.dh(root)
            if abs(slope) <= 1e-12 * max(scale, 1e-300):
                continue
            (stable if slope < 0 else unstable).append(float(_wrap(root)))
    return PhaseReduction(s0, cfg, x_ref, left0, tuple(stable), tuple(unstable))


def predict_gap_perturbative(s: SystemSpec, cfg: BreakingConfig, reduction: PhaseReduction | None = None) -> float:
    """First-order pseudo-gap: h'(theta_s) at the stable pinned phase."""
    if cfg.amplitude > 0.2:
        warnings.warn(f"breaking amplitude {cfg.amplitude:g} > 0.2: first-order prediction may be poor",
                      stacklevel=2)
    if cfg.epsilon == 0.0:
        return 0.0
    red = reduction or phase_reduction(s, cfg)
    return red.dh(red.stable_phase())


# -- measured pseudo-gap ---------------------------------------------------------

@dataclass(frozen=True)
class PseudoGap:
    gap: float
    pinned_point: np.ndarray
    overlap: float
    phase: float


def pinned_point(s_broken: SystemSpec, reduction: PhaseReduction | None = None) -> np.ndarray:
    """Stable fixed point of the broken field nearest the reference phase.

    The search seeds find_orbit_point at the reduced stable phase nearest
    the reference; with epsilon = 0 any orbit point is returned.
    """
    cfg = s_broken.breaking
    s0 = _base(s_broken)
    if cfg is None or cfg.epsilon == 0.0:
        return find_orbit_point(s0)
    red = reduction or phase_reduction(s0, cfg)
    seed = red.orbit_point(red.stable_phase())
    try:
        return find_orbit_point(s_broken, seed_state=seed, T_max=max(500.0, 20.0 / cfg.amplitude))
    except NoConvergence as exc:
        raise NoPinnedPoint(f"{s_broken.name}: {exc}") from None


def pseudo_gap_details(s_broken: SystemSpec, reduction: PhaseReduction | None = None) -> PseudoGap:
    x = pinned_point(s_broken, reduction)
    J = s_broken.jacobian(x)
    t = s_broken.group.generators[s_broken.pin[1]] @ x
    t = t / np.linalg.norm(t)
    w, V = np.linalg.eig(J)
    overlaps = np.abs(V.conj().T @ t) / np.linalg.norm(V, axis=0)
    i = int(np.argmax(overlaps))
    if overlaps[i] < OVERLAP_MIN:
        raise AmbiguousMode(f"{s_broken.name}: best eigenvector overlap with the group tangent is {overlaps[i]:.3f}")
    lam = w[i].real
    v = V[:, i].real
    v /= np.linalg.norm(v)
    # inverse iteration + Rayleigh quotient to polish the selected eigenpair
    d = J.shape[0]
    for _ in range(2):
        shift = lam + 1e-10 * max(1.0, abs(lam))
        y = np.linalg.lstsq(J - shift * np.eye(d), v, rcond=None)[0]
        ny = np.linalg.norm(y)
        if not np.isfinite(ny) or ny == 0.0:
            break
        v = y / ny
        lam = float(v @ J @ v)
    return PseudoGap(float(lam), x, float(overlaps[i]), z_phase(s_broken, x))


def measure_pseudo_gap(s_broken: SystemSpec, reduction: PhaseReduction | None = None) -> float:
    """Eigenvalue of the broken linearization along the former group tangent."""
    return pseudo_gap_details(s_broken, reduction).gap


def direct_gap_estimate(s_broken: SystemSpec, x_pinned, T: float, dt: float = LIFETIME_DT) -> float:
    """Cross-check: direct tangent exponent of the pinned generator at the pinned point."""
    xi = np.zeros(s_broken.group.algebra_dim)
    xi[s_broken.pin[1]] = 1.0
    return direct_tangent_exponent(s_broken, x_pinned, xi, T, dt)


# -- lifetimes ---------------------------------------------------------------------

def predict_lifetime(gap: float, theta0: float = THETA0, theta_threshold: float = THETA_THRESHOLD,
                     pin_order: int = 1, closed_form: bool = True) -> float:
    """Time for psi' = |gap| sin(psi) to carry psi = k theta from k theta0 to k theta_threshold.

    ``closed_form=False`` gives the generic linear-escape estimate
    |gap|^-1 log(theta_threshold / theta0).
    """
    if gap == 0.0 or not math.isfinite(gap):
        raise ZeroGap("lifetime prediction needs a nonzero finite gap")
    if not 0.0 < theta0 < theta_threshold:
        raise ValueError("need 0 < theta0 < theta_threshold")
    g = abs(gap)
    if not closed_form:
        return math.log(theta_threshold / theta0) / g
    k = int(pin_order)
    if k * theta_threshold >= math.pi:
        raise ValueError("theta_threshold must be below pi / pin_order")
    return math.log(math.tan(k * theta_threshold / 2.0) / math.tan(k * theta0 / 2.0)) / g


def measure_lifetime(s_broken: SystemSpec, theta0: float = THETA0, theta_threshold: float = THETA_THRESHOLD,
                     T_max: float = 1e4, dt: float = LIFETIME_DT, direction: int = 1,
                     reduction: PhaseReduction | None = None) -> tuple[float, bool]:
    """Escape time of the encoded phase from the unstable pinned phase.

    The state starts on the unbroken orbit at angle theta0 from the
    unstable zero of the reduced phase equation (on the side of the stable
    phase given by ``direction``); the lifetime is the first time its phase
    is theta_threshold away from that unstable phase, linearly interpolated
    between steps. Returns ``(T_max, True)`` when censored.
    """
    cfg = s_broken.breaking
    k = int(cfg.pin_order) if cfg is not None else 1
    if not 0.0 < theta0 < theta_threshold < math.pi / k:
        raise ValueError("need 0 < theta0 < theta_threshold < pi / pin_order")
    s0 = _base(s_broken)
    red = reduction or phase_reduction(s0, cfg or BreakingConfig())
    tu = red.unstable_phase(direction)
    ts = red.stable_phase() if red.stable else tu - direction * math.pi / k
    side = 1.0 if _wrap(ts - tu) > 0 else -1.0
    x = red.orbit_point(tu + side * theta0)
    n, h = step_count(T_max, dt)
    rhs = s_broken.rhs
    half, sixth = 0.5 * h, h / 6.0
    o = s0.pin[0]
    prev_phase = math.atan2(x[o + 1], x[o])
    unwrapped = float(tu + side * theta0)
    prev_dev = theta0
    for i in range(n):
        k1 = rhs(x, 0.0)
        k2 = rhs(x + half * k1, 0.0)
        k3 = rhs(x + half * k2, 0.0)
        k4 = rhs(x + h * k3, 0.0)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ph = math.atan2(x[o + 1], x[o])
        unwrapped += float(_wrap(ph - prev_phase))
        prev_phase = ph
        dev = abs(unwrapped - tu)
        if dev >= theta_threshold:
            frac = (theta_threshold - prev_dev) / (dev - prev_dev)
            return (i + frac) * h, False
        prev_dev = dev
    if not np.all(np.isfinite(x)):
        raise SymproError(f"{s_broken.name}: non-finite state in lifetime run")
    return float(T_max), True


# -- sweeps --------------------------------------------------------------------------

@dataclass
class LifetimeRecord:
    config: BreakingConfig
    gap_measured: float
    gap_predicted: float
    lifetime_measured: float
    lifetime_predicted: float
    censored: bool
    theta0: float
    theta_threshold: float
    equivariance_error: float
    direction: int = 1
    T_max: float = math.nan
    error: str = ""

    COLUMNS = ("family", "epsilon", "pin_order", "rotation", "seed", "direction", "gap_measured",
               "gap_predicted", "lifetime_measured", "lifetime_predicted", "censored", "theta0",
               "theta_threshold", "T_max", "equivariance_error", "error")

    def csv_row(self) -> dict:
        c = self.config
        return {
            "family": c.family, "epsilon": c.epsilon, "pin_order": c.pin_order, "rotation": c.rotation,
            "seed": c.seed, "direction": self.direction, "gap_measured": self.gap_measured,
            "gap_predicted": self.gap_predicted, "lifetime_measured": self.lifetime_measured,
            "lifetime_predicted": self.lifetime_predicted, "censored": int(self.censored),
            "theta0": self.theta0, "theta_threshold": self.theta_threshold, "T_max": self.T_max,
            "equivariance_error": self.equivariance_error, "error": self.error,
        }


def lifetime_row(base: SystemSpec, cfg: BreakingConfig, theta0: float = THETA0,
                 theta_threshold: float = THETA_THRESHOLD, direction: int = 1,
                 dt: float = LIFETIME_DT, x_ref=None, eq_samples: int = 200) -> LifetimeRecord:
    """One sweep trial; failures come back as a tagged record instead of raising."""
    nan = math.nan
    try:
        red = phase_reduction(base, cfg, x_ref)
        sb = apply_breaking(base, cfg)
        gap_pred = predict_gap_perturbative(base, cfg, red)
        gap = measure_pseudo_gap(sb, red)
        T_max = min(T_MAX_FACTOR / abs(gap_pred), T_MAX_CAP) if gap_pred else T_MAX_CAP
        tau, censored = measure_lifetime(sb, theta0, theta_threshold, T_max, dt, direction, red)
        tau_pred = predict_lifetime(gap, theta0, theta_threshold, cfg.pin_order)
        eq = equivariance_error(sb, eq_samples, seed=cfg.seed)
        return LifetimeRecord(cfg, gap, gap_pred, tau, tau_pred, censored, theta0, theta_threshold,
                              eq, direction, T_max)
    except (SymproError, ValueError, ArithmeticError) as exc:
        return LifetimeRecord(cfg, nan, nan, nan, nan, False, theta0, theta_threshold, nan, direction,
                              nan, f"{type(exc).__name__}: {exc}")


def sweep_configs(families=SWEEP_FAMILIES, eps_grid=EPS_GRID, seeds=range(5), sweep_seed: int = 0,
                  pin_order: int = 1) -> list[tuple[BreakingConfig, int]]:
    """Full factorial grid; each (family, seed) draws a random pin rotation and
    displacement side, shared across the epsilon grid."""
    rows = []
    for fam in families:
        for sd in seeds:
            rng = np.random.default_rng(derive_seed(sweep_seed, fam, sd))
            rotation = float(rng.uniform(0.0, 360.0))
            direction = int(rng.choice((-1, 1)))
            for eps in eps_grid:
                rows.append((BreakingConfig(fam, float(eps), pin_order, rotation, int(sd)), direction))
    return rows


@dataclass
class SweepSummary:
    correlation: float
    uncensored_fraction: float
    median_ratio: float
    n_rows: int
    n_errors: int
    lifetime_decreasing: bool
    defined: bool = True
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "correlation": self.correlation,
            "uncensored_fraction": self.uncensored_fraction,
            "median_ratio": self.median_ratio,
            "n_rows": self.n_rows,
            "n_errors": self.n_errors,
            "lifetime_decreasing": self.lifetime_decreasing,
            "defined": self.defined,
        }


def _pearson(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or np.std(a) == 0.0 or np.std(b) == 0.0:
        return math.nan
    return float(np.corrcoef(a, b)[0, 1])


def summarize_sweep(records: list[LifetimeRecord]) -> SweepSummary:
    if not records:
        return SweepSummary(math.nan, math.nan, math.nan, 0, 0, False, defined=False)
    key = lambda r: (r.config.family, r.config.seed, r.config.epsilon)
    recs = sorted(records, key=key)
    ok = [r for r in recs if not r.error]
    good = [r for r in ok if not r.censored]
    meas = np.log([r.lifetime_measured for r in good])
    pred = np.log([r.lifetime_predicted for r in good])
    ratios = [r.lifetime_measured / r.lifetime_predicted for r in good]
    decreasing = True
    groups: dict = {}
    for r in ok:
        groups.setdefault((r.config.family, r.config.seed), []).append(r)
    for rows in groups.values():
        taus = [r.lifetime_measured for r in sorted(rows, key=lambda r: r.config.epsilon)]
        decreasing &= all(b < a for a, b in zip(taus, taus[1:]))
    return SweepSummary(
        correlation=_pearson(meas, pred),
        uncensored_fraction=len(good) / len(recs),
        median_ratio=float(np.median(ratios)) if ratios else math.nan,
        n_rows=len(recs),
        n_errors=len(recs) - len(ok),
        lifetime_decreasing=bool(decreasing and len(ok) > 0),
    )


def lifetime_sweep(base: SystemSpec, families=SWEEP_FAMILIES, eps_grid=EPS_GRID, seeds=range(5),
                   thresholds=(THETA0, THETA_THRESHOLD), sweep_seed: int = 0, dt: float = LIFETIME_DT,
                   mapper=map) -> tuple[list[LifetimeRecord], SweepSummary]:
    """Factorial lifetime study; ``mapper`` may be a parallel map over rows."""
    theta0, thr = thresholds
    rows = sweep_configs(families, eps_grid, seeds, sweep_seed)
    if not rows:
        return [], summarize_sweep([])
    x_ref = find_orbit_point(_base(base))
    task = partial(_sweep_task, _base(base).to_dict(), theta0, thr, dt, x_ref)
    records = list(mapper(task, rows))
    return records, summarize_sweep(records)


def _sweep_task(base_dict, theta0, thr, dt, x_ref, row):
    # module-level so rows can be shipped to worker processes
    return lifetime_row(system_from_dict(base_dict), row[0], theta0, thr, row[1], dt, x_ref)


# -- random anisotropic ensemble ---------------------------------------------------------

@dataclass(frozen=True)
class EnsembleRow:
    seed: int
    epsilon: float
    gap_measured: float
    gap_predicted: float
    equivariance_error: float
    error: str = ""

    COLUMNS = ("seed", "epsilon", "gap_measured", "gap_predicted", "equivariance_error", "error")

    def csv_row(self) -> dict:
        return {c: getattr(self, c) for c in self.COLUMNS}


def anisotropic_row(base: SystemSpec, seed: int, epsilon: float, x_ref=None) -> EnsembleRow:
    cfg = BreakingConfig("random_anisotropic", epsilon, seed=seed)
    try:
        red = phase_reduction(base, cfg, x_ref)
        sb = apply_breaking(base, cfg)
        return EnsembleRow(seed, epsilon, measure_pseudo_gap(sb, red),
                           predict_gap_perturbative(base, cfg, red), equivariance_error(sb, 200, seed))
    except (SymproError, ValueError, ArithmeticError) as exc:
        return EnsembleRow(seed, epsilon, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def _ensemble_task(base_dict, epsilon, x_ref, seed):
    return anisotropic_row(system_from_dict(base_dict), seed, epsilon, x_ref)


def anisotropic_ensemble(base: SystemSpec, epsilon: float = 0.02, seeds=range(30),
                         mapper=map) -> tuple[list[EnsembleRow], dict]:
    """Measured vs first-order gaps over seeded random symmetric breakings."""
    x_ref = find_orbit_point(_base(base))
    task = partial(_ensemble_task, _base(base).to_dict(), epsilon, x_ref)
    rows = list(mapper(task, [int(sd) for sd in seeds]))
    ok = [r for r in rows if not r.error]
    summary = {
        "gap_correlation": _pearson([r.gap_measured for r in ok], [r.gap_predicted for r in ok]),
        "gap_vs_equivariance_correlation": _pearson([abs(r.gap_measured) for r in ok],
                                                    [r.equivariance_error for r in ok]),
        "n_rows": len(rows),
        "n_errors": len(rows) - len(ok),
    }
    return rows, summary
