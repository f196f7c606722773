"""Path-integration consequence harness and the finite-grid null."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from .diagnostics import sample_states, step_equivariance_error
from .numerics import derive_seed, rk4_step
from .systems import (
    GRID_KERNEL,
    BreakingConfig,
    SystemSpec,
    circulant_grid,
    controlled_path_integrator,
    fourier_shift,
    step_map,
)

KINDS = ("gaussian", "piecewise_constant", "correlated_walk")
CONDITIONS = ("in_dist", "speed_ood", "restricted_phase")
TASK_DT = 0.05
HOLD = 16
AR_COEF = 0.95
RESTRICTED_HALF_WIDTH = math.pi / 4


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = np.pi - np.mod(np.pi - np.asarray(a, dtype=float), 2.0 * np.pi)
    return float(w) if np.ndim(w) == 0 else w


@dataclass(frozen=True)
class VelocitySequence:
    kind: str
    values: np.ndarray
    dt: float
    seed: int
    scale: float

    def __len__(self):
        return len(self.values)


def generate_velocity(kind: str, horizon: int, dt: float = TASK_DT, seed: int = 0,
                      scale: float = 1.0) -> VelocitySequence:
    """Seeded angular-velocity sequence (rad / time unit, one value per step).

    gaussian: i.i.d. N(0, scale^2); piecewise_constant: a N(0, scale^2)
    value held for 16 steps; correlated_walk: stationary AR(1) with
    coefficient 0.95 and marginal std ``scale``.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if kind not in KINDS:
        raise ValueError(f"unknown velocity kind {kind!r}; expected one of {KINDS}")
    rng = np.random.default_rng(seed)
    if kind == "gaussian":
        v = rng.standard_normal(horizon)
    elif kind == "piecewise_constant":
        v = np.repeat(rng.standard_normal(-(-horizon // HOLD)), HOLD)[:horizon]
    else:
        eta = rng.standard_normal(horizon)
        v = np.empty(horizon)
        v[0] = eta[0]
        c = math.sqrt(1.0 - AR_COEF ** 2)
        for t in range(1, horizon):
            v[t] = AR_COEF * v[t - 1] + c * eta[t]
    v = scale * v
    v.setflags(write=False)
    return VelocitySequence(kind, v, float(dt), int(seed), float(scale))


@dataclass(frozen=True)
class TaskResult:
    horizon: int
    circular_rmse: float
    per_step_error: np.ndarray
    model: str
    condition: str
    seed: int = 0
    scale: float = 1.0
    phi0: float = 0.0
    error: str = ""

    def csv_row(self) -> dict:
        return {"model": self.model, "condition": self.condition, "seed": self.seed,
                "horizon": self.horizon, "scale": self.scale, "rmse": self.circular_rmse,
                "error": self.error}


def circular_rmse(errors) -> float:
    e = wrap_angle(errors)
    return float(math.sqrt(np.mean(np.square(e))))


def run_task(model, phi0: float, v: VelocitySequence, condition: str = "in_dist",
             label: str | None = None, readout=None, x0=None) -> TaskResult:
    """Drive ``model`` with ``v`` and score its phase against the integrated truth.

    ``model`` is an input-driven SystemSpec (one RK4 step of size v.dt per
    sample, read out as the angle of its z block) or a callable
    ``step(x, u) -> x`` used with an explicit ``readout`` and ``x0``.
    """
    if condition not in CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    if isinstance(model, SystemSpec):
        o = model.pin[0] if model.pin is not None else 0
        rhs = model.rhs
        dt = v.dt

        def step(x, u):
            return rk4_step(lambda y: rhs(y, u), x, dt)

        if readout is None:
            def readout(x):
                return math.atan2(x[o + 1], x[o])
        if x0 is None:
            x0 = np.zeros(model.dim)
            x0[o], x0[o + 1] = math.cos(phi0), math.sin(phi0)
        label = label or model.name
    else:
        step = model
        if readout is None or x0 is None:
            raise ValueError("a bare step map needs readout and x0")
        label = label or "map"
    x = np.array(x0, dtype=float)
    truth = phi0 + np.cumsum(v.values) * v.dt
    est = np.empty(len(v))
    for t, u in enumerate(v.values):
        x = step(x, float(u))
        est[t] = readout(x)
    err = wrap_angle(est - truth)
    err.setflags(write=False)
    return TaskResult(len(v), circular_rmse(err), err, label, condition, v.seed, v.scale, float(phi0))


# -- finite grid null ---------------------------------------------------------------

@dataclass(frozen=True)
class GridNull:
    N: int
    discrete_error: float
    offsets: tuple
    continuous_error: tuple

    def csv_rows(self) -> list[dict]:
        rows = [{"N": self.N, "operator": "integer_roll", "offset": "all", "error": self.discrete_error}]
        rows += [{"N": self.N, "operator": "fourier_shift", "offset": s, "error": e}
                 for s, e in zip(self.offsets, self.continuous_error)]
        return rows


def grid_states(N: int, n: int = 32, seed: int = 0) -> np.ndarray:
    """Random grid states with per-unit RMS activity uniform in [0.5, 1.5]."""
    return sample_states(N, n, np.random.default_rng(seed)) * math.sqrt(N)


def grid_null(N: int, shift_offsets=(0.25, 0.5), n_states: int = 32, seed: int = 0) -> GridNull:
    """Step equivariance of the circulant ring under integer rolls vs Fourier shifts."""
    s = circulant_grid(N)
    step = step_map(s, GRID_KERNEL["dt"])
    X = grid_states(N, n_states, seed)
    rolls = [partial(np.roll, shift=m) for m in range(1, N)]
    discrete = step_equivariance_error(step, rolls, X)
    cont = tuple(step_equivariance_error(step, [partial(fourier_shift, s=float(off))], X)
                 for off in shift_offsets)
    return GridNull(N, discrete, tuple(float(o) for o in shift_offsets), cont)


# -- consequence suite ---------------------------------------------------------------

@dataclass
class SuiteResult:
    rows: list
    cells: list
    separations: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"cells": self.cells, "separations": self.separations}


def run_batch(model, phi0s, sequences, condition: str = "in_dist", label: str | None = None) -> TaskResult:
    """Score one model on a set of sequences; the RMSE pools every step of every sequence."""
    results = [run_task(model, p, v, condition, label) for p, v in zip(phi0s, sequences)]
    err = np.concatenate([r.per_step_error for r in results])
    err.setflags(write=False)
    first = results[0]
    return TaskResult(first.horizon, circular_rmse(err), err, first.model, condition, first.seed,
                      first.scale, first.phi0)


def _suite_row(kind, dt, eps, key):
    seed, horizon, scale, condition, phi0s, vseeds, model = key
    vs = [generate_velocity(kind, horizon, dt, vs_, scale) for vs_ in vseeds]
    if model == "exact":
        m = controlled_path_integrator(True)
    else:
        m = controlled_path_integrator(False, BreakingConfig("phase_pinning", eps))
    try:
        r = run_batch(m, phi0s, vs, condition, label=model)
        return TaskResult(r.horizon, r.circular_rmse, r.per_step_error, model, condition, seed, scale, phi0s[0])
    except (ArithmeticError, ValueError) as exc:
        return TaskResult(horizon, math.nan, np.array([]), model, condition, seed, scale, phi0s[0],
                          f"{type(exc).__name__}: {exc}")


def consequence_suite(seeds=range(6), horizons=(256,), speed_scales=(1.0, 2.0), kind: str = "correlated_walk",
                      epsilon: float = 0.05, dt: float = TASK_DT, suite_seed: int = 0,
                      restricted_phase: bool = True, batch: int = 16, mapper=map) -> SuiteResult:
    """Exact vs broken path integrator over seeds x horizons x speed conditions.

    Each seed is one evaluation set of ``batch`` sequences with random start
    phases, scored by the pooled circular RMSE. The first speed scale is
    in-distribution, the rest are labeled speed_ood; ``restricted_phase``
    adds in-distribution rows with start phases drawn from [-pi/4, pi/4].
    Both models see the same sequences and start phases in every paired row.
    """
    seeds, horizons, speed_scales = list(seeds), list(horizons), list(speed_scales)
    if not (seeds and horizons and speed_scales):
        raise ValueError("seeds, horizons and speed_scales must be nonempty")
    if batch < 1:
        raise ValueError("batch must be >= 1")
    keys = []
    for h in horizons:
        conds = [(sc, "in_dist" if i == 0 else "speed_ood") for i, sc in enumerate(speed_scales)]
        if restricted_phase:
            conds.append((speed_scales[0], "restricted_phase"))
        for sc, cond in conds:
            for sd in seeds:
                rng = np.random.default_rng(derive_seed(suite_seed, sd, h, sc, cond))
                width = RESTRICTED_HALF_WIDTH if cond == "restricted_phase" else math.pi
                phi0s = tuple(float(p) for p in rng.uniform(-width, width, batch))
                vseeds = tuple(int(v) for v in rng.integers(2 ** 31, size=batch))
                for model in ("exact", "broken"):
                    keys.append((sd, h, float(sc), cond, phi0s, vseeds, model))
    rows = list(mapper(partial(_suite_row, kind, dt, epsilon), keys))
    cells = {}
    for r in rows:
        if not r.error:
            cells.setdefault((r.model, r.condition, r.horizon, r.scale), []).append(r.circular_rmse)
    table = []
    for (model, cond, h, sc), vals in sorted(cells.items()):
        vals = np.array(vals)
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
        table.append({"model": model, "condition": cond, "horizon": h, "scale": sc,
                      "mean": float(vals.mean()), "stderr": se, "n": len(vals)})
    seps = []
    by = {(c["model"], c["condition"], c["horizon"], c["scale"]): c for c in table}
    for (model, cond, h, sc), c in by.items():
        if model != "exact" or ("broken", cond, h, sc) not in by:
            continue
        b = by[("broken", cond, h, sc)]
        se = math.hypot(c["stderr"], b["stderr"])
        seps.append({"condition": cond, "horizon": h, "scale": sc,
                     "ratio": b["mean"] / c["mean"] if c["mean"] > 0 else math.inf,
                     "separation_se": (b["mean"] - c["mean"]) / se if se > 0 else math.inf})
    return SuiteResult(rows, table, seps)
