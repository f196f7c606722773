"""Tangent cocycle propagation and Lyapunov exponent estimates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTangent, DimensionMismatch, NumericalBlowup
from .groups import action_matrix, fundamental_field
from .numerics import qr_decompose, step_count
from .systems import SystemSpec

NEAR_ZERO_TOL = 1e-4
DEFAULT_T = 200.0
DEFAULT_DT = 1e-2
DEFAULT_RENORM = 10


def _propagate(s: SystemSpec, x, V, n: int, h: float, inputs=None, start: int = 0):
    # joint RK4 on x' = f(x, u), V' = Df(x, u) V; identical to differentiating the RK4 map
    rhs, jac = s.rhs, s.jac
    half = 0.5 * h
    sixth = h / 6.0
    for i in range(n):
        u = 0.0 if inputs is None else inputs[start + i]
        k1 = rhs(x, u)
        K1 = jac(x, u) @ V
        x2 = x + half * k1
        k2 = rhs(x2, u)
        K2 = jac(x2, u) @ (V + half * K1)
        x3 = x + half * k2
        k3 = rhs(x3, u)
        K3 = jac(x3, u) @ (V + half * K2)
        x4 = x + h * k3
        k4 = rhs(x4, u)
        K4 = jac(x4, u) @ (V + h * K3)
        x = x + sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        V = V + sixth * (K1 + 2.0 * K2 + 2.0 * K3 + K4)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(V))):
        raise NumericalBlowup(f"{s.name}: non-finite state or tangent within {n} steps of size {h:g}")
    return x, V


def propagate_tangent(s: SystemSpec, x0, V0, T: float, dt: float = DEFAULT_DT, inputs=None):
    """Integrate the state and a d x k tangent block jointly to time T.

    ``inputs`` supplies one scalar input per step for input-driven systems.
    Returns ``(x_T, V_T)``.
    """
    x = np.array(x0, dtype=float)
    V = np.array(V0, dtype=float)
    squeeze = V.ndim == 1
    if squeeze:
        V = V[:, None]
    if V.shape[0] != s.dim or x.size != s.dim:
        raise DimensionMismatch(f"state/tangent dimension mismatch for {s.name} (d = {s.dim})")
    n, h = step_count(T, dt)
    if inputs is not None and len(inputs) < n:
        raise DimensionMismatch(f"need {n} inputs, got {len(inputs)}")
    if inputs is None and not s.autonomous:
        raise ValueError(f"{s.name} is input driven; pass an input sequence")
    x, V = _propagate(s, x, V, n, h, inputs)
    return x, (V[:, 0] if squeeze else V)


@dataclass(frozen=True)
class LyapunovReport:
    exponents: np.ndarray
    frame: np.ndarray
    history: np.ndarray
    near_zero_count: int
    tolerance: float
    T: float
    dt: float
    renorm_interval: int
    transient: float
    x_final: np.ndarray
    converged: bool

    @property
    def neutral_frame(self) -> np.ndarray:
        return self.frame[:, np.abs(self.exponents) < self.tolerance]

    def to_dict(self) -> dict:
        return {
            "exponents": [float(v) for v in self.exponents],
            "near_zero_count": self.near_zero_count,
            "tolerance": self.tolerance,
            "T": self.T,
            "dt": self.dt,
            "renorm_interval": self.renorm_interval,
            "transient": self.transient,
            "converged": self.converged,
        }

    def csv_rows(self, run_id: str) -> list[dict]:
        return [{"run": run_id, "index": i, "exponent": float(v)} for i, v in enumerate(self.exponents)]


def _random_frame(d: int, k: int, seed: int) -> np.ndarray:
    M = np.random.default_rng(seed).standard_normal((d, k))
    return qr_decompose(M)[0]


def benettin_spectrum(s: SystemSpec, x0, k: int | None = None, T: float = DEFAULT_T,
                      dt: float = DEFAULT_DT, renorm_every: int = DEFAULT_RENORM,
                      tol: float = NEAR_ZERO_TOL, transient: float | None = None,
                      seed: int = 0) -> LyapunovReport:
    """Leading-k Lyapunov exponents by the QR (Benettin) method.

    A random orthonormal frame is first propagated for ``transient`` time
    units (default 0.1 T) with renormalization but no accumulation, so the
    columns settle into the forward Oseledets flag before logs of |R_ii|
    are accumulated over ``T``. The frame returned is the final QR frame
    with columns ordered like ``exponents`` (descending).
    """
    d = s.dim
    k = d if k is None else int(k)
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    if renorm_every < 1:
        raise ValueError("renorm_every must be >= 1")
    if transient is None:
        transient = 0.1 * T
    x = np.array(x0, dtype=float)
    V = _random_frame(d, k, seed)
    n, h = step_count(T, dt)
    if transient > 0:
        n_tr = max(1, int(round(transient / h)))
        done = 0
        while done < n_tr:
            m = min(renorm_every, n_tr - done)
            x, V = _propagate(s, x, V, m, h)
            V, _ = qr_decompose(V)
            done += m
    logs = np.zeros(k)
    history = []
    done = 0
    while done < n:
        m = min(renorm_every, n - done)
        x, V = _propagate(s, x, V, m, h)
        V, R = qr_decompose(V)
        logs += np.log(np.diag(R))
        done += m
        history.append(logs / (done * h))
    exps = logs / (n * h)
    order = np.argsort(-exps, kind="stable")
    history = np.array(history)[:, order]
    tail = history[-max(1, len(history) // 4):]
    drift = tail.max(axis=0) - tail.min(axis=0)
    exps = exps[order]
    return LyapunovReport(
        exponents=exps,
        frame=V[:, order],
        history=history,
        near_zero_count=int(np.sum(np.abs(exps) < tol)),
        tolerance=tol,
        T=T,
        dt=h,
        renorm_interval=renorm_every,
        transient=float(transient),
        x_final=x,
        converged=bool(np.all(drift <= 10.0 * tol)),
    )


def count_near_zero(report, tol: float = NEAR_ZERO_TOL) -> tuple[int, float]:
    """Number of exponents with |lambda| < tol and the spectral margin.

    The margin is the distance from the tolerance band to the nearest
    excluded exponent (NaN, with a warning, when nothing is excluded).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    exps = np.asarray(getattr(report, "exponents", report), dtype=float)
    inside = np.abs(exps) < tol
    excluded = np.abs(exps[~inside])
    if excluded.size == 0:
        warnings.warn(f"tolerance {tol:g} includes every exponent; count is degenerate", stacklevel=2)
        return int(inside.sum()), math.nan
    return int(inside.sum()), float(excluded.min() - tol)


def nearest_excluded(exps, tol: float = NEAR_ZERO_TOL) -> float:
    exps = np.asarray(exps, dtype=float)
    out = np.abs(exps[np.abs(exps) >= tol])
    return float(out.min()) if out.size else math.nan


def direct_tangent_exponent(s: SystemSpec, x0, xi, T: float = 100.0, dt: float = DEFAULT_DT) -> float:
    """Finite-time growth rate of the propagated fundamental field xi_M(x0)."""
    v0 = fundamental_field(s.group, xi, x0)
    n0 = float(np.linalg.norm(v0))
    if n0 <= 1e-12:
        raise DegenerateTangent(f"{s.name}: |xi_M(x0)| = {n0:.3g} (orbit degenerate at x0)")
    _, vT = propagate_tangent(s, x0, v0, T, dt)
    return math.log(float(np.linalg.norm(vT)) / n0) / T


def propagate_group_tangents(s: SystemSpec, x0, times=(100.0,), dt: float = DEFAULT_DT) -> list[tuple]:
    """Propagate the action matrix columns (basis fundamental fields) from x0.

    One joint run with checkpoints; returns ``[(t, x_t, V_t), ...]`` in
    increasing time, where V_t = D phi_t(x0) A_x0.
    """
    times = sorted(float(t) for t in times)
    x = np.array(x0, dtype=float)
    V = action_matrix(s.group, x)
    _, h = step_count(times[-1], dt)
    out, done = [], 0
    for t in times:
        target = int(round(t / h))
        x, V = _propagate(s, x, V, target - done, h)
        done = target
        out.append((done * h, x.copy(), V.copy()))
    return out


def direct_tangent_exponents(s: SystemSpec, x0, times=(100.0,), dt: float = DEFAULT_DT,
                             checkpoints=None) -> np.ndarray:
    """Direct exponents of every algebra basis element at each time in ``times``.

    One joint propagation covers all basis elements and checkpoints (pass
    ``checkpoints`` from propagate_group_tangents to reuse one); the result
    has shape (len(times), algebra_dim) with NaN where the basis tangent
    vanishes at x0.
    """
    A0 = action_matrix(s.group, x0)
    norms = np.linalg.norm(A0, axis=0)
    if checkpoints is None:
        checkpoints = propagate_group_tangents(s, x0, times, dt)
    ok = norms > 1e-12
    out = np.full((len(checkpoints), A0.shape[1]), np.nan)
    for i, (t, _, V) in enumerate(checkpoints):
        out[i, ok] = np.log(np.linalg.norm(V[:, ok], axis=0) / norms[ok]) / t
    return out
