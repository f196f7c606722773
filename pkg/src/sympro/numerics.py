"""Small dense linear algebra and fixed-step integration kernels.

Matrices are plain 2-D float64 ``numpy`` arrays; states are 1-D arrays.
QR (Householder), SVD (one-sided Jacobi) and the matrix exponential
(scaling and squaring on a Taylor block) are implemented here so that
the tests can check them against LAPACK/SciPy as independent oracles.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    ConvergenceFailure,
    DimensionMismatch,
    NumericalBlowup,
    RankDeficient,
    StepBudgetExceeded,
)

Field = Callable[[np.ndarray], np.ndarray]

MAX_STEPS = 5_000_000
RANK_TOL = 1e-8
RECONSTRUCTION_TOL = 1e-10

# symplectic block: multiplication by i on a realified complex coordinate
J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def as_matrix(M) -> np.ndarray:
    M = np.array(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled path of a flow.

    ``dt`` is the effective step ``T / n_steps``; it equals the requested
    step whenever ``T`` is a multiple of it.
    """

    times: np.ndarray
    states: np.ndarray
    dt: float

    def __post_init__(self):
        if len(self.times) != len(self.states) or len(self.times) < 1:
            raise DimensionMismatch("times and states must have equal length >= 1")

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def rk4_step(field: Field, x: np.ndarray, dt: float, t: float | None = None) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    k1 = field(x)
    k2 = field(x + 0.5 * dt * k1)
    k3 = field(x + 0.5 * dt * k2)
    k4 = field(x + dt * k3)
    out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        where = f" at t={t:.6g}" if t is not None else ""
        raise NumericalBlowup(f"non-finite state after RK4 step of size {dt:g}{where}")
    return out


def step_count(T: float, dt: float, max_steps: int = MAX_STEPS) -> tuple[int, float]:
    """Number of uniform steps covering ``T`` and the effective step."""
    if not T > 0 or not dt > 0:
        raise ValueError("T and dt must be positive")
    n = math.ceil(T / dt - 1e-9)
    if n > max_steps:
        raise StepBudgetExceeded(f"T/dt = {n} steps exceeds the budget of {max_steps}")
    return n, T / n


def integrate_flow(field: Field, x0, T: float, dt: float, max_steps: int = MAX_STEPS) -> Trajectory:
    n, h = step_count(T, dt, max_steps)
    x = np.array(x0, dtype=float)
    states = np.empty((n + 1, x.size))
    states[0] = x
    for i in range(n):
        x = rk4_step(field, x, h, t=i * h)
        states[i + 1] = x
    times = h * np.arange(n + 1)
    times[-1] = T
    return Trajectory(times, states, h)


def jacobian_fd(field: Field, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian, column j from +/- h e_j."""
    if not h > 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(field(x + e)) - np.asarray(field(x - e))) / (2.0 * h))
    return np.column_stack(cols)


def qr_decompose(M) -> tuple[np.ndarray, np.ndarray]:
    """Thin Householder QR with a nonnegative diagonal on R.

    Raises RankDeficient if a diagonal entry of R falls to 1e-300 or below.
    """
    A = as_matrix(M)
    m, n = A.shape
    if m < n:
        raise RankDeficient(f"{m}x{n} matrix cannot have full column rank")
    R = A.copy()
    vs = []
    for j in range(n):
        v = R[j:, j].copy()
        normx = math.sqrt(float(v @ v))
        if normx <= 1e-300:
            raise RankDeficient(f"column {j} is numerically dependent")
        alpha = -normx if v[0] >= 0 else normx
        v[0] -= alpha
        vv = float(v @ v)
        if vv > 0.0:
            R[j:, j:] -= v[:, None] * ((2.0 / vv) * (v @ R[j:, j:]))
        vs.append((v, vv))
    Q = np.eye(m, n)
    for j in range(n - 1, -1, -1):
        v, vv = vs[j]
        if vv > 0.0:
            Q[j:, :] -= v[:, None] * ((2.0 / vv) * (v @ Q[j:, :]))
    R = np.triu(R[:n, :])
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    Q *= signs
    R *= signs[:, None]
    if np.min(np.diag(R)) <= 1e-300:
        raise RankDeficient("R diagonal underflow")
    return Q, R


def svd(M, max_sweeps: int = 60) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD by one-sided (Hestenes) Jacobi rotations.

    Returns ``U`` (m x k), ``S`` descending (k,), ``V`` (n x k) with
    k = min(m, n) and ``M = U @ diag(S) @ V.T``.
    """
    A = as_matrix(M)
    m, n = A.shape
    if m < n:
        V, S, U = svd(A.T, max_sweeps)
        return U, S, V
    U = np.array(A, order="F")
    V = np.eye(n, order="F")
    eps = np.finfo(float).eps
    # columns at roundoff level relative to the whole matrix are left alone,
    # otherwise the relative off-diagonal test keeps rotating pure noise
    negligible = (eps * float(np.linalg.norm(A))) ** 2
    for _ in range(max_sweeps):
        rotated = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                ui, uj = U[:, i], U[:, j]
                alpha = float(ui @ ui)
                beta = float(uj @ uj)
                gamma = float(ui @ uj)
                if (abs(gamma) <= eps * math.sqrt(alpha * beta) or gamma == 0.0
                        or alpha <= negligible or beta <= negligible):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                new_i = c * ui - s * uj
                U[:, j] = s * ui + c * uj
                U[:, i] = new_i
                vi, vj = V[:, i].copy(), V[:, j]
                V[:, i] = c * vi - s * vj
                V[:, j] = s * vi + c * vj
        if not rotated:
            break
    else:
        raise ConvergenceFailure(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    S = np.sqrt(np.einsum("ij,ij->j", U, U))
    order = np.argsort(-S, kind="stable")
    S, U, V = S[order], U[:, order], V[:, order]
    scale = S[0] if S.size else 0.0
    for j in range(n):
        if S[j] > eps * scale * max(m, n) and S[j] > 0.0:
            U[:, j] /= S[j]
        else:
            U[:, j] = _complement_column(U[:, :j], m)
    return np.ascontiguousarray(U), S, np.ascontiguousarray(V)


def _complement_column(B: np.ndarray, m: int) -> np.ndarray:
    # unit vector orthogonal to the columns of B (B assumed orthonormal)
    for e in np.eye(m):
        w = e - B @ (B.T @ e) if B.size else e.copy()
        w = w - B @ (B.T @ w) if B.size else w
        nw = np.linalg.norm(w)
        if nw > 0.5:
            return w / nw
    raise ConvergenceFailure("could not complete orthonormal basis")


def singular_values(M) -> np.ndarray:
    return svd(M)[1]


def numerical_rank(M, tol: float = RANK_TOL) -> int:
    """Count singular values above ``tol`` times the largest one."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    S = singular_values(M)
    if S.size == 0 or S[0] == 0.0:
        return 0
    return int(np.sum(S > tol * S[0]))


def orthonormal_basis(M, tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the numerical column space of ``M``."""
    U, S, _ = svd(M)
    if S.size == 0 or S[0] == 0.0:
        return np.zeros((as_matrix(M).shape[0], 0))
    return U[:, S > tol * S[0]]


def principal_angles(A, B) -> np.ndarray:
    """Principal angles (degrees, ascending) between span(A) and span(B).

    Columns are orthonormalized first. Small angles come from the sines
    (the projection residual), large ones from the cosines; this keeps
    sub-microradian angles resolvable.
    """
    A = as_matrix(A)
    B = as_matrix(B)
    if A.shape[0] != B.shape[0]:
        raise DimensionMismatch(f"row dimensions differ: {A.shape[0]} vs {B.shape[0]}")
    if A.shape[1] < 1 or B.shape[1] < 1:
        raise DimensionMismatch("both subspaces need at least one column")
    QA, _ = qr_decompose(A)
    QB, _ = qr_decompose(B)
    if QA.shape[1] > QB.shape[1]:
        QA, QB = QB, QA
    k = QA.shape[1]
    cos = np.clip(singular_values(QA.T @ QB)[:k], 0.0, 1.0)
    resid = QA - QB @ (QB.T @ QA)
    sin = np.clip(singular_values(resid)[::-1][:k], 0.0, 1.0)
    big = np.degrees(np.arccos(cos))  # ascending
    small = np.degrees(np.arcsin(sin))  # ascending
    angles = np.where(big < 45.0, small, big)
    return np.clip(np.sort(angles), 0.0, 90.0)


def matrix_exp(A) -> np.ndarray:
    """exp(A) by scaling and squaring around a degree-18 Taylor block."""
    A = as_matrix(A)
    n, m = A.shape
    if n != m:
        raise DimensionMismatch("matrix_exp needs a square matrix")
    norm1 = float(np.max(np.sum(np.abs(A), axis=0))) if n else 0.0
    s = max(0, math.ceil(math.log2(norm1 / 0.5))) if norm1 > 0.5 else 0
    X = A / (2.0 ** s)
    I = np.eye(n)
    E = I.copy()
    for k in range(18, 0, -1):
        E = I + (X @ E) / k
    for _ in range(s):
        E = E @ E
    return E


def derive_seed(seed: int, *keys) -> int:
    """Stable 63-bit child seed from a parent seed and labels (not hash(), which is salted)."""
    text = "\x1f".join([str(int(seed))] + [str(k) for k in keys])
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little") >> 1
