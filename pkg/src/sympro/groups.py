"""Linear Lie group actions given by generator matrices.

Every action here is a linear representation on R^d, so the derivative of
the action ``D(g)_x`` is just ``g`` and fundamental fields are ``G_a x``.
Complex coordinates are realified as (re, im) pairs, with multiplication
by ``i`` acting as the 2x2 block ``J2``.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantRankViolation, ConfigError, DimensionMismatch
from .numerics import J2, RANK_TOL, Trajectory, matrix_exp, singular_values


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GroupSpec:
    name: str
    generators: tuple
    expected_orbit_dim: int
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        gens = tuple(_frozen(G) for G in self.generators)
        if not gens:
            raise ValueError("a group needs at least one generator (use trivial_rep)")
        d = gens[0].shape[0]
        for G in gens:
            if G.shape != (d, d):
                raise DimensionMismatch(f"generator shape {G.shape} != ({d}, {d})")
            if not np.all(np.isfinite(G)):
                raise ValueError("generator has non-finite entries")
        if not 0 <= self.expected_orbit_dim <= len(gens):
            raise ValueError("expected_orbit_dim must lie in [0, algebra_dim]")
        object.__setattr__(self, "generators", gens)

    @property
    def dim(self) -> int:
        return self.generators[0].shape[0]

    @property
    def algebra_dim(self) -> int:
        return len(self.generators)

    def algebra_element(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float).ravel()
        if xi.size != self.algebra_dim:
            raise DimensionMismatch(f"expected {self.algebra_dim} algebra coefficients, got {xi.size}")
        return np.tensordot(xi, np.stack(self.generators), axes=1)

    def element(self, xi) -> np.ndarray:
        """Group element exp(sum_a xi_a G_a)."""
        return matrix_exp(self.algebra_element(xi))

    def to_dict(self) -> dict:
        return {"name": self.name, **self.params, "expected_orbit_dim": self.expected_orbit_dim}


def _block_diag(*blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def realify(C) -> np.ndarray:
    """Real 2m x 2m matrix of a complex m x m matrix on (re, im) pairs."""
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    m, n = C.shape
    out = np.zeros((2 * m, 2 * n))
    out[0::2, 0::2] = C.real
    out[0::2, 1::2] = -C.imag
    out[1::2, 0::2] = C.imag
    out[1::2, 1::2] = C.real
    return out


def circle_rep(weights, invariant_dims: int = 0) -> GroupSpec:
    """S^1 acting with integer charges on complex coordinates.

    ``circle_rep((1, 2), 1)`` is the action (z, w, h) -> (e^{it} z, e^{2it} w, h).
    """
    weights = [int(w) for w in weights]
    if not weights:
        raise ValueError("weights must be nonempty")
    blocks = [w * J2 for w in weights] + [np.zeros((invariant_dims, invariant_dims))]
    G = _block_diag(*blocks)
    q = 1 if any(weights) else 0
    return GroupSpec("circle", (G,), q, {"weights": weights, "invariant_dims": int(invariant_dims)})


def trivial_rep(d: int) -> GroupSpec:
    return GroupSpec("trivial", (np.zeros((d, d)),), 0, {"dim": int(d)})


def torus_rep(q: int) -> GroupSpec:
    if q < 1:
        raise ValueError("q must be >= 1")
    gens = []
    for k in range(q):
        G = np.zeros((2 * q, 2 * q))
        G[2 * k:2 * k + 2, 2 * k:2 * k + 2] = J2
        gens.append(G)
    return GroupSpec("torus", tuple(gens), q, {"q": int(q)})


def so_n_rep(n: int) -> GroupSpec:
    """Defining representation of SO(n); generator (i, j) rotates e_i toward e_j."""
    if n < 2:
        raise ValueError("n must be >= 2")
    gens = []
    for i in range(n):
        for j in range(i + 1, n):
            G = np.zeros((n, n))
            G[j, i] = 1.0
            G[i, j] = -1.0
            gens.append(G)
    return GroupSpec("so", tuple(gens), n - 1, {"n": int(n)})


def u_m_rep(m: int) -> GroupSpec:
    """Realified defining representation of U(m) with a skew-Hermitian basis."""
    if m < 1:
        raise ValueError("m must be >= 1")
    gens = []
    for k in range(m):
        C = np.zeros((m, m), dtype=complex)
        C[k, k] = 1j
        gens.append(realify(C))
    for j in range(m):
        for k in range(j + 1, m):
            C = np.zeros((m, m), dtype=complex)
            C[j, k], C[k, j] = 1.0, -1.0
            gens.append(realify(C))
            C = np.zeros((m, m), dtype=complex)
            C[j, k], C[k, j] = 1j, 1j
            gens.append(realify(C))
    return GroupSpec("u", tuple(gens), 2 * m - 1, {"m": int(m)})


def product_rep(a: GroupSpec, b: GroupSpec) -> GroupSpec:
    """Direct sum action of a x b on R^(da + db)."""
    da, db = a.dim, b.dim
    gens = [_block_diag(G, np.zeros((db, db))) for G in a.generators]
    gens += [_block_diag(np.zeros((da, da)), G) for G in b.generators]
    return GroupSpec(
        "product",
        tuple(gens),
        a.expected_orbit_dim + b.expected_orbit_dim,
        {"product": [a.to_dict(), b.to_dict()]},
    )


def group_from_dict(spec: dict) -> GroupSpec:
    spec = dict(spec)
    name = spec.pop("name", None)
    spec.pop("expected_orbit_dim", None)
    builders = {
        "circle": (("weights",), ("invariant_dims",), lambda a: circle_rep(a["weights"], a.get("invariant_dims", 0))),
        "torus": (("q",), (), lambda a: torus_rep(a["q"])),
        "so": (("n",), (), lambda a: so_n_rep(a["n"])),
        "u": (("m",), (), lambda a: u_m_rep(a["m"])),
        "trivial": (("dim",), (), lambda a: trivial_rep(a["dim"])),
        "product": (("product",), (), lambda a: product_rep(*(group_from_dict(p) for p in a["product"]))),
    }
    if name not in builders:
        raise ConfigError(f"unknown group name: {name!r}")
    required, optional, build = builders[name]
    missing = [k for k in required if k not in spec]
    extra = sorted(set(spec) - set(required) - set(optional))
    if missing:
        raise ConfigError(f"group '{name}' is missing field(s) {missing}")
    if extra:
        raise ConfigError(f"unknown group fields for '{name}': {extra}")
    return build(spec)


def fundamental_field(g: GroupSpec, xi, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size != g.dim:
        raise DimensionMismatch(f"state has dimension {x.size}, group acts on {g.dim}")
    return g.algebra_element(xi) @ x


def action_matrix(g: GroupSpec, x) -> np.ndarray:
    """d x algebra_dim matrix with columns G_a x; its range is the orbit tangent."""
    x = np.asarray(x, dtype=float)
    if x.size != g.dim:
        raise DimensionMismatch(f"state has dimension {x.size}, group acts on {g.dim}")
    return np.column_stack([G @ x for G in g.generators])


@dataclass(frozen=True)
class OrbitDiagnostics:
    orbit_rank: int
    sigma_min_nonzero: float
    sigma_max: float
    uniform_lower: float
    uniform_upper: float
    constant_rank: bool
    ranks: tuple = ()

    def to_dict(self) -> dict:
        return {
            "orbit_rank": self.orbit_rank,
            "sigma_min_nonzero": self.sigma_min_nonzero,
            "sigma_max": self.sigma_max,
            "uniform_lower": self.uniform_lower,
            "uniform_upper": self.uniform_upper,
            "constant_rank": self.constant_rank,
        }


def orbit_diagnostics(g: GroupSpec, traj: Trajectory | np.ndarray, rank_tol: float = RANK_TOL,
                      max_points: int = 256, strict: bool = False) -> OrbitDiagnostics:
    """Rank and singular-value bounds of the action map along a trajectory.

    Ranks are measured against the largest singular value seen anywhere on
    the trajectory, so an orbit shrinking toward a fixed point of the
    action registers as a rank drop. ``uniform_lower`` is the minimum of the
    q-th singular value (q = expected orbit dimension) and ``uniform_upper``
    the maximum of the first. With ``strict=True`` a rank change raises
    ConstantRankViolation instead of only clearing ``constant_rank``.
    """
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    states = traj.states if isinstance(traj, Trajectory) else np.atleast_2d(traj)
    if len(states) > max_points:
        idx = np.unique(np.linspace(0, len(states) - 1, max_points).round().astype(int))
        states = states[idx]
    svals = np.array([singular_values(action_matrix(g, x)) for x in states])
    scale = float(svals[:, 0].max())
    ranks = (svals > rank_tol * scale).sum(axis=1) if scale > 0 else np.zeros(len(states), int)
    modal = Counter(ranks.tolist()).most_common(1)[0][0]
    q = g.expected_orbit_dim
    lower = float(svals[:, q - 1].min()) if q > 0 else 0.0
    final = svals[-1]
    diag = OrbitDiagnostics(
        orbit_rank=int(modal),
        sigma_min_nonzero=float(final[modal - 1]) if modal > 0 else 0.0,
        sigma_max=float(final[0]),
        uniform_lower=lower,
        uniform_upper=scale,
        constant_rank=bool(np.all(ranks == ranks[0])),
        ranks=tuple(int(r) for r in ranks),
    )
    if strict and not diag.constant_rank:
        raise ConstantRankViolation(
            f"orbit rank varies along the trajectory: {sorted(set(diag.ranks))}, "
            f"uniform lower singular value {lower:.3g}")
    return diag
