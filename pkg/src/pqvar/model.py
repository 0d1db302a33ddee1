"""Core value types: regimes, regions, simplicial grids, discrete fields, reports.

Everything here is immutable after construction so that solver assembly and
diagnostics sweeps can read the same objects from several workers.
"""

import itertools
import math
from dataclasses import dataclass, field

import numpy as np


class InvalidRegimeError(ValueError):
    """Exponent tuple violates the basic ordering 2 <= p <= q, or n/N/mu/L are out of range."""


class ShapeMismatchError(ValueError):
    """A gradient matrix does not match the (N, n) shape expected by its context."""


class RegionError(ValueError):
    """A measurement region falls outside the solved domain."""


# --------------------------------------------------------------------------- regimes


@dataclass(frozen=True)
class Regime:
    """Structural tuple (n, N, p, q, mu, L) governing assumptions and thresholds."""

    n: int
    N: int
    p: float
    q: float
    mu: float
    L: float

    def __post_init__(self):
        if self.n < 2 or int(self.n) != self.n:
            raise InvalidRegimeError(f"space dimension n must be an integer >= 2, got {self.n}")
        if self.N < 1 or int(self.N) != self.N:
            raise InvalidRegimeError(f"target dimension N must be an integer >= 1, got {self.N}")
        if not (2.0 <= self.p <= self.q < math.inf):
            raise InvalidRegimeError(f"exponents must satisfy 2 <= p <= q < inf, got p={self.p}, q={self.q}")
        if not (0.0 <= self.mu <= 1.0):
            raise InvalidRegimeError(f"degeneracy parameter mu must lie in [0, 1], got {self.mu}")
        if not (self.L > 1.0):
            raise InvalidRegimeError(f"structural constant L must exceed 1, got {self.L}")

    @property
    def q_conj(self):
        """Conjugate exponent q' = q/(q-1)."""
        return self.q / (self.q - 1.0)

    @property
    def p_conj(self):
        return self.p / (self.p - 1.0)

    def with_exponents(self, p=None, q=None):
        return Regime(self.n, self.N, self.p if p is None else p,
                      self.q if q is None else q, self.mu, self.L)


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    threshold: float  # math.inf in low dimension
    rule: str


def validate_regime(r: Regime) -> Admissibility:
    """Gap condition on (n, p, q): q below p(n-1)/(n-3) for n >= 4, unbounded for n in {2, 3}."""
    if r.n >= 4:
        threshold = r.p * (r.n - 1) / (r.n - 3)
        return Admissibility(r.q < threshold, threshold, "q<p(n-1)/(n-3)")
    return Admissibility(True, math.inf, "n in {2,3}: unbounded")


def classical_gates(r: Regime) -> dict:
    """Evaluate the classical exponent gates for comparison against the main gap condition.

    Returns named booleans plus the Holder exponent 1-(n-2)/p when p > n-2 (n >= 3).
    """
    n, p, q = r.n, r.p, r.q
    gates = {
        # q < np/(n-2) (unbounded for n = 2)
        "w1q_gap": q < n * p / (n - 2) if n >= 3 else True,
        # q < p + 2p/n
        "w1p_lipschitz_gap": q < p + 2.0 * p / n,
        # q < p + 2p/(n-1)
        "sphere_refined_gap": q < p + 2.0 * p / (n - 1),
        # q <= np/(n-2) (non-strict: gradient L^q integrability)
        "grad_lq_gap": q <= n * p / (n - 2) if n >= 3 else True,
        "holder": p > n - 2 and n >= 3,
    }
    gates["holder_exponent"] = 1.0 - (n - 2) / p if gates["holder"] else None
    return gates


# --------------------------------------------------------------------------- regions


@dataclass(frozen=True)
class Region:
    """Ball or cube used for region-restricted averages; radius is the half-side for cubes."""

    center: tuple
    radius: float
    kind: str = "ball"

    def __post_init__(self):
        if self.radius <= 0:
            raise RegionError(f"region radius must be positive, got {self.radius}")
        if self.kind not in ("ball", "cube"):
            raise RegionError(f"region kind must be 'ball' or 'cube', got {self.kind!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def scaled(self, factor: float) -> "Region":
        """Concentric region with radius scaled by `factor` (e.g. B/2 = B.scaled(0.5))."""
        return Region(self.center, self.radius * factor, self.kind)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask for points of shape (..., dim)."""
        d = points - np.asarray(self.center)
        if self.kind == "ball":
            return (d ** 2).sum(axis=-1) < self.radius ** 2
        return np.abs(d).max(axis=-1) < self.radius

    def inside_unit_box(self) -> bool:
        c = np.asarray(self.center)
        return bool(np.all(c - self.radius >= 0.0) and np.all(c + self.radius <= 1.0))


# --------------------------------------------------------------------------- grids

def _kuhn_offsets(dim):
    """Vertex offsets of the Kuhn simplices of the unit cell, one (dim+1, dim) block per type.

    Each permutation pi orders the coordinate increments: v0 = 0, v_k = v_{k-1} + e_{pi(k)}.
    """
    blocks = []
    for perm in itertools.permutations(range(dim)):
        verts = [np.zeros(dim)]
        for axis in perm:
            verts.append(verts[-1] + np.eye(dim)[axis])
        blocks.append(np.array(verts))
    return np.array(blocks)  # (dim!, dim+1, dim)


def _hat_gradients(verts):
    """Gradients of the barycentric hat functions on a simplex with vertex rows `verts`."""
    dim = verts.shape[1]
    M = np.hstack([np.ones((dim + 1, 1)), verts])
    C = np.linalg.inv(M)  # columns: coefficients of each hat function
    return C[1:, :].T  # (dim+1, dim)


class Grid:
    """Kuhn triangulation of the unit box [0,1]^dim with cells_per_side cells per axis.

    Simplices are stored grouped by type (the permutation defining each Kuhn
    simplex), so simplex `t * n_cells + c` is the type-`t` simplex of cell `c`.
    The triangulation is fixed, which makes per-simplex gradients reproducible
    bit-for-bit across runs.
    """

    def __init__(self, dim: int, cells_per_side: int):
        if dim not in (2, 3):
            raise ValueError(f"grid dimension must be 2 or 3, got {dim}")
        if cells_per_side < 2 or int(cells_per_side) != cells_per_side:
            raise ValueError(f"cells_per_side must be an integer >= 2, got {cells_per_side}")
        self.dim = dim
        self.cells_per_side = int(cells_per_side)
        m = self.cells_per_side
        self.h = 1.0 / m
        self.nodes_per_side = m + 1
        self.n_nodes = (m + 1) ** dim
        self.n_cells = m ** dim
        self.n_types = math.factorial(dim)
        self.n_simplices = self.n_cells * self.n_types

        axes = [np.arange(m + 1) for _ in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        self.node_coords = np.stack([g.ravel() for g in mesh], axis=-1) * self.h  # (n_nodes, dim)

        # boundary nodes: any lattice index at 0 or m
        lattice = np.stack([g.ravel() for g in mesh], axis=-1)
        self.boundary_mask = np.any((lattice == 0) | (lattice == m), axis=1)
        self.interior_mask = ~self.boundary_mask

        offsets = _kuhn_offsets(dim)  # (types, dim+1, dim)
        self.hat_grads = np.array([_hat_gradients(o * self.h) for o in offsets])  # (types, dim+1, dim)
        self.simplex_volume = self.h ** dim / math.factorial(dim)

        caxes = [np.arange(m) for _ in range(dim)]
        cmesh = np.meshgrid(*caxes, indexing="ij")
        cell_idx = np.stack([g.ravel() for g in cmesh], axis=-1)  # (n_cells, dim)
        shape = (m + 1,) * dim
        vert_ids = []
        for t in range(self.n_types):
            ids = [np.ravel_multi_index((cell_idx + offsets[t][a]).astype(int).T, shape)
                   for a in range(dim + 1)]
            vert_ids.append(np.stack(ids, axis=-1))  # (n_cells, dim+1)
        self.simplex_vertices = np.concatenate(vert_ids, axis=0)  # (n_simplices, dim+1)
        self.barycenters = self.node_coords[self.simplex_vertices].mean(axis=1)
        self.cell_centers = (cell_idx + 0.5) * self.h  # (n_cells, dim)

        for arr in (self.node_coords, self.simplex_vertices, self.barycenters, self.cell_centers):
            arr.setflags(write=False)

    def simplices_in(self, region: Region) -> np.ndarray:
        """Mask of simplices whose barycenter lies in the region."""
        return region.contains(self.barycenters)

    def cells_in(self, region: Region) -> np.ndarray:
        return region.contains(self.cell_centers)

    def per_cell(self, simplex_values: np.ndarray) -> np.ndarray:
        """Average a per-simplex quantity over the simplices of each cell; leading axis reshaped
        to the (m, m[, m]) cell lattice."""
        m = self.cells_per_side
        byc = simplex_values.reshape((self.n_types, self.n_cells) + simplex_values.shape[1:])
        return byc.mean(axis=0).reshape((m,) * self.dim + simplex_values.shape[1:])


class DiscreteField:
    """Piecewise-linear vector field on a Grid; per-simplex gradients cached at construction."""

    def __init__(self, grid: Grid, nodal_values: np.ndarray):
        nodal_values = np.asarray(nodal_values, dtype=float)
        if nodal_values.ndim == 1:
            nodal_values = nodal_values[:, None]
        if nodal_values.shape[0] != grid.n_nodes:
            raise ShapeMismatchError(
                f"nodal_values has {nodal_values.shape[0]} rows, grid has {grid.n_nodes} nodes")
        self.grid = grid
        self.values = nodal_values.copy()
        self.N = nodal_values.shape[1]
        self.gradients = self._compute_gradients()
        self.values.setflags(write=False)
        self.gradients.setflags(write=False)

    def _compute_gradients(self):
        g = self.grid
        grads = np.empty((g.n_simplices, self.N, g.dim))
        for t in range(g.n_types):
            lo, hi = t * g.n_cells, (t + 1) * g.n_cells
            verts = g.simplex_vertices[lo:hi]  # (cells, dim+1)
            vals = self.values[verts]  # (cells, dim+1, N)
            # exact gradient of the linear interpolant: sum_a u_a (x) hatgrad_a
            grads[lo:hi] = np.einsum("cav,ad->cvd", vals, g.hat_grads[t])
        return grads

    def replace_values(self, nodal_values) -> "DiscreteField":
        return DiscreteField(self.grid, nodal_values)


# --------------------------------------------------------------------------- reports


@dataclass
class CheckReport:
    passed: bool
    worst_ratio: float
    witness: np.ndarray | None = None


@dataclass
class SolveReport:
    energy: float
    residual_sup: float
    iterations: int
    epsilon: float = 0.0
    gamma_eps: float = 0.0


@dataclass
class DiagnosticsEntry:
    estimate_id: str
    lhs: float
    rhs: float
    fitted_exponent: float | None = None
    grid: int | None = None
    amplitude: float | None = None
    epsilon: float | None = None

    @property
    def ratio(self):
        if self.rhs == 0.0:
            return 0.0 if self.lhs == 0.0 else math.inf
        return self.lhs / self.rhs


@dataclass
class DiagnosticsReport:
    entries: list = field(default_factory=list)

    def add(self, entry: DiagnosticsEntry):
        if not (entry.lhs >= 0.0 and entry.rhs >= 0.0):
            raise ValueError(f"diagnostics entries need lhs, rhs >= 0, got {entry}")
        self.entries.append(entry)

    def by_id(self, estimate_id: str):
        return [e for e in self.entries if e.estimate_id == estimate_id]

    def extend(self, other: "DiagnosticsReport"):
        for e in other.entries:
            self.add(e)
