"""Phase-space discretization: periodic cells times a truncated 3-D velocity lattice."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


class GridError(ValueError):
    """Raised for malformed grids or arrays that do not match a grid."""


@dataclass(frozen=True)
class VelocityGrid:
    """Uniform midpoint lattice on the cube ``[-v_max, v_max]^3``.

    Nodes sit at ``+-(k + 1/2) h`` so the node set is its own negation and
    odd moments of radial functions vanish identically.
    """

    v_max: float
    n_per_axis: int

    def __post_init__(self):
        if not self.v_max > 0:
            raise GridError(f"v_max must be positive, got {self.v_max}")
        if self.n_per_axis < 2 or self.n_per_axis % 2:
            raise GridError(
                f"n_per_axis must be even and >= 2 (midpoint nodes stay symmetric), got {self.n_per_axis}"
            )

    @property
    def h(self) -> float:
        return 2.0 * self.v_max / self.n_per_axis

    @cached_property
    def axis(self) -> np.ndarray:
        return -self.v_max + (np.arange(self.n_per_axis) + 0.5) * self.h

    @cached_property
    def nodes(self) -> np.ndarray:
        a = self.axis
        v1, v2, v3 = np.meshgrid(a, a, a, indexing="ij")
        return np.ascontiguousarray(np.column_stack([v1.ravel(), v2.ravel(), v3.ravel()]))

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.h**3)

    @cached_property
    def speed2(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.nodes, self.nodes)

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index of the node ``-v`` for every node ``v``."""
        n = self.n_per_axis
        idx = np.arange(self.size).reshape(n, n, n)
        return idx[::-1, ::-1, ::-1].ravel()

    @property
    def size(self) -> int:
        return self.n_per_axis**3


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic 1-D torus of ``n_cells`` cells, or a single point when ``dim == 0``."""

    n_cells: int = 1
    length: float = 1.0
    dim: int = 0

    def __post_init__(self):
        if self.dim not in (0, 1):
            raise GridError(f"spatial dim must be 0 or 1, got {self.dim}")
        if self.dim == 0 and self.n_cells != 1:
            raise GridError("a spatially homogeneous grid has exactly one cell")
        if self.n_cells < 1 or not self.length > 0:
            raise GridError("need n_cells >= 1 and length > 0")

    @property
    def dx(self) -> float:
        return self.length / self.n_cells

    @cached_property
    def centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.dx


@dataclass(frozen=True)
class PhaseGrid:
    space: SpatialGrid
    velocity: VelocityGrid

    @property
    def shape(self) -> tuple[int, int]:
        return (self.space.n_cells, self.velocity.size)

    @property
    def size(self) -> int:
        return self.space.n_cells * self.velocity.size


ABSOLUTE = "absolute"
PERTURBATION = "perturbation"


@dataclass
class DistributionPair:
    """Two gridded functions ``(first, second)`` of shape ``(n_cells, n_nodes)``.

    ``kind`` tells whether these are distributions ``F_k`` or weighted
    perturbations ``f_k``; tendencies produced by the collision operator use
    ``"tendency"``.
    """

    first: np.ndarray
    second: np.ndarray
    kind: str = ABSOLUTE

    def __post_init__(self):
        self.first = np.asarray(self.first, dtype=float)
        self.second = np.asarray(self.second, dtype=float)
        if self.first.shape != self.second.shape:
            raise GridError(f"species arrays differ in shape: {self.first.shape} vs {self.second.shape}")

    def __iter__(self):
        yield self.first
        yield self.second

    def copy(self) -> DistributionPair:
        return DistributionPair(self.first.copy(), self.second.copy(), self.kind)

    def axpy(self, a: float, other: DistributionPair) -> DistributionPair:
        """Return ``self + a * other`` keeping ``self.kind``."""
        return DistributionPair(self.first + a * other.first, self.second + a * other.second, self.kind)

    def scaled(self, a: float) -> DistributionPair:
        return DistributionPair(a * self.first, a * self.second, self.kind)

    def min(self) -> float:
        return float(min(self.first.min(), self.second.min()))

    def max(self) -> float:
        return float(max(self.first.max(), self.second.max()))


def make_velocity_grid(v_max: float, n_per_axis: int) -> VelocityGrid:
    return VelocityGrid(float(v_max), int(n_per_axis))


def default_velocity_grid(m2: float, n_per_axis: int = 16) -> VelocityGrid:
    """Cube wide enough for the lighter species: ``v_max = 6 / sqrt(m2)``."""
    return make_velocity_grid(6.0 / np.sqrt(m2), n_per_axis)


def check_on_grid(values, grid: PhaseGrid) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim == 1 and grid.space.n_cells == 1:
        values = values[None, :]
    if values.shape != grid.shape:
        raise GridError(f"array of shape {values.shape} does not match phase grid {grid.shape}")
    return values


def inner_product_v(g, h, grid: VelocityGrid) -> float:
    """Discrete ``<g, h>_{L^2_v} = sum_j w_j g_j h_j`` at a single cell."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape != (grid.size,) or h.shape != (grid.size,):
        raise GridError(f"expected arrays of length {grid.size}, got {g.shape} and {h.shape}")
    return float(np.dot(grid.weights * g, h))


def inner_product_xv(a: DistributionPair, b: DistributionPair, grid: PhaseGrid) -> float:
    """Discrete ``<(a1,a2),(b1,b2)>_{L^2_{x,v}}``: cell-width weighted sum of both species."""
    for arr in (*a, *b):
        if arr.shape != grid.shape:
            raise GridError(f"array of shape {arr.shape} does not match phase grid {grid.shape}")
    w = grid.velocity.weights
    total = np.sum((a.first * b.first + a.second * b.second) @ w)
    return float(total * grid.space.dx)


def norm_xv2(a: DistributionPair, grid: PhaseGrid) -> float:
    return inner_product_xv(a, a, grid)
