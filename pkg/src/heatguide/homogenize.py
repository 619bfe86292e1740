"""Collocation solver for the limiting integral equation and the stationary average."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .core import (DomainError, cell_integral_matrix, cell_self_integral, dense_solve, free_field,
                   kernel_from_distance, newtonian_potential)
from .manybody import ResolventField
from .particles import Box, MediumSpec

MAX_CELLS = 20000


@dataclass(frozen=True)
class ContinuumGrid:
    domain: Box
    shape: tuple[int, int, int]

    def __post_init__(self):
        if not isinstance(self.domain, Box):
            raise DomainError("continuum grids need a box domain")
        if min(self.shape) < 2:
            raise DomainError("grid needs at least 2 cells per axis")

    @property
    def side(self) -> np.ndarray:
        return self.domain.sides / np.asarray(self.shape)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.side))

    @property
    def centers(self) -> np.ndarray:
        lo = np.asarray(self.domain.lo, float)
        axes = [lo[i] + self.side[i] * (np.arange(self.shape[i]) + 0.5) for i in range(3)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, 3)

    def locate(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        ijk = np.floor((x - np.asarray(self.domain.lo)) / self.side).astype(int)
        ijk = np.clip(ijk, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(ijk.T, self.shape)


@dataclass(frozen=True)
class PotentialField:
    """Absorption ``q = c h N`` sampled at the cell centres (zero outside D)."""

    values: np.ndarray

    def __post_init__(self):
        if np.any(np.real(self.values) < 0):
            raise DomainError("potential q must have nonnegative real part")

    @classmethod
    def from_medium(cls, grid: ContinuumGrid, spec: MediumSpec, c_S: float = 4.0 * np.pi) -> "PotentialField":
        x = grid.centers
        return cls(c_S * spec.h(x) * np.real(spec.N(x)))


def collocation_matrix(grid: ContinuumGrid, lam: float) -> np.ndarray:
    """``W_ij = int_{cell j} g(x_i, y) dy`` with midpoint off the diagonal."""
    if grid.n_cells > MAX_CELLS:
        raise DomainError(f"grid with {grid.n_cells} cells exceeds the dense limit {MAX_CELLS}")
    x = grid.centers
    r = cdist(x, x)
    np.fill_diagonal(r, 1.0)
    W = kernel_from_distance(r, lam) * grid.cell_volume
    np.fill_diagonal(W, cell_self_integral(grid.side, lam))
    return W


@dataclass
class ContinuumSolution:
    field: ResolventField
    grid: ContinuumGrid
    q: PotentialField
    residual: float
    cond: float
    warnings: list[str] = field(default_factory=list)

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def evaluate(self, x, source, quad: dict | None = None) -> np.ndarray:
        """Extend the grid solution to arbitrary points, treating ``q U`` as
        piecewise constant; cells near ``x`` are integrated exactly."""
        x = np.atleast_2d(np.asarray(x, float))
        lam = self.field.lam
        rhs = free_field(x, lam, source, **(quad or {})) if lam > 0 else newtonian_potential(x, source, **(quad or {}))
        W = cell_integral_matrix(x, self.grid.centers, self.grid.side, lam)
        return rhs - W @ (self.q.values * self.values)


def solve_resolvent_ie(grid: ContinuumGrid, q: PotentialField, lam: float, source,
                       quad: dict | None = None) -> ContinuumSolution:
    """Collocation solution of ``U = F - int_D g q U`` at the cell centres."""
    if lam <= 0:
        raise DomainError("solve_resolvent_ie needs lambda > 0")
    W = collocation_matrix(grid, lam)
    F = free_field(grid.centers, lam, source, **(quad or {}))
    A = W * q.values[None, :]
    A[np.diag_indices(grid.n_cells)] += 1.0
    U, cond = dense_solve(A, F.astype(A.dtype), "continuum system")
    residual = float(np.max(np.abs(A @ U - F)))
    field_ = ResolventField(lam, grid.centers, U, "integral-equation", {"F": F})
    return ContinuumSolution(field_, grid, q, residual, cond)


def _check_support(grid: ContinuumGrid, source) -> None:
    center = getattr(source, "center", None)
    radius = getattr(source, "radius", None)
    if center is None or radius is None:
        return
    lo, hi = grid.domain.bounds
    c = np.asarray(center, float)
    if np.any(c - radius < lo - 1e-12) or np.any(c + radius > hi + 1e-12):
        raise DomainError("source support must lie inside the grid domain")


def stationary_average(grid: ContinuumGrid, q: PotentialField, source, quad: dict | None = None,
                       cond_warn: float = 1e8) -> ContinuumSolution:
    """Solve ``(I + B) psi = phi`` with ``phi = int g0 f`` and ``B`` the ``g0 q`` operator.

    The source must be supported inside the grid domain.
    """
    _check_support(grid, source)
    W = collocation_matrix(grid, 0.0)
    phi = newtonian_potential(grid.centers, source, **(quad or {}))
    A = W * q.values[None, :]
    A[np.diag_indices(grid.n_cells)] += 1.0
    psi, cond = dense_solve(A, phi.astype(A.dtype), "stationary system")
    notes = []
    if cond > cond_warn:
        notes.append(f"I + B is ill-conditioned (condition estimate {cond:.3e})")
    residual = float(np.max(np.abs(A @ psi - phi)))
    field_ = ResolventField(0.0, grid.centers, psi, "stationary-average", {"phi": phi})
    return ContinuumSolution(field_, grid, q, residual, cond, notes)
