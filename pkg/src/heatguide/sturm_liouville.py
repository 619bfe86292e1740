"""Finite-difference eigensolvers for ``-w'' + Q w = nu w`` on an interval."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .core import DomainError
from .gelfand_levitan import Potential1D, RadialPotential, _fd_weights

DEFAULT_GRID = 2048


@dataclass(frozen=True)
class EigenPair1D:
    """Eigenvalue, eigenfunction samples on ``grid`` (endpoints included) and ``alpha = int phi^2``.

    ``raw`` keeps the unextrapolated eigenvalues keyed by grid size.
    """

    index: int
    eigenvalue: float
    grid: np.ndarray
    values: np.ndarray
    alpha: float
    raw: dict = field(default_factory=dict)
    psi: np.ndarray | None = None


def _q_on(Q: Potential1D | None, x: np.ndarray) -> np.ndarray:
    if Q is None:
        return np.zeros_like(x)
    return Q.on_grid(x)


def _check_count(count: int, n: int) -> None:
    if count < 1:
        raise DomainError("count must be positive")
    if count > n // 8:
        raise DomainError(f"count={count} exceeds grid_n/8={n // 8}; refine the grid")


def fd_dirichlet_eigen(Q: Potential1D | None, n: int, count: int, length: float = np.pi,
                       vectors: bool = False):
    """Lowest ``count`` eigenpairs of the 3-point Dirichlet operator on ``n`` cells."""
    h = length / n
    x = h * np.arange(1, n)
    d = 2.0 / h ** 2 + _q_on(Q, x)
    e = np.full(n - 2, -1.0 / h ** 2)
    if vectors:
        return eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    return eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, count - 1))


def _trapezoid(y, h):
    return h * (np.sum(y) - 0.5 * (y[0] + y[-1]))


def _slope_at_zero(values: np.ndarray, h: float, order: int = 6) -> float:
    return float(_fd_weights(np.arange(order + 1)) @ values[:order + 1] / h)


def dirichlet_spectrum(Q: Potential1D | None, count: int, grid_n: int = DEFAULT_GRID,
                       length: float = np.pi) -> list[EigenPair1D]:
    """Eigenpairs with eigenvalues Richardson-extrapolated from ``grid_n`` and ``2 grid_n``.

    Eigenfunctions live on the ``grid_n`` grid and are scaled to ``Psi'(0) = 1``.
    """
    _check_count(count, grid_n)
    coarse, vecs = fd_dirichlet_eigen(Q, grid_n, count, length, vectors=True)
    fine = fd_dirichlet_eigen(Q, 2 * grid_n, count, length)
    nus = (4.0 * fine - coarse) / 3.0
    h = length / grid_n
    grid = h * np.arange(grid_n + 1)
    out = []
    for j in range(count):
        w = np.concatenate([[0.0], vecs[:, j], [0.0]])
        w = w / _slope_at_zero(w, h)
        out.append(EigenPair1D(j + 1, float(nus[j]), grid, w, float(_trapezoid(w ** 2, h)),
                               {grid_n: float(coarse[j]), 2 * grid_n: float(fine[j])}))
    return out


def radial_spectrum(p: RadialPotential, count: int, grid_n: int = DEFAULT_GRID,
                    R: float | None = None) -> list[EigenPair1D]:
    """Radial eigenpairs via the regular problem ``-psi'' + Q psi = mu psi``, ``psi(0) = psi(R) = 0``.

    Returns ``v = psi / sqrt(rho)`` with ``v(0) = 0`` and ``int_0^R v^2 rho drho = 1``.
    """
    R = p.R if R is None else float(R)
    pairs = dirichlet_spectrum(p.Q, count, grid_n, length=R)
    out = []
    for pair in pairs:
        rho = pair.grid
        h = rho[1] - rho[0]
        psi = pair.values / np.sqrt(_trapezoid(pair.values ** 2, h))
        v = np.zeros_like(psi)
        v[1:] = psi[1:] / np.sqrt(rho[1:])
        out.append(EigenPair1D(pair.index, pair.eigenvalue, rho, v, float(_trapezoid(v ** 2 * rho, h)),
                               pair.raw, psi))
    return out


def fd_neumann_eigen(Q: Potential1D | None, n: int, count: int, length: float = np.pi):
    """Lowest eigenpairs of the ghost-point Neumann operator, symmetrised by trapezoid weights.

    Returns eigenvalues and eigenvectors ``phi`` sampled on all ``n + 1`` nodes.
    """
    h = length / n
    x = h * np.arange(n + 1)
    d = 2.0 / h ** 2 + _q_on(Q, x)
    e = np.full(n, -1.0 / h ** 2)
    e[0] = e[-1] = -np.sqrt(2.0) / h ** 2
    vals, y = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    scale = np.ones(n + 1)
    scale[0] = scale[-1] = np.sqrt(2.0)
    return vals, y * scale[:, None]


def neumann_spectrum(Q: Potential1D | None, count: int, grid_n: int = DEFAULT_GRID,
                     length: float = np.pi) -> list[EigenPair1D]:
    """Neumann eigenpairs (index from 0) scaled to ``phi(0) = 1``."""
    _check_count(count, grid_n)
    coarse, vecs = fd_neumann_eigen(Q, grid_n, count, length)
    fine, _ = fd_neumann_eigen(Q, 2 * grid_n, count, length)
    lams = (4.0 * fine - coarse) / 3.0
    h = length / grid_n
    grid = h * np.arange(grid_n + 1)
    out = []
    for j in range(count):
        phi = vecs[:, j] / vecs[0, j]
        out.append(EigenPair1D(j, float(lams[j]), grid, phi, float(_trapezoid(phi ** 2, h)),
                               {grid_n: float(coarse[j]), 2 * grid_n: float(fine[j])}))
    return out


@dataclass(frozen=True)
class AsymptoticsTable:
    family: str
    j: np.ndarray
    alpha: np.ndarray
    sqrt_gap: np.ndarray  # sqrt(lambda_j) - j

    def rows(self):
        return list(zip(self.j.tolist(), self.alpha.tolist(), self.sqrt_gap.tolist()))

    def gap_constant(self, j_min: int = 1) -> float:
        """``max_j |sqrt(lambda_j) - j| j`` over ``j >= j_min``."""
        m = self.j >= j_min
        return float(np.max(np.abs(self.sqrt_gap[m]) * self.j[m]))


def normalization_asymptotics(Q: Potential1D | None, j_max: int, family: str = "dirichlet",
                              grid_n: int = DEFAULT_GRID) -> AsymptoticsTable:
    """Table of ``(j, alpha_j, sqrt(lambda_j) - j)``.

    ``family="dirichlet"``: ``Psi(0) = 0, Psi'(0) = 1``, ``j = 1..j_max``.
    ``family="neumann"``: ``phi'(0) = phi'(pi) = 0, phi(0) = 1``, ``j = 0..j_max``.
    """
    if family == "dirichlet":
        pairs = dirichlet_spectrum(Q, j_max, grid_n)
    elif family == "neumann":
        pairs = neumann_spectrum(Q, j_max + 1, grid_n)
    else:
        raise DomainError(f"unknown family {family!r}")
    j = np.array([p.index for p in pairs])
    lam = np.array([p.eigenvalue for p in pairs])
    root = np.sign(lam) * np.sqrt(np.abs(lam))
    return AsymptoticsTable(family, j, np.array([p.alpha for p in pairs]), root - j)


def write_eigen_table(path, pairs: list[EigenPair1D]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "alpha"])
        for p in pairs:
            w.writerow([p.index, repr(p.eigenvalue), repr(p.alpha)])
