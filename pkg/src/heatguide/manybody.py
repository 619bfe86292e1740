"""Full (order M) and reduced (order P) linear systems for the effective field."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .core import (DomainError, cell_integral_matrix, cell_self_integral, dense_solve, free_field,
                   kernel_from_distance, lebedev_sphere_mesh)
from .particles import Box, MediumSpec, ParticleCloud

FULL_LAS_CAP = 4000


@dataclass
class ResolventField:
    """Values of the transformed field ``U(x, lambda)`` at sample points."""

    lam: float
    points: np.ndarray
    values: np.ndarray
    provenance: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise DomainError(f"{self.provenance}: non-finite field values")


def _check_lambda(lam: float, d_min: float) -> None:
    if lam <= 0:
        raise DomainError("lambda must be positive")
    if np.isfinite(d_min) and lam > d_min ** -4:
        warnings.warn(
            f"lambda={lam} exceeds (1/d_min)^4={d_min ** -4:.3g}; interactions are negligible there",
            stacklevel=3,
        )


def solve_full_las(
    cloud: ParticleCloud, lam: float, source, cap: int = FULL_LAS_CAP, quad: dict | None = None
) -> ResolventField:
    """Solve ``U_m = F_m - a^(2-kappa) sum_{m' != m} g_mm' h_m' c U_m'`` densely."""
    M = cloud.M
    if M < 1:
        raise DomainError("full system needs at least one particle")
    if M > cap:
        raise DomainError(f"M={M} exceeds the full-system cap {cap}; use solve_reduced_las")
    _check_lambda(lam, cloud.d_min)
    F = free_field(cloud.centers, lam, source, **(quad or {}))
    if M == 1:
        return ResolventField(lam, cloud.centers, F.astype(np.result_type(F, cloud.h_values)), "full-LAS",
                              {"cond": 1.0, "F": F})
    r = cdist(cloud.centers, cloud.centers)
    np.fill_diagonal(r, 1.0)
    G = kernel_from_distance(r, lam)
    np.fill_diagonal(G, 0.0)
    coupling = cloud.a ** (2.0 - cloud.kappa) * cloud.h_values * cloud.c_S
    A = G * coupling[None, :]
    A[np.diag_indices(M)] += 1.0
    U, cond = dense_solve(A, F.astype(A.dtype), "full particle system")
    return ResolventField(lam, cloud.centers, U, "full-LAS", {"cond": cond, "F": F})


def field_at(x, lam: float, cloud: ParticleCloud, centers_field: ResolventField, source,
             quad: dict | None = None) -> np.ndarray:
    """``F(x) - sum_m g(x, x_m) zeta_m |S_m| U_m`` at points away from the particles."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    F = free_field(x, lam, source, **(quad or {}))
    if cloud.M == 0:
        return F.astype(complex)
    r = cdist(x, cloud.centers)
    if np.any(r <= cloud.a):
        raise DomainError("field_at: evaluation point lies inside a particle")
    charge = cloud.zeta * cloud.surface_area * centers_field.values
    return F - kernel_from_distance(r, lam) @ charge


@dataclass
class Partition:
    """Nonempty cells of a regular subdivision of a box into cells of side >= b."""

    lo: np.ndarray
    side: np.ndarray
    shape: tuple[int, int, int]
    cell_index: np.ndarray  # flat cell id of each nonempty cell
    centers: np.ndarray
    volumes: np.ndarray
    counts: np.ndarray
    member: np.ndarray  # position in `centers` for every particle

    @property
    def P(self) -> int:
        return len(self.centers)

    def locate(self, x) -> np.ndarray:
        """Flat cell id for each point (clipped onto the box)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        ijk = np.floor((x - self.lo) / self.side).astype(int)
        ijk = np.clip(ijk, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(ijk.T, self.shape)


def partition_side(cloud: ParticleCloud, a_exponent: float = 1.0 / 3.0) -> float:
    """Default cube side ``max(4 d_min, a^(1/3))``."""
    b = cloud.a ** a_exponent
    return float(max(4.0 * cloud.d_min, b)) if np.isfinite(cloud.d_min) else float(b)


def make_partition(cloud: ParticleCloud, domain: Box, b: float) -> Partition:
    """Regular partition with the cell count per axis nearest to ``L / b``.

    The count is lowered until the cell side is at least ``4 d_min``, so the
    actual side may be slightly below ``b`` but never below ``4 d_min``.
    """
    if not isinstance(domain, Box):
        raise DomainError("partitions are only defined for box domains")
    floor_side = 4.0 * cloud.d_min if np.isfinite(cloud.d_min) else 0.0
    if b < floor_side:
        raise DomainError(f"cube side b={b:.4g} must be at least 4 d_min = {floor_side:.4g}")
    lo, hi = domain.bounds
    shape = []
    for L in hi - lo:
        n = max(int(round(L / b)), 1)
        while n > 1 and L / n < floor_side:
            n -= 1
        shape.append(n)
    shape = tuple(shape)
    side = (hi - lo) / np.asarray(shape)
    ijk = np.clip(np.floor((cloud.centers - lo) / side).astype(int), 0, np.asarray(shape) - 1)
    flat = np.ravel_multi_index(ijk.T, shape) if cloud.M else np.zeros(0, int)
    cells, member, counts = np.unique(flat, return_inverse=True, return_counts=True)
    if len(cells) == 0:
        raise DomainError("partition has no nonempty cells")
    idx = np.stack(np.unravel_index(cells, shape), axis=-1)
    centers = lo + side * (idx + 0.5)
    volumes = np.full(len(cells), float(np.prod(side)))
    return Partition(lo, side, shape, cells, centers, volumes, counts, member)


def solve_reduced_las(cloud: ParticleCloud, spec: MediumSpec, b: float, lam: float, source,
                      quad: dict | None = None, own_cube: bool = False) -> ResolventField:
    """Solve ``U_p = F_p - sum_{p'} g_pp' h_p' c N_p' |Delta_p'| U_p'`` on the cube centres.

    By default the sum skips ``p' = p``.  With ``own_cube=True`` the own
    cube contributes through the exact cell integral of ``g``, which accounts
    for the interactions between particles sharing a cube.
    """
    _check_lambda(lam, cloud.d_min)
    part = make_partition(cloud, spec.domain, b)
    F = free_field(part.centers, lam, source, **(quad or {}))
    density = spec.h(part.centers) * cloud.c_S * np.real(spec.N(part.centers))
    weight = density * part.volumes
    r = cdist(part.centers, part.centers)
    np.fill_diagonal(r, 1.0)
    G = kernel_from_distance(r, lam)
    np.fill_diagonal(G, 0.0)
    A = G * weight[None, :]
    if own_cube:
        A[np.diag_indices(part.P)] = density * cell_self_integral(part.side, lam)
    A[np.diag_indices(part.P)] += 1.0
    U, cond = dense_solve(A, F.astype(A.dtype), "reduced system")
    return ResolventField(lam, part.centers, U, "reduced-LAS",
                          {"cond": cond, "F": F, "partition": part, "weight": weight,
                           "density": density, "own_cube": own_cube})


def reduced_field_at(x, reduced: ResolventField, source, quad: dict | None = None) -> np.ndarray:
    """Extend a reduced solution to arbitrary points.

    Without the own-cube term the cube containing ``x`` is omitted and the
    others use the midpoint rule; with it, cubes near ``x`` are integrated
    exactly (piecewise constant ``U``).
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    part: Partition = reduced.meta["partition"]
    F = free_field(x, reduced.lam, source, **(quad or {}))
    if reduced.meta.get("own_cube"):
        W = cell_integral_matrix(x, part.centers, part.side, reduced.lam)
        return F - W @ (reduced.meta["density"] * reduced.values)
    own = part.locate(x)
    r = cdist(x, part.centers)
    same = own[:, None] == part.cell_index[None, :]
    r[same] = 1.0
    G = kernel_from_distance(r, reduced.lam)
    G[same] = 0.0
    return F - G @ (reduced.meta["weight"] * reduced.values)


def cube_means(full: ResolventField, part: Partition) -> np.ndarray:
    """Average of the particle values inside each nonempty cube."""
    sums = np.zeros(part.P, dtype=full.values.dtype)
    np.add.at(sums, part.member, full.values)
    return sums / part.counts


@dataclass(frozen=True)
class InteractionRatio:
    bound: float
    estimate: float | None = None


def interaction_ratio_diagnostic(cloud: ParticleCloud, lam: float, estimate: bool = False,
                                 lebedev_order: int = 17) -> InteractionRatio:
    """Bound ``max(sqrt(lam) a, a / d_min)`` on ``|J2 / J1|``.

    With ``estimate=True`` the ratio is also computed by surface quadrature
    for a sphere of radius ``a`` carrying a uniform charge, seen from the
    nearest neighbour centre at distance ``d_min``.
    """
    if cloud.M < 2:
        raise DomainError("interaction diagnostic needs at least two particles")
    a, d = cloud.a, cloud.d_min
    bound = max(np.sqrt(lam) * a, a / d)
    est = None
    if estimate:
        mesh = lebedev_sphere_mesh(lebedev_order, radius=a)
        x = np.array([d, 0.0, 0.0])
        g_surface = kernel_from_distance(np.linalg.norm(mesh.nodes - x, axis=1), lam)
        mean_g = mesh.weights @ g_surface / mesh.weights.sum()
        est = float(abs(mean_g / kernel_from_distance(np.array(d), lam) - 1.0))
    return InteractionRatio(float(bound), est)
