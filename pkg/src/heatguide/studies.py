"""Convergence of the particle systems toward the limiting integral equation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import BallSource
from .homogenize import ContinuumGrid, PotentialField, solve_resolvent_ie
from .manybody import (cube_means, interaction_ratio_diagnostic, partition_side, reduced_field_at, solve_full_las,
                       solve_reduced_las)
from .particles import Box, MediumSpec, generate_cloud


def probe_grid(levels) -> np.ndarray:
    g = np.asarray(levels, float)
    return np.stack(np.meshgrid(g, g, g, indexing="ij"), -1).reshape(-1, 3)


@dataclass
class StudyRow:
    a: float
    M: int
    d_min: float
    b: float
    shape: tuple
    P: int
    sup_difference: float
    ratio_bound: float
    full_vs_reduced: float | None


@dataclass
class ConvergenceResult:
    rows_: list[StudyRow] = field(default_factory=list)
    header = ("a", "M", "d_min", "b", "cells_per_axis", "P", "sup_difference", "ratio_bound", "full_vs_reduced")

    def rows(self):
        for r in self.rows_:
            yield (r.a, r.M, r.d_min, r.b, "x".join(map(str, r.shape)), r.P, r.sup_difference, r.ratio_bound,
                   "" if r.full_vs_reduced is None else r.full_vs_reduced)

    @property
    def sup_monotone(self) -> bool:
        d = [r.sup_difference for r in self.rows_]
        return all(x > y for x, y in zip(d, d[1:]))

    @property
    def ratio_monotone(self) -> bool:
        d = [r.ratio_bound for r in self.rows_]
        return all(x > y for x, y in zip(d, d[1:]))

    def full_vs_reduced_near(self, M_target: int = 2000) -> StudyRow | None:
        """Row with a full-system comparison whose ``M`` is closest to ``M_target``."""
        rows = [r for r in self.rows_ if r.full_vs_reduced is not None]
        return min(rows, key=lambda r: abs(r.M - M_target)) if rows else None

    def summary(self) -> dict:
        near = self.full_vs_reduced_near()
        return {
            "sup_differences": [r.sup_difference for r in self.rows_],
            "ratio_bounds": [r.ratio_bound for r in self.rows_],
            "sup_monotone": self.sup_monotone,
            "ratio_monotone": self.ratio_monotone,
            "full_vs_reduced": None if near is None else {"M": near.M, "relative": near.full_vs_reduced},
        }


def convergence_study(a_values, seed: int, lam: float = 0.5, source: BallSource | None = None,
                      ie_grid: int = 16, own_cube: bool = True, probe_levels=(0.25, 0.5, 0.75),
                      full_cap: int = 4000, b_exponent: float = 1.0 / 3.0) -> ConvergenceResult:
    """Unit cube, ``N = h = 1``, ``kappa = 0``.

    For each ``a`` the reduced system on cubes of side ``max(4 d_min, a^b_exponent)``
    is compared with the integral-equation solution at the probe points.  When
    ``M <= full_cap`` the full system is solved too and compared with the
    reduced one through cube means, relative to ``max |U_full|``.
    """
    source = source or BallSource((0.5, 0.5, 0.5), 0.4, 1.0, "bump")
    spec = MediumSpec(Box(), 1.0, 1.0, 0.0)
    grid = ContinuumGrid(Box(), (ie_grid,) * 3)
    ie = solve_resolvent_ie(grid, PotentialField.from_medium(grid, spec), lam, source)
    probes = probe_grid(probe_levels)
    u_ie = ie.evaluate(probes, source)
    result = ConvergenceResult()
    for a in a_values:
        cloud = generate_cloud(spec, a, seed)
        b = partition_side(cloud, b_exponent)
        red = solve_reduced_las(cloud, spec, b, lam, source, own_cube=own_cube)
        part = red.meta["partition"]
        sup = float(np.max(np.abs(reduced_field_at(probes, red, source) - u_ie)))
        fvr = None
        if cloud.M <= full_cap:
            full = solve_full_las(cloud, lam, source, cap=full_cap)
            fvr = float(np.max(np.abs(cube_means(full, part) - red.values)) / np.max(np.abs(full.values)))
        result.rows_.append(StudyRow(a, cloud.M, cloud.d_min, b, part.shape, part.P, sup,
                                     interaction_ratio_diagnostic(cloud, lam).bound, fvr))
    return result
