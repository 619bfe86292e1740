import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatguide.core import BallSource, DomainError, free_field, green_kernel
from heatguide.manybody import (cube_means, field_at, interaction_ratio_diagnostic, make_partition, partition_side,
                                reduced_field_at, solve_full_las, solve_reduced_las)
from heatguide.particles import Box, MediumSpec, ParticleCloud, generate_cloud

SRC = BallSource((0.5, 0.5, 0.5), 0.3, 1.0, "bump")


def _cloud(centers, a=0.01, h=1.0, kappa=0.0):
    centers = np.asarray(centers, float)
    d = np.inf
    if len(centers) > 1:
        diff = np.linalg.norm(centers[:, None] - centers[None], axis=-1)
        d = diff[~np.eye(len(centers), dtype=bool)].min()
    return ParticleCloud(centers, a, kappa, np.full(len(centers), h, dtype=np.result_type(h, float)), d_min=d)


def test_single_particle_sees_free_field():
    cloud = _cloud([[0.5, 0.5, 0.5]])
    U = solve_full_las(cloud, 0.5, SRC)
    assert U.values[0] == pytest.approx(free_field(cloud.centers, 0.5, SRC)[0])


def test_zero_impedance_gives_free_field():
    cloud = generate_cloud(MediumSpec(Box(), 1.0, 0.0, 0.0), 0.05, seed=0)
    U = solve_full_las(cloud, 0.5, SRC)
    np.testing.assert_array_equal(U.values, U.meta["F"])


def test_two_particle_system_by_hand():
    cloud = _cloud([[0.4, 0.5, 0.5], [0.6, 0.5, 0.5]], a=0.02)
    lam = 0.5
    U = solve_full_las(cloud, lam, SRC)
    F = free_field(cloud.centers, lam, SRC)
    c = cloud.a ** 2 * 4 * np.pi * green_kernel(cloud.centers[0], cloud.centers[1], lam)
    A = np.array([[1.0, c], [c, 1.0]])
    np.testing.assert_allclose(U.values, np.linalg.solve(A, F), rtol=1e-12)


def test_mirror_symmetry():
    centers = np.array([[0.3, 0.5, 0.5], [0.7, 0.5, 0.5], [0.5, 0.3, 0.4], [0.5, 0.7, 0.4]])
    U = solve_full_las(_cloud(centers, a=0.03), 0.5, SRC).values
    assert U[0] == pytest.approx(U[1], rel=1e-10)
    assert U[2] == pytest.approx(U[3], rel=1e-10)


@given(st.floats(-3.0, 3.0), st.floats(0.1, 4.0))
def test_linear_in_the_source(scale, lam):
    cloud = _cloud([[0.3, 0.5, 0.5], [0.6, 0.4, 0.5], [0.5, 0.6, 0.7]], a=0.03)
    base = solve_full_las(cloud, lam, SRC).values
    scaled = solve_full_las(cloud, lam, SRC.scaled(scale)).values
    np.testing.assert_allclose(scaled, scale * base, rtol=1e-9, atol=1e-14)


def test_field_at_single_particle_by_hand():
    cloud = _cloud([[0.5, 0.5, 0.5]], a=0.02, h=2.0)
    lam = 0.7
    U = solve_full_las(cloud, lam, SRC)
    x = np.array([[0.8, 0.5, 0.5]])
    expected = free_field(x, lam, SRC)[0] - green_kernel(x[0], cloud.centers[0], lam) * 2.0 * 4 * np.pi * 0.02 ** 2 \
        * U.values[0]
    assert field_at(x, lam, cloud, U, SRC)[0] == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DomainError):
        field_at([[0.505, 0.5, 0.5]], lam, cloud, U, SRC)


def test_full_system_cap_and_lambda_checks():
    cloud = generate_cloud(MediumSpec(Box(), 1.0, 1.0, 0.0), 0.05, seed=0)
    with pytest.raises(DomainError):
        solve_full_las(cloud, 0.5, SRC, cap=10)
    with pytest.raises(DomainError):
        solve_full_las(cloud, 0.0, SRC)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        solve_full_las(cloud, 2.0 * cloud.d_min ** -4, SRC)
    assert any("d_min" in str(w.message) for w in caught)


def test_interaction_bound_examples():
    cloud = _cloud([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]], a=0.01)
    assert interaction_ratio_diagnostic(cloud, 1.0).bound == pytest.approx(0.1)
    half = _cloud([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]], a=0.005)
    assert interaction_ratio_diagnostic(half, 1.0).bound == pytest.approx(0.05)
    diag = interaction_ratio_diagnostic(cloud, 1.0, estimate=True)
    assert 0 <= diag.estimate <= diag.bound


def test_partition_respects_spacing_floor():
    cloud = generate_cloud(MediumSpec(Box(), 1.0, 1.0, 0.0), 0.02, seed=0)
    b = partition_side(cloud)
    part = make_partition(cloud, Box(), b)
    assert np.all(part.side >= 4 * cloud.d_min)
    assert part.counts.sum() == cloud.M
    with pytest.raises(DomainError):
        make_partition(cloud, Box(), 2 * cloud.d_min)


def test_reduced_single_cube_equals_free_field():
    cloud = generate_cloud(MediumSpec(Box(), 1.0, 1.0, 0.0), 0.1, seed=0)
    red = solve_reduced_las(cloud, MediumSpec(Box(), 1.0, 1.0, 0.0), 1.0, 0.5, SRC)
    assert red.meta["partition"].P == 1
    assert red.values[0] == pytest.approx(red.meta["F"][0])


def test_reduced_matches_full_on_cube_means():
    spec = MediumSpec(Box(), 1.0, 1.0, 0.0)
    cloud = generate_cloud(spec, 0.02, seed=0)
    src = BallSource((0.5, 0.5, 0.5), 0.4, 1.0, "bump")
    full = solve_full_las(cloud, 0.5, src)
    red = solve_reduced_las(cloud, spec, partition_side(cloud), 0.5, src, own_cube=True)
    rel = np.max(np.abs(cube_means(full, red.meta["partition"]) - red.values)) / np.max(np.abs(full.values))
    assert rel < 0.1


def test_reduced_field_at_reproduces_cube_values():
    spec = MediumSpec(Box(), 1.0, 1.0, 0.0)
    cloud = generate_cloud(spec, 0.04, seed=0)
    red = solve_reduced_las(cloud, spec, 0.5, 0.5, SRC)
    np.testing.assert_allclose(reduced_field_at(red.points, red, SRC), red.values, rtol=1e-10)
    # the extension integrates neighbouring cubes exactly, the system uses midpoints
    red = solve_reduced_las(cloud, spec, 0.5, 0.5, SRC, own_cube=True)
    np.testing.assert_allclose(reduced_field_at(red.points, red, SRC), red.values, rtol=1e-2)
