import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from heatguide.core import (BallSource, DomainError, Ellipsoid, FunctionSource, SolverError, box_kernel_integral,
                            cell_integral_matrix, cell_self_integral, dense_solve, ellipsoid_mesh, free_field,
                            gauss_identity_check, green_kernel, lebedev_sphere_mesh, newtonian_potential,
                            sphere_mesh, volume_potential)

coord = st.floats(-2.0, 2.0, allow_nan=False)
point = st.tuples(coord, coord, coord)
lam_st = st.floats(0.0, 25.0, allow_nan=False)


@pytest.mark.parametrize("lam,r,expected", [(0.0, 1.0, 0.0795775), (1.0, 1.0, 0.0292748), (4.0, 0.5, 0.0585496)])
def test_green_kernel_reference_values(lam, r, expected):
    # references are truncated, not rounded, in the last digit
    assert green_kernel([0, 0, 0], [r, 0, 0], lam) == pytest.approx(expected, rel=1e-5)


def test_green_kernel_rejects_coincident_points_and_negative_lambda():
    with pytest.raises(DomainError):
        green_kernel([0, 0, 0], [0, 0, 0], 1.0)
    with pytest.raises(DomainError):
        green_kernel([0, 0, 0], [1, 0, 0], -1.0)


@given(point, point, lam_st)
def test_green_kernel_symmetric(x, y, lam):
    if np.linalg.norm(np.subtract(x, y)) < 1e-6:
        return
    assert green_kernel(x, y, lam) == green_kernel(y, x, lam)


@given(point, point, lam_st)
def test_green_kernel_singular_part_bound(x, y, lam):
    r = np.linalg.norm(np.subtract(x, y))
    if r < 1e-6:
        return
    diff = abs(green_kernel(x, y, lam) - 1.0 / (4 * np.pi * r))
    assert diff <= np.sqrt(lam) / (4 * np.pi) * (1 + 1e-12) + 1e-15


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), lam_st)
def test_green_kernel_decreasing_in_r(r1, r2, lam):
    if abs(r1 - r2) < 1e-9:
        return
    lo, hi = sorted((r1, r2))
    assert green_kernel([0, 0, 0], [lo, 0, 0], lam) > green_kernel([0, 0, 0], [hi, 0, 0], lam)


def _ball_indicator_potential(x, lam, R):
    # exact free field of the unit-amplitude indicator of a ball
    k = np.sqrt(lam)
    r = np.linalg.norm(x)
    if r >= R:
        return (R * k * np.cosh(k * R) - np.sinh(k * R)) * np.exp(-k * r) / (k ** 3 * r) / lam
    shape = np.sinh(k * r) / (k * r) if r > 0 else 1.0
    return (1.0 - (1.0 + k * R) * np.exp(-k * R) * shape) / k ** 2 / lam


@pytest.mark.parametrize("x", [[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [1.5, 0.0, 0.2], [0.0, 0.0, 1.0]])
def test_free_field_matches_closed_form_ball(x):
    lam, R = 0.7, 1.0
    src = BallSource((0.0, 0.0, 0.0), R, 1.0, "indicator")
    got = free_field(np.array([x]), lam, src)[0]
    assert got == pytest.approx(_ball_indicator_potential(np.array(x), lam, R), abs=1e-6)


def test_free_field_matches_cartesian_quadrature():
    lam = 0.5
    src = BallSource((0.1, 0.0, 0.0), 0.5, 2.0, "bump")
    x = np.array([0.9, 0.3, -0.2])

    def integrand(z, y, w):
        p = np.array([w, y, z])
        return green_kernel(x, p, lam) * src(p) if np.linalg.norm(p - src.center) <= src.radius else 0.0

    c = src.center
    ref, _ = integrate.tplquad(integrand, c[0] - 0.5, c[0] + 0.5, c[1] - 0.5, c[1] + 0.5, c[2] - 0.5, c[2] + 0.5,
                               epsabs=1e-10, epsrel=1e-9)
    assert free_field(x[None], lam, src)[0] == pytest.approx(ref / lam, abs=1e-6)


def test_free_field_function_source_agrees_with_ball_source():
    src = BallSource((0.0, 0.0, 0.0), 0.6, 1.0, "bump")
    fsrc = FunctionSource(lambda y: src(y), (0.0, 0.0, 0.0), 0.6)
    x = np.array([[0.2, 0.1, 0.0], [1.0, 0.0, 0.0]])
    np.testing.assert_allclose(free_field(x, 0.4, fsrc), free_field(x, 0.4, src), atol=1e-6)


def test_free_field_rejects_zero_lambda():
    with pytest.raises(DomainError):
        free_field(np.zeros((1, 3)), 0.0, BallSource())


def test_newtonian_potential_of_ball():
    src = BallSource((0.0, 0.0, 0.0), 1.0, 1.0, "indicator")
    got = newtonian_potential(np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]), src)
    np.testing.assert_allclose(got, [0.5, 1.0 / 6.0], atol=1e-8)


def test_volume_potential_is_linear_in_the_source():
    s1 = BallSource((0.0, 0.0, 0.0), 0.5, 1.0, "bump")
    x = np.array([[0.1, 0.2, 0.3]])
    assert volume_potential(x, s1.scaled(3.0), 0.5)[0] == pytest.approx(3.0 * volume_potential(x, s1, 0.5)[0])


def test_cell_self_integral_unit_cube():
    # int over the unit cube of 1/|y| from the centre, a classical constant
    assert 4 * np.pi * cell_self_integral((1.0, 1.0, 1.0), 0.0) == pytest.approx(2.38007736, abs=1e-7)


def test_cell_integral_matrix_matches_quadrature():
    lam, side, c = 0.8, np.array([0.2, 0.2, 0.2]), np.array([0.5, 0.5, 0.5])
    x = np.array([0.63, 0.52, 0.45])

    def integrand(z, y, w):
        return green_kernel(x, [w, y, z], lam)

    lo, hi = c - side / 2, c + side / 2
    ref, _ = integrate.tplquad(integrand, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2], epsabs=1e-13, epsrel=1e-11)
    assert cell_integral_matrix(x[None], c[None], side, lam)[0, 0] == pytest.approx(ref, rel=5e-5)
    assert box_kernel_integral(x[None], c[None], side, lam)[0, 0] == pytest.approx(ref, rel=5e-5)


def test_cell_integral_matrix_self_cell_agrees_with_self_integral():
    side, c = np.array([0.1, 0.2, 0.15]), np.array([[0.3, 0.3, 0.3]])
    for lam in (0.0, 0.5, 4.0):
        assert cell_integral_matrix(c, c, side, lam)[0, 0] == pytest.approx(cell_self_integral(side, lam), rel=2e-5)


def test_gauss_identity_sphere():
    mesh = sphere_mesh(16)
    assert gauss_identity_check(mesh, [0.2, 0.1, -0.3]) == pytest.approx(-1.0, abs=1e-6)
    assert gauss_identity_check(mesh, [0.0, 0.0, 1.0]) == pytest.approx(-0.5, abs=1e-10)
    assert gauss_identity_check(sphere_mesh(32), [1.5, 0.3, 0.2]) == pytest.approx(0.0, abs=1e-6)


def test_gauss_identity_ellipsoid_surface_point():
    shape = Ellipsoid((0.0, 0.0, 0.0), (1.0, 0.7, 0.5))
    mesh = ellipsoid_mesh(shape, 24)
    x = np.array([1.0, 0.0, 0.0])
    assert gauss_identity_check(mesh, x) == pytest.approx(-0.5, abs=1e-6)
    assert gauss_identity_check(mesh, [0.1, 0.1, 0.1]) == pytest.approx(-1.0, abs=1e-4)


def test_surface_mesh_areas():
    assert sphere_mesh(12).weights.sum() == pytest.approx(4 * np.pi, rel=1e-12)
    assert lebedev_sphere_mesh(17, radius=2.0).weights.sum() == pytest.approx(16 * np.pi, rel=1e-12)
    shape = Ellipsoid(axes=(1.0, 0.7, 0.5))
    assert ellipsoid_mesh(shape, 32).weights.sum() == pytest.approx(shape.area(), rel=1e-10)


def test_dense_solve_detects_singular_matrix():
    with pytest.raises(SolverError):
        dense_solve(np.ones((3, 3)), np.ones(3))
    x, cond = dense_solve(np.diag([1.0, 2.0]), np.array([1.0, 4.0]))
    np.testing.assert_allclose(x, [1.0, 2.0])
    assert cond == pytest.approx(2.0)
