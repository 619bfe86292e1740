import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heatguide.core import DomainError, SolverError
from heatguide.gelfand_levitan import (Potential1D, SpectralTarget, build_kernel, design_potential, fd_derivative,
                                       potential_q, radial_lift, solve_gl, uniform_grid, write_descriptor)

unit = st.floats(0.0, np.pi)


def _direct_default(x, y):
    # the six-term kernel written out by hand
    val = 3 / np.pi ** 3 * x * y
    for nu in (11.0, 14.0):
        val += 2 / np.pi * np.sin(np.sqrt(nu) * x) * np.sin(np.sqrt(nu) * y) / nu
    for j in (1, 2, 3):
        val -= 2 / np.pi * np.sin(j * x) * np.sin(j * y)
    return val


def test_default_kernel_structure():
    kernel = build_kernel(SpectralTarget.default())
    assert kernel.rank == 6
    assert kernel(0.0, 0.0) == 0.0
    assert kernel(np.pi / 2, np.pi / 2) == pytest.approx(_direct_default(np.pi / 2, np.pi / 2), abs=1e-14)


@given(unit, unit)
def test_kernel_symmetric_and_matches_direct_sum(x, y):
    kernel = build_kernel(SpectralTarget.default())
    assert kernel(x, y) == kernel(y, x)
    assert kernel(x, y) == pytest.approx(_direct_default(x, y), abs=1e-13)


def test_baseline_target_gives_null_kernel_and_potential():
    for K in (0, 3):
        kernel = build_kernel(SpectralTarget.baseline(K))
        assert kernel.rank == 0
        _, tk, Q = design_potential(SpectralTarget.baseline(K), n=1024)
        assert np.max(np.abs(tk.diagonal())) == 0.0
        assert np.max(np.abs(Q.values)) < 1e-10


def test_target_validation():
    with pytest.raises(DomainError):
        SpectralTarget((0.0, 11.0), (1.0, -1.0))
    with pytest.raises(DomainError):
        SpectralTarget((11.0, 0.0), (1.0, 1.0))
    with pytest.raises(DomainError):
        SpectralTarget((0.0, 11.0, 14.0, 26.0), (1.0, 1.0, 1.0, 1.0))
    with pytest.raises(DomainError):
        SpectralTarget((0.0,), (1.0,), length=2.0)


def test_gl_residual_at_random_pairs(default_design):
    _, tk, _ = default_design
    rng = np.random.default_rng(7)
    worst = max(abs(tk.residual(s, tau)) for s, tau in rng.uniform(0, np.pi, size=(100, 2)))
    assert worst < 1e-10


def test_small_s_behaviour(default_design):
    _, tk, Q = default_design
    c = abs(3 / np.pi ** 3 - 24 / np.pi)
    s = tk.s[1:9]
    np.testing.assert_allclose(np.abs(tk.diagonal()[1:9]) / s ** 2, c, rtol=2e-3)
    tau = np.linspace(0, 1, 50)
    for si in (1e-3, 2e-3):
        assert np.max(np.abs(tk(si, tau[tau <= si]))) <= 1.01 * c * si ** 2
    assert Q.values[0] == pytest.approx(0.0, abs=1e-10)
    slope = fd_derivative(Q.values, tk.s[1] - tk.s[0])[0]
    assert slope == pytest.approx(-4 * (3 / np.pi ** 3 - 24 / np.pi), rel=1e-5)


def test_grid_stability():
    _, _, q1 = design_potential(n=1024)
    _, _, q2 = design_potential(n=2048)
    assert np.max(np.abs(q2.values[::2] - q1.values)) < 1e-6


def test_fd_route_agrees_with_analytic(default_design):
    _, tk, Q = default_design
    Qfd = potential_q(tk, method="fd")
    assert np.max(np.abs(Qfd.values - Q.values)) < 1e-4


def test_fd_derivative_exact_for_polynomials():
    x = np.linspace(0, 1, 40)
    np.testing.assert_allclose(fd_derivative(x ** 5, x[1] - x[0]), 5 * x ** 4, atol=1e-9)
    with pytest.raises(DomainError):
        fd_derivative(np.ones(5), 0.1)


def test_coarse_grid_rejected():
    with pytest.raises(DomainError):
        solve_gl(build_kernel(SpectralTarget.default()), uniform_grid(256))


def test_singular_target_reported():
    # a huge norming constant all but deletes the first eigenvalue, and
    # I - (2/pi) int_0^s sin^2 vanishes at s = pi
    with pytest.raises(SolverError, match="singular"):
        design_potential(SpectralTarget((1.0,), (1e20,)), n=1024)


def test_radial_lift_values(default_q):
    p = radial_lift(default_q)
    assert p(1.0) == pytest.approx(0.25 + float(default_q(1.0)))
    rho = np.array([1e-4, 1e-5])
    np.testing.assert_allclose(rho ** 2 * p(rho), 0.25, rtol=1e-6)
    with pytest.raises(DomainError):
        p(0.0)


def test_radial_substitution_identity(default_q):
    # with v = psi / sqrt(rho): -v'' - v'/rho + p v = (-psi'' + Q psi) / sqrt(rho)
    p = radial_lift(default_q)
    rho = np.linspace(0.5, 2.5, 50)
    h = 1e-3
    psi = lambda r: np.sin(r) * np.exp(-0.3 * r)
    v = lambda r: psi(r) / np.sqrt(r)
    d1 = (v(rho + h) - v(rho - h)) / (2 * h)
    d2 = (v(rho + h) - 2 * v(rho) + v(rho - h)) / h ** 2
    lhs = -d2 - d1 / rho + p(rho) * v(rho)
    psi2 = (psi(rho + h) - 2 * psi(rho) + psi(rho - h)) / h ** 2
    rhs = (-psi2 + default_q(rho) * psi(rho)) / np.sqrt(rho)
    np.testing.assert_allclose(lhs, rhs, atol=1e-6)


def test_potential_csv_round_trip(tmp_path, default_q):
    path = tmp_path / "q.csv"
    default_q.to_csv(path)
    back = Potential1D.from_csv(path)
    np.testing.assert_array_equal(back.values, default_q.values)
    assert path.read_text().splitlines()[0] == "s,Q"


def test_descriptor(tmp_path):
    path = tmp_path / "k.json"
    write_descriptor(path, build_kernel(SpectralTarget.default()))
    data = json.loads(path.read_text())
    assert data["L"] == "pi" and data["rank"] == 6
    assert data["target"]["nus"] == [0.0, 11.0, 14.0]
