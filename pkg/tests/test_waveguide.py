import json

import numpy as np
import pytest

from heatguide.core import DomainError
from heatguide.sturm_liouville import dirichlet_spectrum
from heatguide.waveguide import (assemble_spectrum, axisymmetric, confinement_metric, decay_slope, evolve,
                                 gaussian_bump, project, residual_norm, signal_trace)

BUMP = gaussian_bump(np.pi / 2, 1.0)


def _trap_weights(x):
    w = np.full_like(x, x[1] - x[0])
    w[[0, -1]] *= 0.5
    return w


def test_spectrum_identity_and_order(waveguide):
    lam = waveguide.lambdas
    assert np.all(np.diff(lam) >= 0)
    mu = np.array([p.eigenvalue for p in waveguide.radial])
    nu = np.array([p.eigenvalue for p in waveguide.axial])
    m, l = waveguide.index_map.T - 1
    np.testing.assert_array_equal(lam, mu[m] + nu[l])
    assert len({tuple(p) for p in waveguide.index_map}) == waveguide.count
    assert abs(lam[0]) < 1e-2 and lam[1] == pytest.approx(11.0, abs=0.05)
    assert json.loads(waveguide.to_json())["map"][0] == [1, 1]


def test_tie_break_and_resolution():
    pairs = dirichlet_spectrum(None, 4, grid_n=256)
    spec = assemble_spectrum(pairs, pairs, 3)
    # 1 + 4 is attained by (1, 2) and (2, 1): the smaller pair comes first
    assert spec.index_map.tolist() == [[1, 1], [1, 2], [2, 1]]
    with pytest.raises(DomainError, match="radial"):
        assemble_spectrum(pairs, pairs, 14)


def test_reconstruction_at_time_zero(waveguide):
    modal = project(waveguide, BUMP)
    u0 = evolve(waveguide, BUMP, 0.0, modal=modal)
    S, P = np.meshgrid(waveguide.s, waveguide.rho, indexing="ij")
    ws, wr = _trap_weights(waveguide.s), _trap_weights(waveguide.rho)
    err = np.sqrt(2 * np.pi * ws @ (u0.u - BUMP(S, P)) ** 2 @ (wr * waveguide.rho))
    parseval = np.sqrt(max(modal.f_norm ** 2 - np.sum(modal.coeffs ** 2), 0.0))
    assert err == pytest.approx(parseval, rel=0.05, abs=1e-3)


def test_energy_decreases(waveguide):
    modal = project(waveguide, BUMP)
    norms = [evolve(waveguide, BUMP, t, modal=modal, stride=8).norm() for t in (0.0, 0.1, 0.5, 1.0, 3.0)]
    assert norms[0] <= modal.f_norm * (1 + 1e-12)
    assert all(b <= a + 1e-14 for a, b in zip(norms, norms[1:]))


def test_decay_slope_and_tail_bound(waveguide):
    modal = project(waveguide, BUMP)
    slope = decay_slope(waveguide, modal)
    assert slope == pytest.approx(-11.0, rel=0.1)
    for t in (0.1, 1.0):
        part = evolve(waveguide, BUMP, t, n_modes=50, modal=modal, stride=8)
        tail = residual_norm(waveguide, modal, t, n_modes=waveguide.count)[0] ** 2 \
            - residual_norm(waveguide, modal, t, n_modes=50)[0] ** 2
        assert np.sqrt(max(tail, 0.0)) <= part.tail_bound


def test_one_mode_dominance(waveguide):
    modal = project(waveguide, BUMP)
    r0 = residual_norm(waveguide, modal, 0.0)[0]
    for t in (1.0, 2.0):
        assert residual_norm(waveguide, modal, t)[0] <= np.exp(-11.0 * (t - 0.1)) * r0


def test_confinement(waveguide):
    conf = confinement_metric(waveguide)
    assert conf.ratio < 1
    assert conf.profile[-1] == pytest.approx(0.0, abs=1e-12)
    assert len(conf.profile) == len(conf.rho)


def test_zero_data_gives_zero_trace(waveguide):
    trace = signal_trace(waveguide, lambda s, rho: 0.0 * s * rho, [[1.0, 0.0], [1.0, 1.0]], [0.0, 1.0])
    assert np.all(trace.values == 0.0)


def test_large_time_trace_is_first_mode(waveguide):
    modal = project(waveguide, BUMP)
    probes = [[1.0, 0.5], [2.0, 1.5]]
    trace = signal_trace(waveguide, BUMP, probes, [20.0], modal=modal)
    W, V = waveguide.mode_values(np.array([1.0, 2.0]), np.array([0.5, 1.5]))
    m, l = waveguide.index_map[0] - 1
    limit = modal.coeffs[0] * W[:, l] * V[:, m] / np.sqrt(2 * np.pi) * np.exp(-waveguide.lambdas[0] * 20.0)
    np.testing.assert_allclose(trace.values[:, 0], limit, rtol=1e-8)


def test_trace_validation(waveguide, tmp_path):
    with pytest.raises(DomainError):
        signal_trace(waveguide, BUMP, [[4.0, 0.0]], [0.0])
    with pytest.raises(DomainError):
        signal_trace(waveguide, BUMP, [[1.0, 0.0]], [1.0, 0.5])
    trace = signal_trace(waveguide, BUMP, [[1.0, 0.5]], [0.0, 1.0])
    trace.to_csv(tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "t,s,rho,value"


def test_non_axisymmetric_data_rejected():
    with pytest.raises(DomainError):
        axisymmetric(lambda x: x[..., 1], np.pi, np.pi)
    f = axisymmetric(lambda x: np.exp(-x[..., 1] ** 2 - x[..., 2] ** 2), np.pi, np.pi)
    assert f(1.0, 0.5) == pytest.approx(np.exp(-0.25))
