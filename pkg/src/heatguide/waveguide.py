"""Separable heat-equation modes of the cylinder ``{rho <= R} x [0, L]`` and their time evolution."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from .core import DomainError
from .sturm_liouville import EigenPair1D

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _trapezoid_weights(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


@dataclass
class WaveguideSpectrum:
    """Sorted ``lambda_n = mu_m + nu_l`` with the 1-based map ``n -> (m, l)``.

    Radial profiles are normalised by ``int v^2 rho drho = 1`` and axial ones by
    ``int w^2 ds = 1``, so ``phi_n = v_m(rho) w_l(s) / sqrt(2 pi)`` has unit L2 norm.
    """

    lambdas: np.ndarray
    index_map: np.ndarray  # (count, 2), 1-based (m, l)
    radial: list[EigenPair1D]
    axial: list[EigenPair1D]
    R: float
    L: float
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def count(self) -> int:
        return len(self.lambdas)

    @property
    def rho(self) -> np.ndarray:
        return self.radial[0].grid

    @property
    def s(self) -> np.ndarray:
        return self.axial[0].grid

    def radial_matrix(self) -> np.ndarray:
        """``v_m`` on the radial grid, shape ``(n_rho, M)``."""
        if "V" not in self._cache:
            self._cache["V"] = np.stack([p.values for p in self.radial], axis=1)
        return self._cache["V"]

    def axial_matrix(self) -> np.ndarray:
        """``w_l`` on the axial grid scaled to unit L2 norm, shape ``(n_s, L)``."""
        if "W" not in self._cache:
            W = np.stack([p.values for p in self.axial], axis=1)
            norms = np.sqrt(_trapezoid_weights(self.s) @ W ** 2)
            self._cache["W"] = W / norms
        return self._cache["W"]

    def mode_values(self, s, rho) -> tuple[np.ndarray, np.ndarray]:
        """Cubic interpolants of ``w_l(s)`` and ``v_m(rho)``; ``v_m(0) = 0``."""
        if "splines" not in self._cache:
            self._cache["splines"] = (CubicSpline(self.s, self.axial_matrix(), axis=0),
                                      CubicSpline(self.rho, self.radial_matrix(), axis=0))
        ws, vs = self._cache["splines"]
        rho = np.asarray(rho, float)
        v = vs(rho)
        v[rho == 0] = 0.0
        return ws(np.asarray(s, float)), v

    def to_json(self) -> str:
        return json.dumps({"lambdas": [float(x) for x in self.lambdas],
                           "map": [[int(m), int(l)] for m, l in self.index_map],
                           "R": self.R, "L": self.L})


def assemble_spectrum(radial: list[EigenPair1D], axial: list[EigenPair1D], count: int) -> WaveguideSpectrum:
    """Smallest ``count`` sums ``mu_m + nu_l``; ties go to the lexicographically smaller ``(m, l)``."""
    if count < 1:
        raise DomainError("count must be positive")
    mu = np.array([p.eigenvalue for p in radial])
    nu = np.array([p.eigenvalue for p in axial])
    Mr, La = len(mu), len(nu)
    if Mr == 0 or La == 0 or Mr * La < count:
        raise DomainError(f"need at least {count} products; have {Mr} radial x {La} axial modes")
    m, l = np.meshgrid(np.arange(1, Mr + 1), np.arange(1, La + 1), indexing="ij")
    lam = mu[:, None] + nu[None, :]
    order = np.lexsort((l.ravel(), m.ravel(), lam.ravel()))[:count]
    lam_sel = lam.ravel()[order]
    top = lam_sel[-1]
    # any pair outside the table has a sum above mu_Mr + nu_1 or mu_1 + nu_La
    need_r = int(np.count_nonzero(mu + nu[0] <= top)) + 1
    need_a = int(np.count_nonzero(nu + mu[0] <= top)) + 1
    if top >= mu[-1] + nu[0] or top >= mu[0] + nu[-1]:
        raise DomainError(
            f"{count} modes are not resolved: need at least {need_r} radial and {need_a} axial modes "
            f"(have {Mr} and {La})"
        )
    index_map = np.stack([m.ravel()[order], l.ravel()[order]], axis=1)
    R = float(radial[0].grid[-1])
    L = float(axial[0].grid[-1])
    return WaveguideSpectrum(lam_sel, index_map, list(radial), list(axial), R, L)


AxisymmetricData = Callable[[np.ndarray, np.ndarray], np.ndarray]


def axisymmetric(func3d: Callable[[np.ndarray], np.ndarray], R: float, L: float,
                 n_check: int = 7, tol: float = 1e-10) -> AxisymmetricData:
    """Wrap ``f(x)`` on points ``(s, x2, x3)`` as ``f(s, rho)`` after checking rotational symmetry."""
    s = np.linspace(0.0, L, n_check)
    rho = np.linspace(0.0, R, n_check)[1:]
    theta = 2.0 * np.pi * np.arange(8) / 8 + 0.3
    S, P, T = np.meshgrid(s, rho, theta, indexing="ij")
    vals = np.asarray(func3d(np.stack([S, P * np.cos(T), P * np.sin(T)], axis=-1)))
    spread = np.max(np.abs(vals - vals[..., :1]))
    if spread > tol * max(1.0, float(np.max(np.abs(vals)))):
        raise DomainError("initial data is not axisymmetric; only axisymmetric modes are assembled")

    def f(s_, rho_):
        s_, rho_ = np.broadcast_arrays(np.asarray(s_, float), np.asarray(rho_, float))
        return np.asarray(func3d(np.stack([s_, rho_, np.zeros_like(rho_)], axis=-1)))

    return f


def gaussian_bump(s0: float, sigma: float, amplitude: float = 1.0) -> AxisymmetricData:
    """``A exp(-((s - s0)^2 + rho^2) / (2 sigma^2))`` centred on the axis."""
    return lambda s, rho: amplitude * np.exp(-((np.asarray(s) - s0) ** 2 + np.asarray(rho) ** 2) / (2 * sigma ** 2))


@dataclass
class ModalData:
    """Expansion coefficients ``(f, phi_n)`` and ``||f||`` for fixed initial data."""

    coeffs: np.ndarray
    f_norm: float


def project(spectrum: WaveguideSpectrum, f: AxisymmetricData) -> ModalData:
    """``(f, phi_n) = sqrt(2 pi) int int f v_m w_l rho drho ds`` by the trapezoid rule on the mode grids."""
    s, rho = spectrum.s, spectrum.rho
    F = np.asarray(f(s[:, None], rho[None, :]), float)
    if not np.all(np.isfinite(F)):
        raise DomainError("initial data must be finite")
    ws, wr = _trapezoid_weights(s), _trapezoid_weights(rho) * rho
    C = SQRT_2PI * (spectrum.axial_matrix().T * ws) @ F @ (spectrum.radial_matrix() * wr[:, None])
    m, l = spectrum.index_map.T - 1
    f_norm = float(np.sqrt(2.0 * np.pi * ws @ F ** 2 @ wr))
    return ModalData(C[l, m], f_norm)


@dataclass
class EvolvedField:
    t: float
    s: np.ndarray
    rho: np.ndarray
    u: np.ndarray
    lambdas: np.ndarray
    tail_bound: float
    modal: ModalData

    @property
    def n_modes(self) -> int:
        return len(self.lambdas)

    def norm(self) -> float:
        """L2 norm over the cylinder of the truncated expansion (Parseval)."""
        return float(np.sqrt(np.sum(self.modal.coeffs[:self.n_modes] ** 2 *
                                    np.exp(-2.0 * self.lambdas * self.t))))


def _check_modes(spectrum: WaveguideSpectrum, n_modes: int | None) -> int:
    n_modes = spectrum.count if n_modes is None else int(n_modes)
    if not 1 <= n_modes <= spectrum.count:
        raise DomainError(f"n_modes must lie in [1, {spectrum.count}]")
    return n_modes


def tail_bound(spectrum: WaveguideSpectrum, t: float, n_modes: int, f_norm: float) -> float:
    lam_next = spectrum.lambdas[n_modes] if n_modes < spectrum.count else spectrum.lambdas[-1]
    return float(np.exp(-lam_next * t) * f_norm)


def evolve(spectrum: WaveguideSpectrum, f: AxisymmetricData, t: float, n_modes: int | None = None,
           stride: int = 1, modal: ModalData | None = None) -> EvolvedField:
    """``u(s, rho, t) = sum_n exp(-lambda_n t) (f, phi_n) phi_n`` on the mode grids (every ``stride``-th node)."""
    if t < 0:
        raise DomainError("time must be nonnegative")
    n_modes = _check_modes(spectrum, n_modes)
    modal = modal or project(spectrum, f)
    lams = spectrum.lambdas[:n_modes]
    amp = modal.coeffs[:n_modes] * np.exp(-lams * t) / SQRT_2PI
    m, l = spectrum.index_map[:n_modes].T - 1
    W = spectrum.axial_matrix()[::stride]
    V = spectrum.radial_matrix()[::stride]
    A = np.zeros((W.shape[1], V.shape[1]))
    np.add.at(A, (l, m), amp)
    u = W @ A @ V.T
    return EvolvedField(t, spectrum.s[::stride], spectrum.rho[::stride], u, lams,
                        tail_bound(spectrum, t, n_modes, modal.f_norm), modal)


def residual_norm(spectrum: WaveguideSpectrum, modal: ModalData, t, n_modes: int | None = None) -> np.ndarray:
    """``||u(t) - (f, phi_1) phi_1||`` from the coefficients of modes 2..n_modes."""
    n_modes = _check_modes(spectrum, n_modes)
    t = np.atleast_1d(np.asarray(t, float))
    c2 = modal.coeffs[1:n_modes] ** 2
    lams = spectrum.lambdas[1:n_modes]
    return np.sqrt(np.exp(-2.0 * np.outer(t, lams)) @ c2)


def decay_slope(spectrum: WaveguideSpectrum, modal: ModalData, t0: float = 0.1, t1: float = 0.5,
                n_t: int = 41, n_modes: int | None = None) -> float:
    """Least-squares slope of ``log ||u(t) - (f, phi_1) phi_1||`` over ``[t0, t1]``."""
    t = np.linspace(t0, t1, n_t)
    return float(np.polyfit(t, np.log(residual_norm(spectrum, modal, t, n_modes)), 1)[0])


@dataclass(frozen=True)
class Confinement:
    ratio: float
    rho: np.ndarray
    profile: np.ndarray


def confinement_metric(spectrum: WaveguideSpectrum) -> Confinement:
    """``sup_{[R/2, R]} |v_1| / sup_{[0, R/2]} |v_1|`` and the profile ``|v_1(rho)|``."""
    rho = spectrum.rho
    prof = np.abs(spectrum.radial[0].values)
    inner = prof[rho <= spectrum.R / 2].max()
    outer = prof[rho >= spectrum.R / 2].max()
    ratio = float(outer / inner) if inner > 0 else float("inf")
    return Confinement(ratio, rho.copy(), prof)


@dataclass
class HeatTrace:
    probes: np.ndarray  # (P, 2) columns s, rho
    times: np.ndarray
    values: np.ndarray  # (P, T)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("trace times must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("trace values must be finite")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "s", "rho", "value"])
            for k, t in enumerate(self.times):
                for (s, r), v in zip(self.probes, self.values[:, k]):
                    w.writerow([repr(float(t)), repr(float(s)), repr(float(r)), repr(float(v))])


def signal_trace(spectrum: WaveguideSpectrum, f: AxisymmetricData, probes, times,
                 n_modes: int | None = None, modal: ModalData | None = None) -> HeatTrace:
    """``u`` at probe points ``(s, rho)`` for each time; ``v_m(0) = 0`` on the axis."""
    n_modes = _check_modes(spectrum, n_modes)
    probes = np.atleast_2d(np.asarray(probes, float))
    times = np.asarray(times, float)
    if np.any(times < 0):
        raise DomainError("times must be nonnegative")
    if np.any(probes[:, 0] < 0) or np.any(probes[:, 0] > spectrum.L) or np.any(probes[:, 1] < 0) \
            or np.any(probes[:, 1] > spectrum.R):
        raise DomainError("probe outside the cylinder")
    modal = modal or project(spectrum, f)
    W, V = spectrum.mode_values(probes[:, 0], probes[:, 1])
    m, l = spectrum.index_map[:n_modes].T - 1
    phi = W[:, l] * V[:, m] / SQRT_2PI  # (P, n_modes)
    decay = np.exp(-np.outer(spectrum.lambdas[:n_modes], times))
    values = phi @ (modal.coeffs[:n_modes, None] * decay)
    return HeatTrace(probes, times, values)
