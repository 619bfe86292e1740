"""Finite-rank Gel'fand-Levitan construction of a potential with prescribed low Dirichlet spectrum.

Eigenfunctions are normalised by ``Psi(0) = 0, Psi'(0) = 1``; the norming
constant of an eigenvalue ``nu`` is ``alpha = int_0^L Psi^2``.  For the free
operator on ``[0, pi]`` that gives ``Psi_l = sin(l x)/l`` and
``alpha_l = pi / (2 l^2)``.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .core import DomainError, SolverError

L_DEFAULT = np.pi
MIN_CELLS = 512
FD_ORDER = 6


def baseline_alpha(l, length: float = L_DEFAULT):
    """Norming constant of ``sin(l x)/l`` on ``[0, length]`` for ``l * length / pi`` integer."""
    l = np.asarray(l, float)
    return length / (2.0 * l ** 2)


@dataclass(frozen=True)
class SpectralTarget:
    """Replacement ``(nu_j, alpha_j)`` for the first ``K`` Dirichlet pairs of ``-d^2/ds^2`` on ``[0, pi]``.

    Pairs with index ``> K`` keep ``nu_l = l^2``, ``alpha_l = pi/(2 l^2)``.
    """

    nus: tuple[float, ...]
    alphas: tuple[float, ...]
    length: float = L_DEFAULT

    def __post_init__(self):
        nus = np.asarray(self.nus, float)
        alphas = np.asarray(self.alphas, float)
        if nus.shape != alphas.shape or nus.ndim != 1:
            raise DomainError("nus and alphas must be 1-d sequences of equal length")
        if not np.isclose(self.length, np.pi, rtol=0, atol=1e-15):
            raise DomainError("only the interval [0, pi] is supported")
        if np.any(alphas <= 0) or not np.all(np.isfinite(alphas)):
            raise DomainError("norming constants alpha must be positive")
        if np.any(nus < 0):
            raise DomainError("negative target eigenvalues are not supported")
        if len(nus) > 1 and np.any(np.diff(nus) <= 0):
            raise DomainError("target eigenvalues must be strictly increasing")
        K = len(nus)
        if K and nus[-1] >= (K + 1) ** 2:
            raise DomainError(f"nu_{K} = {nus[-1]} must stay below the first unmodified eigenvalue {(K + 1) ** 2}")

    @property
    def K(self) -> int:
        return len(self.nus)

    @classmethod
    def default(cls) -> "SpectralTarget":
        return cls((0.0, 11.0, 14.0), (np.pi ** 3 / 3.0, np.pi / 2.0, np.pi / 2.0))

    @classmethod
    def baseline(cls, K: int = 0) -> "SpectralTarget":
        l = np.arange(1, K + 1)
        return cls(tuple(map(float, l ** 2)), tuple(map(float, baseline_alpha(l))))

    def spectrum(self, count: int) -> np.ndarray:
        """First ``count`` target eigenvalues including the unmodified tail."""
        tail = np.arange(self.K + 1, max(count, self.K) + 1, dtype=float) ** 2
        return np.concatenate([np.asarray(self.nus, float), tail])[:count]

    def to_dict(self) -> dict:
        return {"nus": [float(v) for v in self.nus], "alphas": [float(v) for v in self.alphas]}


def _basis(freqs: np.ndarray, s) -> np.ndarray:
    """``f_j(s)``: ``s`` for frequency 0, ``sin(k s)/k`` otherwise; shape ``s.shape + (R,)``."""
    s = np.asarray(s, float)[..., None]
    k = np.where(freqs > 0, freqs, 1.0)
    return np.where(freqs > 0, np.sin(k * s) / k, s)


def _basis_derivative(freqs: np.ndarray, s) -> np.ndarray:
    s = np.asarray(s, float)[..., None]
    return np.where(freqs > 0, np.cos(freqs * s), 1.0)


def _gram_entry(ki: float, kj: float, s: np.ndarray) -> np.ndarray:
    # int_0^s f_i f_j in closed form
    if ki == 0 and kj == 0:
        return s ** 3 / 3.0
    if ki == 0 or kj == 0:
        k = ki or kj
        return (np.sin(k * s) - k * s * np.cos(k * s)) / k ** 3
    if ki == kj:
        return (s / 2.0 - np.sin(2.0 * ki * s) / (4.0 * ki)) / ki ** 2
    d, p = ki - kj, ki + kj
    return (np.sin(d * s) / (2.0 * d) - np.sin(p * s) / (2.0 * p)) / (ki * kj)


@dataclass(frozen=True)
class FiniteRankKernel:
    """``L(x, y) = sum_j c_j f_j(x) f_j(y)`` with ``f_j`` as in :func:`_basis`."""

    freqs: np.ndarray
    coeffs: np.ndarray
    target: SpectralTarget | None = None

    @property
    def rank(self) -> int:
        return len(self.freqs)

    def basis(self, s) -> np.ndarray:
        return _basis(self.freqs, s)

    def __call__(self, x, y) -> np.ndarray:
        return np.sum(self.coeffs * (self.basis(x) * self.basis(y)), axis=-1)

    def gram(self, s) -> np.ndarray:
        """``G_ij(s) = int_0^s f_i f_j``, shape ``s.shape + (R, R)``."""
        s = np.asarray(s, float)
        R = self.rank
        out = np.empty(s.shape + (R, R))
        for i in range(R):
            for j in range(i, R):
                out[..., i, j] = out[..., j, i] = _gram_entry(self.freqs[i], self.freqs[j], s)
        return out

    def descriptor(self) -> dict:
        return {
            "L": "pi",
            "rank": self.rank,
            "target": self.target.to_dict() if self.target is not None else None,
        }


def build_kernel(target: SpectralTarget, merge_tol: float = 1e-12) -> FiniteRankKernel:
    """``L = sum_new f f / alpha_new - sum_old f f / alpha_old`` for the modified indices."""
    l = np.arange(1, target.K + 1, dtype=float)
    freqs = np.concatenate([np.sqrt(np.asarray(target.nus, float)), l])
    coeffs = np.concatenate([1.0 / np.asarray(target.alphas, float), -1.0 / baseline_alpha(l)])
    # merge equal frequencies so that unmodified pairs cancel exactly
    merged_f, merged_c = [], []
    for k, c in sorted(zip(freqs, coeffs), key=lambda p: p[0]):
        if merged_f and abs(k - merged_f[-1]) <= merge_tol:
            merged_c[-1] += c
        else:
            merged_f.append(k)
            merged_c.append(c)
    merged_f, merged_c = np.asarray(merged_f), np.asarray(merged_c)
    scale = np.max(np.abs(coeffs)) if len(coeffs) else 0.0
    keep = np.abs(merged_c) > 1e-14 * max(scale, 1.0)
    return FiniteRankKernel(merged_f[keep], merged_c[keep], target)


@dataclass(frozen=True)
class TransmutationKernel:
    """``K(s, tau) = sum_j b_j(s) f_j(tau)`` with ``b`` and ``db/ds`` tabulated on ``s``."""

    s: np.ndarray
    b: np.ndarray
    db: np.ndarray
    kernel: FiniteRankKernel
    cond: np.ndarray = field(repr=False, default=None)

    def diagonal(self) -> np.ndarray:
        """``K(s_k, s_k)``."""
        return np.sum(self.b * self.kernel.basis(self.s), axis=-1)

    def diagonal_derivative(self) -> np.ndarray:
        """``d/ds K(s, s)`` from the differentiated linear system."""
        f = self.kernel.basis(self.s)
        df = _basis_derivative(self.kernel.freqs, self.s)
        return np.sum(self.db * f + self.b * df, axis=-1)

    def __call__(self, s, tau) -> np.ndarray:
        """``K(s, tau)`` for arbitrary ``s`` (solved afresh) and ``tau``."""
        b, _, _ = _solve_coefficients(self.kernel, np.asarray(s, float))
        return np.sum(b * self.kernel.basis(tau), axis=-1)

    def residual(self, s: float, tau: float) -> float:
        """``K(s,tau) + int_0^s K(s,t) L(t,tau) dt + L(s,tau)`` by adaptive quadrature."""
        b, _, _ = _solve_coefficients(self.kernel, np.asarray(s, float))
        integrand = lambda t: float(np.sum(b * self.kernel.basis(t)) * self.kernel(t, tau))
        val, _ = quad(integrand, 0.0, s, epsabs=1e-13, epsrel=1e-12, limit=200)
        return float(np.sum(b * self.kernel.basis(tau)) + val + self.kernel(s, tau))


def _solve_coefficients(kernel: FiniteRankKernel, s: np.ndarray, cond_max: float = 1e12):
    R = kernel.rank
    if R == 0:
        z = np.zeros(np.shape(s) + (0,))
        return z, z, np.ones(np.shape(s))
    c = kernel.coeffs
    A = np.eye(R) + c[:, None] * kernel.gram(s)
    f = kernel.basis(s)
    cond = np.linalg.cond(A)
    bad = ~np.isfinite(cond) | (cond > cond_max)
    if np.any(bad):
        where = np.asarray(s).ravel()[np.argmax(np.ravel(bad))]
        raise SolverError(
            f"Gel'fand-Levitan system is singular near s={where:.6g} "
            f"(condition {np.max(cond):.3e}); the spectral target is not admissible"
        )
    b = np.linalg.solve(A, (-c * f)[..., None])[..., 0]
    # differentiate (I + D_c G) b = -D_c f using G' = f f^T
    df = _basis_derivative(kernel.freqs, s)
    rhs = -c * (df + f * np.sum(f * b, axis=-1, keepdims=True))
    db = np.linalg.solve(A, rhs[..., None])[..., 0]
    return b, db, cond


def uniform_grid(n: int, length: float = L_DEFAULT) -> np.ndarray:
    return np.linspace(0.0, length, n + 1)


def solve_gl(kernel: FiniteRankKernel, s_grid) -> TransmutationKernel:
    """Solve ``(I + D_c G(s)) b(s) = -D_c f(s)`` at every grid point."""
    s = np.asarray(s_grid, float)
    if s.ndim != 1 or len(s) < 2:
        raise DomainError("s grid must be a 1-d array")
    if s[0] < 0 or s[-1] > np.pi + 1e-12 or np.any(np.diff(s) <= 0):
        raise DomainError("s grid must be increasing inside [0, pi]")
    if np.max(np.diff(s)) > np.pi / MIN_CELLS * (1 + 1e-9):
        raise DomainError(f"grid spacing must not exceed pi/{MIN_CELLS}")
    b, db, cond = _solve_coefficients(kernel, s)
    return TransmutationKernel(s, b, db, kernel, cond)


def _fd_weights(offsets: np.ndarray) -> np.ndarray:
    # first-derivative weights on integer offsets (unit spacing)
    m = len(offsets)
    V = np.vander(offsets.astype(float), m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(V, rhs)


def fd_derivative(values: np.ndarray, h: float, order: int = FD_ORDER) -> np.ndarray:
    """Derivative on a uniform grid: centred stencils inside, one-sided near the ends."""
    n = len(values)
    width = order + 1
    if order % 2 or order < 2:
        raise DomainError("finite-difference order must be even and >= 2")
    if n < width + 1:
        raise DomainError(f"grid with {n} points is too coarse for order-{order} differences")
    half = order // 2
    out = np.empty(n)
    centred = _fd_weights(np.arange(-half, half + 1))
    out[half:n - half] = sum(w * values[half + o:n - half + o] for w, o in zip(centred, range(-half, half + 1)))
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - half, 0), n - width)
        offs = np.arange(start, start + width) - i
        out[i] = _fd_weights(offs) @ values[start:start + width]
    return out / h


@dataclass(frozen=True)
class Potential1D:
    """Real potential sampled on a grid over ``[0, L]``; cubic interpolation between nodes."""

    s: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.iscomplexobj(self.values) or not np.all(np.isfinite(self.values)):
            raise DomainError("potential values must be real and finite")
        if len(self.s) != len(self.values):
            raise DomainError("grid and values differ in length")

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def __call__(self, x) -> np.ndarray:
        return self._spline(x)

    @property
    def _spline(self) -> CubicSpline:
        sp = self.__dict__.get("_sp")
        if sp is None:
            sp = CubicSpline(self.s, self.values)
            object.__setattr__(self, "_sp", sp)
        return sp

    def on_grid(self, x) -> np.ndarray:
        """Exact node values when ``x`` are grid nodes, spline values otherwise."""
        x = np.asarray(x, float)
        idx = np.clip(np.searchsorted(self.s, x), 0, len(self.s) - 1)
        hit = np.isclose(self.s[idx], x, rtol=0, atol=1e-12)
        out = self(x)
        out[hit] = self.values[idx[hit]]
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "Q"])
            for si, qi in zip(self.s, self.values):
                w.writerow([repr(float(si)), repr(float(qi))])

    @classmethod
    def from_csv(cls, path) -> "Potential1D":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1])


def potential_q(tk: TransmutationKernel, method: str = "analytic", fd_order: int = FD_ORDER) -> Potential1D:
    """``Q(s) = 2 d/ds K(s, s)`` on the kernel grid.

    ``method="analytic"`` uses the differentiated linear system (exact up to
    round-off); ``method="fd"`` differentiates the tabulated diagonal with
    order-``fd_order`` finite differences on a uniform grid.
    """
    if method == "analytic":
        vals = 2.0 * tk.diagonal_derivative()
    elif method == "fd":
        h = np.diff(tk.s)
        if not np.allclose(h, h[0], rtol=1e-10, atol=0):
            raise DomainError("finite differences need a uniform grid")
        vals = 2.0 * fd_derivative(tk.diagonal(), float(h[0]), fd_order)
    else:
        raise DomainError(f"unknown derivative method {method!r}")
    return Potential1D(tk.s.copy(), np.asarray(vals, float))


def design_potential(target: SpectralTarget | None = None, n: int = 4096, method: str = "analytic"):
    """Kernel, transmutation kernel and potential on a uniform ``n``-cell grid."""
    target = target or SpectralTarget.default()
    kernel = build_kernel(target)
    tk = solve_gl(kernel, uniform_grid(n))
    return kernel, tk, potential_q(tk, method)


@dataclass(frozen=True)
class RadialPotential:
    """``p(rho) = 1/(4 rho^2) + Q(rho)`` on ``(0, R]``.

    With ``v = psi / sqrt(rho)`` the radial problem ``-v'' - v'/rho + p v = mu v``
    is equivalent to the regular problem ``-psi'' + Q psi = mu psi``,
    ``psi(0) = psi(R) = 0``; ``regular_equivalent`` records that this route is used.
    """

    Q: Potential1D
    R: float
    singular_coefficient: float = 0.25
    regular_equivalent: bool = True

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, float)
        if np.any(rho <= 0) or np.any(rho > self.R + 1e-12):
            raise DomainError("p(rho) is defined for 0 < rho <= R")
        return self.singular_coefficient / rho ** 2 + self.Q(rho)


def radial_lift(Q: Potential1D, R: float | None = None) -> RadialPotential:
    R = Q.length if R is None else float(R)
    if R > Q.length + 1e-12 or R <= 0:
        raise DomainError(f"Q is only defined on [0, {Q.length}]")
    return RadialPotential(Q, R)


def write_descriptor(path, kernel: FiniteRankKernel) -> None:
    with open(path, "w") as fh:
        json.dump(kernel.descriptor(), fh, indent=2, sort_keys=True)
