"""Scalar kernels, sources, surface quadrature and a dense solver shared by all modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy import integrate, special

FOUR_PI = 4.0 * np.pi


class DomainError(ValueError):
    """Input outside the domain where an operation is defined."""


class SolverError(RuntimeError):
    """A linear solve or limit process failed numerically."""


# --------------------------------------------------------------------------
# kernels
# --------------------------------------------------------------------------


def _distance(x, y) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.sqrt(np.sum((x - y) ** 2, axis=-1))


def green_kernel(x, y, lam: float) -> np.ndarray | float:
    """Yukawa kernel ``exp(-sqrt(lam) r) / (4 pi r)`` with ``r = |x - y|``.

    ``x`` and ``y`` broadcast against each other along leading axes; the
    last axis holds the three coordinates.
    """
    if lam < 0:
        raise DomainError(f"lambda must be >= 0, got {lam}")
    r = _distance(x, y)
    if np.any(r == 0.0):
        raise DomainError("green_kernel: coincident points")
    val = np.exp(-np.sqrt(lam) * r) / (FOUR_PI * r)
    return float(val) if np.ndim(val) == 0 else val


def newtonian_kernel(x, y) -> np.ndarray | float:
    return green_kernel(x, y, 0.0)


def kernel_from_distance(r: np.ndarray, lam: float) -> np.ndarray:
    """Same kernel evaluated on a precomputed distance array (no checks)."""
    return np.exp(-np.sqrt(lam) * r) / (FOUR_PI * r)


# --------------------------------------------------------------------------
# sources with ball-shaped support
# --------------------------------------------------------------------------


_PROFILES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "indicator": lambda t: np.where(t <= 1.0, 1.0, 0.0),
    "bump": lambda t: np.where(t <= 1.0, (1.0 - np.minimum(t, 1.0) ** 2) ** 2, 0.0),
}


@dataclass(frozen=True)
class BallSource:
    """Radially symmetric source ``amplitude * profile(|y - center| / radius)``.

    ``profile`` is ``"indicator"`` (uniform ball) or ``"bump"``
    (``(1 - t^2)^2``, continuously differentiable, zero on the sphere).
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 1.0
    amplitude: float = 1.0
    profile: str = "bump"

    def __post_init__(self):
        if self.radius <= 0:
            raise DomainError("source radius must be positive")
        if self.profile not in _PROFILES:
            raise DomainError(f"unknown source profile {self.profile!r}")

    radial = True

    def radial_value(self, dist: np.ndarray) -> np.ndarray:
        return self.amplitude * _PROFILES[self.profile](np.asarray(dist) / self.radius)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.radial_value(_distance(y, np.asarray(self.center)))

    def scaled(self, factor: float) -> "BallSource":
        return BallSource(self.center, self.radius, self.amplitude * factor, self.profile)


@dataclass(frozen=True)
class FunctionSource:
    """Arbitrary vectorised ``func(points) -> values`` supported in a ball."""

    func: Callable[[np.ndarray], np.ndarray]
    center: tuple[float, float, float]
    radius: float
    radial: bool = False

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        inside = _distance(y, np.asarray(self.center)) <= self.radius
        return np.where(inside, self.func(y), 0.0)


def _zero_source(source) -> bool:
    return isinstance(source, BallSource) and source.amplitude == 0.0


def _frames(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors orthogonal to each row of ``axis``."""
    helper = np.where(np.abs(axis[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    e1 = np.cross(axis, helper)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(axis, e1)
    return e1, e2


def volume_potential(
    x,
    source,
    lam: float = 0.0,
    n_angle: int = 40,
    n_radial: int = 40,
    n_azimuth: int = 24,
    chunk: int = 2048,
) -> np.ndarray:
    """``int g(x, y, lam) f(y) dy`` over the ball supporting ``source``.

    Spherical coordinates are centred on each target point, so the ``1/r``
    factor of the kernel cancels against the volume Jacobian.  The polar
    axis points at the source centre; for exterior points the polar angle
    is reparametrised through ``sin(theta) = (R/D) sin(u)`` which keeps the
    chord end points smooth up to the tangent cone.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    if _zero_source(source) or len(x) == 0:
        return out
    k = np.sqrt(lam)
    c = np.asarray(source.center, dtype=float)
    R = float(source.radius)
    ga, wa = np.polynomial.legendre.leggauss(n_angle)
    gr, wr = np.polynomial.legendre.leggauss(n_radial)
    if source.radial:
        phis, wphi = np.zeros(1), np.array([2.0 * np.pi])
    else:
        phis = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
        wphi = np.full(n_azimuth, 2.0 * np.pi / n_azimuth)

    for start in range(0, len(x), chunk):
        xs = x[start:start + chunk]
        diff = c - xs
        D = np.linalg.norm(diff, axis=1)
        axis = np.where(D[:, None] > 0, diff / np.where(D > 0, D, 1.0)[:, None], [[1.0, 0.0, 0.0]])
        inside = D < R
        # angular nodes: cos(theta), chord [r0, r1], angular weight (per point)
        cos_t = np.empty((len(xs), n_angle))
        r0 = np.empty_like(cos_t)
        r1 = np.empty_like(cos_t)
        wang = np.empty_like(cos_t)
        if inside.any():
            Di = D[inside][:, None]
            mu = np.broadcast_to(ga, (inside.sum(), n_angle))
            cos_t[inside] = mu
            r0[inside] = 0.0
            r1[inside] = Di * mu + np.sqrt(R * R - Di * Di * (1.0 - mu * mu))
            wang[inside] = wa
        out_mask = ~inside
        if out_mask.any():
            Do = D[out_mask][:, None]
            u = 0.25 * np.pi * (ga + 1.0)
            sin_t = (R / Do) * np.sin(u)
            ct = np.sqrt(np.clip(1.0 - sin_t ** 2, 0.0, None))
            half = R * np.cos(u)
            cos_t[out_mask] = ct
            r0[out_mask] = Do * ct - half
            r1[out_mask] = Do * ct + half
            # sin(theta) d theta = sin(theta) (R/D) cos(u) / cos(theta) du
            with np.errstate(invalid="ignore", divide="ignore"):
                jac = np.where(ct > 0, sin_t * (R / Do) * np.cos(u) / ct, 0.0)
            wang[out_mask] = 0.25 * np.pi * wa * jac
        # radial nodes on each chord
        half_len = 0.5 * (r1 - r0)
        r = (r0 + half_len)[..., None] + half_len[..., None] * gr
        wrad = half_len[..., None] * wr
        radial_factor = r * np.exp(-k * r) / FOUR_PI
        if source.radial:
            Dc = D[:, None, None]
            ct3 = cos_t[..., None]
            dist = np.sqrt(np.clip(r * r - 2.0 * r * Dc * ct3 + Dc * Dc, 0.0, None))
            fval = source.radial_value(dist)
            val = np.einsum("pak,pak,pak,pa->p", fval, radial_factor, wrad, wang) * wphi[0]
        else:
            e1, e2 = _frames(axis)
            sin_t = np.sqrt(np.clip(1.0 - cos_t ** 2, 0.0, None))
            val = np.zeros(len(xs))
            for phi, wp in zip(phis, wphi):
                dirs = (
                    cos_t[..., None] * axis[:, None, :]
                    + (sin_t * np.cos(phi))[..., None] * e1[:, None, :]
                    + (sin_t * np.sin(phi))[..., None] * e2[:, None, :]
                )
                pts = xs[:, None, None, :] + r[..., None] * dirs[:, :, None, :]
                fval = source(pts.reshape(-1, 3)).reshape(r.shape)
                val += wp * np.einsum("pak,pak,pak,pa->p", fval, radial_factor, wrad, wang)
        out[start:start + chunk] = val
    return out


def free_field(x, lam: float, source, **quad) -> np.ndarray:
    """Free-space transformed temperature ``lam^-1 int g(x, y, lam) f(y) dy``."""
    if lam <= 0:
        raise DomainError("free_field needs lambda > 0 (factor 1/lambda)")
    return volume_potential(x, source, lam, **quad) / lam


def newtonian_potential(x, source, **quad) -> np.ndarray:
    """``int g0(x, y) f(y) dy``, the stationary counterpart of :func:`free_field`."""
    return volume_potential(x, source, 0.0, **quad)


# --------------------------------------------------------------------------
# weakly singular self-cell integrals
# --------------------------------------------------------------------------


def _corner_integral(a: float, b: float, c: float) -> float:
    # int over [0,a]x[0,b]x[0,c] of 1/|y|
    r = np.sqrt(a * a + b * b + c * c)
    return (
        a * b * np.arcsinh(c / np.hypot(a, b))
        + b * c * np.arcsinh(a / np.hypot(b, c))
        + c * a * np.arcsinh(b / np.hypot(c, a))
        - 0.5 * a * a * np.arctan(b * c / (a * r))
        - 0.5 * b * b * np.arctan(c * a / (b * r))
        - 0.5 * c * c * np.arctan(a * b / (c * r))
    )


def box_inverse_distance_integral(sides) -> float:
    """Exact ``int 1/|y| dy`` over a box with the given side lengths, centred at 0."""
    h1, h2, h3 = (0.5 * float(s) for s in sides)
    return 8.0 * _corner_integral(h1, h2, h3)


def _signed_corner_integral(a, b, c) -> np.ndarray:
    # odd extension of _corner_integral in every argument; zero if any side vanishes
    a, b, c = np.broadcast_arrays(a, b, c)
    sign = np.sign(a) * np.sign(b) * np.sign(c)
    with np.errstate(all="ignore"):
        val = _corner_integral(np.abs(a), np.abs(b), np.abs(c))
    return np.where(sign == 0, 0.0, sign * np.nan_to_num(val))


def box_newtonian_integral(x, lo, hi) -> np.ndarray:
    """Exact ``int_box g0(x, y) dy`` for points ``x`` (n, 3) and boxes ``[lo, hi]`` (m, 3)."""
    x = np.atleast_2d(np.asarray(x, float))[:, None, :]
    lo = np.atleast_2d(np.asarray(lo, float))[None, :, :] - x
    hi = np.atleast_2d(np.asarray(hi, float))[None, :, :] - x
    total = 0.0
    for corner in np.ndindex(2, 2, 2):
        lims = [hi[..., i] if bit == 0 else lo[..., i] for i, bit in enumerate(corner)]
        total = total + (-1) ** sum(corner) * _signed_corner_integral(*lims)
    return total / FOUR_PI


def box_kernel_integral(x, centers, side, lam: float) -> np.ndarray:
    """``int_box g(x, y, lam) dy`` for boxes of common ``side`` around ``centers``.

    The Newtonian part is exact; the bounded remainder uses a split Gauss rule.
    """
    x = np.atleast_2d(np.asarray(x, float))
    centers = np.atleast_2d(np.asarray(centers, float))
    side = np.asarray(side, float)
    out = box_newtonian_integral(x, centers - 0.5 * side, centers + 0.5 * side)
    if lam > 0:
        i, j = np.indices(out.shape)
        out += _smooth_remainder(x[i.ravel()], centers[j.ravel()], side, lam).reshape(out.shape)
    return out


def cell_self_integral(sides, lam: float, order: int = 8) -> float:
    """``int_cell g(x_c, y, lam) dy`` for the cell centred at ``x_c``.

    The Newtonian part is exact; the bounded remainder
    ``(exp(-k r) - 1) / (4 pi r)`` is integrated by tensor Gauss.
    """
    sides = np.asarray(sides, dtype=float)
    base = box_inverse_distance_integral(sides) / FOUR_PI
    if lam == 0.0:
        return base
    k = np.sqrt(lam)
    g, w = np.polynomial.legendre.leggauss(order)
    pts = [0.5 * s * g for s in sides]
    wts = [0.5 * s * w for s in sides]
    X, Y, Z = np.meshgrid(*pts, indexing="ij")
    W = np.einsum("i,j,k->ijk", *wts)
    r = np.sqrt(X * X + Y * Y + Z * Z)
    corr = np.expm1(-k * r) / (FOUR_PI * r)
    return base + float(np.sum(W * corr))


_G3, _W3 = np.polynomial.legendre.leggauss(3)


def _smooth_remainder(xs, cs, side, lam):
    # int_box (g - g0): the box is split at the projection of x so that the
    # kink of the integrand at y = x sits on sub-box corners, then 3-point
    # Gauss per axis on every sub-box
    k = np.sqrt(lam)
    lo, hi = cs - 0.5 * side, cs + 0.5 * side
    mid = np.clip(xs, lo, hi)
    total = np.zeros(len(xs))
    for octant in np.ndindex(2, 2, 2):
        a = np.where(np.array(octant) == 0, lo, mid)
        b = np.where(np.array(octant) == 0, mid, hi)
        vol = np.prod(b - a, axis=1)
        if not np.any(vol > 0):
            continue
        for node in np.ndindex(3, 3, 3):
            y = 0.5 * (a + b) + 0.5 * (b - a) * _G3[list(node)]
            r = np.linalg.norm(y - xs, axis=1)
            safe = np.where(r > 0, r, 1.0)
            f = np.where(r > 0, np.expm1(-k * r) / (FOUR_PI * safe), -k / FOUR_PI)
            total += vol / 8.0 * np.prod(_W3[list(node)]) * f
    return total


def cell_integral_matrix(x, centers, side, lam: float, near: float = 2.5) -> np.ndarray:
    """``W_ij ~ int_{cell j} g(x_i, y) dy``: exact box integrals for cells within
    ``near`` cell diagonals of ``x_i``, midpoint rule elsewhere."""
    x = np.atleast_2d(np.asarray(x, float))
    centers = np.atleast_2d(np.asarray(centers, float))
    side = np.asarray(side, float)
    r = np.sqrt(np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=-1))
    W = kernel_from_distance(np.where(r > 0, r, 1.0), lam) * float(np.prod(side))
    rows, cols = np.nonzero(r < near * float(np.linalg.norm(side)))
    W[rows, cols] = _paired_box_kernel(x[rows], centers[cols], side, lam)
    return W


def _paired_box_kernel(xs, cs, side, lam, chunk=8192):
    # box integral for matching rows of xs (points) and cs (box centres)
    out = np.empty(len(xs))
    vol = float(np.prod(side))
    for k in range(0, len(xs), chunk):
        a, c = xs[k:k + chunk], cs[k:k + chunk]
        lo, hi = c - 0.5 * side - a, c + 0.5 * side - a
        total = 0.0
        for corner in np.ndindex(2, 2, 2):
            lims = [hi[:, i] if bit == 0 else lo[:, i] for i, bit in enumerate(corner)]
            total = total + (-1) ** sum(corner) * _signed_corner_integral(*lims)
        val = total / FOUR_PI
        if lam > 0:
            val = val + _smooth_remainder(a, c, side, lam)
        out[k:k + chunk] = val
    return out


# --------------------------------------------------------------------------
# closed surfaces
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Ellipsoid:
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axes: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def level(self, x) -> np.ndarray:
        """Zero on the surface, negative inside."""
        x = np.asarray(x, dtype=float)
        return np.sum(((x - np.asarray(self.center)) / np.asarray(self.axes)) ** 2, axis=-1) - 1.0

    def area(self) -> float:
        a, b, c = sorted(self.axes, reverse=True)
        if np.isclose(a, c, rtol=1e-14):
            return FOUR_PI * a * a
        phi = np.arccos(c / a)
        m = (a * a * (b * b - c * c)) / (b * b * (a * a - c * c)) if b > c else 0.0
        e_inc = special.ellipeinc(phi, m)
        f_inc = special.ellipkinc(phi, m)
        return float(
            2 * np.pi * c * c
            + 2 * np.pi * a * b / np.sin(phi) * (e_inc * np.sin(phi) ** 2 + f_inc * np.cos(phi) ** 2)
        )


@dataclass(frozen=True)
class SurfaceMesh:
    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    area: float
    shape: Ellipsoid | None = None
    resolution: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def validate(self, closure_tol: float = 1e-8) -> None:
        if len(self.nodes) < 4 or np.any(self.weights <= 0):
            raise DomainError("degenerate surface mesh (too few nodes or nonpositive weights)")
        if np.max(np.abs(np.linalg.norm(self.normals, axis=1) - 1.0)) > 1e-12:
            raise DomainError("surface normals are not unit vectors")
        # a closed surface has zero net vector area
        if np.linalg.norm(self.weights @ self.normals) > closure_tol * self.area:
            raise DomainError("surface mesh is not closed (net vector area does not vanish)")


def _rotation_to(pole: np.ndarray) -> np.ndarray:
    """Rotation matrix mapping the z axis onto the unit vector ``pole``."""
    pole = pole / np.linalg.norm(pole)
    z = np.array([0.0, 0.0, 1.0])
    v = np.cross(z, pole)
    s = np.linalg.norm(v)
    cth = float(z @ pole)
    if s < 1e-15:
        return np.eye(3) if cth > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * ((1 - cth) / s ** 2)


def ellipsoid_mesh(shape: Ellipsoid, n_theta: int, n_phi: int | None = None, pole=None) -> SurfaceMesh:
    """Product rule: Gauss-Legendre in the polar angle, trapezoid in azimuth.

    The parameter sphere is rotated so that its polar axis passes through
    the preimage of ``pole`` (a surface point), which makes the double-layer
    integrand for a probe at ``pole`` smooth in the polar angle.
    """
    n_phi = n_phi or 2 * n_theta
    A = np.asarray(shape.axes, dtype=float)
    c = np.asarray(shape.center, dtype=float)
    rot = np.eye(3)
    if pole is not None:
        rot = _rotation_to((np.asarray(pole, dtype=float) - c) / A)
    g, w = np.polynomial.legendre.leggauss(n_theta)
    theta = 0.5 * np.pi * (g + 1.0)
    wt = 0.5 * np.pi * w
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(theta, phi, indexing="ij")
    u = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1).reshape(-1, 3)
    u = u @ rot.T
    nodes = c + u * A
    # |A u_theta x A u_phi| = det(A) sin(theta) |A^-1 u|
    jac = np.prod(A) * np.sin(T).ravel() * np.linalg.norm(u / A, axis=1)
    weights = jac * np.outer(wt, np.full(n_phi, 2.0 * np.pi / n_phi)).ravel()
    grad = (nodes - c) / A ** 2
    normals = grad / np.linalg.norm(grad, axis=1, keepdims=True)
    return SurfaceMesh(nodes, weights, normals, shape.area(), shape, n_theta)


def sphere_mesh(n_theta: int, radius: float = 1.0, center=(0.0, 0.0, 0.0), pole=None) -> SurfaceMesh:
    return ellipsoid_mesh(Ellipsoid(tuple(center), (radius,) * 3), n_theta, pole=pole)


def lebedev_sphere_mesh(order: int, radius: float = 1.0, center=(0.0, 0.0, 0.0)) -> SurfaceMesh:
    """Sphere mesh on a Lebedev node set (``order`` is the exact polynomial degree)."""
    pts, w = integrate.lebedev_rule(order)
    u = pts.T
    c = np.asarray(center, dtype=float)
    shape = Ellipsoid(tuple(c), (radius,) * 3)
    return SurfaceMesh(c + radius * u, radius ** 2 * w, u.copy(), shape.area(), shape,
                       int(np.ceil(np.sqrt(len(w) / 2.0))))


def _double_layer_sum(mesh: SurfaceMesh, probe: np.ndarray) -> float:
    d = mesh.nodes - probe
    r = np.linalg.norm(d, axis=1)
    kern = -np.einsum("ij,ij->i", d, mesh.normals) / (FOUR_PI * r ** 3)
    return float(mesh.weights @ kern)


def gauss_identity_check(mesh: SurfaceMesh, probe, surface_tol: float = 1e-10) -> float:
    """``int_S d/dN_s g0(s, probe) ds`` on a closed surface.

    Interior probes give -1, exterior 0 and probes on the surface -1/2.
    On-surface probes are integrated on a product rule of the same
    resolution whose pole sits at the probe, which removes the
    weak singularity through the surface Jacobian.
    """
    mesh.validate()
    probe = np.asarray(probe, dtype=float)
    on_surface = False
    if mesh.shape is not None:
        on_surface = abs(float(mesh.shape.level(probe))) < surface_tol
    elif np.min(np.linalg.norm(mesh.nodes - probe, axis=1)) < surface_tol:
        raise DomainError("on-surface probe needs a parametrised surface")
    if not on_surface:
        return _double_layer_sum(mesh, probe)
    polar = ellipsoid_mesh(mesh.shape, max(mesh.resolution, 4), pole=probe)
    return _double_layer_sum(polar, probe)


# --------------------------------------------------------------------------
# dense linear algebra
# --------------------------------------------------------------------------


def dense_solve(A: np.ndarray, b: np.ndarray, what: str = "system", rcond_min: float = 1e-13):
    """LU solve with partial pivoting; returns ``(x, condition_estimate)``.

    Raises :class:`SolverError` if the reciprocal 1-norm condition
    estimate falls below ``rcond_min``.
    """
    lu, piv, info = sla.lapack.get_lapack_funcs(("getrf",), (A,))[0](A, overwrite_a=False)
    if info > 0:
        raise SolverError(f"{what}: matrix is exactly singular (zero pivot {info})")
    gecon = sla.lapack.get_lapack_funcs("gecon", (lu,))
    anorm = np.linalg.norm(A, 1)
    rcond, _ = gecon(lu, anorm, norm="1")
    cond = np.inf if rcond == 0 else 1.0 / rcond
    if not np.isfinite(cond) or rcond < rcond_min:
        raise SolverError(f"{what}: matrix is numerically singular, condition estimate {cond:.3e}")
    x = sla.lu_solve((lu, piv), b)
    return x, float(cond)
