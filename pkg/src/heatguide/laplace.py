"""Small-lambda limits of ``lambda U(lambda)`` and real-axis Laplace inversion."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial, log
from typing import Callable

import numpy as np

from .core import DomainError, SolverError

MAX_STEHFEST_ORDER = 18


@dataclass(frozen=True)
class TransformSamples:
    """Samples ``(lambda_k, U(lambda_k))`` on a monotone grid of positive lambdas."""

    lams: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lams = np.asarray(self.lams, float)
        if np.any(lams <= 0):
            raise DomainError("transform samples need lambda > 0")
        step = np.diff(lams)
        if len(lams) > 1 and not (np.all(step > 0) or np.all(step < 0)):
            raise DomainError("lambda grid must be strictly monotone")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("transform samples must be finite")

    @classmethod
    def sample(cls, transform: Callable, lams) -> "TransformSamples":
        lams = np.asarray(lams, float)
        return cls(lams, np.array([np.asarray(transform(lam)) for lam in lams]))


def richardson_table(hs, values, ratio: float) -> list[np.ndarray]:
    """Neville-style table for ``values(h) = v0 + c1 h + c2 h^2 + ...`` on ``h_k = h_0 / ratio^k``.

    Row ``j`` holds the estimates with the first ``j`` powers removed.
    """
    rows = [np.asarray(values)]
    for j in range(1, len(hs)):
        prev = rows[-1]
        f = ratio ** j
        rows.append((f * prev[1:] - prev[:-1]) / (f - 1.0))
    return rows


@dataclass(frozen=True)
class LimitEstimate:
    value: np.ndarray | float
    error: float
    samples: TransformSamples


def tauberian_limit(transform: Callable[[float], object], lam0: float = 0.01, levels: int = 4,
                    variable: str = "lambda") -> LimitEstimate:
    """Estimate ``lim_{lambda -> 0} lambda U(lambda)`` by Richardson extrapolation.

    Samples are taken at ``lam0 / 2^k`` for ``k < levels``.  With
    ``variable="sqrt"`` the expansion is taken in powers of ``sqrt(lambda)``,
    which suits transforms built from the kernel ``exp(-sqrt(lambda) r)``.
    The error bar is the change between the two most extrapolated estimates.
    """
    if lam0 <= 0:
        raise DomainError("lam0 must be positive")
    if levels < 2:
        raise DomainError("need at least two levels")
    if variable not in ("lambda", "sqrt"):
        raise DomainError(f"unknown expansion variable {variable!r}")
    lams = lam0 / 2.0 ** np.arange(levels)
    samples = TransformSamples.sample(transform, lams)
    vals = samples.values * lams.reshape((-1,) + (1,) * (samples.values.ndim - 1))
    steps = np.array([np.max(np.abs(vals[k + 1] - vals[k])) for k in range(levels - 1)])
    if np.any(steps[1:] > steps[:-1] * (1.0 + 1e-9) + 1e-300):
        raise SolverError("limit not detected: lambda U(lambda) does not settle as lambda -> 0")
    ratio = 2.0 if variable == "lambda" else np.sqrt(2.0)
    table = richardson_table(lams, vals, ratio)
    best = table[-1][0]
    error = float(np.max(np.abs(best - table[-2][-1])))
    if not np.all(np.isfinite(best)):
        raise SolverError("limit not detected: non-finite extrapolation")
    return LimitEstimate(best if np.ndim(best) else float(best), error, samples)


@lru_cache(maxsize=None)
def stehfest_weights(order: int) -> tuple[float, ...]:
    """Gaver-Stehfest weights ``V_1..V_order``, computed exactly and rounded once."""
    if order % 2 or order < 2:
        raise DomainError(f"Stehfest order must be a positive even integer, got {order}")
    if order > MAX_STEHFEST_ORDER:
        raise DomainError(f"Stehfest order {order} > {MAX_STEHFEST_ORDER}: weights overflow double precision")
    half = order // 2
    out = []
    for k in range(1, order + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(j ** half * factorial(2 * j),
                            factorial(half - j) * factorial(j) * factorial(j - 1)
                            * factorial(k - j) * factorial(2 * j - k))
        out.append(float((-1) ** (k + half) * acc))
    return tuple(out)


def invert_real_axis(transform: Callable[[float], object], t, order: int = 12) -> np.ndarray | float:
    """Gaver-Stehfest inversion ``u(t) ~ ln2/t sum_k V_k U(k ln2 / t)``."""
    weights = stehfest_weights(order)
    t_arr = np.atleast_1d(np.asarray(t, float))
    if np.any(t_arr <= 0):
        raise DomainError("inversion times must be positive")
    out = []
    for ti in t_arr:
        c = log(2.0) / ti
        acc = sum(w * np.asarray(transform(k * c)) for k, w in enumerate(weights, start=1))
        out.append(c * acc)
    out = np.array(out)
    return float(out[0]) if np.ndim(t) == 0 and out.ndim == 1 else out


def write_time_trace(path, t, values, header=("t", "value")) -> None:
    """CSV with one row per time; ``values`` may have extra columns."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        cols = list(header)
        if values.ndim == 2 and len(cols) != values.shape[1] + 1:
            cols = ["t"] + [f"value_{j}" for j in range(values.shape[1])]
        w.writerow(cols)
        for ti, v in zip(np.asarray(t, float), values):
            w.writerow([repr(float(ti))] + [repr(float(x)) for x in np.atleast_1d(v)])
