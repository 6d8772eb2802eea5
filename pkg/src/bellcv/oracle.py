"""Independent check of kernel moments by brute-force grid integration.

Moments are recomputed from the explicit joint quadrature density
``P(x_1, ..., x_N)`` tabulated on a full tensor grid, one grid per
measurement setting, with no use of the kernel cache or the adaptive
integrator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .functions import FunctionSpec
from .quadrature import CUTOFF, expectation, mode_operator, wavefunctions
from .states import DensityOperator

DEFAULT_POINTS = 201
_ORDER = 7
_GRADING = (0.2, 0.04, 0.008, 0.0016, 0.00032)
_MIN_UNIFORM = 20


def axis_grid(breakpoints: Sequence[float] = (), points: int = DEFAULT_POINTS
              ) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[-CUTOFF, CUTOFF]``.

    Panels end at every breakpoint and are geometrically graded toward it,
    which keeps kinks and ``|x|^m`` cusps from spoiling convergence.  The
    node count is close to ``points``.
    """
    cuts = sorted({-CUTOFF, CUTOFF, *(b for b in breakpoints if abs(b) < CUTOFF)})
    inner = set(cuts[1:-1])
    nodes_ref, w_ref = np.polynomial.legendre.leggauss(_ORDER)
    segments = list(zip(cuts[:-1], cuts[1:]))
    graded = sum((a in inner) + (b in inner) for a, b in segments) * len(_GRADING)
    uniform_total = max(_MIN_UNIFORM, points // _ORDER - graded)
    total_len = cuts[-1] - cuts[0]
    xs, ws = [], []
    for a, b in segments:
        length = b - a
        # graded stretches cover 20% of the panel at each breakpoint end
        lo, hi = a, b
        edges = []
        if a in inner:
            edges += [a + length * g for g in _GRADING]
            lo = a + _GRADING[0] * length
        if b in inner:
            edges += [b - length * g for g in _GRADING]
            hi = b - _GRADING[0] * length
        n_uni = max(1, round(uniform_total * length / total_len))
        edges += list(np.linspace(lo, hi, n_uni + 1))
        edges = sorted({a, b, *edges})
        for x0, x1 in zip(edges[:-1], edges[1:]):
            half = 0.5 * (x1 - x0)
            xs.append(0.5 * (x0 + x1) + half * nodes_ref)
            ws.append(half * w_ref)
    return np.concatenate(xs), np.concatenate(ws)


def joint_density_grid(rho: DensityOperator, angles: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Full ``P`` on the tensor grid ``x^{(x) N}``; shape ``(len(x),) * N``.

    Off-diagonal terms give complex per-mode densities; they are kept until
    the term sum so conjugate pairs cancel exactly.
    """
    N = rho.mode_count
    if len(angles) != N:
        raise ValueError("one angle per mode")
    if N > 3:
        raise ValueError("tensor-grid densities are limited to N <= 3")
    psi = wavefunctions(x)
    per = []
    for n in range(N):
        amp = psi * np.exp(-1j * angles[n] * np.arange(2))
        per.append(np.einsum("tkb,xk,xb->tx", rho.factors[:, n], amp, amp.conj()))
    out = np.zeros((len(x),) * N, dtype=complex)
    for t, w in enumerate(rho.weights):
        term = per[0][t]
        for n in range(1, N):
            term = np.multiply.outer(term, per[n][t])
        out += w * term
    return out.real


def grid_moment(P: np.ndarray, weights: np.ndarray, funcs: Sequence[np.ndarray]) -> float:
    """``int P prod_n h_n(x_n)`` with per-axis tabulated ``w * h_n``."""
    val = P
    for h in funcs:
        val = np.tensordot(val, weights * h, axes=([0], [0]))
    return float(np.real(val))


@dataclass
class CrosscheckReport:
    max_deviation: float
    normalization_error: float
    min_density: float
    moments_checked: int

    @property
    def passed(self) -> bool:
        return max(self.max_deviation, self.normalization_error) < 1e-6 and self.min_density > -1e-12

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation,
                "normalization_error": self.normalization_error,
                "min_density": self.min_density,
                "moments_checked": self.moments_checked, "passed": self.passed}


def crosscheck_moments(rho: DensityOperator, site_options: Sequence[Sequence[tuple[FunctionSpec, float]]],
                       points: int = DEFAULT_POINTS) -> CrosscheckReport:
    """Compare every product moment over all setting combinations.

    ``site_options[n]`` lists the ``(function, angle)`` observables measured at
    site ``n``.  For each of the ``prod_n len(site_options[n])`` settings the
    grid density is built once and both ``<prod h_n>`` and ``<prod h_n^2>``
    are compared with :func:`bellcv.quadrature.correlate`.
    """
    N = rho.mode_count
    if len(site_options) != N:
        raise ValueError("one option list per site")
    # every family is odd and steepest at the origin, so 0 is always a panel edge
    bps = sorted({0.0, *(b for opts in site_options for h, _ in opts for b in h.breakpoints)})
    x, w = axis_grid(bps, points)
    worst, norm_err, min_p, count = 0.0, 0.0, math.inf, 0
    for combo in itertools.product(*site_options):
        angles = [a for _, a in combo]
        P = joint_density_grid(rho, angles, x)
        min_p = min(min_p, float(P.min()))
        norm_err = max(norm_err, abs(grid_moment(P, w, [np.ones_like(x)] * N) - 1))
        fvals = [np.asarray(h(x)) for h, _ in combo]
        for power in (1, 2):
            grid = grid_moment(P, w, [fv ** power for fv in fvals])
            ops = np.array([mode_operator(h, a, power) for h, a in combo])
            engine = expectation(rho, ops).real
            worst = max(worst, abs(grid - engine))
            count += 1
    return CrosscheckReport(worst, norm_err, min_p, count)
