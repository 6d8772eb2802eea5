"""Quadrature-measurement statistics on {0, 1}-occupation states.

Single-mode matrix elements of ``h(X^theta)`` factor as
``<b|h|k> = exp(i theta (b - k)) K_bk(h)`` with angle-free kernels

    K_00 = sqrt(2/pi) int h(x) exp(-2x^2) dx
    K_11 = sqrt(2/pi) int 4x^2 h(x) exp(-2x^2) dx
    K_01 = K_10 = sqrt(2/pi) int 2x h(x) exp(-2x^2) dx

so every N-mode expectation is a contraction of per-mode 2x2 matrices with
the product-operator terms of the density operator.
"""

from __future__ import annotations

import heapq
import json
import logging
import math
import os
import threading
from typing import Callable, Sequence

import numpy as np

from .functions import FunctionSpec
from .states import DensityOperator

logger = logging.getLogger(__name__)

SQRT_2_PI = math.sqrt(2 / math.pi)
# exp(-2 x^2) < 1e-18 beyond this
CUTOFF = math.sqrt(18 * math.log(10) / 2)
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


class ConvergenceError(RuntimeError):
    """Adaptive integration or a solver failed to reach its tolerance."""


def _gauss(g: Callable, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _GL_NODES
    return half * float(np.dot(_GL_WEIGHTS, g(x)))


def adaptive_gauss(g: Callable, a: float, b: float, tol: float = 1e-12,
                   max_intervals: int = 4000) -> tuple[float, float]:
    """Globally adaptive 20-point Gauss-Legendre on ``[a, b]``.

    The interval with the largest error estimate is bisected until the
    summed estimate falls below ``tol``.  Returns ``(value, error)``.
    """
    if b <= a:
        return 0.0, 0.0

    def refine(lo, hi):
        coarse = _gauss(g, lo, hi)
        mid = 0.5 * (lo + hi)
        fine = _gauss(g, lo, mid) + _gauss(g, mid, hi)
        return fine, abs(fine - coarse)

    val, err = refine(a, b)
    heap = [(-err, a, b, val)]
    total_err = err
    count = 1
    while total_err > tol:
        if count >= max_intervals:
            raise ConvergenceError(
                f"integral over [{a}, {b}] did not converge: error {total_err:.3g} > {tol:.3g}")
        neg_err, lo, hi, v = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise ConvergenceError(f"interval [{lo}, {hi}] cannot be bisected further")
        total_err += neg_err
        for x0, x1 in ((lo, mid), (mid, hi)):
            fv, fe = refine(x0, x1)
            heapq.heappush(heap, (-fe, x0, x1, fv))
            total_err += fe
        count += 1
    return math.fsum(item[3] for item in heap), total_err


def integrate_1d(h: Callable, moment_order: int = 0, breakpoints: Sequence[float] = (),
                 tol: float = 1e-12, parity: int | None = None) -> float:
    """``int h(x) x^order exp(-2x^2) dx`` over the real line.

    Integration runs in ``u = sqrt(2) x`` against ``exp(-u^2)``, split at the
    declared breakpoints; tails beyond ``|x| = CUTOFF`` are bounded, not
    integrated, and counted toward the tolerance.  With ``parity`` set to
    ``+1`` or ``-1`` (parity of ``h``) only the half line is integrated and
    odd integrands return exactly zero.
    """
    if moment_order not in (0, 1, 2):
        raise ValueError(f"moment order must be 0, 1 or 2, got {moment_order}")
    if parity is not None:
        if parity * (-1) ** moment_order < 0:
            return 0.0
        half = [b for b in breakpoints if b > 0]
        return 2.0 * _integrate_range(h, moment_order, 0.0, half, tol / 2)
    return _integrate_range(h, moment_order, -CUTOFF, breakpoints, tol)


def _integrate_range(h: Callable, moment_order: int, lower: float,
                     breakpoints: Sequence[float], tol: float) -> float:
    s = math.sqrt(2.0)
    k = moment_order

    def g(u):
        x = u / s
        return h(x) * x ** k * np.exp(-u * u) / s

    edge = CUTOFF * s
    cuts = sorted({lower * s, edge, *(b * s for b in breakpoints if lower < b < CUTOFF)})
    total, err = 0.0, 0.0
    pieces = list(zip(cuts[:-1], cuts[1:]))
    for lo, hi in pieces:
        v, e = adaptive_gauss(g, lo, hi, tol / len(pieces))
        total += v
        err += e
    # tail ~ |h(L)| L^k exp(-2L^2) / (4L) per side
    hL = max(abs(float(np.asarray(h(np.array([CUTOFF])))[0])),
             abs(float(np.asarray(h(np.array([-CUTOFF])))[0])))
    sides = 1 if lower == 0 else 2
    tail = sides * hL * CUTOFF ** k * math.exp(-2 * CUTOFF ** 2) / (4 * CUTOFF)
    if err + tail > 10 * tol:
        raise ConvergenceError(f"integration error {err + tail:.3g} exceeds {tol:.3g}")
    return total


class KernelCache:
    """Thread-safe memo of ``int f(x)^power x^order exp(-2x^2) dx``.

    Angles factor out of every kernel, so one entry serves a whole sweep.
    Optionally persisted as JSON under ``$BELLCV_CACHE_DIR``.
    """

    VERSION = 1

    def __init__(self):
        self._data: dict[tuple, float] = {}
        self._lock = threading.Lock()

    @staticmethod
    def _key(spec: FunctionSpec, power: int, order: int) -> tuple:
        return (spec.family, spec.params, power, order)

    def get(self, spec: FunctionSpec, power: int, order: int) -> float:
        key = self._key(spec, power, order)
        val = self._data.get(key)
        if val is not None:
            return val
        if power == 1:
            h = spec
        else:
            h = lambda x: spec(x) ** power  # noqa: E731
        # every family is odd, so f^power has parity (-1)^power
        val = integrate_1d(h, order, spec.breakpoints, parity=(-1) ** power)
        with self._lock:
            return self._data.setdefault(key, val)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()

    def __len__(self) -> int:
        return len(self._data)

    def _path(self, directory: str | None) -> str | None:
        directory = directory or os.environ.get("BELLCV_CACHE_DIR")
        return os.path.join(directory, "kernels.json") if directory else None

    def load(self, directory: str | None = None) -> int:
        path = self._path(directory)
        if not path or not os.path.exists(path):
            return 0
        try:
            with open(path) as fh:
                doc = json.load(fh)
            if doc.get("version") != self.VERSION:
                return 0
            entries = {(e["family"], tuple(e["params"]), e["power"], e["order"]): float(e["value"])
                       for e in doc["entries"]}
        except (OSError, ValueError, KeyError, TypeError):
            logger.warning("ignoring unreadable kernel cache %s", path)
            return 0
        with self._lock:
            for k, v in entries.items():
                self._data.setdefault(k, v)
        return len(entries)

    def save(self, directory: str | None = None) -> str | None:
        path = self._path(directory)
        if not path:
            return None
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with self._lock:
            entries = [{"family": k[0], "params": list(k[1]), "power": k[2], "order": k[3],
                        "value": v} for k, v in sorted(self._data.items())]
        tmp = path + ".tmp"
        with open(tmp, "w") as fh:
            json.dump({"version": self.VERSION, "entries": entries}, fh)
        os.replace(tmp, path)
        return path


CACHE = KernelCache()


def kernel_matrix(spec: FunctionSpec, power: int = 1, cache: KernelCache = CACHE) -> np.ndarray:
    """Angle-free 2x2 kernel ``K[b, k]`` of ``f^power``."""
    k0 = cache.get(spec, power, 0)
    k1 = cache.get(spec, power, 1)
    k2 = cache.get(spec, power, 2)
    return SQRT_2_PI * np.array([[k0, 2 * k1], [2 * k1, 4 * k2]])


def mode_operator(spec: FunctionSpec, theta: float, power: int = 1,
                  cache: KernelCache = CACHE) -> np.ndarray:
    """Matrix ``H[b, k] = <b| f(X^theta)^power |k>`` on the {0, 1} subspace."""
    K = kernel_matrix(spec, power, cache)
    ph = np.exp(1j * theta)
    return K * np.array([[1, 1 / ph], [ph, 1]])


def mode_kernel(block: np.ndarray, h: FunctionSpec, theta: float) -> complex:
    """``Tr(block h(X^theta))`` for a 2x2 block with ``block[k, b]`` on ``|k><b|``."""
    return complex(np.trace(np.asarray(block) @ mode_operator(h, theta)))


def _site_values(rho: DensityOperator, ops: np.ndarray) -> np.ndarray:
    # tr(A_tn H_n): ops has shape (N, ..., 2, 2), result (T, N, ...)
    return np.einsum("tnkb,n...bk->tn...", rho.factors, ops)


def expectation(rho: DensityOperator, ops: np.ndarray) -> complex:
    """``Tr(rho kron_n ops[n])`` for per-mode operator matrices ``ops[n][b, k]``."""
    ops = np.asarray(ops)
    if ops.shape != (rho.mode_count, 2, 2):
        raise ValueError(f"need {rho.mode_count} per-mode 2x2 operators, got shape {ops.shape}")
    vals = _site_values(rho, ops)
    return complex(np.sum(rho.weights * np.prod(vals, axis=1)))


def _check_length(rho: DensityOperator, items: Sequence, what: str) -> None:
    if len(items) != rho.mode_count:
        raise ValueError(f"{len(items)} {what} for {rho.mode_count} modes")


def correlate(rho: DensityOperator, observables: Sequence[tuple[FunctionSpec, float]],
              imag_tol: float = 1e-10) -> float:
    """``<prod_n h_n(X_n^theta_n)>`` for Hermitian per-site observables."""
    _check_length(rho, observables, "observables")
    ops = np.array([mode_operator(h, th) for h, th in observables])
    val = expectation(rho, ops)
    scale = max(1.0, abs(val))
    if abs(val.imag) > imag_tol * scale:
        raise ValueError(f"expectation has imaginary part {val.imag:.3g}")
    return val.real


def site_operator(f: FunctionSpec, theta: float, g: FunctionSpec | None, theta_p: float,
                  conj_sign: int = 1) -> np.ndarray:
    """Per-mode matrix of ``F = f(X^theta) + i s g(X^theta')``."""
    op = mode_operator(f, theta)
    if g is not None:
        op = op + 1j * conj_sign * mode_operator(g, theta_p)
    return op


def site_norm_operator(f: FunctionSpec, theta: float, g: FunctionSpec | None,
                       theta_p: float) -> np.ndarray:
    """Per-mode matrix of ``f(X^theta)^2 + g(X^theta')^2``."""
    op = mode_operator(f, theta, power=2)
    if g is not None:
        op = op + mode_operator(g, theta_p, power=2)
    return op


def correlate_complex(rho: DensityOperator, sites: Sequence) -> complex:
    """``<prod_n [f_n(X^theta_n) + i s_n g_n(X^theta'_n)]>``.

    ``sites`` holds objects with ``f``, ``theta``, ``g``, ``theta_p`` and
    ``conj_sign`` attributes (see :class:`bellcv.bell.SiteObservablePair`).
    """
    _check_length(rho, sites, "sites")
    ops = np.array([site_operator(s.f, s.theta, s.g, s.theta_p, s.conj_sign) for s in sites])
    return expectation(rho, ops)


def correlate_hypercomplex(rho: DensityOperator, ops: np.ndarray,
                           structure: np.ndarray) -> np.ndarray:
    """Expectation of an ordered product of algebra-valued site operators.

    ``ops[n, l]`` is the 2x2 matrix multiplying basis unit ``e_l`` at site
    ``n``; ``structure[i, j, k]`` gives ``e_i e_j = sum_k structure[i,j,k] e_k``.
    Products are taken strictly left to right, which matters for
    non-associative algebras.  Returns the real component vector.
    """
    ops = np.asarray(ops)
    if ops.shape[0] != rho.mode_count:
        raise ValueError("one operator set per mode required")
    vals = _site_values(rho, ops)  # (T, N, d)
    acc = vals[:, 0]
    for n in range(1, rho.mode_count):
        acc = np.einsum("ti,tj,ijk->tk", acc, vals[:, n], structure)
    comp = np.einsum("t,tk->k", rho.weights, acc)
    scale = max(1.0, float(np.max(np.abs(comp))))
    if np.max(np.abs(comp.imag)) > 1e-10 * scale:
        raise ValueError("hypercomplex expectation has non-real components")
    return comp.real


# -- explicit wavefunctions and the joint density ------------------------------

def wavefunctions(x: np.ndarray) -> np.ndarray:
    """``<x|0>`` and ``<x|1>`` at angle zero, stacked on the last axis."""
    x = np.asarray(x, dtype=float)
    g = (2 / math.pi) ** 0.25 * np.exp(-x * x)
    return np.stack([g, 2 * x * g], axis=-1)


def mode_densities(rho: DensityOperator, angles: Sequence[float], x: np.ndarray) -> np.ndarray:
    """Per-term, per-mode marginal densities ``<x|A_tn|x>`` on a 1D grid.

    Returns shape ``(T, N, len(x))`` complex.
    """
    _check_length(rho, angles, "angles")
    psi = wavefunctions(x)  # (X, 2)
    phases = np.exp(-1j * np.outer(angles, [0, 1]))  # (N, 2): <x|k> picks exp(-i k theta)
    amp = psi[None, :, :] * phases[:, None, :]  # (N, X, 2)
    return np.einsum("tnkb,nxk,nxb->tnx", rho.factors, amp, amp.conj())


def joint_probability(rho: DensityOperator, angles: Sequence[float], x: Sequence[float]) -> float:
    """Density of the joint quadrature outcome ``x`` at the given phases."""
    _check_length(rho, x, "outcomes")
    _check_length(rho, angles, "angles")
    psi = wavefunctions(np.asarray(x, dtype=float))  # (N, 2)
    amp = psi * np.exp(-1j * np.outer(angles, [0, 1]))
    per = np.einsum("tnkb,nk,nb->tn", rho.factors, amp, amp.conj())
    return float(np.sum(rho.weights * np.prod(per, axis=1)).real)
