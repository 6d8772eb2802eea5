"""I-integrals, the optimal rational function and its epsilon equations.

For odd ``f`` and ``g`` with ``f+ = f + g`` and ``f- = f - g``:

    I+ = 2 int e^{-2x^2} x f+         I- = 2 int e^{-2x^2} x f-
    I  = 4 int x^2 e^{-2x^2} [(f+)^2 + (f-)^2]
    I0 = int e^{-2x^2} [(f+)^2 + (f-)^2]

On the symmetric GHZ configuration the functional Bell ratio depends on
the measured functions only through these four numbers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .functions import FunctionSpec
from .quadrature import CACHE, CUTOFF, ConvergenceError, KernelCache

logger = logging.getLogger(__name__)

EPS_START = 3.0
EPS_BRACKET = (0.1, 20.0)
DAMPING = 0.5
MAX_ITER = 1000


@dataclass(frozen=True)
class IIntegrals:
    i_plus: float
    i_minus: float
    i_quad: float
    i_zero: float

    @property
    def epsilon(self) -> float:
        """``4 I0 / I``, the self-consistent rational parameter."""
        return 4 * self.i_zero / self.i_quad


def compute_I(f: FunctionSpec, g: FunctionSpec | None = None,
              cache: KernelCache = CACHE) -> IIntegrals:
    g = f if g is None else g
    m1f, m1g = cache.get(f, 1, 1), cache.get(g, 1, 1)
    # (f+)^2 + (f-)^2 = 2 (f^2 + g^2); the cross terms cancel exactly
    sq0 = cache.get(f, 2, 0) + cache.get(g, 2, 0)
    sq2 = cache.get(f, 2, 2) + cache.get(g, 2, 2)
    return IIntegrals(i_plus=2 * (m1f + m1g), i_minus=2 * (m1f - m1g),
                      i_quad=8 * sq2, i_zero=2 * sq0)


def rational(eps: float) -> FunctionSpec:
    return FunctionSpec("rational", (eps,))


def integrals_at(eps: float) -> IIntegrals:
    return compute_I(rational(eps))


def functional_closed_form(N: int, r: int, ints: IIntegrals | list[IIntegrals]) -> float:
    """Ideal-efficiency functional Bell ratio of a symmetric GHZ state.

    ``ints`` is one set of integrals shared by every site or a per-site list.
    """
    per = [ints] * N if isinstance(ints, IIntegrals) else list(ints)
    if len(per) != N:
        raise ValueError("need one integral set per site")
    num = np.prod([s.i_plus for s in per]) + np.prod([s.i_minus for s in per])
    first, rest = per[:r], per[r:]
    den = (np.prod([s.i_quad for s in first]) * np.prod([s.i_zero for s in rest])
           + np.prod([s.i_zero for s in first]) * np.prod([s.i_quad for s in rest]))
    return float(2 ** (N - 1) * (2 / math.pi) ** (N / 2) * num ** 2 / den)


def functional_even_lossy(N: int, ints: IIntegrals, eta: float, p: float = 1.0) -> float:
    """Closed form for even ``N``, ``r = N/2``, with efficiency and purity.

    The purity enters as ``(eta p)^2`` per site pair, which is the
    per-mode dephasing of coherences by ``sqrt(p)``.
    """
    C = eta * ints.i_quad + (1 - eta) * ints.i_zero
    base = 2 * ints.i_plus ** 4 * (eta * p) ** 2 / (math.pi * ints.i_zero * C)
    return float(2 ** (N - 2) * base ** (N / 2))


def odd_lossy_ratio(ints: IIntegrals, eta: float) -> float:
    """Odd-N reduction factor ``2 sqrt(I0 C) / (I0 + C)``."""
    C = eta * ints.i_quad + (1 - eta) * ints.i_zero
    return 2 * math.sqrt(ints.i_zero * C) / (ints.i_zero + C)


# -- epsilon solvers ----------------------------------------------------------

def even_residual(eps: float) -> float:
    return eps - integrals_at(eps).epsilon


def _fixed_point(update, x0: float, tol: float) -> float | None:
    x = x0
    for _ in range(MAX_ITER):
        nxt = (1 - DAMPING) * x + DAMPING * update(x)
        if not math.isfinite(nxt) or nxt <= 0:
            return None
        if abs(nxt - x) < tol * 1e-2:
            return nxt
        x = nxt
    return None


def _bisect(residual, tol: float) -> float:
    lo, hi = EPS_BRACKET
    if residual(lo) * residual(hi) > 0:
        raise ConvergenceError(f"no epsilon root in [{lo}, {hi}]")
    return optimize.bisect(residual, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps,
                           maxiter=200)


def solve_epsilon_even(tol: float = 1e-8, method: str = "auto") -> float:
    """Fixed point of ``eps = 4 I0(eps) / I(eps)``.

    ``method`` is ``"fixed"`` (damped iteration from 3), ``"bisect"`` or
    ``"auto"`` (iteration with bisection fallback).
    """
    update = lambda e: integrals_at(e).epsilon  # noqa: E731
    eps = None
    if method in ("auto", "fixed"):
        eps = _fixed_point(update, EPS_START, tol)
        if eps is None and method == "fixed":
            raise ConvergenceError("damped fixed-point iteration did not converge")
    if eps is None:
        if method not in ("auto", "bisect"):
            raise ValueError(f"unknown method {method!r}")
        eps = _bisect(even_residual, tol)
    if abs(even_residual(eps)) >= tol:
        raise ConvergenceError(f"epsilon residual {even_residual(eps):.3g} above {tol}")
    return eps


def odd_update(N: int, eps_prime: float) -> float:
    """Right-hand side of the odd-N equation at trial parameter ``eps_prime``."""
    e = integrals_at(eps_prime).epsilon
    ep, em = e + 4, e - 4
    return e * (N * ep - em) / (N * ep + em)


def solve_epsilon_odd(N: int, tol: float = 1e-8, method: str = "auto") -> float:
    """Self-consistent ``eps'`` for odd ``N`` with ``r = (N - 1)/2``."""
    if N < 3 or N % 2 == 0:
        raise ValueError(f"N must be odd and >= 3, got {N}")
    residual = lambda x: x - odd_update(N, x)  # noqa: E731
    eps = None
    if method in ("auto", "fixed"):
        eps = _fixed_point(lambda x: odd_update(N, x), EPS_START, tol)
        if eps is None and method == "fixed":
            raise ConvergenceError("damped fixed-point iteration did not converge")
    if eps is None:
        eps = _bisect(residual, tol)
    if abs(residual(eps)) >= tol:
        raise ConvergenceError(f"odd epsilon residual {residual(eps):.3g} above {tol}")
    return eps


def solve_epsilon(N: int, **kw) -> float:
    return solve_epsilon_even(**kw) if N % 2 == 0 else solve_epsilon_odd(N, **kw)


def epsilon_lossy(eta: float, eps_N: float | None = None) -> float:
    """``2 eta eps_N / (2 eta + (1 - eta) eps_N)``."""
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    e = solve_epsilon_even() if eps_N is None else eps_N
    return 2 * eta * e / (2 * eta + (1 - eta) * e)


def epsilon_lossy_odd_closed(N: int, eta: float) -> float:
    """Odd-N lossy parameter from its closed-form expression.

    ``eps_N`` is taken as ``4 I0 / I`` at the lossless odd solution, so the
    expression reduces to that solution at ``eta = 1``; ``eps-`` carries no
    efficiency argument.
    """
    e_N = integrals_at(solve_epsilon_odd(N)).epsilon
    e = epsilon_lossy(eta, e_N)
    e_plus, e_minus = e + 4, e_N - 4
    return e * (N * e_plus - e * e_minus / e_N) / (N * e_plus + e ** 2 * e_minus / e_N ** 2)


def epsilon_self_consistent_lossy(eta: float, tol: float = 1e-10) -> float:
    """Fixed point of ``eps = 4 eta I0 / (eta I + 2 (1 - eta) I0)``.

    This is the exact stationarity condition of the even-N lossy ratio with
    the integrals taken at ``eps`` itself; :func:`epsilon_lossy` is the same
    expression with the integrals frozen at the lossless optimum.
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")

    def residual(e):
        s = integrals_at(e)
        return e - 4 * eta * s.i_zero / (eta * s.i_quad + 2 * (1 - eta) * s.i_zero)

    return optimize.brentq(residual, 1e-3, EPS_BRACKET[1], xtol=tol)


def _eta_coefficient(N: int, ints: IIntegrals) -> float:
    return 2 ** ((4 - 2 * N) / N) * math.pi * ints.i_zero / (2 * ints.i_plus ** 4)


def analytic_eta_crit(N: int, eps: float | None = None) -> float:
    """Efficiency at which the even-N, r = N/2 ratio with a fixed function crosses 1.

    ``B = 1`` reduces to ``eta^2 = K (eta I + (1 - eta) I0)``; this returns the
    positive root.  The integrals are those of the lossless optimal function.
    """
    if N < 2 or N % 2:
        raise ValueError(f"N must be even, got {N}")
    ints = integrals_at(solve_epsilon_even() if eps is None else eps)
    K = _eta_coefficient(N, ints)
    d = ints.i_quad - ints.i_zero
    return 0.5 * (K * d + math.sqrt((K * d) ** 2 + 4 * K * ints.i_zero))


def eta_crit_alt_discriminant(N: int) -> float:
    """The threshold expression with the ``4 eps^2`` discriminant.

    Kept for comparison; it does not solve ``B = 1``.
    """
    e = solve_epsilon_even()
    s = integrals_at(e)
    num = ((4 - e) + math.sqrt((4 - e) ** 2 + 4 * e ** 2)) * s.i_zero * s.i_quad * math.pi
    return num / (2 ** (6 - 4 / N) * s.i_plus ** 4)


def maximize_over_epsilon(bell_of_eps, bracket=(1e-3, 20.0), xtol: float = 1e-9) -> tuple[float, float]:
    """Bounded scalar maximization of ``bell_of_eps``; returns ``(eps, bell)``."""
    res = optimize.minimize_scalar(lambda e: -bell_of_eps(e), bounds=bracket, method="bounded",
                                   options={"xatol": xtol})
    if not res.success:
        raise ConvergenceError(f"epsilon maximization failed: {res.message}")
    return float(res.x), float(-res.fun)


# -- verification: free-form ascent on the function values --------------------

@dataclass(frozen=True)
class AscentReport:
    objective_grid: float
    objective_rational: float
    eps_fit: float
    max_shape_deviation: float


def grid_ascent_check(points: int = 401, eps: float | None = None) -> AscentReport:
    """Maximize ``(I+)^4 / (I I0)`` over free function values on a grid.

    The even-N symmetric ratio is ``2^{N-2} [(2/pi) (I+)^4/(I I0)]^{N/2}``, so its
    optimum over ``f = g`` maximizes this N-independent functional.  The
    grid optimum is fitted to ``x / (1 + eps x^2)`` and compared.
    """
    nodes, weights = np.polynomial.legendre.leggauss(points)
    x = 0.5 * CUTOFF * (nodes + 1)
    w = 0.5 * CUTOFF * weights * np.exp(-2 * x * x)

    def parts(f):
        # half-line forms for f = g, odd extension
        ip = 8 * np.dot(w, x * f)
        iq = 32 * np.dot(w, x * x * f * f)
        i0 = 8 * np.dot(w, f * f)
        return ip, iq, i0

    def neg_log_obj(f):
        ip, iq, i0 = parts(f)
        val = -(4 * np.log(abs(ip)) - np.log(iq) - np.log(i0))
        grad = -(4 * 8 * w * x / ip - 64 * w * x * x * f / iq - 16 * w * f / i0)
        return val, grad

    res = optimize.minimize(neg_log_obj, np.tanh(x), jac=True, method="L-BFGS-B",
                            options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12})
    f = res.x * np.sign(np.dot(w, x * res.x))
    # fit 1/f = (1/c)(1/x) + (eps/c) x by least squares on the bulk of the weight
    mask = (x > 0.05) & (x < 2.5)
    A = np.stack([1 / x[mask], x[mask]], axis=1)
    coef, *_ = np.linalg.lstsq(A, 1 / f[mask], rcond=None)
    eps_fit = coef[1] / coef[0]
    e = solve_epsilon_even() if eps is None else eps
    model = x / (1 + e * x * x)
    model *= np.dot(w, f * model) / np.dot(w, model * model)
    dev = float(np.max(np.abs(f[mask] - model[mask])) / np.max(np.abs(model)))
    ip, iq, i0 = parts(x / (1 + e * x * x))
    return AscentReport(objective_grid=float(np.exp(-res.fun)),
                        objective_rational=float(ip ** 4 / (iq * i0)),
                        eps_fit=float(eps_fit), max_shape_deviation=dev)
