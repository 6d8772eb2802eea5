"""Bell-observable evaluators: CFRD, functional, MABK and hypercomplex (SV)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import hypercomplex
from .functions import IDENTITY, FunctionSpec
from .quadrature import (correlate_complex, correlate_hypercomplex, expectation,
                         mode_operator, site_norm_operator)
from .states import DensityOperator

VIOLATION_TOL = 1e-12
FAMILIES = ("cfrd", "functional", "mabk", "sv4", "sv8")


@dataclass(frozen=True)
class ModeObservable:
    func: FunctionSpec
    angle: float

    def __post_init__(self):
        if not isinstance(self.func, FunctionSpec):
            raise TypeError("func must be a FunctionSpec")
        if not math.isfinite(self.angle):
            raise ValueError(f"angle must be finite, got {self.angle}")
        object.__setattr__(self, "angle", float(self.angle))


@dataclass(frozen=True)
class SiteObservablePair:
    """``F = f(X^theta) + i s g(X^theta')`` at one site; ``g_obs=None`` means ``g = 0``."""

    f_obs: ModeObservable
    g_obs: ModeObservable | None
    conj_sign: int = 1

    def __post_init__(self):
        if self.conj_sign not in (-1, 1):
            raise ValueError(f"conj_sign must be +1 or -1, got {self.conj_sign}")

    @property
    def f(self) -> FunctionSpec:
        return self.f_obs.func

    @property
    def theta(self) -> float:
        return self.f_obs.angle

    @property
    def g(self) -> FunctionSpec | None:
        return None if self.g_obs is None else self.g_obs.func

    @property
    def theta_p(self) -> float:
        return 0.0 if self.g_obs is None else self.g_obs.angle


@dataclass(frozen=True)
class MeasurementPlan:
    """Per-site observables for one inequality family.

    Two-setting families use ``sites``; ``sv4``/``sv8`` use ``func`` with an
    ``(N, settings)`` angle matrix.
    """

    family: str
    sites: tuple[SiteObservablePair, ...] = ()
    angle_matrix: np.ndarray | None = field(default=None, compare=False)
    func: FunctionSpec | None = None

    def __post_init__(self):
        fam = self.family.lower()
        if fam not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "sites", tuple(self.sites))
        if fam.startswith("sv"):
            settings = int(fam[2:])
            m = np.asarray(self.angle_matrix, dtype=float)
            if m.ndim != 2 or m.shape[1] != settings:
                raise ValueError(f"{fam} needs an angle matrix with {settings} columns")
            if not np.all(np.isfinite(m)):
                raise ValueError("angles must be finite")
            if self.func is None:
                raise ValueError(f"{fam} needs a measured function")
            m.setflags(write=False)
            object.__setattr__(self, "angle_matrix", m)
        elif not self.sites:
            raise ValueError("plan has no sites")

    @property
    def mode_count(self) -> int:
        return len(self.angle_matrix) if self.family.startswith("sv") else len(self.sites)

    @classmethod
    def two_setting(cls, family: str, angles, f: FunctionSpec = IDENTITY,
                    g: FunctionSpec | None = None, conj_signs: Sequence[int] | None = None
                    ) -> "MeasurementPlan":
        """Plan with the same ``f`` and ``g`` at every site; ``angles`` is ``(N, 2)``."""
        angles = np.asarray(angles, dtype=float)
        if angles.ndim != 2 or angles.shape[1] != 2:
            raise ValueError(f"angles must have shape (N, 2), got {angles.shape}")
        g = f if g is None else g
        N = len(angles)
        signs = [1] * N if conj_signs is None else list(conj_signs)
        if len(signs) != N:
            raise ValueError("one conjugation sign per site")
        sites = [SiteObservablePair(ModeObservable(f, a), ModeObservable(g, b), int(s))
                 for (a, b), s in zip(angles, signs)]
        return cls(family, tuple(sites))

    @classmethod
    def hypercomplex(cls, settings: int, func: FunctionSpec, angle_matrix) -> "MeasurementPlan":
        return cls(f"sv{settings}", angle_matrix=angle_matrix, func=func)

    def angles(self) -> np.ndarray:
        if self.family.startswith("sv"):
            return np.array(self.angle_matrix)
        return np.array([[s.theta, s.theta_p] for s in self.sites])


@dataclass(frozen=True)
class BellResult:
    lhs: float
    rhs: float
    bell: float
    violated: bool
    family: str = ""
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {"family": self.family, "lhs": self.lhs, "rhs": self.rhs,
               "bell": self.bell, "violated": self.violated}
        out.update(self.details)
        return out


def _result(family: str, lhs: float, rhs: float, bell: float, **details) -> BellResult:
    return BellResult(float(lhs), float(rhs), float(bell), bool(bell > 1 + VIOLATION_TOL),
                      family, details)


def _check_modes(rho: DensityOperator, plan: MeasurementPlan) -> None:
    if plan.mode_count != rho.mode_count:
        raise ValueError(f"plan has {plan.mode_count} sites for {rho.mode_count} modes")


def _moment_ratio(rho: DensityOperator, plan: MeasurementPlan, family: str) -> BellResult:
    _check_modes(rho, plan)
    corr = correlate_complex(rho, plan.sites)
    norm_ops = np.array([site_norm_operator(s.f, s.theta, s.g, s.theta_p) for s in plan.sites])
    rhs = expectation(rho, norm_ops)
    if abs(rhs.imag) > 1e-10 * max(1.0, abs(rhs)):
        raise ValueError("normalization moment is not real")
    rhs = rhs.real
    if rhs <= 0:
        raise ValueError(f"normalization moment must be positive, got {rhs}")
    lhs = abs(corr) ** 2
    return _result(family, lhs, rhs, lhs / rhs, correlator=[corr.real, corr.imag])


def eval_cfrd(rho: DensityOperator, plan: MeasurementPlan) -> BellResult:
    """``|<prod (x_n + i p_n)>|^2 / <prod (x_n^2 + p_n^2)>`` at the plan's phases."""
    for s in plan.sites:
        if s.f != IDENTITY or s.g not in (IDENTITY, None):
            raise ValueError("CFRD plans measure the bare quadratures; use eval_functional")
    return _moment_ratio(rho, plan, "cfrd")


def eval_functional(rho: DensityOperator, plan: MeasurementPlan) -> BellResult:
    """``|<prod (f_n + i g_n)>|^2 / <prod (f_n^2 + g_n^2)>`` for odd functions."""
    return _moment_ratio(rho, plan, "functional")


def mabk_from_correlator(corr: complex, N: int) -> dict:
    """MABK value and its variants from ``<prod F_n>`` with dichotomic ``F``."""
    re, im = abs(corr.real), abs(corr.imag)
    if N % 2 == 0:
        s = 2 ** (-N / 2) * (re + im)
    else:
        s = 2 ** (-(N - 1) / 2) * max(re, im)
    modulus = 2 ** (-(N - 1) / 2) * abs(corr)
    return {"s_n": s, "s_modulus": modulus}


def eval_mabk(rho: DensityOperator, angles, bin_func: FunctionSpec,
              conj_signs: Sequence[int] | None = None) -> BellResult:
    """MABK ``S_N`` of binned quadratures.

    Even ``N`` uses ``2^{-N/2} max|Re +- Im|``, odd ``N`` uses
    ``2^{-(N-1)/2} max(|Re|, |Im|)``; ``s_modulus`` reports
    ``2^{-(N-1)/2} |<prod F>|`` alongside.
    """
    if not bin_func.bounded:
        raise ValueError(f"MABK needs outcomes bounded by 1; {bin_func} is unbounded")
    plan = MeasurementPlan.two_setting("mabk", angles, bin_func, bin_func, conj_signs)
    _check_modes(rho, plan)
    corr = correlate_complex(rho, plan.sites)
    vals = mabk_from_correlator(corr, rho.mode_count)
    s = vals["s_n"]
    return _result("mabk", s, 1.0, s, correlator=[corr.real, corr.imag],
                   s_modulus=vals["s_modulus"])


def eval_sv(rho: DensityOperator, m: float | FunctionSpec, settings: int, angle_matrix) -> BellResult:
    """Hypercomplex moment ratio with 4 (quaternion) or 8 (octonion) settings.

    ``F_n = sum_l e_l f(X^{theta_n^l})``; the site product is taken left to
    right and the left side is its squared Euclidean norm.
    """
    func = m if isinstance(m, FunctionSpec) else FunctionSpec("power", (m,))
    plan = MeasurementPlan.hypercomplex(settings, func, angle_matrix)
    N = rho.mode_count
    if N not in (2, 4):
        raise ValueError(f"hypercomplex evaluation supports N in (2, 4), got {N}")
    _check_modes(rho, plan)
    A = plan.angle_matrix
    ops = np.array([[mode_operator(func, a) for a in row] for row in A])
    comp = correlate_hypercomplex(rho, ops, hypercomplex.structure_constants(settings))
    norm_ops = np.array([sum(mode_operator(func, a, power=2) for a in row) for row in A])
    rhs = expectation(rho, norm_ops).real
    lhs = float(np.sum(comp ** 2))
    return _result(plan.family, lhs, rhs, lhs / rhs, components=comp.tolist())


def evaluate(family: str, rho: DensityOperator, angles, f: FunctionSpec = IDENTITY,
             g: FunctionSpec | None = None, conj_signs: Sequence[int] | None = None
             ) -> BellResult:
    """Dispatch on family name with a shared angle argument."""
    family = family.lower()
    if family == "mabk":
        return eval_mabk(rho, angles, f, conj_signs)
    if family in ("sv4", "sv8"):
        return eval_sv(rho, f, int(family[2:]), angles)
    plan = MeasurementPlan.two_setting(family, angles, f, g, conj_signs)
    if family == "cfrd":
        return eval_cfrd(rho, plan)
    if family == "functional":
        return eval_functional(rho, plan)
    raise ValueError(f"unknown family {family!r}")


Evaluator = Callable[[np.ndarray], BellResult]
