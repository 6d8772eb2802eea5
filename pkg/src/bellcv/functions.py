"""Odd measured-function families applied to quadrature outcomes."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FAMILIES = ("identity", "power", "triplebin", "tanh", "rational", "bin")
BOUNDED = ("bin", "triplebin", "tanh")

_ARITY = {"identity": 0, "power": 1, "triplebin": 1, "tanh": 2, "rational": 1, "bin": 0}


@dataclass(frozen=True)
class FunctionSpec:
    """A member of one of the odd function families.

    ============  =========================  ==================
    family        f(x)                        params
    ============  =========================  ==================
    identity      x                           ()
    power         sign(x) |x|^m               (m,)
    triplebin     sign(x) [|x| > s]           (s,)
    tanh          sign(x) |tanh(q x)|^m       (q, m)
    rational      x / (1 + eps x^2)           (eps,)
    bin           sign(x)                     ()
    ============  =========================  ==================
    """

    family: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown function family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        if len(params) != _ARITY[self.family]:
            raise ValueError(f"{self.family} takes {_ARITY[self.family]} parameters, got {params}")
        if not all(np.isfinite(params)):
            raise ValueError(f"non-finite parameters {params}")
        fam = self.family
        if fam == "power" and params[0] <= 0:
            raise ValueError(f"power exponent must be positive, got {params[0]}")
        if fam == "triplebin" and params[0] < 0:
            raise ValueError(f"dead-zone half-width must be >= 0, got {params[0]}")
        if fam == "tanh" and (params[0] <= 0 or params[1] <= 0):
            raise ValueError(f"tanh needs q > 0 and m > 0, got {params}")
        if fam == "rational" and params[0] < 0:
            raise ValueError(f"rational eps must be >= 0, got {params[0]}")
        object.__setattr__(self, "params", params)

    @property
    def bounded(self) -> bool:
        return self.family in BOUNDED

    @property
    def breakpoints(self) -> tuple[float, ...]:
        fam, p = self.family, self.params
        if fam == "bin":
            return (0.0,)
        if fam == "triplebin":
            return (0.0,) if p[0] == 0 else (-p[0], p[0])
        if fam == "power" and p[0] < 1:
            return (0.0,)
        if fam == "tanh" and p[1] < 1:
            return (0.0,)
        return ()

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        fam, p = self.family, self.params
        if fam == "identity":
            return x.copy()
        if fam == "rational":
            return x / (1.0 + p[0] * x * x)
        ax, sx = np.abs(x), np.sign(x)
        if fam == "bin":
            return sx
        if fam == "power":
            return sx * ax ** p[0]
        if fam == "triplebin":
            return sx * (ax > p[0])
        return sx * np.tanh(p[0] * ax) ** p[1]

    def label(self) -> str:
        if not self.params:
            return self.family
        return f"{self.family}({','.join(repr(v) for v in self.params)})"

    def __str__(self) -> str:
        return self.label()


IDENTITY = FunctionSpec("identity")
SIGN_BIN = FunctionSpec("bin")

# optimal parameters used in the ideal-efficiency function comparison
PRESETS = {
    "triplebin_opt": FunctionSpec("triplebin", (0.11,)),
    "tanh_opt": FunctionSpec("tanh", (4.0, 1.4)),
    "power_third": FunctionSpec("power", (1 / 3,)),
}

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")
_ALIASES = {"sign": "bin", "signbin": "bin", "x": "identity", "id": "identity",
            "pow": "power", "triple": "triplebin", "tanhpow": "tanh", "opt": "rational"}

AUTO = "auto"


def parse_function(text: str) -> FunctionSpec | str:
    """Parse ``name(params)``; ``rational(auto)`` returns the string ``"auto"``.

    >>> parse_function("tanh(4,1.4)")
    FunctionSpec(family='tanh', params=(4.0, 1.4))
    """
    m = _CALL.match(text.lower())
    if not m:
        raise ValueError(f"cannot parse function {text!r}")
    name, args = m.group(1), m.group(2)
    name = _ALIASES.get(name, name)
    if name in PRESETS and not args:
        return PRESETS[name]
    vals = [a.strip() for a in args.split(",")] if args and args.strip() else []
    if name == "rational" and vals in ([], [AUTO]):
        return AUTO
    try:
        return FunctionSpec(name, tuple(float(eval_fraction(v)) for v in vals))
    except ValueError as exc:
        raise ValueError(f"bad function {text!r}: {exc}") from exc


def eval_fraction(text: str) -> float:
    """Float or simple ``a/b`` fraction."""
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)
