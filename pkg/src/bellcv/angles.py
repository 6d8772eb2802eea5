"""Local-oscillator phase presets.

A two-setting angle set is an ``(N, 2)`` array of ``(theta_n, theta'_n)``;
hypercomplex plans use one column per setting.
"""

from __future__ import annotations

import math

import numpy as np

PRESETS = ("orthogonal", "rotated_mabk", "cfrd_phase_family")
HALF_PI = math.pi / 2


def _check(N: int, r: int) -> None:
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0 <= r <= N:
        raise ValueError(f"r must lie in [0, {N}], got {r}")


def preset_angles(kind: str, N: int, r: int) -> np.ndarray:
    """Phase pattern for GHZ(N, r); site ``n`` is 1-based in the formulas.

    ``orthogonal``: theta = 0, theta' = -pi/2 on the first ``r`` sites and
    +pi/2 elsewhere.  ``rotated_mabk``: theta_n = +-(n-1) pi / (2N) with the
    sign set by the parity of ``N`` and the side of ``r``, and theta' offset by
    +-pi/2.  ``cfrd_phase_family``: as ``rotated_mabk`` with the sign set by the
    parity of the site index instead.
    """
    _check(N, r)
    out = np.zeros((N, 2))
    if kind == "orthogonal":
        out[:r, 1] = -HALF_PI
        out[r:, 1] = HALF_PI
        return out
    if kind not in PRESETS:
        raise ValueError(f"unknown angle preset {kind!r}")
    for i in range(N):
        n = i + 1
        inner = n <= r
        if kind == "rotated_mabk":
            sign = (-1) ** (N + 1) if inner else (-1) ** N
        else:
            sign = (-1) ** (n + 1) if inner else (-1) ** n
        theta = sign * math.pi * (n - 1) / (2 * N)
        out[i] = theta, theta + (HALF_PI if inner else -HALF_PI)
    return out


def sv_preset(N: int, settings: int) -> np.ndarray:
    """Angle matrix ``(N, settings)`` for the hypercomplex plans on GHZ(N, N/2).

    N = 2 uses theta^1 = 0 and theta^l = -pi/2 (site 1), +pi/2 (site 2).
    For N = 4 with four settings the sites alternate between
    ``(0, pi/2, pi/2, 0)`` and ``(0, pi/2, -pi/2, 0)``, an optimum of the
    quaternion ratio located on the pi/2 lattice.
    """
    if settings not in (4, 8):
        raise ValueError(f"settings must be 4 or 8, got {settings}")
    if N == 2:
        out = np.zeros((2, settings))
        out[0, 1:] = -HALF_PI
        out[1, 1:] = HALF_PI
        return out
    if N == 4 and settings == 4:
        a = [0.0, HALF_PI, HALF_PI, 0.0]
        b = [0.0, HALF_PI, -HALF_PI, 0.0]
        return np.array([a, b, a, b])
    raise ValueError(f"no preset for N={N} with {settings} settings; optimize instead")
