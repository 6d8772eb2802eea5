"""Real Cayley-Dickson algebras (complex, quaternion, octonion) as structure tensors."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


def _conj(x: np.ndarray) -> np.ndarray:
    out = -x.copy()
    out[0] = x[0]
    return out


def cd_multiply(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product ``(a, b)(c, d) = (ac - d* b, d a + b c*)``."""
    n = x.shape[0]
    if n == 1:
        return x * y
    h = n // 2
    a, b, c, d = x[:h], x[h:], y[:h], y[h:]
    return np.concatenate([cd_multiply(a, c) - cd_multiply(_conj(d), b),
                           cd_multiply(d, a) + cd_multiply(b, _conj(c))])


@lru_cache(maxsize=None)
def structure_constants(dim: int) -> np.ndarray:
    """``S[i, j, k]`` with ``e_i e_j = sum_k S[i, j, k] e_k`` for dim in {1, 2, 4, 8}.

    With dim 4 the units ``e1, e2, e3`` satisfy ``ij = k, jk = i, ki = j``.
    """
    if dim not in (1, 2, 4, 8):
        raise ValueError(f"unsupported algebra dimension {dim}")
    eye = np.eye(dim)
    S = np.array([[cd_multiply(eye[i], eye[j]) for j in range(dim)] for i in range(dim)])
    S.setflags(write=False)
    return S


def multiply(x, y, dim: int | None = None) -> np.ndarray:
    """Product of two (possibly complex-valued) algebra elements."""
    x, y = np.asarray(x), np.asarray(y)
    S = structure_constants(dim or x.shape[-1])
    return np.einsum("...i,...j,ijk->...k", x, y, S)


def norm2(x) -> float:
    x = np.asarray(x)
    return float(np.sum(np.abs(x) ** 2))
