"""Detector loss and decoherence channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .states import DensityOperator


@dataclass(frozen=True)
class LossSpec:
    """Detection efficiency, uniform or per mode."""

    eta: float | tuple[float, ...] = 1.0

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.eta, dtype=float))
        if np.any(vals < 0) or np.any(vals > 1) or not np.all(np.isfinite(vals)):
            raise ValueError(f"efficiency must lie in [0, 1], got {self.eta}")
        if vals.size > 1:
            object.__setattr__(self, "eta", tuple(float(v) for v in vals))
        else:
            object.__setattr__(self, "eta", float(vals[0]))

    def per_mode(self, N: int) -> np.ndarray:
        if isinstance(self.eta, tuple):
            if len(self.eta) != N:
                raise ValueError(f"loss vector has {len(self.eta)} entries for {N} modes")
            return np.array(self.eta)
        return np.full(N, self.eta)


@dataclass(frozen=True)
class PuritySpec:
    p: float = 1.0

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"purity must lie in [0, 1], got {self.p}")


def apply_loss(rho: DensityOperator, loss: LossSpec | float | Sequence[float]) -> DensityOperator:
    """Beamsplitter loss with the vacuum port traced out.

    On the {0, 1} subspace this is amplitude damping: ``|1><1|`` goes to
    ``eta|1><1| + (1-eta)|0><0|`` and coherences pick up ``sqrt(eta)``.
    """
    if not isinstance(loss, LossSpec):
        loss = LossSpec(loss if np.isscalar(loss) else tuple(loss))
    eta = loss.per_mode(rho.mode_count)[None, :]
    f = rho.factors
    out = np.empty_like(f)
    out[..., 0, 0] = f[..., 0, 0] + (1 - eta) * f[..., 1, 1]
    out[..., 1, 1] = eta * f[..., 1, 1]
    out[..., 0, 1] = np.sqrt(eta) * f[..., 0, 1]
    out[..., 1, 0] = np.sqrt(eta) * f[..., 1, 0]
    return DensityOperator(rho.weights, out).merged()


def apply_decoherence_mix(rho: DensityOperator, purity: PuritySpec | float) -> DensityOperator:
    """``p rho + (1 - p) diag(rho)``: mixture with the fully dephased state."""
    p = purity.p if isinstance(purity, PuritySpec) else PuritySpec(float(purity)).p
    diag = rho.diagonal_part()
    ws, fs = [], []
    for w, f, d in zip(rho.weights, rho.factors, diag.factors):
        if np.array_equal(f, d):
            ws.append(w)
            fs.append(f)
            continue
        ws.append(p * w)
        fs.append(f)
        if p < 1 and np.all(np.any(d != 0, axis=(1, 2))):
            ws.append((1 - p) * w)
            fs.append(d)
    return DensityOperator(np.array(ws), np.array(fs)).merged()


def apply_local_dephasing(rho: DensityOperator, purity: PuritySpec | float,
                          exponent: float = 1.0) -> DensityOperator:
    """Independent dephasing on every mode: each coherence is multiplied by ``p**exponent``."""
    p = purity.p if isinstance(purity, PuritySpec) else PuritySpec(float(purity)).p
    c = p ** exponent
    f = np.array(rho.factors)
    f[..., 0, 1] *= c
    f[..., 1, 0] *= c
    return DensityOperator(rho.weights, f).merged()


def _local_sqrt(rho: DensityOperator, purity) -> DensityOperator:
    return apply_local_dephasing(rho, purity, 0.5)


# global: S ~ p and B ~ p^2 on GHZ states; local: S ~ p^N; local_sqrt: B ~ p^N
PURITY_MODELS = {"global": apply_decoherence_mix, "local": apply_local_dephasing,
                 "local_sqrt": _local_sqrt}


def prepare(rho: DensityOperator, eta=1.0, p: float = 1.0,
            purity_model: str = "global") -> DensityOperator:
    """Apply impurity then loss (the two commute)."""
    try:
        mix = PURITY_MODELS[purity_model]
    except KeyError:
        raise ValueError(f"unknown purity model {purity_model!r}") from None
    if p != 1:
        rho = mix(rho, p)
    if not (np.isscalar(eta) and eta == 1):
        rho = apply_loss(rho, eta)
    return rho
