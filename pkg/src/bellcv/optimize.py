"""Derivative-free angle optimization (compass search with step halving)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bell import BellResult, evaluate
from .functions import IDENTITY, FunctionSpec
from .states import DensityOperator

START_STEP = math.pi / 4
MIN_STEP = 1e-5


@dataclass(frozen=True)
class SearchTrace:
    evaluations: int
    final_step: float
    visited_max: float
    visited_min: float


def pattern_search(objective: Callable[[np.ndarray], float], x0: np.ndarray,
                   step: float = START_STEP, min_step: float = MIN_STEP,
                   max_evals: int = 200_000) -> tuple[np.ndarray, float, SearchTrace]:
    """Maximize ``objective`` by coordinate polling at ``+-step``.

    A successful poll is repeated along the same direction; the step halves
    when a full sweep fails to improve.  Never returns a worse point than
    ``x0``.
    """
    x = np.array(x0, dtype=float).ravel()
    shape = np.shape(x0)
    fx = objective(x.reshape(shape))
    seen = [fx, fx]
    evals = 1
    while step >= min_step and evals < max_evals:
        improved = False
        for i in range(x.size):
            for d in (step, -step):
                y = x.copy()
                y[i] += d
                fy = objective(y.reshape(shape))
                evals += 1
                seen[0], seen[1] = max(seen[0], fy), min(seen[1], fy)
                if fy > fx + 1e-15:
                    x, fx, improved = y, fy, True
                    break
        if not improved:
            step /= 2
    return x.reshape(shape), fx, SearchTrace(evals, step, seen[0], seen[1])


def optimize_angles(evaluator: str | Callable[[DensityOperator, np.ndarray], BellResult],
                    rho: DensityOperator, init, f: FunctionSpec = IDENTITY,
                    g: FunctionSpec | None = None, conj_signs=None, restarts: int = 0,
                    seed: int = 0, step: float = START_STEP, min_step: float = MIN_STEP
                    ) -> tuple[np.ndarray, BellResult]:
    """Locally maximize the Bell value over all angles.

    ``evaluator`` is a family name understood by :func:`bellcv.bell.evaluate`
    or a callable ``(rho, angles) -> BellResult``.  Additional random restarts
    are drawn from a seeded generator, so results are reproducible.
    """
    if isinstance(evaluator, str):
        fam = evaluator

        def run(r, a):
            return evaluate(fam, r, a, f, g, conj_signs)
    else:
        run = evaluator

    init = np.asarray(init, dtype=float)
    best_x, best_v, _ = pattern_search(lambda a: run(rho, a).bell, init, step, min_step)
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        x0 = rng.uniform(-math.pi, math.pi, init.shape)
        x, v, _ = pattern_search(lambda a: run(rho, a).bell, x0, step, min_step)
        if v > best_v:
            best_x, best_v = x, v
    return best_x, run(rho, best_x)
