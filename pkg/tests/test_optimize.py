import math

import numpy as np
import pytest

from bellcv.angles import preset_angles, sv_preset
from bellcv.bell import eval_sv, evaluate
from bellcv.functions import PRESETS, SIGN_BIN
from bellcv.optimize import optimize_angles, pattern_search
from bellcv.states import make_ghz, to_density


def test_pattern_search_quadratic():
    target = np.array([0.3, -1.2, 2.0])
    x, fx, trace = pattern_search(lambda v: -np.sum((v - target) ** 2), np.zeros(3))
    np.testing.assert_allclose(x, target, atol=1e-4)
    assert trace.final_step < 1e-5
    assert trace.visited_max == fx


def test_pattern_search_never_worse():
    f = lambda v: math.cos(3 * v[0]) + math.sin(v[1])  # noqa: E731
    x0 = np.array([0.5, 0.5])
    _, fx, _ = pattern_search(f, x0)
    assert fx >= f(x0)


def test_mabk_optimum_from_random_starts():
    rho = to_density(make_ghz(3, 1))
    target = 2 * (2 / math.pi) ** 1.5
    rng = np.random.default_rng(3)
    _, res = optimize_angles("mabk", rho, rng.uniform(-1, 1, (3, 2)), f=SIGN_BIN, restarts=3)
    assert res.bell == pytest.approx(target, abs=1e-8)


def test_cfrd_preset_is_optimal():
    rho = to_density(make_ghz(6, 3))
    start = preset_angles("orthogonal", 6, 3)
    preset = evaluate("cfrd", rho, start).bell
    _, res = optimize_angles("cfrd", rho, start + 0.3)
    assert res.bell == pytest.approx(preset, abs=1e-8)


def test_sv4_four_site_preset_is_stationary():
    rho = to_density(make_ghz(4, 2))
    f = PRESETS["power_third"]
    start = sv_preset(4, 4)
    base = eval_sv(rho, f, 4, start).bell
    _, res = optimize_angles(lambda r, a: eval_sv(r, f, 4, a), rho, start, step=0.05)
    assert res.bell == pytest.approx(base, abs=1e-9)


def test_restarts_reproducible():
    rho = to_density(make_ghz(2, 1))
    a, ra = optimize_angles("mabk", rho, np.zeros((2, 2)), f=SIGN_BIN, restarts=2, seed=7)
    b, rb = optimize_angles("mabk", rho, np.zeros((2, 2)), f=SIGN_BIN, restarts=2, seed=7)
    np.testing.assert_array_equal(a, b)
    assert ra.bell == rb.bell
