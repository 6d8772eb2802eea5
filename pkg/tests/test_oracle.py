import math

import numpy as np
import pytest

from bellcv.channels import apply_loss
from bellcv.functions import IDENTITY, PRESETS, SIGN_BIN, FunctionSpec
from bellcv.oracle import axis_grid, crosscheck_moments, grid_moment, joint_density_grid
from bellcv.quadrature import CUTOFF
from bellcv.states import make_ghz, to_density


def test_axis_grid_integrates_gaussian():
    x, w = axis_grid((-0.5, 0.0, 0.5))
    assert x.min() > -CUTOFF and x.max() < CUTOFF
    assert np.all(np.diff(x) > 0)
    assert np.dot(w, np.exp(-2 * x * x)) == pytest.approx(math.sqrt(math.pi / 2), abs=1e-9)


def test_axis_grid_panel_edges_at_breakpoints():
    x, w = axis_grid((0.0,))
    # no panel straddles the step at 0
    assert np.dot(w, np.sign(x) * x * np.exp(-2 * x * x)) == pytest.approx(0.5, abs=1e-9)


def test_joint_density_normalized_and_positive():
    rho = apply_loss(to_density(make_ghz(3, 1)), 0.6)
    x, w = axis_grid((0.0,), 121)
    P = joint_density_grid(rho, [0.1, 0.7, -0.4], x)
    assert P.min() > -1e-12
    assert grid_moment(P, w, [np.ones_like(x)] * 3) == pytest.approx(1, abs=1e-8)


def test_joint_density_limited_to_three_modes():
    with pytest.raises(ValueError):
        joint_density_grid(to_density(make_ghz(4, 2)), [0.0] * 4, np.zeros(3))
    with pytest.raises(ValueError):
        joint_density_grid(to_density(make_ghz(2, 1)), [0.0], np.zeros(3))


def test_bell_state_binned_moment_on_grid():
    rho = to_density(make_ghz(2, 1))
    x, w = axis_grid((0.0,))
    P = joint_density_grid(rho, [0.2, 0.9], x)
    val = grid_moment(P, w, [np.sign(x), np.sign(x)])
    assert val == pytest.approx(2 / math.pi * math.cos(0.7), abs=1e-8)


def test_crosscheck_bell_state_cfrd():
    rho = to_density(make_ghz(2, 1))
    opts = [[(IDENTITY, 0.0), (IDENTITY, -math.pi / 2)], [(IDENTITY, 0.0), (IDENTITY, math.pi / 2)]]
    rep = crosscheck_moments(rho, opts)
    assert rep.passed
    assert rep.moments_checked == 8
    assert rep.to_dict()["passed"] is True


@pytest.mark.slow
def test_crosscheck_lossy_ghz_mabk():
    rho = apply_loss(to_density(make_ghz(3, 1)), 0.7)
    angles = [(0.0, math.pi / 2), (-math.pi / 6, -2 * math.pi / 3), (-math.pi / 3, -5 * math.pi / 6)]
    opts = [[(SIGN_BIN, a), (SIGN_BIN, b)] for a, b in angles]
    rep = crosscheck_moments(rho, opts)
    assert rep.max_deviation < 1e-8


@pytest.mark.slow
@pytest.mark.parametrize("h", [PRESETS["tanh_opt"], FunctionSpec("tanh", (100.0, 1.0)),
                               PRESETS["power_third"], PRESETS["triplebin_opt"]], ids=str)
def test_crosscheck_families_two_sites(h):
    rho = to_density(make_ghz(2, 1, 0.6, 0.8))
    opts = [[(h, 0.3), (h, -1.0)], [(h, 0.0), (h, 2.0)]]
    rep = crosscheck_moments(rho, opts)
    assert rep.max_deviation < 1e-6
