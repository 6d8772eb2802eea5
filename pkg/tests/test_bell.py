import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellcv.angles import preset_angles, sv_preset
from bellcv.bell import (BellResult, MeasurementPlan, ModeObservable, SiteObservablePair,
                         eval_cfrd, eval_mabk, eval_sv, evaluate, mabk_from_correlator)
from bellcv.functions import IDENTITY, PRESETS, SIGN_BIN, FunctionSpec
from bellcv.states import DensityOperator, make_ghz, make_named_state, to_density

M_THIRD = 0.4348805715385016  # two-site m = 1/3 coefficient, grid-checked
M_TWO_THIRDS = 0.4258299802405555


def ghz(N, r):
    return to_density(make_ghz(N, r))


def test_bell_state_cfrd():
    res = evaluate("cfrd", ghz(2, 1), preset_angles("orthogonal", 2, 1))
    assert res.lhs == pytest.approx(0.25, abs=1e-14)
    assert res.rhs == pytest.approx(0.75, abs=1e-14)
    assert res.bell == pytest.approx(1 / 3, abs=1e-14)
    assert not res.violated
    assert res.to_dict()["family"] == "cfrd"
    assert "correlator" in res.to_dict()


@pytest.mark.parametrize("N, r", [(4, 1), (6, 2), (7, 3), (9, 4)])
def test_cfrd_general_r_closed_form(N, r):
    res = evaluate("cfrd", ghz(N, r), preset_angles("orthogonal", N, r))
    assert res.bell == pytest.approx(0.25 / ((3 ** (N - r) + 3 ** r) / 2 ** (N + 1)), abs=1e-12)


@pytest.mark.parametrize("settings_", [4, 8])
def test_sv_bell_state_components(settings_):
    f = PRESETS["power_third"]
    res = eval_sv(ghz(2, 1), f, settings_, sv_preset(2, settings_))
    assert res.lhs == pytest.approx((M_THIRD * settings_) ** 2, abs=1e-10)
    assert res.rhs == pytest.approx(M_TWO_THIRDS * settings_ ** 2, abs=1e-10)
    # only the real unit survives
    assert np.allclose(res.details["components"][1:], 0, atol=1e-12)


def test_sv_accepts_exponent():
    a = eval_sv(ghz(2, 1), 1 / 3, 4, sv_preset(2, 4))
    b = eval_sv(ghz(2, 1), PRESETS["power_third"], 4, sv_preset(2, 4))
    assert a.bell == b.bell


def test_sv_rejects_unsupported_sizes():
    with pytest.raises(ValueError):
        eval_sv(ghz(3, 1), 1 / 3, 4, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        eval_sv(ghz(2, 1), 1 / 3, 4, np.zeros((2, 8)))
    with pytest.raises(ValueError):
        sv_preset(4, 8)


def test_w_state_nulls():
    rho = to_density(make_named_state("w4"))
    angles = preset_angles("rotated_mabk", 4, 2)
    assert abs(evaluate("mabk", rho, angles, SIGN_BIN).bell) < 1e-12
    assert abs(evaluate("cfrd", rho, preset_angles("orthogonal", 4, 2)).lhs) < 1e-12


def test_cluster_merged_variant_is_weaker():
    angles = preset_angles("rotated_mabk", 4, 2)
    full = evaluate("mabk", to_density(make_named_state("cluster4")), angles, SIGN_BIN).bell
    merged = evaluate("mabk", to_density(make_named_state("cluster4_merged")), angles, SIGN_BIN).bell
    assert merged < full


def test_mabk_from_correlator():
    c = 3 + 4j
    even = mabk_from_correlator(c, 4)
    assert even["s_n"] == pytest.approx(7 / 4)
    odd = mabk_from_correlator(c, 3)
    assert odd["s_n"] == pytest.approx(4 / 2)
    assert odd["s_modulus"] == pytest.approx(5 / 2)


def test_mabk_rejects_unbounded():
    with pytest.raises(ValueError):
        eval_mabk(ghz(3, 1), preset_angles("rotated_mabk", 3, 1), IDENTITY)


def test_cfrd_rejects_non_identity():
    plan = MeasurementPlan.two_setting("cfrd", preset_angles("orthogonal", 2, 1), SIGN_BIN)
    with pytest.raises(ValueError):
        eval_cfrd(ghz(2, 1), plan)


def test_mode_count_mismatch():
    with pytest.raises(ValueError):
        evaluate("cfrd", ghz(3, 1), preset_angles("orthogonal", 2, 1))


def test_plan_validation():
    with pytest.raises(ValueError):
        MeasurementPlan("chsh", ())
    with pytest.raises(ValueError):
        MeasurementPlan("cfrd", ())
    with pytest.raises(ValueError):
        MeasurementPlan.two_setting("cfrd", np.zeros((2, 3)))
    with pytest.raises(ValueError):
        MeasurementPlan.two_setting("cfrd", np.zeros((2, 2)), conj_signs=[1])
    with pytest.raises(ValueError):
        MeasurementPlan.hypercomplex(4, IDENTITY, np.full((2, 4), np.nan))
    with pytest.raises(ValueError):
        ModeObservable(IDENTITY, math.inf)
    with pytest.raises(TypeError):
        ModeObservable("x", 0.0)
    with pytest.raises(ValueError):
        SiteObservablePair(ModeObservable(IDENTITY, 0.0), None, conj_sign=0)


def test_plan_angles_roundtrip():
    angles = preset_angles("rotated_mabk", 5, 2)
    plan = MeasurementPlan.two_setting("mabk", angles, SIGN_BIN)
    np.testing.assert_allclose(plan.angles(), angles)
    assert plan.mode_count == 5


def test_missing_g_means_zero():
    site = SiteObservablePair(ModeObservable(IDENTITY, 0.0), None)
    assert site.g is None and site.theta_p == 0.0
    res = eval_cfrd(ghz(1, 0), MeasurementPlan("cfrd", (site,)))
    # (|0> + |1>)/sqrt(2): <x> = 1/2 and <x^2> = 1/2
    assert res.lhs == pytest.approx(0.25, abs=1e-14)
    assert res.rhs == pytest.approx(0.5, abs=1e-14)


def test_global_conjugation_leaves_ratio_unchanged():
    N, r = 6, 3
    angles = preset_angles("orthogonal", N, r)
    a = evaluate("cfrd", ghz(N, r), angles, conj_signs=[1] * N).bell
    b = evaluate("cfrd", ghz(N, r), angles, conj_signs=[-1] * N).bell
    assert a == pytest.approx(b, abs=1e-12)


def test_violation_flag_tolerance():
    assert not BellResult(1.0, 1.0, 1.0 + 1e-13, False).violated
    res = evaluate("mabk", ghz(3, 1), preset_angles("rotated_mabk", 3, 1), SIGN_BIN)
    assert res.violated


def bloch(v):
    v = np.asarray(v, float)
    n = np.linalg.norm(v)
    if n > 1:
        v = v / n
    x, y, z = v
    return 0.5 * np.array([[1 + z, x - 1j * y], [x + 1j * y, 1 - z]])


unit = st.floats(-1, 1)


@settings(max_examples=60)
@given(st.integers(1, 4), st.integers(2, 3), st.data())
def test_separable_mixtures_never_violate(N, terms, data):
    weights = np.array(data.draw(st.lists(st.floats(0.05, 1), min_size=terms, max_size=terms)))
    weights = weights / weights.sum()
    factors = np.array([[bloch(data.draw(st.tuples(unit, unit, unit))) for _ in range(N)]
                        for _ in range(terms)])
    rho = DensityOperator(weights, factors)
    angles = np.array(data.draw(st.lists(st.tuples(st.floats(-4, 4), st.floats(-4, 4)),
                                         min_size=N, max_size=N)))
    for fam, f in (("cfrd", IDENTITY), ("functional", PRESETS["tanh_opt"]), ("mabk", SIGN_BIN),
                   ("functional", FunctionSpec("rational", (3.0,)))):
        assert evaluate(fam, rho, angles, f).bell <= 1 + 1e-9
