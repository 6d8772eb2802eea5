import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bellcv.functions import AUTO, IDENTITY, PRESETS, SIGN_BIN, FunctionSpec, parse_function

SPECS = [
    IDENTITY,
    SIGN_BIN,
    FunctionSpec("power", (1 / 3,)),
    FunctionSpec("power", (2.5,)),
    FunctionSpec("triplebin", (0.4,)),
    FunctionSpec("tanh", (4.0, 1.4)),
    FunctionSpec("rational", (2.96,)),
]

xs = st.floats(-50, 50, allow_nan=False)


@pytest.mark.parametrize("spec", SPECS, ids=str)
@given(x=xs)
def test_every_family_is_odd(spec, x):
    assert spec(-x) == -spec(x)


@pytest.mark.parametrize("spec", [s for s in SPECS if s.bounded], ids=str)
@given(x=xs)
def test_bounded_families_stay_in_unit_interval(spec, x):
    assert abs(spec(x)) <= 1


def test_values():
    x = np.array([-2.0, -0.3, 0.0, 0.3, 2.0])
    np.testing.assert_array_equal(SIGN_BIN(x), [-1, -1, 0, 1, 1])
    np.testing.assert_array_equal(FunctionSpec("triplebin", (0.5,))(x), [-1, 0, 0, 0, 1])
    np.testing.assert_allclose(FunctionSpec("power", (1 / 3,))(np.array([-8.0, 27.0])), [-2, 3])
    np.testing.assert_allclose(FunctionSpec("rational", (1.0,))(np.array([1.0, 2.0])), [0.5, 0.4])
    assert FunctionSpec("tanh", (2.0, 1.0))(0.5) == pytest.approx(math.tanh(1.0))


def test_limits():
    x = np.linspace(-4, 4, 801)
    np.testing.assert_array_equal(FunctionSpec("triplebin", (0.0,))(x), SIGN_BIN(x))
    np.testing.assert_allclose(FunctionSpec("rational", (0.0,))(x), x, atol=0)
    steep = FunctionSpec("tanh", (100.0, 1.0))(x)
    assert np.max(np.abs(steep - SIGN_BIN(x))[np.abs(x) > 0.1]) < 1e-8


def test_breakpoints():
    assert FunctionSpec("triplebin", (0.5,)).breakpoints == (-0.5, 0.5)
    assert IDENTITY.breakpoints == ()
    assert 0.0 in SIGN_BIN.breakpoints


@pytest.mark.parametrize("family, params", [
    ("power", (0.0,)), ("power", (-1.0,)), ("triplebin", (-0.1,)), ("tanh", (0.0, 1.0)),
    ("rational", (-1.0,)), ("identity", (1.0,)), ("cubic", ()), ("power", (math.nan,)),
])
def test_invalid_specs(family, params):
    with pytest.raises(ValueError):
        FunctionSpec(family, params)


def test_parse():
    assert parse_function("tanh(4,1.4)") == FunctionSpec("tanh", (4.0, 1.4))
    assert parse_function("power(1/3)") == FunctionSpec("power", (1 / 3,))
    assert parse_function("sign") == SIGN_BIN
    assert parse_function("bin") == SIGN_BIN
    assert parse_function("x") == IDENTITY
    assert parse_function("rational(auto)") == AUTO
    assert parse_function("rational") == AUTO
    assert parse_function("tanh_opt") == PRESETS["tanh_opt"]
    for bad in ("tanh(4)", "power(a)", "(1)"):
        with pytest.raises(ValueError):
            parse_function(bad)


def test_labels_round_trip():
    for spec in SPECS:
        assert parse_function(spec.label()) == spec
