import dataclasses
import math

import pytest
from hypothesis import given, strategies as st

from eaholab.model import (
    TABLE1_PARAMS,
    AHOParams,
    CircuitParams,
    DroopParams,
    EAHOParams,
    GridSource,
    LoadProfile,
    RatingsAndLimits,
    Setpoints,
    from_dict,
    peak_to_rms,
    rms_to_peak,
    table1_circuit,
    table1_ratings,
    table1_setpoints,
    to_dict,
    validate_system,
)


def _table1():
    return table1_setpoints(), table1_ratings(), list(TABLE1_PARAMS.values()), table1_circuit()


def test_table1_is_valid():
    assert validate_system(*_table1()) == []


def test_zero_mu_e_is_one_violation():
    sp, r, _, c = _table1()
    rep = validate_system(sp, r, EAHOParams(0.0016, 0.0), c)
    assert len(rep) == 1
    assert rep[0].message == "gain must be positive"
    assert rep[0].code == "gain_nonpositive"


def test_degenerate_voltage_range():
    sp, r, p, c = _table1()
    rep = validate_system(sp, dataclasses.replace(r, v_p_max=sp.v_p0), p, c)
    assert [v.message for v in rep] == ["v_p_max must exceed v_p0"]


def test_validation_collects_every_violation():
    sp = Setpoints(0, 0, -1.0, 0.0)
    r = RatingsAndLimits(0, 1, 1, 1)
    c = CircuitParams(l_f=0.0, l_g=-1.0, r_g=1.0)
    codes = {v.field for v in validate_system(sp, r, AHOParams(1, 1), c)}
    assert {"omega_0", "v_p0", "p_0", "l_f", "l_g"} <= codes


def test_grid_and_load_schedules():
    sp, r, p, c = _table1()
    g = GridSource(220, 314, breaker_steps=((2.0, False), (1.0, True)))
    ld = LoadProfile(10.0, ((1.0, -5.0),))
    codes = [v.code for v in validate_system(sp, r, p, c, g, ld)]
    assert "steps_not_increasing" in codes
    assert "nonpositive" in codes


def test_validation_is_pure():
    args = (Setpoints(0, 0, 1, 1), table1_ratings(), EAHOParams(-1, 1), table1_circuit())
    assert validate_system(*args) == validate_system(*args)


def test_profiles_piecewise_constant():
    g = GridSource(220, 314, v_g_steps=((1.0, 176.0),), breaker_steps=((2.0, False),))
    assert g.v_g_at(0.999) == 220 and g.v_g_at(1.0) == 176
    assert g.connected_at(1.5) and not g.connected_at(2.0)
    ld = LoadProfile(None, ((0.5, 47.0),))
    assert ld.at(0.0) is None and ld.at(0.6) == 47.0 and ld.ever_closed()


def test_circuit_derived_quantities():
    c = CircuitParams(l_f=7e-3, l_g=1e-3, r_g=1.0, r_f=0.2)
    assert c.l_t == pytest.approx(8e-3)
    assert c.r_t == pytest.approx(1.2)
    assert c.x_t(100.0) == pytest.approx(0.8)


def test_default_filter_resistance_is_zero():
    assert table1_circuit().r_t == table1_circuit().r_g == 1.0


finite = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False)


@given(finite, finite, finite, finite)
def test_roundtrip_all_types(a, b, c, d):
    objs = [
        Setpoints(a, b, c, d),
        RatingsAndLimits(a, b, c, d),
        AHOParams(a, b),
        EAHOParams(c, d),
        DroopParams(a, b, c, d),
        CircuitParams(a, b, c, d),
        GridSource(a, b, v_g_steps=((1.0, c),), breaker_steps=((2.0, False),)),
        LoadProfile(a, ((1.0, None), (2.0, d))),
    ]
    for o in objs:
        assert from_dict(to_dict(o)) == o


@given(st.floats(min_value=-1e6, max_value=1e6))
def test_rms_peak_inverse(x):
    assert rms_to_peak(peak_to_rms(x)) == pytest.approx(x, rel=1e-15, abs=1e-12)
    assert peak_to_rms(311.0) == pytest.approx(311 / math.sqrt(2))
