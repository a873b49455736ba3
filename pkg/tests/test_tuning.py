import dataclasses
import math

import numpy as np
import pytest

from conftest import table1_inputs
from eaholab.analysis import max_real_part
from eaholab.controllers import polar_dynamics
from eaholab.model import DomainError, EAHOParams, table1_circuit, table1_ratings, table1_setpoints
from eaholab.tuning import (
    MU_E_CONDITION,
    SAFETY_FACTOR,
    design_aho,
    design_droop,
    design_eaho,
    design_with_stability,
    droop_curve,
)

R = table1_ratings()
SP = table1_setpoints(0.0, 0.0)


def test_design_aho():
    p = design_aho(R, SP)
    assert p.eta == pytest.approx(91.99, rel=5e-3)
    assert p.mu == pytest.approx(1.16e-4, rel=5e-3)
    assert design_aho(dataclasses.replace(R, p_0=4000), SP).eta == pytest.approx(p.eta / 2, rel=1e-15)


def test_design_aho_zero_reactive_rating():
    from eaholab.model import validate_system

    p = design_aho(dataclasses.replace(R, q_0=0.0), SP)
    assert p.mu == 0.0
    bad = validate_system(SP, R, [p], table1_circuit())
    assert any(v.field.endswith("mu") for v in bad)


def test_design_eaho():
    p = design_eaho(R, SP)
    assert p.eta_e == pytest.approx(0.0016, rel=0.02)
    assert p.mu_e == pytest.approx(1.16e-4, rel=0.02)
    assert p.eta_e == pytest.approx(math.pi / 2000, rel=1e-15)
    unit = dataclasses.replace(R, v_p_max=math.sqrt(311.0**2 + 1), q_0=1.0)
    q = design_eaho(unit, SP)
    assert q.mu_e == pytest.approx(q.eta_e, rel=1e-9)


def test_design_droop():
    p = design_droop(R, SP)
    assert p.m_p == pytest.approx(0.0016, rel=0.02)
    assert p.m_q == pytest.approx(0.0207, rel=5e-3)
    assert p.m_p == design_eaho(R, SP).eta_e
    unit = dataclasses.replace(R, q_0=R.v_p_max - 311.0)
    assert design_droop(unit, SP).m_q == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("fn", [design_aho, design_eaho, design_droop])
def test_degenerate_voltage_range(fn):
    with pytest.raises(DomainError, match="degenerate voltage range"):
        fn(dataclasses.replace(R, v_p_max=311.0), SP)


def test_eaho_design_hits_endpoints():
    p = design_eaho(R, SP)
    _, w = polar_dynamics(p, 311.0, 0.0, 0.0, table1_setpoints(R.p_0, 0.0))
    assert w - SP.omega_0 == pytest.approx(R.d_omega_max, rel=1e-12)
    # steady amplitude with q_ref - q = q_0
    dvp, _ = polar_dynamics(p, R.v_p_max, 0.0, 0.0, table1_setpoints(0.0, R.q_0))
    assert dvp == pytest.approx(0.0, abs=1e-9 * R.v_p_max * p.mu_e * R.v_p_max**2)


def test_design_with_stability_table1():
    rep = design_with_stability(R, table1_setpoints(2000.0, 0.0), table1_circuit(), v_g=220.0)
    assert rep.status == "pass"
    assert not rep.curtailed
    assert rep.critical == pytest.approx(0.0062, rel=0.1)
    assert rep.params.eta_e < rep.critical
    assert rep.binding == {"eta_e": "frequency", "mu_e": "voltage"}
    assert MU_E_CONDITION in rep.lines()


def test_design_with_stability_curtails():
    ratings = dataclasses.replace(R, p_0=400.0)
    sp = table1_setpoints(2000.0, 0.0)
    rep = design_with_stability(ratings, sp, table1_circuit(), v_g=220.0)
    assert rep.designed.eta_e == pytest.approx(0.00785, rel=1e-3)
    assert rep.curtailed and rep.status == "curtailed"
    assert rep.params.eta_e == pytest.approx(SAFETY_FACTOR * rep.critical, rel=1e-12)
    assert rep.params.mu_e == rep.designed.mu_e
    assert rep.binding["eta_e"] == "stability"
    # the critical gain moves with mu_e, so it differs from the nominal-rating 0.0062
    assert 0.0055 < rep.critical < 0.0080
    inp = table1_inputs("eaho")
    inp = dataclasses.replace(inp, params=rep.params)
    assert max_real_part(inp, "eta_e", rep.params.eta_e) < 0
    assert any("curtailed" in line for line in rep.lines())


def test_droop_curve():
    from eaholab.model import TABLE1_PARAMS

    aho = droop_curve(TABLE1_PARAMS["aho"], SP)
    eaho = droop_curve(TABLE1_PARAMS["eaho"], SP)
    assert aho.shape == (200, 2)
    np.testing.assert_allclose(aho[[0, -1], 0], [0.5 * 311, 1.2 * 311])
    assert np.ptp(eaho[:, 1]) == 0
    k = int(np.argmin(np.abs(aho[:, 0] - 311)))
    row = droop_curve(TABLE1_PARAMS["aho"], SP, (311.0, 311.0), 1)
    assert row[0, 1] / 0.0016 == pytest.approx(1.19, abs=0.01)
    ratio = (droop_curve(design_aho(R, SP), SP, (311.0, 311.0), 1)[0, 1]
             / droop_curve(design_eaho(R, SP), SP, (311.0, 311.0), 1)[0, 1])
    assert ratio == pytest.approx(1.21, abs=0.01)
    # 1/v_p^2 shape
    np.testing.assert_allclose(aho[:, 1] * aho[:, 0] ** 2, 2 * TABLE1_PARAMS["aho"].eta, rtol=1e-12)
    designed = design_aho(R, SP)
    top = droop_curve(designed, SP, (R.v_p_max, R.v_p_max), 1)
    assert top[0, 1] == pytest.approx(0.0016, rel=0.02)
    assert top[0, 1] == pytest.approx(design_eaho(R, SP).eta_e, rel=1e-12)
    assert aho[k, 1] > eaho[k, 1]


def test_droop_curve_domain():
    with pytest.raises(DomainError):
        droop_curve(EAHOParams(1e-3, 1e-4), SP, (0.0, 300.0))
    with pytest.raises(DomainError):
        droop_curve(EAHOParams(1e-3, 1e-4), SP, (100.0, 700.0))
