import math
import sys

import pytest

from eaholab.analysis import OperatingInputs
from eaholab.emt.network import InverterSpec, assemble
from eaholab.model import (
    TABLE1_PARAMS,
    TABLE1_V_G_RMS,
    GridSource,
    LoadProfile,
    table1_circuit,
    table1_setpoints,
)

W0 = 2 * math.pi * 50


def table1_inputs(kind="eaho", p_ref=2000.0, q_ref=0.0, v_g=TABLE1_V_G_RMS, **circuit):
    import dataclasses

    ckt = dataclasses.replace(table1_circuit(), **circuit)
    return OperatingInputs(v_g, W0, table1_setpoints(p_ref, q_ref), ckt, TABLE1_PARAMS[kind])


def grid_system(kind="eaho", p_ref=0.0, q_ref=0.0, params=None, l_g=1e-3, r_g=1.0):
    inv = InverterSpec(params or TABLE1_PARAMS[kind], table1_setpoints(p_ref, q_ref), 7e-3)
    return assemble([inv], LoadProfile(), GridSource(TABLE1_V_G_RMS, W0), l_g, r_g)


@pytest.fixture
def eaho_inputs():
    return table1_inputs("eaho")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
