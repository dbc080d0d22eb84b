import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissipate.models import (AlgebraicLoopError, DimensionError, LinearRealization, ModelError, StaticMap,
                              SystemDef, eval_dynamics, eval_output, frequency_response, frequency_response_grid,
                              make_feedback)

PHI = LinearRealization([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])
CATALOG = [SystemDef.icd(), SystemDef.lure(), SystemDef.example4(), SystemDef.static(StaticMap.saturation(1.0)),
           SystemDef.lti(PHI)]


def test_icd_dynamics_at_origin_and_unit_state():
    sys = SystemDef.icd()
    assert np.array_equal(eval_dynamics(sys, [0, 0], [0]), [0.0, 0.0])
    assert np.array_equal(eval_dynamics(sys, [1, 0], [0]), [-5.0, 0.0])


def test_lti_dynamics():
    assert eval_dynamics(SystemDef.lti(PHI), [2.0], [1.0]) == pytest.approx([-1.0], abs=0)


def test_outputs():
    assert eval_output(SystemDef.icd(), [3.0, 1.0], [7.3]) == pytest.approx([2.0], abs=0)
    assert eval_output(SystemDef.lure(), [1.0], [5.0]) == pytest.approx([0.0], abs=1e-15)


@pytest.mark.parametrize("sys", CATALOG, ids=lambda s: s.kind)
def test_catalog_origin_is_equilibrium(sys):
    assert np.all(eval_dynamics(sys, np.zeros(sys.n), np.zeros(sys.m)) == 0)
    assert np.all(eval_output(sys, np.zeros(sys.n), np.zeros(sys.m)) == 0)


def test_dimension_and_finiteness_errors():
    with pytest.raises(DimensionError):
        eval_dynamics(SystemDef.icd(), [1.0], [0.0])
    with pytest.raises(ModelError):
        eval_dynamics(SystemDef.icd(), [np.nan, 0.0], [0.0])
    boom = SystemDef.hook(lambda x, u: [np.inf], lambda x, u: [0.0], 1, 1, 1)
    with pytest.raises(ModelError):
        eval_dynamics(boom, [1.0], [0.0])


def test_evaluation_is_pure():
    sys = SystemDef.example4()
    a = eval_dynamics(sys, [0.3, -0.7], [0.2])
    b = eval_dynamics(sys, [0.3, -0.7], [0.2])
    assert np.array_equal(a, b)


def test_icd_rejects_negative_powers():
    with pytest.raises(ModelError):
        SystemDef.icd(N=1)


def test_frequency_response_examples():
    assert frequency_response(PHI, 0.0)[0, 0] == pytest.approx(0.0, abs=1e-15)
    g = frequency_response(PHI, 1.0)[0, 0]
    assert g == pytest.approx(1j / (1 + 1j), abs=1e-15)
    assert abs(g) ** 2 == pytest.approx(0.5, abs=1e-15)
    D = LinearRealization.static([[2.0, 1.0]])
    assert np.array_equal(frequency_response(D, 3.0), [[2.0, 1.0]])
    assert np.array_equal(frequency_response(PHI, np.inf), [[1.0]])


def test_phi_magnitude_identity_on_grid():
    w = np.logspace(-3, 3, 400)
    G = frequency_response_grid(PHI, w)[:, 0, 0]
    assert np.max(np.abs(np.abs(G) ** 2 - w ** 2 / (1 + w ** 2))) <= 1e-10


def test_singular_resolvent():
    osc = LinearRealization([[0.0, 1.0], [-1.0, 0.0]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    with pytest.raises(ModelError):
        frequency_response(osc, 1.0)
    with pytest.raises(ModelError):
        frequency_response_grid(osc, [0.5, 1.0])


def test_realization_dimension_check():
    with pytest.raises(DimensionError):
        LinearRealization([[-1.0]], [[1.0, 2.0]], [[1.0]], [[0.0]])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 20.0), st.lists(st.floats(-50, 50), min_size=2, max_size=40))
def test_saturation_sector_and_monotone(c, pts):
    sat = StaticMap.saturation(c)
    grid = np.array(pts)
    assert sat.sector_ok(1.0, grid)
    assert sat.monotone_ok(grid)
    assert np.array_equal(sat(grid), np.minimum(np.maximum(grid, -c), c))


@pytest.mark.parametrize("smap", [StaticMap.saturation(1.5), StaticMap.tanh(2.0), StaticMap.linear(0.7),
                                  StaticMap.table([-2.0, -0.5, 1.0, 3.0], [-1.0, -0.5, 0.2, 0.4])],
                         ids=lambda s: s.kind)
def test_static_map_integral_matches_quadrature(smap):
    r = np.linspace(-4, 4, 17)
    for v in r:
        s = np.linspace(0.0, v, 20001)
        f = smap(s)
        ref = np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(s))
        assert smap.integral(v) == pytest.approx(ref, abs=1e-6)


def test_json_roundtrip():
    for sys in CATALOG:
        back = SystemDef.from_json(json.loads(json.dumps(sys.to_json())))
        assert back.to_json() == sys.to_json()
        x = np.linspace(-1, 1, sys.n)
        u = np.full(sys.m, 0.3)
        assert np.array_equal(eval_dynamics(back, x, u), eval_dynamics(sys, x, u))


def test_hook_is_not_serializable():
    sys = SystemDef.hook(lambda x, u: [-x[0]], lambda x, u: [x[0]], 1, 1, 1)
    with pytest.raises(ModelError):
        sys.to_json()


def test_make_feedback_orders_and_errors():
    fb = make_feedback(SystemDef.icd(), SystemDef.lure())
    assert fb.order == "sigma1-first"
    assert fb.feedthrough == (False, True)
    gain = SystemDef.lti(LinearRealization.static([[1.0]]))
    with pytest.raises(AlgebraicLoopError):
        make_feedback(gain, gain)
    neg = make_feedback(SystemDef.icd(), SystemDef.lure(), sign=-1.0)
    assert neg.sign == -1.0
    half = SystemDef.lti(LinearRealization.static([[0.5]]))
    assert make_feedback(half, gain).order == "iterate"
    with pytest.raises(DimensionError):
        make_feedback(SystemDef.icd(), SystemDef.lti(LinearRealization.static([[1.0, 1.0]])))


def test_negated_system():
    sys = SystemDef.lure()
    neg = sys.negated()
    assert np.array_equal(eval_output(neg, [0.4], [1.0]), -eval_output(sys, [0.4], [1.0]))
    assert np.array_equal(eval_dynamics(neg, [0.4], [1.0]), eval_dynamics(sys, [0.4], [1.0]))
