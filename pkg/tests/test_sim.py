import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissipate.models import LinearRealization, SystemDef, make_feedback
from dissipate.operators import AuxiliarySystem, InitialRule, SupplyRate
from dissipate.sim import (DivergenceError, EnsembleMember, InputSignal, SimConfig, SimulationError, cumtrapz,
                           gen_input, random_ensemble, simulate_closed, simulate_open)

PHI = LinearRealization([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])
PINNED_U = AuxiliarySystem.filter("u", init=InitialRule.linear([[0.0, 1.0]]))
PINNED_Y = AuxiliarySystem.filter("y", init=InitialRule.linear([[0.0, 1.0]]))


def _lti_error(h):
    tr = simulate_open(SystemDef.lti(PHI), None, None, InputSignal.constant(1.0), [0.0], cfg=SimConfig(h, 1.0))
    return np.max(np.abs(tr.x[:, 0] - (1 - np.exp(-tr.t)))), tr


def test_lti_step_response_and_order():
    err, tr = _lti_error(1e-3)
    assert err <= 1e-6
    assert tr.x[-1, 0] == pytest.approx(1 - np.exp(-1), abs=1e-6)
    assert tr.y[-1, 0] == pytest.approx(np.exp(-1), abs=1e-6)
    coarse, _ = _lti_error(0.1)
    fine, _ = _lti_error(0.05)
    assert coarse / fine >= 8


def test_euler_is_first_order():
    def err(h):
        tr = simulate_open(SystemDef.lti(PHI), None, None, InputSignal.constant(1.0), [0.0],
                           cfg=SimConfig(h, 1.0, "euler"))
        return np.max(np.abs(tr.x[:, 0] - (1 - np.exp(-tr.t))))
    r = err(0.01) / err(0.005)
    assert 1.8 < r < 2.2


@pytest.mark.parametrize("sys", [SystemDef.icd(), SystemDef.lure(), SystemDef.example4()], ids=lambda s: s.kind)
def test_zero_input_at_origin_stays_zero(sys):
    tr = simulate_open(sys, None, None, InputSignal.zero(sys.m), np.zeros(sys.n), cfg=SimConfig(horizon=2.0))
    for ch in (tr.x, tr.u, tr.y):
        assert np.all(ch == 0)


def test_example2_integral_against_fine_oracle():
    u = InputSignal.sinusoid(1.0, 1.0, 0.0)
    coarse = simulate_open(SystemDef.icd(), PINNED_U, SupplyRate.icd(), u, [1.0, 0.0], cfg=SimConfig(1e-3, 5.0))
    fine = simulate_open(SystemDef.icd(), PINNED_U, SupplyRate.icd(), u, [1.0, 0.0], cfg=SimConfig(1e-5, 5.0))
    assert coarse.int_xi[-1] == pytest.approx(fine.int_xi[-1], abs=1e-6)


def test_trapezoid_channel_and_aliasing():
    tr = simulate_open(SystemDef.icd(), PINNED_U, SupplyRate.icd(), InputSignal.sinusoid(0.8, 2.0, 0.3),
                       [0.5, -1.2], cfg=SimConfig(horizon=5.0))
    h = tr.h
    ref = np.concatenate([[0.0], np.cumsum(0.5 * h * (tr.xi[1:] + tr.xi[:-1]))])
    assert np.max(np.abs(tr.int_xi - ref)) <= 1e-12
    assert np.max(np.abs(tr.z[:, 0] - tr.x[:, 1])) <= 1e-12


def test_prime_rate_ignores_supplied_xbar():
    u = InputSignal.constant(0.3)
    a = simulate_open(SystemDef.icd(), PINNED_U, SupplyRate.icd(), u, [0.4, 0.9], xbar=[5.0, 5.0])
    b = simulate_open(SystemDef.icd(), PINNED_U, SupplyRate.icd(), u, [0.4, 0.9])
    assert np.array_equal(a.xi, b.xi) and np.array_equal(a.z, b.z)


def test_divergence_reported():
    unstable = SystemDef.lti(LinearRealization([[3.0]], [[1.0]], [[1.0]], [[0.0]]))
    tr = simulate_open(unstable, None, None, InputSignal.zero(), [1.0], cfg=SimConfig(1e-2, 20.0, bound=1e6))
    assert not tr.ok
    assert 4.0 < tr.failure_time < 5.0
    k = int(round(tr.failure_time / tr.h))
    assert np.all(np.isnan(tr.x[k:])) and np.all(np.isfinite(tr.x[:k]))
    with pytest.raises(DivergenceError):
        tr.raise_on_failure()


def test_invalid_requests():
    with pytest.raises(SimulationError):
        SimConfig(0.3, 1.0)
    with pytest.raises(SimulationError):
        simulate_open(SystemDef.icd(), None, None, InputSignal.zero(), [np.nan, 0.0])


def test_gen_input_families():
    t = np.linspace(0, 2 * np.pi, 4001)
    assert np.all(gen_input(InputSignal.zero(2), t) == 0)
    k = 1000
    assert t[k] == pytest.approx(np.pi / 2)
    assert gen_input(InputSignal.sinusoid(1.0, 1.0, 0.0), t)[k, 0] == pytest.approx(1.0, abs=1e-15)
    a = gen_input(InputSignal.piecewise(7, dims=2), t)
    b = gen_input(InputSignal.piecewise(7, dims=2), t)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 1.0)
    e = gen_input(InputSignal.exponential(2.0, 0.5), t)
    assert np.allclose(e[:, 0], 2.0 * np.exp(-0.5 * t), rtol=0, atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.2, 3.0), st.floats(0.1, 5.0))
def test_piecewise_prefix_stable_and_bounded(seed, dwell, amp):
    spec = InputSignal.piecewise(seed, dwell, amp, dims=2)
    long = gen_input(spec, np.linspace(0, 20, 2001))
    short = gen_input(spec, np.linspace(0, 10, 1001))
    assert np.array_equal(long[:1001], short)
    assert np.all(np.abs(long) <= amp)


def test_ensemble_prefix_and_determinism():
    a = random_ensemble(12, 3, 2, 1, xbar_dim=1)
    b = random_ensemble(5, 3, 2, 1, xbar_dim=1)
    assert [m.to_json() for m in a[:5]] == [m.to_json() for m in b]
    assert EnsembleMember.from_json(a[7].to_json()).to_json() == a[7].to_json()


def _section6():
    return make_feedback(SystemDef.icd(), SystemDef.lure())


def test_section6_loop_converges():
    tr = simulate_closed(_section6(), PINNED_U, PINNED_Y, None, None, [2.0, -1.0, 1.0], SimConfig(horizon=40.0))
    assert tr.ok
    assert np.linalg.norm(tr.x[-1]) < 1e-3
    parts = tr.split()
    assert np.array_equal(parts["u1"], parts["y2"]) and np.array_equal(parts["u2"], parts["y1"])
    # both filters see the same loop signal from the same initial value
    assert np.array_equal(parts["z1"], parts["z2"])


def test_closed_loop_origin_is_exact():
    tr = simulate_closed(_section6(), PINNED_U, PINNED_Y, None, None, np.zeros(3), SimConfig(horizon=5.0))
    assert np.all(tr.x == 0) and np.all(tr.z == 0)


def test_closed_loop_with_decaying_disturbance():
    tr = simulate_closed(_section6(), None, None, InputSignal.exponential(1.0, 0.5), None, [1.0, 0.0, -1.0],
                         SimConfig(horizon=60.0))
    assert tr.ok and np.all(np.isfinite(tr.x))
    assert np.linalg.norm(tr.x[-1]) < 1e-2


def test_iterated_loop_resolution_matches_algebra():
    g1 = SystemDef.lti(LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[0.5]]))
    g2 = SystemDef.lti(LinearRealization.static([[0.4]]))
    fb = make_feedback(g1, g2)
    assert fb.order == "iterate"
    tr = simulate_closed(fb, None, None, InputSignal.constant(1.0), None, [0.3], SimConfig(horizon=1.0))
    u1, y1 = tr.u[:, 0], tr.y[:, 0]
    assert np.max(np.abs(u1 - (1.0 + 0.4 * y1))) <= 1e-12
    assert np.max(np.abs(y1 - (tr.x[:, 0] + 0.5 * u1))) <= 1e-12


def test_csv_format(tmp_path):
    tr = simulate_open(SystemDef.icd(), PINNED_U, SupplyRate.icd(), InputSignal.constant(1.0), [1.0, 0.0],
                       cfg=SimConfig(horizon=0.01))
    path = tmp_path / "t.csv"
    tr.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x1,x2,z1,u1,y1,xi,int_xi,S"
    assert len(lines) == 12
    row = np.array(lines[5].split(","), dtype=float)[:-1]
    assert np.array_equal(row, tr.table()[4, :-1])
    assert not [f for f in os.listdir(tmp_path) if f.startswith(".tmp")]


def test_cumtrapz():
    y = np.array([0.0, 1.0, 2.0, 3.0])
    assert np.array_equal(cumtrapz(y, 0.5), [0.0, 0.25, 1.0, 2.25])
