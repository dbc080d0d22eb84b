import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissipate.models import DimensionError, LinearRealization, StaticMap
from dissipate.operators import (AuxiliarySystem, InitialRule, OperatorError, PermutationH, Quadruplet, SupplyRate,
                                 aux_trace, invert_supply, quadruplet_supply, supply_trace, swap_supply)

PHI = LinearRealization([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])
T = np.linspace(0.0, 5.0, 5001)


def _rates():
    return [SupplyRate.icd(), SupplyRate.icd(prime=False), SupplyRate.sector(1.0),
            SupplyRate.example4(StaticMap.saturation(0.5)),
            SupplyRate.static_quadratic([[0.0, 0.5], [0.5, 0.0]], 1, 1),
            SupplyRate.quadruplet(Quadruplet(PHI, 0.5, 0.5, -1.0, 1, 1))]


def _signals(seed, n=T.size):
    rng = np.random.default_rng(seed)
    t = T[:n]
    u = np.sin(rng.uniform(0.2, 3) * t + rng.uniform(0, 6))[:, None]
    y = np.cos(rng.uniform(0.2, 3) * t)[:, None] * rng.uniform(-2, 2)
    return u, y


def test_icd_rate_vanishes_without_input():
    y = np.sin(T)[:, None]
    assert np.all(supply_trace(SupplyRate.icd(), np.zeros((T.size, 1)), y, T, xbar=[0.0, 0.7]) == 0)


def test_icd_rate_step_response():
    xi = supply_trace(SupplyRate.icd(), np.ones((T.size, 1)), np.zeros((T.size, 1)), T, xbar=[0.0, 0.0])
    assert np.max(np.abs(xi - 3 * (1 - np.exp(-T)))) <= 1e-12


def test_static_passivity_rate():
    s = np.sin(T)[:, None]
    xi = supply_trace(SupplyRate.static_quadratic([[0.0, 0.5], [0.5, 0.0]], 1, 1), s, s, T)
    assert np.max(np.abs(xi - np.sin(T) ** 2)) <= 1e-15


def test_invert_evaluated_on_swapped_signals():
    u, y = _signals(1)
    xi = SupplyRate.icd(prime=False)
    a = supply_trace(xi, u, y, T, xbar=[0.0, 0.3])
    b = supply_trace(invert_supply(xi), y, u, T, xbar=[0.0, 0.3])
    assert np.array_equal(b, -a)


def test_inverse_of_forward_rate_on_decaying_output():
    y2 = np.exp(-T)[:, None]
    u2 = np.zeros_like(y2)
    xi2 = supply_trace(invert_supply(SupplyRate.icd()), u2, y2, T, xbar=[0.0, 0.0])
    z2 = T * np.exp(-T)  # z' = -z + e^{-t}, z(0) = 0
    # interpolation of the non-constant driving signal costs O(h^3) on the first step
    assert np.max(np.abs(xi2 - (-np.exp(-T) * 3 * z2))) <= 1e-8


@pytest.mark.parametrize("rate", _rates(), ids=lambda r: r.variant)
def test_double_inversion_is_identity(rate):
    twice = invert_supply(invert_supply(rate))
    assert twice.same_as(rate)
    assert twice.prime == rate.prime
    u, y = _signals(2)
    xbar = np.full(rate.xbar_dim, 0.4)
    assert np.array_equal(supply_trace(twice, u, y, T, xbar), supply_trace(rate, u, y, T, xbar))


def test_swap_is_involution_and_inversion_is_never_prime():
    xi = SupplyRate.icd()
    assert swap_supply(swap_supply(xi)).same_as(xi)
    assert xi.prime and not invert_supply(xi).prime


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 400))
def test_causality_under_truncation(seed, k):
    u, y = _signals(seed, 401)
    t = T[:401]
    for rate in _rates():
        full = supply_trace(rate, u, y, t, np.full(rate.xbar_dim, 0.2))
        cut = supply_trace(rate, u[:k], y[:k], t[:k], np.full(rate.xbar_dim, 0.2))
        assert np.array_equal(full[:k], cut)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(-5, 5), st.floats(-5, 5))
def test_static_rate_ignores_xbar(entries, a, b):
    P = np.reshape(entries, (2, 2))
    rate = SupplyRate.static_quadratic(P, 1, 1)
    u, y = _signals(3, 200)
    t = T[:200]
    assert np.array_equal(supply_trace(rate, u, y, t, xbar=[a]), supply_trace(rate, u, y, t, xbar=[b]))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=9, max_size=9))
def test_quadruplet_symmetrization_invariance(entries):
    theta = np.reshape(entries, (3, 3))
    sym = 0.5 * (theta + theta.T)
    rng = np.random.default_rng(0)
    u, y = rng.normal(size=(100, 1)), rng.normal(size=(100, 2))
    t = T[:100]
    a = quadruplet_supply(Quadruplet.static(theta, 1, 2), u, y, t)
    b = quadruplet_supply(Quadruplet.static(sym, 1, 2), u, y, t)
    assert np.array_equal(a, b)


def test_quadruplet_examples():
    r = 0.8
    one, half = np.ones((T.size, 1)), np.full((T.size, 1), 0.5)
    xi = quadruplet_supply(Quadruplet.small_gain(r), one, half, T)
    assert np.max(np.abs(xi - (r * r - 0.25))) <= 1e-15
    zero = Quadruplet.static(np.zeros((2, 2)), 1, 1)
    assert np.all(quadruplet_supply(zero, one, half, T) == 0)
    dyn = Quadruplet(PHI, 0.0, 0.0, 0.0, 1, 1)
    xi = quadruplet_supply(dyn, one, np.sin(T)[:, None], T)
    assert np.max(np.abs(xi - np.exp(-T))) <= 1e-12


def test_aux_trace_examples():
    filt = AuxiliarySystem.filter("u", init=InitialRule.linear([[1.0]]))
    z, out = aux_trace(filt, None, np.zeros((T.size, 1)), T, xbar=[1.0])
    assert np.max(np.abs(z[:, 0] - np.exp(-T))) <= 1e-12
    assert np.array_equal(out, z)
    z, _ = aux_trace(filt, None, np.zeros((T.size, 1)), T, xbar=[0.0])
    assert np.all(z == 0)


def test_ioni_rate_reduces_to_output_derivative():
    plant = LinearRealization([[-2.0, 1.0], [0.0, -1.0]], [[0.0], [1.0]], [[1.0, 0.5]], [[0.0]])
    rate = SupplyRate.ioni(plant, 0.0, 0.0, PHI)
    rng = np.random.default_rng(4)
    x, u = rng.normal(size=(50, 2)), rng.normal(size=(50, 1))
    y = x @ plant.C.T
    xi = supply_trace(rate, u, y, T[:50], x=x)
    ydot = (x @ plant.A.T + u @ plant.B.T) @ plant.C.T
    assert np.max(np.abs(xi - 2 * ydot[:, 0] * u[:, 0])) <= 1e-13
    with pytest.raises(OperatorError):
        supply_trace(rate, u, y, T[:50])


def test_permutation_h():
    H = PermutationH(2, 3).matrix()
    w = np.arange(5.0)
    assert np.array_equal(H @ w, [2.0, 3.0, 4.0, 0.0, 1.0])
    assert np.array_equal(H.T @ H, np.eye(5))
    Hs = PermutationH(2, 2).matrix()
    assert np.array_equal(Hs @ Hs, np.eye(4))
    assert np.array_equal(PermutationH(2, 3).inverse().matrix() @ H, np.eye(5))


def test_grid_and_dimension_errors():
    u, y = _signals(5, 10)
    with pytest.raises(OperatorError):
        supply_trace(SupplyRate.icd(), u, y, T[:9])
    bad = T[:10].copy()
    bad[4] += 1e-3
    with pytest.raises(OperatorError):
        supply_trace(SupplyRate.icd(), u, y, bad)
    with pytest.raises(DimensionError):
        Quadruplet.static(np.eye(3), 1, 1)
    with pytest.raises(DimensionError):
        SupplyRate.static_quadratic(np.eye(3), 1, 1)


def test_divergent_internal_state():
    unstable = AuxiliarySystem.lti([[5.0]], [[1.0, 0.0]], 1, 1, init=InitialRule.linear([[1.0]]))
    with pytest.raises(OperatorError):
        aux_trace(unstable, None, np.ones((T.size, 1)), T, xbar=[1.0], bound=1e3)


@pytest.mark.parametrize("rate", _rates(), ids=lambda r: r.variant)
def test_rate_json_roundtrip(rate):
    for r in (rate, invert_supply(rate), rate.scaled(2.5)):
        back = SupplyRate.from_json(json.loads(json.dumps(r.to_json())))
        assert back.same_as(r)
        u, y = _signals(6, 300)
        xbar = np.full(r.xbar_dim, -0.3)
        assert np.array_equal(supply_trace(back, u, y, T[:300], xbar), supply_trace(r, u, y, T[:300], xbar))


def test_aux_json_roundtrip():
    for aux in (AuxiliarySystem.filter("y", init=InitialRule.linear([[0.0, 1.0]])),
                AuxiliarySystem.example4(StaticMap.saturation(0.5)), AuxiliarySystem.none()):
        assert AuxiliarySystem.from_json(json.loads(json.dumps(aux.to_json()))).to_json() == aux.to_json()
