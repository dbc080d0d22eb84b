import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dissipate import certify as C
from dissipate.models import LinearRealization, ModelError, StaticMap, SystemDef, make_feedback
from dissipate.operators import AuxiliarySystem, InitialRule, Quadruplet, SupplyRate, invert_supply
from dissipate.sim import EnsembleMember, InputSignal, SimConfig, random_ensemble

PIN_U = AuxiliarySystem.filter("u", init=InitialRule.linear([[0.0, 1.0]]))
PIN_Y = AuxiliarySystem.filter("y", init=InitialRule.linear([[0.0, 1.0]]))
S1 = C.Quadratic.half_identity(3, 2)
S2 = C.Quadratic.half_identity(2, 1)
CFG = SimConfig(horizon=10.0)
REPORT_KEYS = {"check", "verdict", "tolerance", "max_residual", "worst_trajectory", "theorem_path", "evidence_label"}


def _ex2(strict=C.StrictnessSpec(gamma_y=1.0), size=20, rate=None, jobs=1):
    return C.check_dissipation(SystemDef.icd(), PIN_U, rate or SupplyRate.icd(), S1, strict,
                               random_ensemble(size, 0, 2, 1, x0_scale=2.0), CFG, jobs=jobs)


def _sigma2(strict=C.StrictnessSpec(gamma_y=1.0), cfg=CFG, size=20):
    return C.check_dissipation(SystemDef.lure(), PIN_Y, invert_supply(SupplyRate.icd()), S2, strict,
                               random_ensemble(size, 0, 1, 1, xbar_dim=2, x0_scale=2.0, xbar_scale=2.0), cfg)


# storage functions

STORAGES = [C.Quadratic([[2.0, 0.5, 0.0], [0.5, 1.0, 0.1], [0.0, 0.1, 3.0]], 2),
            C.DiagonalPowers([0.25, 0.5, 0.5], [4, 2, 2], 2),
            C.IntegralOfStatic(StaticMap.tanh(1.5), 3, 2, [0, 2])]


@pytest.mark.parametrize("S", STORAGES, ids=lambda s: s.variant)
def test_storage_zero_at_origin(S):
    assert S(np.zeros(3)) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_storage_gradient_matches_finite_differences(v):
    v = np.array(v)
    for S in STORAGES:
        g = S.grad(v)
        fd = np.empty(3)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-5
            fd[i] = (S(v + e) - S(v - e)) / 2e-5
        assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(g)))


def test_storage_json_and_scaling():
    for S in STORAGES:
        back = C.StorageFn.from_json(json.loads(json.dumps(S.scaled(2.0).to_json())))
        v = np.array([0.3, -1.2, 0.7])
        assert back(v) == 2.0 * S(v)


def test_storage_validation():
    with pytest.raises(C.CertificationError):
        C.Quadratic([[1.0, 2.0], [0.0, 1.0]], 2)
    with pytest.raises(C.CertificationError):
        C.DiagonalPowers([1.0], [3], 1)


# dissipation

def test_example2_output_strict_passes():
    rep = _ex2()
    assert rep.verdict == "PASS"
    assert rep.max_residual <= 1e-5
    assert set(rep.to_json()) == REPORT_KEYS


def test_zero_ensemble_has_zero_residual():
    rep = C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd(), S1, C.StrictnessSpec(gamma_y=1.0),
                              [EnsembleMember(InputSignal.zero(), (0.0, 0.0))], CFG)
    assert rep.residuals == [0.0] and rep.verdict == "PASS"


def test_flipped_rate_fails():
    rep = C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd().scaled(-1.0), S1, None,
                              [EnsembleMember(InputSignal.constant(1.0), (1.0, 0.0))], CFG)
    assert rep.verdict == "FAIL" and rep.max_residual > 0 and rep.worst_trajectory == 0


def test_sigma2_inverted_rate_passes():
    assert _sigma2().verdict == "PASS"


def test_residual_does_not_grow_under_refinement():
    coarse = _sigma2(cfg=SimConfig(1e-3, 10.0), size=10)
    fine = _sigma2(cfg=SimConfig(5e-4, 10.0), size=10)
    assert fine.max_residual <= coarse.max_residual + 1e-12


@pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
def test_scaling_coherence_exact(c):
    members = random_ensemble(6, 1, 2, 1, x0_scale=2.0)
    base = C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd().scaled(-1.0), S1, None, members, CFG)
    sc = C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd().scaled(-c), S1.scaled(c), None, members, CFG)
    assert sc.residuals == [c * r for r in base.residuals]
    assert sc.verdict == base.verdict


def test_prime_rate_reports_ignore_xbar():
    members = random_ensemble(5, 2, 2, 1, x0_scale=2.0)
    with_bar = [EnsembleMember(m.input, m.x0, (9.0, -9.0)) for m in members]
    a = _ex2(size=5)
    b = C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd(), S1, C.StrictnessSpec(gamma_y=1.0),
                            with_bar, CFG)
    c = C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd(), S1, C.StrictnessSpec(gamma_y=1.0),
                            members, CFG)
    assert b.to_json() == c.to_json()
    assert a.verdict == "PASS"


def test_parallel_jobs_do_not_change_reports():
    assert _ex2(jobs=1).to_json() == _ex2(jobs=3).to_json()
    assert _ex2(jobs=1).residuals == _ex2(jobs=3).residuals


def test_divergent_member_fails():
    unstable = SystemDef.lti(LinearRealization([[3.0]], [[1.0]], [[1.0]], [[0.0]]))
    rep = C.check_dissipation(unstable, None, SupplyRate.static_quadratic([[0.0, 0.5], [0.5, 0.0]], 1, 1),
                              C.Quadratic.half_identity(1, 1), None,
                              [EnsembleMember(InputSignal.zero(), (1.0,))], SimConfig(1e-2, 20.0, bound=1e6))
    assert rep.verdict == "FAIL" and rep.diverged == [0]
    assert rep.to_json()["max_residual"] == "inf"


def test_exponential_and_state_strict_terms():
    # S = x^2/2 for x' = -x + u, y = x: dS/dt = -x^2 + u y, so gamma_x = 1 with power 2 is the limit
    sys = SystemDef.lti(LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[0.0]]))
    rate = SupplyRate.static_quadratic([[0.0, 0.5], [0.5, 0.0]], 1, 1)
    members = random_ensemble(8, 4, 1, 1, x0_scale=2.0)
    S = C.Quadratic.half_identity(1, 1)
    ok = C.check_dissipation(sys, None, rate, S, C.StrictnessSpec(gamma_x=0.9), members, CFG)
    bad = C.check_dissipation(sys, None, rate, S, C.StrictnessSpec(gamma_x=1.5), members, CFG)
    expo = C.check_dissipation(sys, None, rate, S, C.StrictnessSpec(lam=1.5), members, CFG)
    assert ok.verdict == "PASS" and bad.verdict == "FAIL" and expo.verdict == "PASS"


def test_dimension_mismatch():
    with pytest.raises(ModelError):
        C.check_dissipation(SystemDef.icd(), PIN_U, SupplyRate.icd(), S2, None, [], CFG)


# bounds

def test_bounds_examples():
    half = C.ClassKBound((0.5, 2.0), (0.5, 2.0), "full")
    assert C.check_storage_bounds([C.Quadratic.half_identity(3, 2)], half).passed
    partial = C.ClassKBound((0.5, 2.0), (50.0, 2.0), "partial")
    S = C.Quadratic(np.diag([0.5, 0.5]), 1)
    rep = C.check_storage_bounds([S], partial, C.Sampler(z_range=(-10.0, 10.0)))
    assert not rep.passed
    assert rep.worst_point[0] == 0.0 and abs(rep.worst_point[1]) == 10.0
    assert C.check_storage_bounds([S1, S2], half, C.Sampler(seed=3)).passed


def test_bounds_detect_loose_lower_bound():
    rep = C.check_storage_bounds([S1], C.ClassKBound((0.6, 2.0), (0.6, 2.0), "full"))
    assert not rep.passed


# monotone V

def test_monotone_v():
    fb = make_feedback(SystemDef.icd(), SystemDef.lure())
    cfg = SimConfig(horizon=40.0)
    assert C.check_monotone_V(fb, PIN_U, PIN_Y, [S1, S2], [(2.0, -1.0, 1.0)], cfg).passed
    zero = C.check_monotone_V(fb, PIN_U, PIN_Y, [S1, S2], [(0.0, 0.0, 0.0)], cfg)
    assert zero.passed and zero.max_increment == 0.0
    neg = C.check_monotone_V(fb, PIN_U, PIN_Y, [S1.scaled(-1.0), S2.scaled(-1.0)], [(2.0, -1.0, 1.0)], cfg)
    assert not neg.passed and neg.max_increment > 1e-6


# coupling

def test_passivity_margin_examples():
    assert C.passivity_margin(Quadruplet.static(np.diag([0.1, 0.2]), 1, 1)) == pytest.approx(0.1, abs=1e-15)
    assert C.passivity_margin(Quadruplet.static([[1.0, -1.0], [-1.0, 1.0]], 1, 1)) == pytest.approx(0.0, abs=1e-15)
    lag = LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[1.0]])
    theta = Quadruplet(lag, np.zeros((1, 0)), np.zeros((0, 1)), np.zeros((0, 0)), 1, 0)
    assert C.passivity_margin(theta) == pytest.approx(1.0, abs=1e-7)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=9, max_size=9))
def test_static_margin_is_min_eigenvalue(entries):
    T = np.reshape(entries, (3, 3))
    expect = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
    assert C.passivity_margin(Quadruplet.static(T, 1, 2)) == expect


def test_small_gain_examples():
    rep = C.small_gain_check(0.5, 1.5)
    assert rep.feasible and rep.delta > 0 and 0.25 < rep.tau < 1 / 2.25
    assert not C.small_gain_check(1.0, 1.0).feasible
    assert not C.small_gain_check(0.9, 1.2).feasible
    with pytest.raises(C.CertificationError):
        C.coupling_quadruplet(Quadruplet.small_gain(0.5), Quadruplet.small_gain(1.0), tau_grid=[])


def test_dynamic_quadruplet_coupling():
    # Theta1 = diag(r1^2 - 0.01 G, -1) with a stable lag G is still small-gain with r2 small
    lag = LinearRealization([[-1.0]], [[1.0]], [[-0.01]], [[0.25]])
    t1 = Quadruplet(lag, 0.0, 0.0, -1.0, 1, 1)
    rep = C.coupling_quadruplet(t1, Quadruplet.small_gain(1.5))
    assert rep.feasible
    bad = LinearRealization([[1.0]], [[1.0]], [[1.0]], [[0.25]])
    with pytest.raises(C.CertificationError):
        C.coupling_quadruplet(Quadruplet(bad, 0.0, 0.0, -1.0, 1, 1), Quadruplet.small_gain(1.5))


def test_passivity_indices_examples():
    rep = C.passivity_indices_check(0.1, 0.3, -0.2, 0.25)
    assert rep.feasible and rep.delta == pytest.approx(0.1, abs=1e-15)
    assert not C.passivity_indices_check(0.1, 0.3, -0.4, 0.25).feasible
    zero = C.passivity_indices_check(0.0, 0.0, 0.0, 0.0)
    assert not zero.feasible and zero.delta == 0.0


def test_affine_examples():
    assert C.coupling_affine(-np.eye(2), np.zeros((2, 2))).feasible
    rep = C.coupling_affine(np.diag([1.0, -1.0]), np.diag([-1.0, 0.0]))
    assert rep.feasible and rep.tau >= 1.0
    assert not C.coupling_affine(np.eye(2), np.eye(2)).feasible


def test_ioni_examples():
    lag = LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[0.0]])
    assert C.ioni_check(lag, 0.0, 0.0).passed
    rep = C.ioni_check(lag, 0.0, 10.0)
    # the quantity is -8 w^2 / (1 + w^2): negative at every w > 0
    assert not rep.passed and rep.min_eig == pytest.approx(-8.0, abs=1e-7)
    assert not C.ioni_check(lag, 0.0, 10.0, omega_grid=[1.0]).passed
    static = LinearRealization.static([[1.0, 2.0], [2.0, -1.0]])
    assert C.ioni_check(static, 0.0, 0.0).min_eig == 0.0
    with pytest.raises(ModelError):
        C.ioni_check(LinearRealization.static([[1.0, 2.0], [0.0, 1.0]]), 0.0, 0.0)


# verdicts

def _bundle(strict=C.StrictnessSpec(gamma_y=1.0)):
    d1 = _ex2(strict=strict, size=5)
    d2 = _sigma2(strict=strict, size=5)
    b = C.check_storage_bounds([S1, S2], C.ClassKBound((0.5, 2.0), (0.5, 2.0), "full"))
    return d1, d2, b


def test_section6_bundle_is_gas():
    d1, d2, b = _bundle()
    v = C.stability_verdict(C.Evidence(d1, d2, b, (True, True), True, C.ConvergenceSummary([1e-12], 1e-3)))
    assert v.verdict == "GAS"
    assert v.theorem_path == "complementary-rates/output-strict-pair/global-bounds"
    assert v.to_json()["evidence_label"] == "numerical"


def test_verdict_ladder():
    d1, d2, b = _bundle(C.StrictnessSpec())
    assert C.stability_verdict(C.Evidence(d1, d2, b, (True, True), True)).verdict == "LyapunovStable"
    d1, d2, b = _bundle()
    assert C.stability_verdict(C.Evidence(d1, d2, b, (False, False), True)).verdict == "LyapunovStable"
    assert C.stability_verdict(C.Evidence(d1, d2, b, (True, True), False)).verdict == "Inconclusive"
    local = C.check_storage_bounds([S1, S2], C.ClassKBound((0.5, 2.0), (0.5, 2.0), "full", 3.0))
    assert C.stability_verdict(C.Evidence(d1, d2, local, (True, True), True)).verdict == "AS"
    stuck = C.ConvergenceSummary([0.5], 1e-3)
    assert C.stability_verdict(C.Evidence(d1, d2, b, (True, True), True, stuck)).verdict == "Inconclusive"


def test_failed_report_is_inconclusive():
    d1, _, b = _bundle()
    bad = C.check_dissipation(SystemDef.lure(), PIN_Y, invert_supply(SupplyRate.icd()), S2,
                              C.StrictnessSpec(gamma_y=50.0),
                              random_ensemble(5, 0, 1, 1, xbar_dim=2, x0_scale=2.0), CFG)
    assert bad.verdict == "FAIL"
    assert C.stability_verdict(C.Evidence(d1, bad, b, (True, True), True)).verdict == "Inconclusive"


def test_mismatched_rates_raise():
    d1, _, b = _bundle()
    with pytest.raises(C.CertificationError):
        C.stability_verdict(C.Evidence(d1, d1, b, (True, True), True))


def test_report_json_has_no_timings():
    d = json.loads(C.dumps_report(_ex2(size=3).to_json()))
    assert set(d) == REPORT_KEYS and d["evidence_label"] == "numerical"
