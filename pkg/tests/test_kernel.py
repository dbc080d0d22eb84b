import os
import subprocess
import sys

import numpy as np
import pytest

from dissipate import kernel
from dissipate.models import LinearRealization, StaticMap, SystemDef, make_feedback
from dissipate.operators import AuxiliarySystem, InitialRule, SupplyRate, invert_supply
from dissipate.sim import InputSignal, SimConfig

BACKENDS = kernel.backends()
needs_both = pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernel not built")

CFG = SimConfig(1e-2, 3.0)


def _open_cases():
    psi = StaticMap.saturation(0.5)
    yield SystemDef.icd(), AuxiliarySystem.filter("u", init=InitialRule.linear([[0.0, 1.0]])), SupplyRate.icd()
    yield SystemDef.lure(), AuxiliarySystem.filter("y"), invert_supply(SupplyRate.icd())
    yield SystemDef.example4(psi), AuxiliarySystem.example4(psi, InitialRule.linear([[1.0]])), SupplyRate.example4(psi)
    yield SystemDef.static(StaticMap.table([-1, 0, 2], [-2, 0, 1])), AuxiliarySystem.filter("u"), SupplyRate.sector(1.0)
    plant = LinearRealization([[-1.0, 2.0], [0.0, -3.0]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.0]])
    phi = LinearRealization([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])
    yield SystemDef.lti(plant), AuxiliarySystem.none(), SupplyRate.ioni(plant, 0.1, 0.2, phi)
    hook = SystemDef.hook(lambda x, u: [-x[0] ** 3 + u[0]], lambda x, u: [x[0]], 1, 1, 1, feedthrough=False)
    yield hook, AuxiliarySystem.hook(lambda z, x, u, y: [-z[0] + y[0]], 1, 1, 1), SupplyRate.static_quadratic(
        [[0.0, 0.5], [0.5, 0.0]], 1, 1)


def _run_open(mod, sys, phi, xi, method):
    x0 = np.linspace(0.5, -0.5, sys.n)
    xbar = np.full(xi.xbar_dim, 0.3)
    u = InputSignal.sinusoid(1.0, 2.0, 0.1)
    return mod.integrate_open(sys.encode(), phi.encode(), xi.encode(), u.encode(CFG.horizon), x0,
                              phi.init.apply(np.full(phi.init.xbar_dim, 0.3)), xi.init.apply(xbar), CFG.step,
                              CFG.nsteps, method, CFG.bound)


@needs_both
@pytest.mark.parametrize("method", [0, 1], ids=["rk4", "euler"])
@pytest.mark.parametrize("case", list(_open_cases()), ids=lambda c: c[0].kind if hasattr(c, "kind") else None)
def test_open_loop_backends_bitwise_equal(case, method):
    a = _run_open(BACKENDS["python"], *case, method)
    b = _run_open(BACKENDS["cython"], *case, method)
    for x, y in zip(a[:6], b[:6]):
        assert np.array_equal(x, y, equal_nan=True)
    assert a[6:] == b[6:]


def _closed_cases():
    yield (make_feedback(SystemDef.icd(), SystemDef.lure()),
           AuxiliarySystem.filter("u", init=InitialRule.linear([[0.0, 1.0]])),
           AuxiliarySystem.filter("y", init=InitialRule.linear([[0.0, 1.0]])), [2.0, -1.0, 1.0])
    g1 = SystemDef.lti(LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[0.5]]))
    g2 = SystemDef.lti(LinearRealization.static([[0.4]]))
    yield make_feedback(g1, g2), AuxiliarySystem.none(), AuxiliarySystem.none(), [0.3]
    yield make_feedback(SystemDef.lure(), SystemDef.icd(), -1.0), AuxiliarySystem.none(), AuxiliarySystem.none(), \
        [0.5, 1.0, -1.0]


@needs_both
@pytest.mark.parametrize("case", list(_closed_cases()), ids=["section6", "iterate", "negative"])
def test_closed_loop_backends_bitwise_equal(case):
    fb, a1, a2, x0 = case
    x0 = np.asarray(x0, dtype=float)
    x10, x20 = x0[:fb.sigma1.n], x0[fb.sigma1.n:]
    w1, w2 = InputSignal.exponential(1.0, 0.5), InputSignal.zero()
    out = []
    for name in ("python", "cython"):
        out.append(BACKENDS[name].integrate_closed(
            fb.sigma1.encode(), fb.sigma2.encode(), a1.encode(), a2.encode(), w1.encode(CFG.horizon),
            w2.encode(CFG.horizon), x10, x20, a1.init.apply(x10 if a1.init.xbar_dim else None),
            a2.init.apply(x10 if a2.init.xbar_dim else None), fb.sign, fb.order_code(), CFG.step, CFG.nsteps, 0,
            CFG.bound))
    for x, y in zip(out[0][:8], out[1][:8]):
        assert np.array_equal(x, y, equal_nan=True)
    assert out[0][8:] == out[1][8:]


@needs_both
def test_divergence_index_agrees():
    sys = SystemDef.lti(LinearRealization([[3.0]], [[1.0]], [[1.0]], [[0.0]]))
    none = AuxiliarySystem.none()
    res = []
    for mod in BACKENDS.values():
        res.append(mod.integrate_open(sys.encode(), none.encode(), (0, 0, np.zeros(0), False, 1.0),
                                      InputSignal.zero().encode(5.0), np.array([1.0]), np.zeros(0), np.zeros(0),
                                      1e-2, 500, 0, 1e3))
    assert res[0][6:] == res[1][6:]
    assert res[0][6] == 1


def test_env_var_forces_python_fallback():
    env = dict(os.environ, DISSIPATE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import dissipate.kernel as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
