"""Compare the compiled and pure-Python integration kernels.

Runs the same open-loop ensemble (interconnected plant, filter auxiliary
system, dynamic rate; 10^4 RK4 steps each) on every available backend and
checks that the outputs agree bit for bit.

    python3 benchmarks/bench_kernels.py --members 20
"""

import argparse
import time

import numpy as np

from dissipate.kernel import backends
from dissipate.models import SystemDef
from dissipate.operators import AuxiliarySystem, InitialRule, SupplyRate
from dissipate.sim import SimConfig, random_ensemble


def run(mod, jobs, cfg):
    out = []
    t0 = time.perf_counter()
    for sys, phi, xi, mem in jobs:
        x0 = np.asarray(mem.x0, dtype=float)
        res = mod.integrate_open(sys.encode(), phi.encode(), xi.encode(), mem.input.encode(cfg.horizon), x0,
                                 phi.init.apply(x0), xi.init.apply(x0), cfg.step, cfg.nsteps,
                                 cfg.method_code, cfg.bound)
        out.append(res)
    return time.perf_counter() - t0, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--members", type=int, default=20, help="ensemble size (default: %(default)s)")
    ap.add_argument("--steps", type=int, default=10_000)
    args = ap.parse_args(argv)
    cfg = SimConfig(step=1e-3, horizon=args.steps * 1e-3)
    sys, xi = SystemDef.icd(), SupplyRate.icd()
    phi = AuxiliarySystem.filter("u", init=InitialRule.linear([[0.0, 1.0]]))
    jobs = [(sys, phi, xi, m) for m in random_ensemble(args.members, 0, 2, 1, x0_scale=2.0)]
    results = {}
    for name, mod in backends().items():
        dt, out = run(mod, jobs, cfg)
        results[name] = out
        print(f"{name:>8}: {dt:8.3f} s  ({1e3 * dt / len(jobs):7.2f} ms per trajectory)")
    if len(results) == 2:
        a, b = results["python"], results["cython"]
        same = all(np.array_equal(x, y, equal_nan=True) for ra, rb in zip(a, b) for x, y in zip(ra[:6], rb[:6]))
        print(f"outputs bitwise identical: {same}")


if __name__ == "__main__":
    main()
