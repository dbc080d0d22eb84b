"""Built-in scenario documents and the runner that reproduces them.

A scenario is a JSON document composed of the serialized forms used by the
other modules: systems, auxiliary systems, supply rates, storages,
strictness specs, ensemble specs and simulation configs.  Each check
carries the verdict it is expected to produce; :func:`run_scenario` writes
every artifact and reports whether all expectations were met.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import certify as C
from .models import LinearRealization, SystemDef, StaticMap, frequency_response_grid, make_feedback
from .operators import AuxiliarySystem, InitialRule, SupplyRate, invert_supply
from .sim import EnsembleMember, InputSignal, SimConfig, atomic_write, random_ensemble, simulate_closed, simulate_open
from .svg import trajectory_plot


class ScenarioError(ValueError):
    """Unknown scenario or malformed scenario document."""


SECTION6_INITIAL_CONDITIONS = ((2.0, -1.0, 1.0), (-3.0, 2.0, -2.0), (5.0, -4.0, 3.0))


def _j(obj) -> Any:
    return obj.to_json()


def _ens(size=100, seed=0, x0_scale=2.0, xbar_scale=2.0, amplitude=1.0) -> dict:
    return {"size": size, "seed": seed, "x0_scale": x0_scale, "xbar_scale": xbar_scale, "amplitude": amplitude}


def _pinned_filter(channel: str) -> AuxiliarySystem:
    return AuxiliarySystem.filter(channel, init=InitialRule.linear([[0.0, 1.0]]))


def _ioni_phi_identity() -> dict:
    return {
        "id": "ioni_phi_identity",
        "description": "Auxiliary filter s/(s+1): |Phi(jw)|^2 = w^2/(1+w^2); negative-imaginary test of 1/(s+1)",
        "checks": [
            {"name": "phi_identity", "type": "phi_identity",
             "phi": _j(LinearRealization([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])),
             "tolerance": 1e-10, "expected": "PASS"},
            {"name": "ioni_nominal", "type": "ioni",
             "sigma": _j(LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[0.0]])),
             "delta": 0.0, "eps": 0.0, "alpha": 1, "beta": 1, "expected": "PASS"},
            {"name": "ioni_eps10", "type": "ioni",
             "sigma": _j(LinearRealization([[-1.0]], [[1.0]], [[1.0]], [[0.0]])),
             "delta": 0.0, "eps": 10.0, "alpha": 1, "beta": 1, "expected": "FAIL"},
        ],
    }


def _example2() -> dict:
    base = {"type": "dissipation", "system": _j(SystemDef.icd()), "aux": _j(_pinned_filter("u")),
            "rate": _j(SupplyRate.icd()), "storage": _j(C.Quadratic.half_identity(3, 2))}
    return {
        "id": "example2_icd",
        "description": "Interconnected plant with cubic damping, prime dynamic rate, output strictness",
        "config": _j(SimConfig(horizon=10.0)),
        "checks": [
            {**base, "name": "output_strict", "strict": _j(C.StrictnessSpec(gamma_y=1.0)),
             "ensemble": _ens(), "expected": "PASS"},
            {**base, "name": "negative_control", "rate": _j(SupplyRate.icd().scaled(-1.0)),
             "strict": _j(C.StrictnessSpec()),
             "members": [_j(EnsembleMember(InputSignal.constant(1.0), (1.0, 0.0)))], "expected": "FAIL"},
        ],
        "simulate": {"system": _j(SystemDef.icd()), "aux": _j(_pinned_filter("u")), "rate": _j(SupplyRate.icd()),
                     "storage": _j(C.Quadratic.half_identity(3, 2)),
                     "members": [_j(EnsembleMember(InputSignal.constant(1.0), (1.0, 0.0)))]},
    }


def _example3(b: float = 1.0, c: float = 1.0) -> dict:
    sat = StaticMap.saturation(c)
    sys = SystemDef.static(sat)
    aux = AuxiliarySystem.filter("u", init=InitialRule.linear([[1.0]]))
    rate = SupplyRate.sector(b)
    st = C.IntegralOfStatic(sat, 1, 0, [0])
    return {
        "id": "example3_sector",
        "description": f"Static saturation (level {c:g}) in the sector [0, {b:g}], storage = integral of sigma",
        "config": _j(SimConfig(horizon=10.0)),
        "checks": [{"name": "sector", "type": "dissipation", "system": _j(sys), "aux": _j(aux), "rate": _j(rate),
                    "storage": _j(st), "strict": _j(C.StrictnessSpec()),
                    "ensemble": _ens(amplitude=3.0), "expected": "PASS"}],
        "simulate": {"system": _j(sys), "aux": _j(aux), "rate": _j(rate), "storage": _j(st),
                     "members": [_j(EnsembleMember(InputSignal.constant(2.0), (), (0.5,)))]},
    }


def _example4() -> dict:
    psi = StaticMap.saturation(0.5)
    sys = SystemDef.example4(psi)
    aux = AuxiliarySystem.example4(psi, InitialRule.linear([[1.0]]))
    rate = SupplyRate.example4(psi)
    st = C.DiagonalPowers([0.25, 0.5, 0.5], [4, 2, 2], 2)
    return {
        "id": "example4_dynamic",
        "description": "Second-order plant with quartic storage and a nonlinear dynamic supply rate",
        "config": _j(SimConfig(horizon=10.0)),
        "checks": [{"name": "dynamic_rate", "type": "dissipation", "system": _j(sys), "aux": _j(aux),
                    "rate": _j(rate), "storage": _j(st), "strict": _j(C.StrictnessSpec()),
                    "ensemble": _ens(x0_scale=1.0, xbar_scale=1.0), "expected": "PASS"}],
        "simulate": {"system": _j(sys), "aux": _j(aux), "rate": _j(rate), "storage": _j(st),
                     "members": [_j(EnsembleMember(InputSignal.constant(0.5), (1.0, 0.0), (0.2,)))]},
    }


def _section6() -> dict:
    s1, s2 = SystemDef.icd(), SystemDef.lure()
    a1, a2 = _pinned_filter("u"), _pinned_filter("y")
    rate = SupplyRate.icd()
    st1, st2 = C.Quadratic.half_identity(3, 2), C.Quadratic.half_identity(2, 1)
    strict = _j(C.StrictnessSpec(gamma_y=1.0))
    return {
        "id": "section6_feedback",
        "description": "Feedback loop of the interconnected plant and a saturated Lur'e system; expected GAS",
        "config": _j(SimConfig(horizon=10.0)),
        "loop_config": _j(SimConfig(horizon=40.0)),
        "checks": [
            {"name": "sigma1_dissipation", "type": "dissipation", "system": _j(s1), "aux": _j(a1), "rate": _j(rate),
             "storage": _j(st1), "strict": strict, "ensemble": _ens(), "expected": "PASS"},
            {"name": "sigma2_dissipation", "type": "dissipation", "system": _j(s2), "aux": _j(a2),
             "rate": _j(invert_supply(rate)), "storage": _j(st2), "strict": strict,
             "ensemble": _ens(xbar_scale=2.0), "xbar_dim": 2, "expected": "PASS"},
            {"name": "storage_bounds", "type": "storage_bounds", "storages": [_j(st1), _j(st2)],
             "bound": _j(C.ClassKBound((0.5, 2.0), (0.5, 2.0), "full")), "seed": 0, "expected": "PASS"},
            {"name": "monotone_V", "type": "monotone_V", "tolerance": 1e-6, "expected": "PASS"},
            {"name": "stability", "type": "stability", "uses": ["sigma1_dissipation", "sigma2_dissipation",
                                                                "storage_bounds"],
             "detectable": [True, True], "equilibrium": True, "convergence_target": 1e-3, "expected": "GAS"},
        ],
        "feedback": {"sigma1": _j(s1), "sigma2": _j(s2), "sign": 1.0, "aux1": _j(a1), "aux2": _j(a2),
                     "storages": [_j(st1), _j(st2)],
                     "initial_conditions": [list(x) for x in SECTION6_INITIAL_CONDITIONS]},
    }


def _small_gain() -> dict:
    return {
        "id": "coupling_small_gain",
        "description": "Small-gain coupling test for gains (0.5, 1.5) and the boundary pair (1, 1)",
        "checks": [
            {"name": "feasible_pair", "type": "small_gain", "r1": 0.5, "r2": 1.5, "expected": "FEASIBLE"},
            {"name": "boundary_pair", "type": "small_gain", "r1": 1.0, "r2": 1.0, "expected": "INFEASIBLE"},
            {"name": "large_product", "type": "small_gain", "r1": 0.9, "r2": 1.2, "expected": "INFEASIBLE"},
        ],
    }


def _indices() -> dict:
    return {
        "id": "coupling_passivity_indices",
        "description": "Passivity-index coupling test with negative feedback sign absorption",
        "checks": [
            {"name": "feasible", "type": "passivity_indices", "indices": [0.1, 0.3, -0.2, 0.25],
             "expected": "FEASIBLE"},
            {"name": "infeasible", "type": "passivity_indices", "indices": [0.1, 0.3, -0.4, 0.25],
             "expected": "INFEASIBLE"},
            {"name": "lossless", "type": "passivity_indices", "indices": [0.0, 0.0, 0.0, 0.0],
             "expected": "INFEASIBLE"},
        ],
    }


def _affine() -> dict:
    return {
        "id": "coupling_affine",
        "description": "Affine coupling condition P1 + tau P2 <= 0",
        "checks": [
            {"name": "feasible", "type": "coupling_affine", "P1": [[1.0, 0.0], [0.0, -1.0]],
             "P2": [[-1.0, 0.0], [0.0, 0.0]], "expected": "FEASIBLE"},
            {"name": "infeasible", "type": "coupling_affine", "P1": [[1.0, 0.0], [0.0, 1.0]],
             "P2": [[1.0, 0.0], [0.0, 1.0]], "expected": "INFEASIBLE"},
        ],
    }


_BUILDERS = (_ioni_phi_identity, _example2, _example3, _example4, _section6, _small_gain, _indices, _affine)


def catalog() -> dict:
    """All built-in scenario documents keyed by id, in listing order."""
    docs = [b() for b in _BUILDERS]
    return {d["id"]: d for d in docs}


def list_scenarios() -> list[tuple[str, str]]:
    """``(id, description)`` pairs in a stable order."""
    return [(k, d["description"]) for k, d in catalog().items()]


def load_scenario(source) -> dict:
    """Return a scenario document from an id, a JSON file path or a mapping."""
    if isinstance(source, Mapping):
        doc = copy.deepcopy(dict(source))
    else:
        cat = catalog()
        if source in cat:
            doc = cat[source]
        elif os.path.isfile(os.fspath(source)):
            try:
                with open(source, encoding="utf-8") as f:
                    doc = json.load(f)
            except (OSError, json.JSONDecodeError) as exc:
                raise ScenarioError(f"cannot read scenario file {source}: {exc}") from exc
        else:
            raise ScenarioError(f"unknown scenario {source!r}")
    if "id" not in doc or "checks" not in doc:
        raise ScenarioError("scenario documents need 'id' and 'checks'")
    return doc


def apply_overrides(doc: dict, overrides: Mapping[str, Any] | None) -> dict:
    """Copy of ``doc`` with ``step``, ``horizon``, ``seed``, ``tolerance`` or
    ``size`` overrides applied to every config, ensemble and check."""
    doc = copy.deepcopy(doc)
    ov = {k: v for k, v in (overrides or {}).items() if v is not None}
    for key in ("config", "loop_config"):
        if key in doc:
            if "step" in ov:
                doc[key]["step"] = float(ov["step"])
            if "horizon" in ov:
                doc[key]["horizon"] = float(ov["horizon"])
    for chk in doc["checks"]:
        if "ensemble" in chk:
            if "seed" in ov:
                chk["ensemble"]["seed"] = int(ov["seed"])
            if "size" in ov:
                chk["ensemble"]["size"] = int(ov["size"])
        if "seed" in ov and chk.get("type") == "storage_bounds":
            chk["seed"] = int(ov["seed"])
        if "tolerance" in ov and chk.get("type") == "dissipation":
            chk["tolerance"] = float(ov["tolerance"])
    return doc


# -- running ---------------------------------------------------------------------

@dataclass
class CheckOutcome:
    name: str
    expected: str | None
    verdict: str
    report: dict

    @property
    def matched(self) -> bool:
        return self.expected is None or self.expected == self.verdict


@dataclass
class ScenarioResult:
    id: str
    outcomes: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    @property
    def matched(self) -> bool:
        return all(o.matched for o in self.outcomes)

    def summary(self) -> dict:
        return {"scenario": self.id, "matched": self.matched,
                "checks": [{"name": o.name, "expected": o.expected, "verdict": o.verdict, "matched": o.matched}
                           for o in self.outcomes]}


def _members(chk: Mapping[str, Any], sys: SystemDef, phi: AuxiliarySystem, rate: SupplyRate) -> list:
    if "members" in chk:
        return [EnsembleMember.from_json(m) for m in chk["members"]]
    e = chk["ensemble"]
    xbar_dim = chk.get("xbar_dim")
    if xbar_dim is None:
        xbar_dim = 0 if rate.prime else max(rate.xbar_dim, phi.init.xbar_dim)
        if xbar_dim == sys.n:
            xbar_dim = 0  # defaults to x0
    return random_ensemble(int(e.get("size", 100)), int(e.get("seed", 0)), sys.n, sys.m, int(xbar_dim),
                           float(e.get("x0_scale", 1.0)), float(e.get("xbar_scale", 1.0)),
                           float(e.get("amplitude", 1.0)))


def _dissipation(chk, cfg, jobs) -> C.DissipationReport:
    sys = SystemDef.from_json(chk["system"])
    phi = AuxiliarySystem.from_json(chk.get("aux"))
    rate = SupplyRate.from_json(chk["rate"])
    storage = C.StorageFn.from_json(chk["storage"])
    strict = C.StrictnessSpec.from_json(chk.get("strict"))
    members = _members(chk, sys, phi, rate)
    return C.check_dissipation(sys, phi, rate, storage, strict, members, cfg, chk.get("tolerance"), jobs,
                               bool(chk.get("negate_output", False)), check=chk["name"])


def _loop(doc):
    fbd = doc["feedback"]
    fb = make_feedback(SystemDef.from_json(fbd["sigma1"]), SystemDef.from_json(fbd["sigma2"]),
                       float(fbd.get("sign", 1.0)))
    a1 = AuxiliarySystem.from_json(fbd.get("aux1"))
    a2 = AuxiliarySystem.from_json(fbd.get("aux2"))
    storages = [C.StorageFn.from_json(s) for s in fbd.get("storages", [])]
    return fb, a1, a2, storages, [tuple(x) for x in fbd["initial_conditions"]]


def _closed_trajectories(doc) -> dict:
    fb, a1, a2, storages, x0s = _loop(doc)
    cfg = SimConfig.from_json(doc.get("loop_config", doc.get("config", {})))
    V = C.closed_loop_storage(storages, {"n1": fb.sigma1.n, "n2": fb.sigma2.n, "nz1": a1.nz}) if storages else None
    return {f"ic{i + 1}": simulate_closed(fb, a1, a2, None, None, x0, cfg, storage=V) for i, x0 in enumerate(x0s)}


def _open_trajectories(doc) -> dict:
    sd = doc["simulate"]
    sys = SystemDef.from_json(sd["system"])
    phi = AuxiliarySystem.from_json(sd.get("aux"))
    rate = SupplyRate.from_json(sd["rate"]) if sd.get("rate") else None
    storage = C.StorageFn.from_json(sd["storage"]) if sd.get("storage") else None
    cfg = SimConfig.from_json(doc.get("config", {}))
    out = {}
    for i, m in enumerate(sd["members"]):
        mem = EnsembleMember.from_json(m)
        out[f"run{i + 1}"] = simulate_open(sys, phi, rate, mem.input, mem.x0, mem.xbar, cfg, storage)
    return out


def simulate_scenario(doc) -> dict:
    """Trajectories a scenario defines, keyed by name (empty for pure coupling scenarios)."""
    if "feedback" in doc:
        return _closed_trajectories(doc)
    if "simulate" in doc:
        return _open_trajectories(doc)
    return {}


def _coupling_verdict(rep: C.CouplingReport) -> str:
    return "FEASIBLE" if rep.feasible else "INFEASIBLE"


def _run_check(chk, doc, done: dict, traj: dict, jobs: int) -> tuple[str, dict, Any]:
    t = chk["type"]
    cfg = SimConfig.from_json(doc.get("config", {}))
    if t == "dissipation":
        rep = _dissipation(chk, cfg, jobs)
        return rep.verdict, rep.to_json(), rep
    if t == "storage_bounds":
        storages = [C.StorageFn.from_json(s) for s in chk["storages"]]
        rep = C.check_storage_bounds(storages, C.ClassKBound.from_json(chk["bound"]),
                                     C.Sampler(seed=int(chk.get("seed", 0))))
        return rep.verdict, rep.to_json(), rep
    if t == "monotone_V":
        fb, a1, a2, storages, x0s = _loop(doc)
        rep = C.check_monotone_V(fb, a1, a2, storages, x0s, SimConfig.from_json(doc["loop_config"]),
                                 float(chk.get("tolerance", 1e-6)))
        return rep.verdict, rep.to_json(), rep
    if t == "stability":
        d1, d2, bounds = (done[n] for n in chk["uses"])
        norms = [float(np.linalg.norm(tr.x[-1])) if tr.ok else float("inf") for tr in traj.values()]
        ev = C.Evidence(d1, d2, bounds, tuple(chk.get("detectable", (False, False))),
                        bool(chk.get("equilibrium", False)),
                        C.ConvergenceSummary(norms, float(chk.get("convergence_target", 1e-3))) if norms else None)
        v = C.stability_verdict(ev)
        return v.verdict, v.to_json(max(d1.max_residual, d2.max_residual)), v
    if t == "small_gain":
        rep = C.small_gain_check(float(chk["r1"]), float(chk["r2"]))
        return _coupling_verdict(rep), rep.to_json(), rep
    if t == "passivity_indices":
        rep = C.passivity_indices_check(*(float(v) for v in chk["indices"]))
        return _coupling_verdict(rep), rep.to_json(), rep
    if t == "coupling_affine":
        rep = C.coupling_affine(chk["P1"], chk["P2"])
        return _coupling_verdict(rep), rep.to_json(), rep
    if t == "ioni":
        rep = C.ioni_check(LinearRealization.from_json(chk["sigma"]), float(chk["delta"]), float(chk["eps"]),
                           int(chk.get("alpha", 1)), int(chk.get("beta", 1)))
        return rep.verdict, rep.to_json(), rep
    if t == "phi_identity":
        phi = LinearRealization.from_json(chk["phi"])
        w = C.default_omega_grid()
        G = frequency_response_grid(phi, w)[:, 0, 0]
        err = float(np.max(np.abs(np.abs(G) ** 2 - w ** 2 / (1.0 + w ** 2))))
        tol = float(chk.get("tolerance", 1e-10))
        verdict = "PASS" if err <= tol else "FAIL"
        rep = {"check": chk["name"], "verdict": verdict, "tolerance": tol, "max_residual": err,
               "worst_trajectory": None, "theorem_path": None, "evidence_label": C.EVIDENCE_LABEL}
        return verdict, rep, rep
    raise ScenarioError(f"unknown check type {t!r}")


def run_scenario(source, out_dir=None, jobs: int = 1, overrides: Mapping[str, Any] | None = None,
                 simulate: bool = True, certify: bool = True, plot: bool = False) -> ScenarioResult:
    """Run a scenario and write its artifacts under ``out_dir/<id>/``.

    Parameters
    ----------
    source : str or mapping
        Scenario id, path to a JSON document, or the document itself.
    out_dir : path, optional
        When ``None`` nothing is written.
    jobs : int
        Worker processes for ensemble checks; results do not depend on it.
    overrides : mapping, optional
        See :func:`apply_overrides`.
    simulate, certify : bool
        Produce trajectories and/or run the checks.
    plot : bool
        Also write an SVG of the state trajectories.

    Returns
    -------
    ScenarioResult
    """
    doc = apply_overrides(load_scenario(source), overrides)
    res = ScenarioResult(doc["id"])
    needs_traj = simulate or (certify and any(c["type"] == "stability" for c in doc["checks"]))
    traj = simulate_scenario(doc) if needs_traj else {}
    if simulate:
        res.trajectories = traj
    done: dict = {}
    if certify:
        for chk in doc["checks"]:
            verdict, rep, obj = _run_check(chk, doc, done, traj, jobs)
            done[chk["name"]] = obj
            res.outcomes.append(CheckOutcome(chk["name"], chk.get("expected"), verdict, rep))
    if out_dir is not None:
        base = os.path.join(os.fspath(out_dir), doc["id"])
        for name, tr in res.trajectories.items():
            path = os.path.join(base, f"trajectory_{name}.csv")
            tr.to_csv(path)
            res.artifacts.append(path)
        if plot and res.trajectories:
            path = os.path.join(base, "states.svg")
            atomic_write(path, trajectory_plot(res.trajectories, "x", f"{doc['id']}: states"))
            res.artifacts.append(path)
        for o in res.outcomes:
            path = os.path.join(base, f"report_{o.name}.json")
            atomic_write(path, C.dumps_report(o.report))
            res.artifacts.append(path)
        if certify:
            path = os.path.join(base, "summary.json")
            atomic_write(path, C.dumps_report(res.summary()))
            res.artifacts.append(path)
    return res
