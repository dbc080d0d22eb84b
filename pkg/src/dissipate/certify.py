"""Numerical certificates for dissipativity and feedback stability.

Every check here produces sampled evidence, never a proof: dissipation
inequalities are tested along seeded trajectory ensembles and frequency
conditions on finite grids.  Reports say so through ``evidence_label``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Mapping, Sequence

import numpy as np

from .models import DimensionError, FeedbackSystem, LinearRealization, ModelError, StaticMap, SystemDef
from .models import frequency_response_grid
from .operators import AuxiliarySystem, PermutationH, Quadruplet, SupplyRate, invert_supply
from .sim import EnsembleMember, SimConfig, cumtrapz, parallel_map, simulate_closed, simulate_open

EVIDENCE_LABEL = "numerical"
FEASIBILITY_THRESHOLD = 1e-9
BASE_TOLERANCE = 1e-5
TOLERANCE_HORIZON = 10.0


class CertificationError(ValueError):
    """Inconsistent inputs to a certificate check."""


def default_tolerance(horizon: float) -> float:
    """Residual tolerance ``1e-5`` scaled linearly with horizons beyond 10."""
    return BASE_TOLERANCE * max(1.0, horizon / TOLERANCE_HORIZON)


def default_tau_grid() -> np.ndarray:
    return np.logspace(-4, 4, 200)


def default_omega_grid() -> np.ndarray:
    return np.logspace(-4, 4, 400)


# -- storage functions -----------------------------------------------------------

class StorageFn:
    """Storage ``S(x, z)`` evaluated on rows of the stacked vector ``[x, z]``.

    Subclasses implement ``_value`` and ``_grad``; ``scale`` multiplies both.
    """

    variant = ""

    def __init__(self, dim: int, n_x: int, scale: float = 1.0):
        if not 0 <= n_x <= dim:
            raise DimensionError("n_x must lie in [0, dim]")
        self.dim = int(dim)
        self.n_x = int(n_x)
        self.scale = float(scale)

    @property
    def n_z(self) -> int:
        return self.dim - self.n_x

    def _rows(self, v) -> tuple[np.ndarray, bool]:
        a = np.asarray(v, dtype=float)
        single = a.ndim == 1
        a = np.atleast_2d(a)
        if a.shape[1] != self.dim:
            raise DimensionError(f"storage expects {self.dim} columns, got {a.shape[1]}")
        return a, single

    def __call__(self, v):
        a, single = self._rows(v)
        out = self.scale * self._value(a)
        return float(out[0]) if single else out

    def grad(self, v):
        a, single = self._rows(v)
        out = self.scale * self._grad(a)
        return out[0] if single else out

    def scaled(self, c: float) -> "StorageFn":
        import copy
        other = copy.copy(self)
        other.scale = self.scale * float(c)
        return other

    def _value(self, a):  # pragma: no cover - abstract
        raise NotImplementedError

    def _grad(self, a):  # pragma: no cover - abstract
        raise NotImplementedError

    def to_json(self) -> dict:
        return {"variant": self.variant, "dim": self.dim, "n_x": self.n_x, "scale": self.scale, **self._params()}

    def _params(self) -> dict:
        return {}

    @staticmethod
    def from_json(d: Mapping[str, Any]) -> "StorageFn":
        v = d["variant"]
        scale = float(d.get("scale", 1.0))
        if v == "quadratic":
            return Quadratic(d["P"], int(d["n_x"]), scale)
        if v == "diagonal_powers":
            return DiagonalPowers(d["coeffs"], d["exps"], int(d["n_x"]), scale)
        if v == "integral_of_static":
            return IntegralOfStatic(StaticMap.from_json(d["sigma"]), int(d["dim"]), int(d["n_x"]),
                                    d["indices"], scale)
        raise CertificationError(f"unknown storage variant {v!r}")


class Quadratic(StorageFn):
    """``S(v) = v' P v`` with symmetric ``P``."""

    variant = "quadratic"

    def __init__(self, P, n_x: int, scale: float = 1.0):
        P = np.atleast_2d(np.asarray(P, dtype=float))
        if P.shape[0] != P.shape[1] or not np.allclose(P, P.T, rtol=0, atol=1e-14):
            raise CertificationError("P must be square and symmetric")
        super().__init__(P.shape[0], n_x, scale)
        self.P = P

    @classmethod
    def half_identity(cls, dim: int, n_x: int) -> "Quadratic":
        return cls(0.5 * np.eye(dim), n_x)

    def _value(self, a):
        return np.einsum("ij,jk,ik->i", a, self.P, a)

    def _grad(self, a):
        return a @ (self.P + self.P.T)

    def _params(self):
        return {"P": self.P.tolist()}


class DiagonalPowers(StorageFn):
    """``S(v) = sum_i c_i v_i^(e_i)`` with even exponents."""

    variant = "diagonal_powers"

    def __init__(self, coeffs, exps, n_x: int, scale: float = 1.0):
        c = np.asarray(coeffs, dtype=float).ravel()
        e = np.asarray(exps, dtype=int).ravel()
        if c.size != e.size:
            raise CertificationError("coeffs and exps differ in length")
        if np.any(e % 2) or np.any(e <= 0):
            raise CertificationError("exponents must be positive and even")
        super().__init__(c.size, n_x, scale)
        self.coeffs, self.exps = c, e

    def _value(self, a):
        return (self.coeffs * a ** self.exps).sum(axis=1)

    def _grad(self, a):
        return self.coeffs * self.exps * a ** (self.exps - 1)

    def _params(self):
        return {"coeffs": self.coeffs.tolist(), "exps": self.exps.tolist()}


class IntegralOfStatic(StorageFn):
    """``S(v) = sum_{i in indices} int_0^{v_i} sigma(r) dr``."""

    variant = "integral_of_static"

    def __init__(self, sigma: StaticMap, dim: int, n_x: int, indices: Sequence[int], scale: float = 1.0):
        super().__init__(dim, n_x, scale)
        self.sigma = sigma
        self.indices = [int(i) for i in indices]
        if any(not 0 <= i < dim for i in self.indices):
            raise DimensionError("storage index out of range")

    def _value(self, a):
        return self.sigma.integral(a[:, self.indices]).sum(axis=1)

    def _grad(self, a):
        g = np.zeros_like(a)
        g[:, self.indices] = self.sigma(a[:, self.indices])
        return g

    def _params(self):
        return {"sigma": self.sigma.to_json(), "indices": self.indices}


# -- strictness and bounds ---------------------------------------------------------

@dataclass(frozen=True)
class StrictnessSpec:
    """Strictness terms ``gamma_u = cu |u|^2``, ``gamma_y = cy |y|^2``,
    ``gamma_x = cx |x|^px`` and exponential weight ``lam``.

    A zero coefficient disables the term.
    """

    gamma_u: float = 0.0
    gamma_y: float = 0.0
    gamma_x: float = 0.0
    power_x: float = 2.0
    lam: float = 0.0

    def __post_init__(self):
        if min(self.gamma_u, self.gamma_y, self.gamma_x, self.lam) < 0 or self.power_x <= 0:
            raise CertificationError("strictness coefficients must be nonnegative")

    @property
    def input_strict(self) -> bool:
        return self.gamma_u > 0

    @property
    def output_strict(self) -> bool:
        return self.gamma_y > 0

    @property
    def state_strict(self) -> bool:
        return self.gamma_x > 0

    def penalty(self, x, u, y) -> np.ndarray:
        out = np.zeros(u.shape[0])
        if self.gamma_u:
            out += self.gamma_u * np.sum(u * u, axis=1)
        if self.gamma_y:
            out += self.gamma_y * np.sum(y * y, axis=1)
        if self.gamma_x:
            out += self.gamma_x * np.linalg.norm(x, axis=1) ** self.power_x
        return out

    def to_json(self) -> dict:
        return {"gamma_u": self.gamma_u, "gamma_y": self.gamma_y, "gamma_x": self.gamma_x,
                "power_x": self.power_x, "lam": self.lam}

    @classmethod
    def from_json(cls, d: Mapping[str, Any] | None) -> "StrictnessSpec":
        return cls(**(d or {}))


@dataclass(frozen=True)
class ClassKBound:
    """Power bounds ``alpha(r) = ca r^pa <= sum S_i <= cb r^pb = beta(r)``.

    ``mode`` is ``partial`` (norm of ``x`` only, ``z`` free) or ``full``
    (norm of ``(x, z)``); ``radius = inf`` asks for global bounds.
    """

    alpha: tuple = (0.5, 2.0)
    beta: tuple = (0.5, 2.0)
    mode: str = "full"
    radius: float = float("inf")

    def __post_init__(self):
        for c, p in (self.alpha, self.beta):
            if c <= 0 or p < 1:
                raise CertificationError("class-K powers need c > 0 and p >= 1")
        if self.mode not in ("partial", "full"):
            raise CertificationError("mode must be 'partial' or 'full'")

    def a(self, r):
        return self.alpha[0] * np.asarray(r) ** self.alpha[1]

    def b(self, r):
        return self.beta[0] * np.asarray(r) ** self.beta[1]

    @property
    def is_global(self) -> bool:
        return bool(np.isinf(self.radius))

    def to_json(self) -> dict:
        return {"alpha": list(self.alpha), "beta": list(self.beta), "mode": self.mode,
                "radius": None if self.is_global else self.radius}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "ClassKBound":
        r = d.get("radius")
        return cls(tuple(d.get("alpha", (0.5, 2.0))), tuple(d.get("beta", (0.5, 2.0))), d.get("mode", "full"),
                   float("inf") if r is None else float(r))


@dataclass(frozen=True)
class Sampler:
    """Seeded point cloud for bound checks.

    Points fill the ball of the bound's radius (or ``[-box, box]`` when the
    radius is infinite); half of them use log-spaced radii so small norms
    are probed too.  In partial mode ``z`` is uniform on ``z_range``.
    """

    seed: int = 0
    count: int = 4000
    box: float = 10.0
    z_range: tuple = (-10.0, 10.0)


# -- reports -----------------------------------------------------------------------

def _json_float(v):
    if v is None:
        return None
    v = float(v)
    if np.isnan(v):
        return "nan"
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class DissipationReport:
    """Per-trajectory maximum residuals and the ensemble verdict."""

    check: str
    residuals: list
    tolerance: float
    diverged: list = field(default_factory=list)
    strict: StrictnessSpec = field(default_factory=StrictnessSpec)
    rate: SupplyRate | None = None
    theorem_path: str | None = None

    @property
    def max_residual(self) -> float:
        return float(max(self.residuals)) if self.residuals else 0.0

    @property
    def worst_trajectory(self) -> int | None:
        return int(np.argmax(self.residuals)) if self.residuals else None

    @property
    def passed(self) -> bool:
        return all(r <= self.tolerance for r in self.residuals)

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        return {"check": self.check, "verdict": self.verdict, "tolerance": self.tolerance,
                "max_residual": _json_float(self.max_residual), "worst_trajectory": self.worst_trajectory,
                "theorem_path": self.theorem_path, "evidence_label": EVIDENCE_LABEL}


def _residual_trace(tr, storage: StorageFn, strict: StrictnessSpec) -> np.ndarray:
    S = storage(np.hstack([tr.x, tr.z]))
    g = tr.xi - strict.penalty(tr.x, tr.u, tr.y)
    if strict.lam:
        w = np.exp(strict.lam * tr.t)
        return w * S - S[0] - cumtrapz(w * g, tr.h)
    return S - S[0] - cumtrapz(g, tr.h)


def _dissipation_one(member: EnsembleMember, sys, phi, xi, storage, strict, cfg) -> float:
    tr = simulate_open(sys, phi, xi, member.input, member.x0, member.xbar, cfg)
    if not tr.ok:
        return float("inf")
    r = _residual_trace(tr, storage, strict)
    return float(np.max(r))


def check_dissipation(sys: SystemDef, phi: AuxiliarySystem | None, xi: SupplyRate, storage: StorageFn,
                      strict: StrictnessSpec | None, ensemble: Sequence[EnsembleMember],
                      cfg: SimConfig | None = None, tolerance: float | None = None, jobs: int = 1,
                      negate_output: bool = False, check: str = "dissipation") -> DissipationReport:
    """Test the (strict, exponential) dissipation inequality on an ensemble.

    For each trajectory the residual

    ``r(T) = e^{lam T} S(T) - S(0) - int_0^T e^{lam t} [xi - gamma_u - gamma_y - gamma_x] dt``

    is evaluated at every grid time; the report keeps its maximum.  The
    verdict is PASS iff every maximum is at most ``tolerance`` (default
    :func:`default_tolerance` of the horizon).  Diverging trajectories get
    an infinite residual.  ``negate_output`` checks ``-sys`` instead.
    """
    cfg = cfg or SimConfig()
    strict = strict or StrictnessSpec()
    phi = phi or AuxiliarySystem.none()
    if storage.n_x != sys.n or storage.n_z != phi.nz:
        raise DimensionError(f"storage covers ({storage.n_x}, {storage.n_z}), system has ({sys.n}, {phi.nz})")
    if negate_output:
        sys = sys.negated()
    tol = default_tolerance(cfg.horizon) if tolerance is None else float(tolerance)
    fn = partial(_dissipation_one, sys=sys, phi=phi, xi=xi, storage=storage, strict=strict, cfg=cfg)
    res = parallel_map(fn, list(ensemble), jobs)
    diverged = [i for i, r in enumerate(res) if np.isinf(r)]
    return DissipationReport(check, res, tol, diverged, strict, xi)


@dataclass
class BoundsReport:
    passed: bool
    worst_point: list
    worst_violation: float
    mode: str
    is_global: bool

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        return {"check": "storage_bounds", "verdict": self.verdict, "tolerance": 0.0,
                "max_residual": _json_float(self.worst_violation), "worst_trajectory": None,
                "theorem_path": None, "evidence_label": EVIDENCE_LABEL}


def _ball(rng, count: int, dim: int, radius: float) -> np.ndarray:
    if dim == 0:
        return np.zeros((count, 0))
    d = rng.standard_normal((count, dim))
    d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
    half = count // 2
    r = np.empty(count)
    r[:half] = radius * rng.uniform(0, 1, half) ** (1.0 / dim)
    r[half:] = radius * 10.0 ** rng.uniform(-6, 0, count - half)
    return d * r[:, None]


def check_storage_bounds(storages: Sequence[StorageFn], bound: ClassKBound,
                         sampler: Sampler | None = None) -> BoundsReport:
    """Check ``alpha(|.|) <= sum_i S_i <= beta(|.|)`` on a seeded point cloud.

    Each storage acts on its own ``(x_i, z_i)`` slice of the sample; the
    norm is of ``x = (x_1, x_2, ...)`` in partial mode and of ``(x, z)`` in
    full mode.
    """
    sampler = sampler or Sampler()
    rng = np.random.default_rng(sampler.seed)
    nx = sum(s.n_x for s in storages)
    nz = sum(s.n_z for s in storages)
    radius = sampler.box if bound.is_global else bound.radius
    lo, hi = sampler.z_range
    if bound.mode == "full":
        pts = _ball(rng, sampler.count, nx + nz, radius)
        if bound.is_global:
            pts = np.vstack([pts, _ball(rng, 64, nx + nz, 1e3 * radius)])
        X, Z = pts[:, :nx], pts[:, nx:]
    else:
        X = _ball(rng, sampler.count, nx, radius)
        Z = rng.uniform(lo, hi, (sampler.count, nz))
        # corners with x = 0 and extreme z
        corners = np.array([np.full(nz, lo), np.full(nz, hi)])
        X = np.vstack([X, np.zeros((2, nx)), _ball(rng, 2, nx, 1e-3 * radius)])
        Z = np.vstack([Z, corners, corners])
    total = np.zeros(X.shape[0])
    ix = iz = 0
    for s in storages:
        v = np.hstack([X[:, ix:ix + s.n_x], Z[:, iz:iz + s.n_z]])
        total += s(v)
        ix += s.n_x
        iz += s.n_z
    r = np.linalg.norm(X, axis=1) if bound.mode == "partial" else np.linalg.norm(np.hstack([X, Z]), axis=1)
    a, b = bound.a(r), bound.b(r)
    slack = 1e-12 * np.maximum(1.0, np.abs(total))
    viol = np.maximum(a - total, total - b)
    k = int(np.argmax(viol))
    return BoundsReport(bool(np.all(viol <= slack)), np.hstack([X[k], Z[k]]).tolist(), float(viol[k]),
                        bound.mode, bound.is_global)


@dataclass
class MonotoneReport:
    passed: bool
    max_increment: float
    worst_trajectory: int | None
    tolerance: float
    final_norms: list

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        return {"check": "monotone_V", "verdict": self.verdict, "tolerance": self.tolerance,
                "max_residual": _json_float(self.max_increment), "worst_trajectory": self.worst_trajectory,
                "theorem_path": None, "evidence_label": EVIDENCE_LABEL}


def closed_loop_storage(storages: Sequence[StorageFn], parts: Mapping[str, int]):
    """``V = S1(x1, z1) + S2(x2, z2)`` on rows of ``[x1, x2, z1, z2]``."""
    s1, s2 = storages
    n1, n2, nz1 = parts["n1"], parts["n2"], parts["nz1"]

    def V(rows):
        rows = np.atleast_2d(rows)
        x1, x2 = rows[:, :n1], rows[:, n1:n1 + n2]
        z1, z2 = rows[:, n1 + n2:n1 + n2 + nz1], rows[:, n1 + n2 + nz1:]
        return s1(np.hstack([x1, z1])) + s2(np.hstack([x2, z2]))

    return V


def _loop_parts(fb: FeedbackSystem, phi1, phi2) -> dict:
    return {"n1": fb.sigma1.n, "n2": fb.sigma2.n, "nz1": phi1.nz if phi1 else 0,
            "nz2": phi2.nz if phi2 else 0, "m": fb.sigma1.m, "p": fb.sigma1.p}


def check_monotone_V(fb: FeedbackSystem, phi1: AuxiliarySystem | None, phi2: AuxiliarySystem | None,
                     storages: Sequence[StorageFn], x0s: Sequence, cfg: SimConfig | None = None,
                     tolerance: float = 1e-6) -> MonotoneReport:
    """Check that ``V = S1 + S2`` never grows by more than ``tolerance`` per step
    along zero-input closed-loop trajectories."""
    cfg = cfg or SimConfig()
    V = closed_loop_storage(storages, _loop_parts(fb, phi1, phi2))
    worst, worst_i, norms = -np.inf, None, []
    for i, x0 in enumerate(x0s):
        tr = simulate_closed(fb, phi1, phi2, None, None, x0, cfg, storage=V)
        inc = float(np.max(np.diff(tr.S))) if tr.ok and tr.S.size > 1 else (0.0 if tr.ok else np.inf)
        norms.append(float(np.linalg.norm(tr.x[-1])) if tr.ok else float("inf"))
        if worst_i is None or inc > worst:
            worst, worst_i = inc, i
    if worst_i is None:
        worst = 0.0
    return MonotoneReport(bool(worst <= tolerance), float(worst), worst_i, tolerance, norms)


# -- coupling tests ------------------------------------------------------------------

@dataclass
class CouplingReport:
    """Outcome of a coupling test.

    ``delta`` is the passivity margin at ``tau`` (or ``-lambda_max`` for the
    affine test); ``diagnostics`` names the worst frequency or eigenvector.
    """

    check: str
    feasible: bool
    tau: float | None
    delta: float
    diagnostics: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"check": self.check, "verdict": "FEASIBLE" if self.feasible else "INFEASIBLE",
                "tolerance": FEASIBILITY_THRESHOLD, "max_residual": _json_float(self.delta),
                "worst_trajectory": None, "theorem_path": None, "evidence_label": EVIDENCE_LABEL,
                "tau": _json_float(self.tau), "delta": _json_float(self.delta),
                "diagnostics": {k: _json_float(v) if isinstance(v, (int, float)) else v
                                for k, v in self.diagnostics.items()}}


def _frequency_set(omega_grid) -> np.ndarray:
    w = default_omega_grid() if omega_grid is None else np.asarray(omega_grid, dtype=float).ravel()
    return np.concatenate([[0.0], w[(w > 0) & np.isfinite(w)], [np.inf]])


def _theta_samples(theta: Quadruplet, omegas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Theta on the frequency set (a single row for static operators)."""
    real = theta.realization()
    if real.n == 0:
        return real.D[None].astype(complex), np.array([np.inf])
    if not real.is_hurwitz():
        raise CertificationError("frequency-domain passivity test needs Hurwitz dynamic blocks")
    return frequency_response_grid(real, omegas), omegas


def _min_hermitian_eig(G: np.ndarray) -> tuple[float, int]:
    He = 0.5 * (G + np.conj(np.swapaxes(G, -1, -2)))
    lam = np.linalg.eigvalsh(He)[:, 0]
    k = int(np.argmin(lam))
    return float(lam[k]), k


def passivity_margin(theta: Quadruplet, omega_grid=None) -> float:
    """Input-strict passivity margin of ``Theta``.

    Static operators give ``lambda_min((Theta + Theta') / 2)``; dynamic ones
    the minimum over the frequency set (``0``, the grid and infinity) of
    the smallest eigenvalue of the Hermitian part of ``Theta(j omega)``.
    """
    if theta.is_static:
        D = theta.realization().D
        return float(np.linalg.eigvalsh(0.5 * (D + D.T))[0])
    G, w = _theta_samples(theta, _frequency_set(omega_grid))
    return _min_hermitian_eig(G)[0]


def _golden_max(f, a: float, b: float, iters: int = 80) -> tuple[float, float]:
    g = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _search_tau(f, tau_grid) -> tuple[float, float]:
    """Maximize a unimodal ``f(tau)`` on a log grid, then refine by golden section."""
    taus = np.asarray(tau_grid, dtype=float).ravel()
    if taus.size == 0:
        raise CertificationError("empty tau grid")
    if np.any(taus <= 0):
        raise CertificationError("tau grid must be positive")
    taus = np.sort(taus)
    vals = np.array([f(t) for t in taus])
    k = int(np.argmax(vals))
    best_tau, best = float(taus[k]), float(vals[k])
    if taus.size >= 3:
        lo, hi = np.log(taus[max(k - 1, 0)]), np.log(taus[min(k + 1, taus.size - 1)])
        lt, v = _golden_max(lambda s: f(float(np.exp(s))), lo, hi)
        if v > best:
            best_tau, best = float(np.exp(lt)), float(v)
    return best_tau, best


def coupling_quadruplet(theta1: Quadruplet, theta2: Quadruplet, tau_grid=None,
                        omega_grid=None) -> CouplingReport:
    """Search ``tau > 0`` making ``-(Theta1 + tau H' Theta2 H)`` input strictly passive.

    Feasible iff the best margin exceeds ``FEASIBILITY_THRESHOLD``.
    """
    m, p = theta1.m, theta1.p
    if (theta2.m, theta2.p) != (p, m):
        raise DimensionError(f"Theta2 must act on (u2, y2) of widths {(p, m)}")
    omegas = _frequency_set(omega_grid)
    static = theta1.is_static and theta2.is_static
    w = np.array([np.inf]) if static else omegas
    G1, _ = _theta_samples(theta1, w)
    G2, _ = _theta_samples(theta2, w)
    if G1.shape[0] == 1 and w.size > 1:
        G1 = np.broadcast_to(G1, (w.size,) + G1.shape[1:])
    if G2.shape[0] == 1 and w.size > 1:
        G2 = np.broadcast_to(G2, (w.size,) + G2.shape[1:])
    H = PermutationH(m, p).matrix()
    G2h = H.T @ G2 @ H

    def margin(tau: float) -> float:
        return _min_hermitian_eig(-(G1 + tau * G2h))[0]

    tau, delta = _search_tau(margin, default_tau_grid() if tau_grid is None else tau_grid)
    _, k = _min_hermitian_eig(-(G1 + tau * G2h))
    diag = {"worst_omega": float(w[k])}
    return CouplingReport("coupling_quadruplet", bool(delta > FEASIBILITY_THRESHOLD), tau, float(delta), diag)


def small_gain_check(r1: float, r2: float, tau_grid=None) -> CouplingReport:
    """Coupling test for the small-gain pair ``Theta_i = diag(r_i^2, -1)``."""
    rep = coupling_quadruplet(Quadruplet.small_gain(r1), Quadruplet.small_gain(r2), tau_grid)
    rep.check = "small_gain"
    return rep


def passivity_indices_check(delta1: float, eps1: float, delta2: float, eps2: float) -> CouplingReport:
    """Passivity-index test for ``Sigma1 || (-Sigma2)`` with ``tau = 1``.

    The sign of ``-Sigma2`` is absorbed into ``y2``, which flips the cross
    terms of its index quadruplet; the coupling operator is then
    ``diag(delta1 + eps2, delta2 + eps1)``.
    """
    t1 = Quadruplet.indices(delta1, eps1)
    t2 = Quadruplet.indices(delta2, eps2)
    flip = np.diag([1.0, -1.0])
    T2 = flip @ t2.realization().D @ flip
    t2 = Quadruplet.static(T2, 1, 1)
    H = PermutationH(1, 1).matrix()
    theta = -(t1.realization().D + H.T @ T2 @ H)
    delta = _min_hermitian_eig(theta[None].astype(complex))[0]
    return CouplingReport("passivity_indices", bool(delta > FEASIBILITY_THRESHOLD), 1.0, float(delta),
                          {"d1_plus_e2": delta1 + eps2, "d2_plus_e1": delta2 + eps1})


def coupling_affine(P1, P2, tau_grid=None) -> CouplingReport:
    """Search ``tau > 0`` with ``lambda_max(P1 + tau P2) <= 0``.

    Reports ``delta = -lambda_max`` at the best ``tau`` and the top
    eigenvector as a diagnostic.
    """
    P1 = np.atleast_2d(np.asarray(P1, dtype=float))
    P2 = np.atleast_2d(np.asarray(P2, dtype=float))
    if P1.shape != P2.shape or P1.shape[0] != P1.shape[1]:
        raise DimensionError("P1 and P2 must be square with equal shapes")
    P1, P2 = 0.5 * (P1 + P1.T), 0.5 * (P2 + P2.T)

    def neg_lmax(tau: float) -> float:
        return -float(np.linalg.eigvalsh(P1 + tau * P2)[-1])

    tau, val = _search_tau(neg_lmax, default_tau_grid() if tau_grid is None else tau_grid)
    vec = np.linalg.eigh(P1 + tau * P2)[1][:, -1]
    return CouplingReport("coupling_affine", bool(val >= 0.0), tau, float(val), {"eigenvector": vec.tolist()})


# -- frequency-domain checks ----------------------------------------------------------

@dataclass
class FrequencyReport:
    passed: bool
    min_eig: float
    worst_omega: float
    tolerance: float

    @property
    def verdict(self) -> str:
        return "PASS" if self.passed else "FAIL"

    def to_json(self) -> dict:
        return {"check": "ioni", "verdict": self.verdict, "tolerance": self.tolerance,
                "max_residual": _json_float(-self.min_eig), "worst_trajectory": None,
                "theorem_path": None, "evidence_label": EVIDENCE_LABEL,
                "worst_omega": _json_float(self.worst_omega)}


def ioni_check(sigma: LinearRealization, delta: float, eps: float, alpha: int = 1, beta: int = 1,
               omega_grid=None, tol: float = 1e-9) -> FrequencyReport:
    """Frequency-domain negative-imaginary test with output/input strictness.

    Checks that the smallest eigenvalue of

    ``j w [S(jw) - S(jw)^*] - delta w^2 Sb^* Sb - eps w^(2 beta) / (1 + w^(2(alpha+beta-1))) I``

    is at least ``-tol`` on the frequency set, where ``Sb = S - D``.  The
    point at infinity uses the limit ``CB + (CB)' - delta (CB)'CB - eps [alpha = 1]``.
    """
    if not np.allclose(sigma.D, sigma.D.T, rtol=0, atol=1e-12):
        raise ModelError("D must be symmetric")
    if delta < 0 or eps < 0 or alpha < 1 or beta < 1:
        raise CertificationError("need delta, eps >= 0 and alpha, beta >= 1")
    w = _frequency_set(omega_grid)
    fin = w[np.isfinite(w)]
    G = frequency_response_grid(sigma, fin)
    Gb = G - sigma.D
    Gs = np.conj(np.swapaxes(G, -1, -2))
    M = 1j * fin[:, None, None] * (G - Gs)
    M -= delta * (fin ** 2)[:, None, None] * (np.conj(np.swapaxes(Gb, -1, -2)) @ Gb)
    weight = fin ** (2 * beta) / (1.0 + fin ** (2 * (alpha + beta - 1)))
    M -= eps * weight[:, None, None] * np.eye(sigma.m)
    CB = sigma.C @ sigma.B if sigma.n else np.zeros((sigma.p, sigma.m))
    Minf = CB + CB.T - delta * CB.T @ CB - (eps if alpha == 1 else 0.0) * np.eye(sigma.m)
    M = np.concatenate([M, Minf[None].astype(complex)])
    lam, k = _min_hermitian_eig(M)
    return FrequencyReport(bool(lam >= -tol), lam, float(w[k]), tol)


# -- stability verdicts ----------------------------------------------------------------

@dataclass
class ConvergenceSummary:
    """Empirical closed-loop behaviour: final state norms against a target."""

    final_norms: list
    target: float

    @property
    def converged(self) -> bool:
        return all(np.isfinite(v) and v < self.target for v in self.final_norms)


@dataclass
class Evidence:
    """Inputs to :func:`stability_verdict`."""

    diss1: DissipationReport
    diss2: DissipationReport
    bounds: BoundsReport | None = None
    detectable: tuple = (False, False)
    equilibrium: bool = False
    empirical: ConvergenceSummary | None = None


@dataclass
class Verdict:
    verdict: str
    theorem_path: str
    reasons: list
    label: str = "numerical evidence"

    def to_json(self, max_residual: float | None = None) -> dict:
        return {"check": "stability", "verdict": self.verdict, "tolerance": None,
                "max_residual": _json_float(max_residual), "worst_trajectory": None,
                "theorem_path": self.theorem_path, "evidence_label": EVIDENCE_LABEL}


def stability_verdict(ev: Evidence) -> Verdict:
    """Map dissipation, bound and detectability evidence to a stability verdict.

    Picks the strongest conclusion whose hypotheses are all numerically
    supported: a matched strictness pattern gives AS (GAS with global
    bounds), complementary dissipativity alone gives Lyapunov stability, and
    anything unverified gives Inconclusive.

    Raises
    ------
    CertificationError
        If the second report's rate is not the inverse of the first's.
    """
    r1, r2 = ev.diss1.rate, ev.diss2.rate
    if r1 is None or r2 is None or not invert_supply(r1).same_as(r2):
        raise CertificationError("the two reports must use complementary supply rates")
    reasons: list = []
    base = "complementary-rates"
    if not ev.diss1.passed:
        reasons.append("sigma1 dissipation check failed")
    if not ev.diss2.passed:
        reasons.append("sigma2 dissipation check failed")
    if ev.bounds is None:
        reasons.append("storage bounds not checked")
    elif not ev.bounds.passed:
        reasons.append("storage bounds failed")
    elif ev.bounds.mode == "full" and not ev.equilibrium:
        reasons.append("full-state bounds need the joint equilibrium at the origin")
    if reasons:
        return Verdict("Inconclusive", f"{base}/unsupported", reasons)

    s1, s2 = ev.diss1.strict, ev.diss2.strict
    detect = all(ev.detectable)
    pattern = None
    if s1.state_strict and s2.state_strict:
        pattern = "state-strict-pair"
    elif detect:
        if s1.output_strict and s2.output_strict:
            pattern = "output-strict-pair"
        elif s1.input_strict and s2.input_strict:
            pattern = "input-strict-pair"
        elif s1.input_strict and s1.output_strict:
            pattern = "very-strict-sigma1"
        elif s2.input_strict and s2.output_strict:
            pattern = "very-strict-sigma2"
    if pattern is None:
        if any(s.input_strict or s.output_strict for s in (s1, s2)) and not detect:
            reasons.append("strictness present but zero-state detectability not asserted")
        return Verdict("LyapunovStable", f"{base}/lyapunov", reasons)

    verdict = "GAS" if ev.bounds.is_global else "AS"
    if ev.empirical is not None and not ev.empirical.converged:
        reasons.append("closed-loop simulations did not converge")
        return Verdict("Inconclusive", f"{base}/{pattern}/contradicted", reasons)
    scope = "global-bounds" if verdict == "GAS" else "local-bounds"
    return Verdict(verdict, f"{base}/{pattern}/{scope}", reasons)


def dumps_report(d: Mapping[str, Any]) -> str:
    """Canonical JSON text used for every report artifact."""
    return json.dumps(d, sort_keys=True, indent=2) + "\n"
