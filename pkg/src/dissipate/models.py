"""Plants, static nonlinearities, LTI realizations and feedback loops.

Every catalog object is immutable and round-trips through JSON.  Systems
built from Python callables (``SystemDef.hook``) work everywhere in the
library but cannot be serialized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import _codes as K
from . import _kernel_py as _kp


class ModelError(ValueError):
    """Invalid model definition or evaluation failure."""


class DimensionError(ModelError):
    """Vector or matrix dimensions do not match the declared model."""


class AlgebraicLoopError(ModelError):
    """A feedback loop has an unresolvable algebraic loop."""


def _matrix(a, rows: int | None = None, cols: int | None = None, name: str = "matrix") -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if rows in (None, 1) else arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional")
    if arr.size == 0:
        arr = arr.reshape(rows if rows is not None else arr.shape[0],
                          cols if cols is not None else arr.shape[1])
    if rows is not None and arr.shape[0] != rows:
        raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {rows}")
    if cols is not None and arr.shape[1] != cols:
        raise DimensionError(f"{name} has {arr.shape[1]} columns, expected {cols}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    arr.setflags(write=False)
    return arr


def _vector(v, n: int, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=float).ravel()
    if arr.shape[0] != n:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr


# -- LTI realizations ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearRealization:
    """State-space realization ``(A, B, C, D)``.

    A realization with ``n = 0`` is a static gain ``D``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        D = _matrix(self.D, name="D")
        p, m = D.shape
        A = np.array(self.A, dtype=float)
        n = 0 if A.size == 0 else int(np.atleast_2d(A).shape[0])
        object.__setattr__(self, "A", _matrix(self.A, n, n, "A") if n else np.zeros((0, 0)))
        object.__setattr__(self, "B", _matrix(self.B, n, m, "B") if n else np.zeros((0, m)))
        object.__setattr__(self, "C", _matrix(self.C, p, n, "C") if n else np.zeros((p, 0)))
        object.__setattr__(self, "D", D)

    @classmethod
    def static(cls, D) -> "LinearRealization":
        D = _matrix(D, name="D")
        p, m = D.shape
        return cls(np.zeros((0, 0)), np.zeros((0, m)), np.zeros((p, 0)), D)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[1]

    @property
    def p(self) -> int:
        return self.D.shape[0]

    def is_hurwitz(self) -> bool:
        return self.n == 0 or bool(np.max(np.linalg.eigvals(self.A).real) < 0)

    def transform(self, left=None, right=None, scale: float = 1.0) -> "LinearRealization":
        """Return the realization of ``scale * left @ G @ right``."""
        L = np.eye(self.p) if left is None else np.asarray(left, dtype=float)
        R = np.eye(self.m) if right is None else np.asarray(right, dtype=float)
        return LinearRealization(self.A, self.B @ R, scale * (L @ self.C), scale * (L @ self.D @ R))

    def __eq__(self, other):
        if not isinstance(other, LinearRealization):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in
                   zip((self.A, self.B, self.C, self.D), (other.A, other.B, other.C, other.D)))

    def __hash__(self):
        return hash(tuple(np.asarray(v).tobytes() for v in (self.A, self.B, self.C, self.D)))

    def to_json(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B.tolist(), "C": self.C.tolist(), "D": self.D.tolist()}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "LinearRealization":
        if int(np.size(d.get("A", []))) == 0:
            return cls.static(d["D"])
        return cls(d["A"], d["B"], d["C"], d["D"])


def frequency_response(sys: LinearRealization, omega: float) -> np.ndarray:
    """Evaluate ``C (j omega I - A)^{-1} B + D``.

    ``omega = inf`` returns the high-frequency limit ``D``.

    Raises
    ------
    ModelError
        If ``j omega`` is (numerically) an eigenvalue of ``A``.
    """
    D = sys.D.astype(complex)
    if sys.n == 0 or np.isinf(omega):
        return D
    M = 1j * omega * np.eye(sys.n) - sys.A
    if np.linalg.cond(M) > 1e13:
        raise ModelError(f"singular resolvent at omega={omega}")
    return sys.C @ np.linalg.solve(M, sys.B.astype(complex)) + D


def frequency_response_grid(sys: LinearRealization, omegas) -> np.ndarray:
    """Vectorized :func:`frequency_response` over an array of frequencies."""
    omegas = np.asarray(omegas, dtype=float)
    out = np.empty((omegas.size, sys.p, sys.m), dtype=complex)
    out[:] = sys.D
    if sys.n == 0:
        return out
    finite = np.isfinite(omegas)
    w = omegas[finite]
    M = 1j * w[:, None, None] * np.eye(sys.n) - sys.A
    if np.any(np.linalg.cond(M) > 1e13):
        bad = w[np.argmax(np.linalg.cond(M))]
        raise ModelError(f"singular resolvent at omega={bad}")
    sol = np.linalg.solve(M, np.broadcast_to(sys.B.astype(complex), (w.size,) + sys.B.shape))
    out[finite] = sys.C @ sol + sys.D
    return out


# -- static maps ---------------------------------------------------------------

_SMAP_KINDS = {"saturation": K.SMAP_SAT, "tanh": K.SMAP_TANH, "linear": K.SMAP_LINEAR, "table": K.SMAP_TABLE}


@dataclass(frozen=True)
class StaticMap:
    """Scalar memoryless nonlinearity.

    Kinds: ``saturation`` (limit ``c``), ``tanh`` (``b * tanh(r)``),
    ``linear`` (``b * r``) and ``table`` (piecewise-linear through
    ``xs``/``ys``, clamped outside the breakpoints).
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in _SMAP_KINDS:
            raise ModelError(f"unknown static map kind {self.kind!r}")
        params = tuple(float(v) for v in np.asarray(self.params, dtype=float).ravel())
        object.__setattr__(self, "params", params)
        if self.kind in ("saturation", "tanh") and (len(params) != 1 or params[0] <= 0):
            raise ModelError(f"{self.kind} needs one positive parameter")
        if self.kind == "linear" and len(params) != 1:
            raise ModelError("linear map needs one parameter")
        if self.kind == "table":
            k = len(params) // 2
            if len(params) % 2 or k < 2:
                raise ModelError("table needs at least two (x, y) breakpoints")
            xs = np.array(params[:k])
            if np.any(np.diff(xs) <= 0):
                raise ModelError("table breakpoints must be strictly increasing")
        if not all(np.isfinite(params)):
            raise ModelError("static map parameters must be finite")

    @classmethod
    def saturation(cls, c: float) -> "StaticMap":
        return cls("saturation", (c,))

    @classmethod
    def tanh(cls, b: float = 1.0) -> "StaticMap":
        return cls("tanh", (b,))

    @classmethod
    def linear(cls, b: float) -> "StaticMap":
        return cls("linear", (b,))

    @classmethod
    def table(cls, xs: Sequence[float], ys: Sequence[float]) -> "StaticMap":
        if len(xs) != len(ys):
            raise ModelError("table xs and ys differ in length")
        return cls("table", tuple(xs) + tuple(ys))

    def encode(self) -> list:
        if self.kind == "table":
            k = len(self.params) // 2
            return [float(K.SMAP_TABLE), float(k), *self.params]
        return [float(_SMAP_KINDS[self.kind]), *self.params]

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "saturation":
            c = self.params[0]
            return np.minimum(np.maximum(r, -c), c)
        if self.kind == "tanh":
            return self.params[0] * np.tanh(r)
        if self.kind == "linear":
            return self.params[0] * r
        k = len(self.params) // 2
        return np.interp(r, self.params[:k], self.params[k:])

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "saturation":
            return (np.abs(r) < self.params[0]).astype(float)
        if self.kind == "tanh":
            return self.params[0] / np.cosh(r) ** 2
        if self.kind == "linear":
            return np.full_like(r, self.params[0])
        k = len(self.params) // 2
        xs, ys = np.array(self.params[:k]), np.array(self.params[k:])
        slopes = np.concatenate([[0.0], np.diff(ys) / np.diff(xs), [0.0]])
        return slopes[np.searchsorted(xs, r, side="right")]

    def integral(self, r):
        """Closed-form antiderivative ``int_0^r sigma(s) ds``."""
        r = np.asarray(r, dtype=float)
        if self.kind == "saturation":
            c = self.params[0]
            a = np.abs(r)
            return np.where(a <= c, 0.5 * r * r, c * a - 0.5 * c * c)
        if self.kind == "tanh":
            a = np.abs(r)
            # log cosh without overflow
            return self.params[0] * (a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0))
        if self.kind == "linear":
            return 0.5 * self.params[0] * r * r
        return self._table_integral(r)

    def _table_integral(self, r):
        k = len(self.params) // 2
        xs, ys = np.array(self.params[:k]), np.array(self.params[k:])
        # extend with the clamped constant segments, then integrate exactly
        knots = np.concatenate([[min(xs[0], 0.0) - 1.0], xs, [max(xs[-1], 0.0) + 1.0]])
        vals = np.concatenate([[ys[0]], ys, [ys[-1]]])
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * np.diff(knots))])

        def F(t):
            t = np.asarray(t, dtype=float)
            lo = np.clip(t, knots[0], knots[-1])
            i = np.clip(np.searchsorted(knots, lo, side="right") - 1, 0, len(knots) - 2)
            seg = lo - knots[i]
            v0 = vals[i]
            slope = (vals[i + 1] - vals[i]) / (knots[i + 1] - knots[i])
            base = cum[i] + v0 * seg + 0.5 * slope * seg * seg
            base = base + np.where(t > knots[-1], vals[-1] * (t - knots[-1]), 0.0)
            base = base + np.where(t < knots[0], vals[0] * (t - knots[0]), 0.0)
            return base

        return F(r) - F(0.0)

    def sector_ok(self, b: float, grid) -> bool:
        """Check ``sigma(r) (b r - sigma(r)) >= 0`` on ``grid``."""
        r = np.asarray(grid, dtype=float)
        s = self(r)
        return bool(np.all(s * (b * r - s) >= -1e-12))

    def monotone_ok(self, grid) -> bool:
        """Check ``(sigma(r) - sigma(q)) (r - q) >= 0`` for all grid pairs."""
        r = np.asarray(grid, dtype=float)
        s = self(r)
        return bool(np.all((s[:, None] - s[None, :]) * (r[:, None] - r[None, :]) >= -1e-12))

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "StaticMap":
        return cls(d["kind"], tuple(d.get("params", ())))


# -- systems -------------------------------------------------------------------

_KINDS = ("lti", "icd", "lure", "example4", "static", "hook")


@dataclass(frozen=True, eq=False)
class SystemDef:
    """Input-state-output system ``x' = f(x, u), y = h(x, u)``.

    Use the named constructors rather than building instances directly.

    Attributes
    ----------
    kind : str
        One of ``lti``, ``icd``, ``lure``, ``example4``, ``static``, ``hook``.
    dims : tuple of int
        ``(n, m, p)``.
    params : dict
        Kind-specific parameters (see the constructors).
    """

    kind: str
    dims: tuple
    params: Mapping[str, Any] = field(default_factory=dict)
    name: str = ""
    realization: LinearRealization | None = None
    hook_f: Callable | None = None
    hook_h: Callable | None = None
    feedthrough_flag: bool | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ModelError(f"unknown system kind {self.kind!r}")
        n, m, p = (int(v) for v in self.dims)
        if min(n, m, p) < 0:
            raise DimensionError("dimensions must be nonnegative")
        object.__setattr__(self, "dims", (n, m, p))
        object.__setattr__(self, "_enc", self._encode())

    # constructors
    @classmethod
    def lti(cls, real: LinearRealization, name: str = "lti") -> "SystemDef":
        return cls("lti", (real.n, real.m, real.p), {}, name, realization=real)

    @classmethod
    def icd(cls, a: float = 1.0, b: Sequence[float] = (1.0, 1.0, 1.0),
            psi: StaticMap | None = None, N: int = 0, name: str = "icd") -> "SystemDef":
        """Two-state plant with odd polynomial damping.

        ``x1' = -a x1 - psi(x1) + 2 x2 - sum_k b_k x1^(2k+1) + u``,
        ``x2' = -x2 + u``, ``y = x1 - x2``, with ``b[k]`` for ``k = 0..M``.
        Only ``N = 0`` is accepted: negative powers are singular at the
        origin.
        """
        if N != 0:
            raise ModelError("negative polynomial powers (N > 0) are singular at x1 = 0")
        if a < 1 or any(v < 0 for v in b):
            raise ModelError("need a >= 1 and b_k >= 0")
        psi = psi or StaticMap.saturation(5.0)
        return cls("icd", (2, 1, 1), {"a": float(a), "b": [float(v) for v in b], "psi": psi}, name)

    @classmethod
    def lure(cls, k: float = 5.0, d: float = 0.2, psi: StaticMap | None = None,
             name: str = "lure") -> "SystemDef":
        """Scalar plant ``x' = -k x - psi(x) + u``, ``y = x - d u``."""
        psi = psi or StaticMap.saturation(8.0)
        return cls("lure", (1, 1, 1), {"k": float(k), "d": float(d), "psi": psi}, name)

    @classmethod
    def example4(cls, psi: StaticMap | None = None, name: str = "example4") -> "SystemDef":
        """``x1' = x2``, ``x2' = -x1^3 + psi(x2)^2 + u``, ``y = x2``."""
        psi = psi or StaticMap.saturation(0.5)
        return cls("example4", (2, 1, 1), {"psi": psi}, name)

    @classmethod
    def static(cls, sigma: StaticMap, name: str = "static") -> "SystemDef":
        """Memoryless ``y = sigma(u)``."""
        return cls("static", (0, 1, 1), {"sigma": sigma}, name)

    @classmethod
    def hook(cls, f: Callable, h: Callable, n: int, m: int, p: int,
             feedthrough: bool = True, name: str = "hook") -> "SystemDef":
        """System from Python callables ``f(x, u)`` and ``h(x, u)``."""
        return cls("hook", (n, m, p), {}, name, hook_f=f, hook_h=h, feedthrough_flag=feedthrough)

    @property
    def n(self) -> int:
        return self.dims[0]

    @property
    def m(self) -> int:
        return self.dims[1]

    @property
    def p(self) -> int:
        return self.dims[2]

    @property
    def has_feedthrough(self) -> bool:
        if self.kind == "lti":
            return bool(np.any(self.realization.D != 0))
        if self.kind == "lure":
            return self.params["d"] != 0
        if self.kind == "static":
            return True
        if self.kind == "hook":
            return bool(self.feedthrough_flag)
        return False

    def _encode(self) -> tuple:
        n, m, p = self.dims
        kind = self.kind
        if kind == "lti":
            r = self.realization
            par = np.concatenate([r.A.ravel(), r.B.ravel(), r.C.ravel(), r.D.ravel()])
            return (K.PLANT_LTI, n, m, p, par, None, None)
        if kind == "icd":
            b = self.params["b"]
            par = [self.params["a"], float(len(b)), *b, *self.params["psi"].encode()]
            return (K.PLANT_ICD, n, m, p, np.array(par), None, None)
        if kind == "lure":
            par = [self.params["k"], self.params["d"], *self.params["psi"].encode()]
            return (K.PLANT_LURE, n, m, p, np.array(par), None, None)
        if kind == "example4":
            return (K.PLANT_EX4, n, m, p, np.array(self.params["psi"].encode()), None, None)
        if kind == "static":
            return (K.PLANT_STATIC, n, m, p, np.array(self.params["sigma"].encode()), None, None)
        return (K.PLANT_HOOK, n, m, p, np.zeros(0), self.hook_f, self.hook_h)

    def encode(self) -> tuple:
        """Kernel tuple ``(kind, n, m, p, params, hook_f, hook_h)``."""
        return self._enc

    def negated(self) -> "SystemDef":
        """System with output ``-h(x, u)``."""
        if self.kind == "lti":
            return SystemDef.lti(self.realization.transform(scale=-1.0), name=f"-{self.name}")
        base = self
        return SystemDef.hook(lambda x, u: eval_dynamics(base, x, u),
                              lambda x, u: -eval_output(base, x, u),
                              *self.dims, feedthrough=self.has_feedthrough, name=f"-{self.name}")

    def to_json(self) -> dict:
        if self.kind == "hook":
            raise ModelError("hook systems are not serializable")
        params: dict = {}
        for k, v in self.params.items():
            params[k] = v.to_json() if isinstance(v, StaticMap) else v
        if self.kind == "lti":
            params = self.realization.to_json()
        return {"name": self.name, "kind": self.kind, "params": params, "dims": list(self.dims)}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "SystemDef":
        kind = d["kind"]
        par = dict(d.get("params", {}))
        name = d.get("name", kind)
        if kind == "lti":
            sys = cls.lti(LinearRealization.from_json(par), name=name)
        elif kind == "icd":
            psi = StaticMap.from_json(par["psi"]) if "psi" in par else None
            sys = cls.icd(par.get("a", 1.0), par.get("b", (1.0, 1.0, 1.0)), psi, par.get("N", 0), name)
        elif kind == "lure":
            psi = StaticMap.from_json(par["psi"]) if "psi" in par else None
            sys = cls.lure(par.get("k", 5.0), par.get("d", 0.2), psi, name)
        elif kind == "example4":
            psi = StaticMap.from_json(par["psi"]) if "psi" in par else None
            sys = cls.example4(psi, name)
        elif kind == "static":
            sys = cls.static(StaticMap.from_json(par["sigma"]), name)
        else:
            raise ModelError(f"system kind {kind!r} cannot be loaded from a file")
        if "dims" in d and tuple(d["dims"]) != sys.dims:
            raise DimensionError(f"declared dims {d['dims']} do not match {list(sys.dims)}")
        return sys


def _check_finite(v: list, what: str) -> np.ndarray:
    arr = np.array(v, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"non-finite {what}")
    return arr


def eval_dynamics(sys: SystemDef, x, u) -> np.ndarray:
    """Return ``f(x, u)``."""
    x = _vector(x, sys.n, "x")
    u = _vector(u, sys.m, "u")
    out = _kp.plant_f(_kp._prepare(sys.encode(), 4), x.tolist(), u.tolist())
    if len(out) != sys.n:
        raise DimensionError(f"dynamics returned {len(out)} values, expected {sys.n}")
    return _check_finite(out, "state derivative")


def eval_output(sys: SystemDef, x, u) -> np.ndarray:
    """Return ``h(x, u)``."""
    x = _vector(x, sys.n, "x")
    u = _vector(u, sys.m, "u")
    out = _kp.plant_h(_kp._prepare(sys.encode(), 4), x.tolist(), u.tolist())
    if len(out) != sys.p:
        raise DimensionError(f"output map returned {len(out)} values, expected {sys.p}")
    return _check_finite(out, "output")


# -- feedback ------------------------------------------------------------------

@dataclass(frozen=True)
class FeedbackSystem:
    """Interconnection ``u1 = w1 + sign * y2``, ``u2 = w2 + y1``.

    ``sign = -1`` is the negative-feedback wrapper around ``-sigma2``.
    ``order`` records how the loop equations are resolved at each instant.
    """

    sigma1: SystemDef
    sigma2: SystemDef
    sign: float = 1.0
    order: str = "sigma1-first"
    feedthrough: tuple = (False, False)

    @property
    def n(self) -> int:
        return self.sigma1.n + self.sigma2.n

    def order_code(self) -> int:
        return {"sigma1-first": K.ORDER_SIGMA1_FIRST, "sigma2-first": K.ORDER_SIGMA2_FIRST,
                "iterate": K.ORDER_ITERATE}[self.order]


def _io_jacobian(sys: SystemDef) -> np.ndarray:
    """d h / d u at the origin."""
    if sys.kind == "lti":
        return np.array(sys.realization.D)
    eps = 1e-6
    x0 = np.zeros(sys.n)
    J = np.zeros((sys.p, sys.m))
    for j in range(sys.m):
        e = np.zeros(sys.m)
        e[j] = eps
        J[:, j] = (eval_output(sys, x0, e) - eval_output(sys, x0, -e)) / (2 * eps)
    return J


def make_feedback(sigma1: SystemDef, sigma2: SystemDef, sign: float = 1.0) -> FeedbackSystem:
    """Build and validate the feedback interconnection of two systems.

    Raises
    ------
    DimensionError
        If ``u1`` and ``y2`` (or ``u2`` and ``y1``) differ in size.
    AlgebraicLoopError
        If both subsystems have feedthrough and the loop gain at the
        origin has spectral radius ``>= 1``.
    """
    if sigma1.m != sigma2.p or sigma2.m != sigma1.p:
        raise DimensionError(f"incompatible dims: sigma1 {sigma1.dims}, sigma2 {sigma2.dims}")
    if sign not in (1.0, -1.0):
        raise ModelError("sign must be +1 or -1")
    f1, f2 = sigma1.has_feedthrough, sigma2.has_feedthrough
    if not f1:
        order = "sigma1-first"
    elif not f2:
        order = "sigma2-first"
    else:
        loop = sign * _io_jacobian(sigma1) @ _io_jacobian(sigma2)
        rho = float(np.max(np.abs(np.linalg.eigvals(loop)))) if loop.size else 0.0
        if rho >= 1.0:
            raise AlgebraicLoopError(f"algebraic loop with gain {rho:g} >= 1 at the origin")
        order = "iterate"
    return FeedbackSystem(sigma1, sigma2, float(sign), order, (f1, f2))
