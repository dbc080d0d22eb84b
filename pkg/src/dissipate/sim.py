"""Fixed-step simulation of open- and closed-loop systems.

Plant, auxiliary system and supply-rate dynamics are stacked and
integrated together by the kernel selected in :mod:`dissipate.kernel`.
"""

from __future__ import annotations

import io
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import _codes as K
from . import _kernel_py as _kp
from . import kernel
from .models import DimensionError, FeedbackSystem, SystemDef
from .operators import AuxiliarySystem, SupplyRate


class SimulationError(RuntimeError):
    """Invalid simulation request."""


class DivergenceError(SimulationError):
    """State norm left the divergence bound (or became non-finite)."""

    def __init__(self, time: float, trajectory: "Trajectory | None" = None):
        super().__init__(f"simulation diverged at t={time:g}")
        self.time = time
        self.trajectory = trajectory


# -- configuration ---------------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Step ``h``, horizon ``T``, method (``rk4`` or ``euler``) and divergence bound."""

    step: float = 1e-3
    horizon: float = 10.0
    method: str = "rk4"
    bound: float = 1e9

    def __post_init__(self):
        if not (self.step > 0 and self.horizon > 0):
            raise SimulationError("step and horizon must be positive")
        if self.method not in ("rk4", "euler"):
            raise SimulationError(f"unknown method {self.method!r}")
        r = self.horizon / self.step
        if abs(r - round(r)) > 1e-9 * max(1.0, r):
            raise SimulationError(f"horizon {self.horizon} is not a whole number of steps {self.step}")

    @property
    def nsteps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def method_code(self) -> int:
        return K.METHOD_EULER if self.method == "euler" else K.METHOD_RK4

    def grid(self) -> np.ndarray:
        return np.arange(self.nsteps + 1) * self.step

    def to_json(self) -> dict:
        return {"step": self.step, "horizon": self.horizon, "method": self.method, "bound": self.bound}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "SimConfig":
        return cls(float(d.get("step", 1e-3)), float(d.get("horizon", 10.0)),
                   d.get("method", "rk4"), float(d.get("bound", 1e9)))


# -- input signals ---------------------------------------------------------------

_FAMILIES = ("zero", "constant", "sinusoid", "piecewise", "exponential")


@dataclass(frozen=True)
class InputSignal:
    """Input family with parameters, broadcast over ``dims`` channels.

    ==============  ==========================================
    family          params
    ==============  ==========================================
    zero            none
    constant        ``value``
    sinusoid        ``amplitude``, ``frequency``, ``phase``
    piecewise       ``seed``, ``dwell``, ``amplitude``, ``ramp``
    exponential     ``amplitude``, ``rate``
    ==============  ==========================================

    Piecewise signals draw one level per dwell interval uniformly from
    ``[-amplitude, amplitude]`` and blend consecutive levels with a
    raised-cosine ramp over the first ``ramp`` fraction of each interval.
    Scalar params apply to every channel; lists give one value per channel.
    """

    family: str = "zero"
    params: Mapping[str, Any] = field(default_factory=dict)
    dims: int = 1

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise SimulationError(f"unknown input family {self.family!r}")
        p = self.params
        if self.family == "piecewise":
            if p.get("dwell", 1.0) <= 0 or p.get("amplitude", 1.0) < 0:
                raise SimulationError("piecewise input needs dwell > 0 and amplitude >= 0")
            if not 0 <= p.get("ramp", 0.1) <= 1:
                raise SimulationError("ramp fraction must lie in [0, 1]")
        if self.family == "exponential" and np.any(np.asarray(p.get("rate", 1.0)) < 0):
            raise SimulationError("exponential rate must be nonnegative")

    @classmethod
    def zero(cls, dims: int = 1) -> "InputSignal":
        return cls("zero", {}, dims)

    @classmethod
    def constant(cls, value, dims: int = 1) -> "InputSignal":
        return cls("constant", {"value": value}, dims)

    @classmethod
    def sinusoid(cls, amplitude=1.0, frequency=1.0, phase=0.0, dims: int = 1) -> "InputSignal":
        return cls("sinusoid", {"amplitude": amplitude, "frequency": frequency, "phase": phase}, dims)

    @classmethod
    def piecewise(cls, seed: int, dwell: float = 1.0, amplitude: float = 1.0, ramp: float = 0.1,
                  dims: int = 1) -> "InputSignal":
        return cls("piecewise", {"seed": int(seed), "dwell": dwell, "amplitude": amplitude, "ramp": ramp}, dims)

    @classmethod
    def exponential(cls, amplitude=1.0, rate=1.0, dims: int = 1) -> "InputSignal":
        return cls("exponential", {"amplitude": amplitude, "rate": rate}, dims)

    def _per_channel(self, key, default):
        v = np.broadcast_to(np.asarray(self.params.get(key, default), dtype=float), (self.dims,))
        return [float(a) for a in v]

    def encode(self, horizon: float) -> tuple:
        """Kernel tuple ``(kinds, offsets, params)`` valid on ``[0, horizon]``."""
        m = self.dims
        fam = self.family
        kinds: list = []
        par: list = []
        offsets = [0]
        if fam == "piecewise":
            dwell = float(self.params.get("dwell", 1.0))
            amp = float(self.params.get("amplitude", 1.0))
            ramp = float(self.params.get("ramp", 0.1))
            k = int(math.floor(horizon / dwell)) + 2
            # one generator per channel keeps levels independent of the horizon
            seed = int(self.params["seed"])
            levels = [np.random.default_rng([seed, i]).uniform(-amp, amp, k) for i in range(m)]
        for i in range(m):
            if fam == "zero":
                kinds.append(K.IN_ZERO)
            elif fam == "constant":
                kinds.append(K.IN_CONST)
                par += [self._per_channel("value", 0.0)[i]]
            elif fam == "sinusoid":
                kinds.append(K.IN_SIN)
                par += [self._per_channel("amplitude", 1.0)[i], self._per_channel("frequency", 1.0)[i],
                        self._per_channel("phase", 0.0)[i]]
            elif fam == "exponential":
                kinds.append(K.IN_EXP)
                par += [self._per_channel("amplitude", 1.0)[i], self._per_channel("rate", 1.0)[i]]
            else:
                kinds.append(K.IN_PW)
                par += [dwell, ramp, float(k), *levels[i].tolist()]
            offsets.append(len(par))
        return (np.array(kinds, dtype=np.int64), np.array(offsets, dtype=np.int64), np.array(par, dtype=float))

    def to_json(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, (list, tuple, np.ndarray)) else v)
                  for k, v in self.params.items()}
        return {"family": self.family, "params": params, "dims": self.dims}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "InputSignal":
        return cls(d.get("family", "zero"), dict(d.get("params", {})), int(d.get("dims", 1)))


def gen_input(spec: InputSignal, grid) -> np.ndarray:
    """Sample an input signal on ``grid``; returns shape ``(N, dims)``."""
    t = np.asarray(grid, dtype=float).ravel()
    kinds, offsets, par = spec.encode(float(t[-1]) if t.size else 0.0)
    par = par.tolist()
    out = np.empty((t.size, spec.dims))
    for i in range(spec.dims):
        k, off = int(kinds[i]), int(offsets[i])
        out[:, i] = [_kp.input_channel(k, par, off, float(tt)) for tt in t]
    return out


# -- trajectories ----------------------------------------------------------------

def cumtrapz(y: np.ndarray, h: float) -> np.ndarray:
    """Cumulative trapezoid integral with a leading zero."""
    out = np.zeros_like(y, dtype=float)
    if y.size > 1:
        out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
    return out


@dataclass
class Trajectory:
    """Sampled solution on a uniform grid.

    ``x``, ``z``, ``u`` and ``y`` have one row per grid point.  For closed
    loops the columns stack the two subsystems (``parts`` records the
    widths) and ``xi``/``int_xi`` are NaN.  Rows from a divergence onward
    are NaN and ``failure_time`` is set.
    """

    t: np.ndarray
    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    int_xi: np.ndarray
    S: np.ndarray | None = None
    status: int = K.STATUS_OK
    failure_time: float | None = None
    parts: Mapping[str, int] | None = None

    @property
    def ok(self) -> bool:
        return self.status == K.STATUS_OK

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0

    def raise_on_failure(self) -> "Trajectory":
        if not self.ok:
            raise DivergenceError(self.failure_time, self)
        return self

    def split(self) -> dict:
        """Per-subsystem channels of a closed-loop trajectory."""
        if not self.parts:
            raise SimulationError("not a closed-loop trajectory")
        n1, nz1, m, p = self.parts["n1"], self.parts["nz1"], self.parts["m"], self.parts["p"]
        return {"x1": self.x[:, :n1], "x2": self.x[:, n1:], "z1": self.z[:, :nz1], "z2": self.z[:, nz1:],
                "u1": self.u[:, :m], "u2": self.u[:, m:], "y1": self.y[:, :p], "y2": self.y[:, p:]}

    def header(self) -> list:
        cols = ["t"]
        for name, arr in (("x", self.x), ("z", self.z), ("u", self.u), ("y", self.y)):
            cols += [f"{name}{i + 1}" for i in range(arr.shape[1])]
        return cols + ["xi", "int_xi", "S"]

    def table(self) -> np.ndarray:
        S = self.S if self.S is not None else np.full(self.t.size, np.nan)
        return np.column_stack([self.t, self.x, self.z, self.u, self.y, self.xi, self.int_xi, S])

    def csv_text(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header()) + "\n")
        for row in self.table():
            buf.write(",".join("%.17g" % v for v in row) + "\n")
        return buf.getvalue()

    def to_csv(self, path) -> None:
        atomic_write(path, self.csv_text())


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file and rename."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- simulation ------------------------------------------------------------------

_NO_RATE = (K.RATE_NONE, 0, np.zeros(0), False, 1.0)


def _vec(v, n: int, name: str) -> np.ndarray:
    a = np.zeros(n) if v is None else np.asarray(v, dtype=float).ravel()
    if a.size != n:
        raise DimensionError(f"{name} has length {a.size}, expected {n}")
    if not np.all(np.isfinite(a)):
        raise SimulationError(f"{name} must be finite")
    return a


def simulate_open(sys: SystemDef, phi: AuxiliarySystem | None, xi: SupplyRate | None,
                  u: InputSignal, x0, xbar=None, cfg: SimConfig | None = None,
                  storage: Callable | None = None) -> Trajectory:
    """Co-integrate a plant with its auxiliary system and supply rate.

    Parameters
    ----------
    sys : SystemDef
    phi : AuxiliarySystem or None
    xi : SupplyRate or None
        When given, the ``xi`` and ``int_xi`` channels are filled.  Prime
        rates ignore ``xbar`` and use ``x0`` instead.
    u : InputSignal
    x0 : array_like
    xbar : array_like, optional
        Initial-condition parameter for the auxiliary system and rate.
    cfg : SimConfig, optional
    storage : callable, optional
        ``S(v)`` evaluated row-wise on ``[x, z]`` to fill the ``S`` channel.

    Returns
    -------
    Trajectory
        Check ``ok`` / ``failure_time`` for divergence.
    """
    cfg = cfg or SimConfig()
    phi = phi or AuxiliarySystem.none()
    n, m, p = sys.dims
    if u.dims != m:
        raise DimensionError(f"input has {u.dims} channels, system expects {m}")
    if phi.nz and (phi.m, phi.p) != (m, p):
        raise DimensionError("auxiliary system dims do not match the plant")
    if xi is not None and (xi.u_dim, xi.y_dim) != (m, p):
        raise DimensionError("supply-rate dims do not match the plant")
    x0 = _vec(x0, n, "x0")
    if xi is not None and xi.prime:
        xbar = x0
    if xbar is None:
        bar_dim = (xi.xbar_dim if xi is not None else 0) or phi.init.xbar_dim
        xbar = x0 if bar_dim == n else np.zeros(bar_dim)
    z0 = phi.init.apply(xbar)
    rate = xi.encode() if xi is not None else _NO_RATE
    s0 = xi.init.apply(xbar) if xi is not None else np.zeros(0)
    X, Z, S, U, Y, XI, status, index = kernel.integrate_open(
        sys.encode(), phi.encode(), rate, u.encode(cfg.horizon), x0, z0, s0,
        cfg.step, cfg.nsteps, cfg.method_code, cfg.bound)
    t = cfg.grid()
    if xi is None:
        XI = np.full(t.size, np.nan)
        int_xi = np.full(t.size, np.nan)
    else:
        int_xi = cumtrapz(XI, cfg.step)
    Sv = None
    if storage is not None:
        Sv = storage(np.hstack([X, Z]))
    fail = None if index < 0 else float(t[index])
    return Trajectory(t, X, Z, U, Y, XI, int_xi, Sv, status, fail)


def simulate_closed(fb: FeedbackSystem, phi1: AuxiliarySystem | None, phi2: AuxiliarySystem | None,
                    w1: InputSignal | None, w2: InputSignal | None, x0,
                    cfg: SimConfig | None = None, xbar=None,
                    storage: Callable | None = None) -> Trajectory:
    """Simulate ``sigma1 || sigma2`` with auxiliary systems attached.

    ``x0`` stacks ``(x1(0), x2(0))``.  Both auxiliary initial rules are fed
    ``xbar``, which defaults to ``x1(0)``.  ``storage`` is evaluated on the
    stacked ``[x1, x2, z1, z2]`` rows to fill ``S``.
    """
    cfg = cfg or SimConfig()
    s1, s2 = fb.sigma1, fb.sigma2
    phi1 = phi1 or AuxiliarySystem.none()
    phi2 = phi2 or AuxiliarySystem.none()
    w1 = w1 or InputSignal.zero(s1.m)
    w2 = w2 or InputSignal.zero(s2.m)
    if w1.dims != s1.m or w2.dims != s2.m:
        raise DimensionError("exogenous input widths do not match the loop")
    x0 = _vec(x0, s1.n + s2.n, "x0")
    x10, x20 = x0[:s1.n], x0[s1.n:]
    if xbar is None:
        xbar = x10
    z10 = phi1.init.apply(xbar if phi1.init.xbar_dim else None)
    z20 = phi2.init.apply(xbar if phi2.init.xbar_dim else None)
    X1, X2, Z1, Z2, U1, Y1, U2, Y2, status, index = kernel.integrate_closed(
        s1.encode(), s2.encode(), phi1.encode(), phi2.encode(),
        w1.encode(cfg.horizon), w2.encode(cfg.horizon), x10, x20, z10, z20,
        fb.sign, fb.order_code(), cfg.step, cfg.nsteps, cfg.method_code, cfg.bound)
    t = cfg.grid()
    X = np.hstack([X1, X2])
    Z = np.hstack([Z1, Z2])
    nan = np.full(t.size, np.nan)
    Sv = storage(np.hstack([X, Z])) if storage is not None else None
    parts = {"n1": s1.n, "n2": s2.n, "nz1": phi1.nz, "nz2": phi2.nz, "m": s1.m, "p": s1.p}
    fail = None if index < 0 else float(t[index])
    return Trajectory(t, X, Z, np.hstack([U1, U2]), np.hstack([Y1, Y2]), nan, nan.copy(), Sv,
                      status, fail, parts)


# -- parallel map ----------------------------------------------------------------

def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """Map ``fn`` over ``items`` in order, optionally across processes.

    Results come back in input order, so reductions over them do not
    depend on ``jobs``.  Falls back to serial execution when ``fn`` or the
    items cannot be pickled (for instance hook systems).
    """
    items = list(items)
    if jobs is None or jobs <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    import pickle
    try:
        pickle.dumps((fn, items[0]))
    except Exception:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=chunk))


# -- ensembles -------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleMember:
    """One ensemble trajectory: input, initial state and ``xbar``."""

    input: InputSignal
    x0: tuple
    xbar: tuple | None = None

    def to_json(self) -> dict:
        return {"input": self.input.to_json(), "x0": list(self.x0),
                "xbar": None if self.xbar is None else list(self.xbar)}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "EnsembleMember":
        xbar = d.get("xbar")
        return cls(InputSignal.from_json(d["input"]), tuple(d["x0"]), None if xbar is None else tuple(xbar))


def random_ensemble(size: int, seed: int, n: int, m: int, xbar_dim: int = 0,
                    x0_scale: float = 1.0, xbar_scale: float = 1.0, amplitude: float = 1.0,
                    families: Sequence[str] = _FAMILIES[1:]) -> list:
    """Seeded ensemble cycling through the input families.

    Member ``i`` is drawn from its own generator seeded with ``(seed, i)``,
    so any prefix of a larger ensemble equals the smaller ensemble.
    """
    out = []
    for i in range(size):
        rng = np.random.default_rng([int(seed), i])
        fam = families[i % len(families)]
        x0 = tuple(rng.uniform(-x0_scale, x0_scale, n).tolist())
        xbar = tuple(rng.uniform(-xbar_scale, xbar_scale, xbar_dim).tolist()) if xbar_dim else None
        if fam == "zero":
            sig = InputSignal.zero(m)
        elif fam == "constant":
            sig = InputSignal.constant(rng.uniform(-amplitude, amplitude, m).tolist(), m)
        elif fam == "sinusoid":
            sig = InputSignal.sinusoid(rng.uniform(0, amplitude, m).tolist(),
                                       np.exp(rng.uniform(np.log(0.1), np.log(5.0), m)).tolist(),
                                       rng.uniform(0, 2 * np.pi, m).tolist(), m)
        elif fam == "piecewise":
            sig = InputSignal.piecewise(int(rng.integers(2**31)), float(rng.uniform(0.5, 2.0)), amplitude, 0.1, m)
        else:
            sig = InputSignal.exponential(rng.uniform(-amplitude, amplitude, m).tolist(),
                                          rng.uniform(0.2, 3.0, m).tolist(), m)
        out.append(EnsembleMember(sig, x0, xbar))
    return out
