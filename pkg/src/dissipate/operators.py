"""Auxiliary systems, dynamic supply rates and the operator algebra on them.

A supply rate maps input/output signals (and an initial-condition
parameter ``xbar``) to a scalar signal ``xi``.  Rates with internal state
are integrated either alongside the plant (see :mod:`dissipate.sim`) or,
for signals already sampled on a grid, by :func:`supply_trace`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from . import _codes as K
from . import _kernel_py as _kp
from .models import DimensionError, LinearRealization, ModelError, StaticMap


class OperatorError(ValueError):
    """Invalid operator definition or evaluation failure."""


# -- initial-condition rules ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class InitialRule:
    """Initial state ``L @ xbar + fixed``.

    ``L = None`` means the state does not depend on ``xbar``.
    """

    fixed: np.ndarray
    L: np.ndarray | None = None

    def __post_init__(self):
        fixed = np.asarray(self.fixed, dtype=float).ravel()
        object.__setattr__(self, "fixed", fixed)
        if self.L is not None:
            L = np.atleast_2d(np.asarray(self.L, dtype=float))
            if L.shape[0] != fixed.size:
                raise DimensionError(f"initial rule L has {L.shape[0]} rows, state has {fixed.size}")
            object.__setattr__(self, "L", L)

    @classmethod
    def zero(cls, nz: int) -> "InitialRule":
        return cls(np.zeros(nz))

    @classmethod
    def linear(cls, L) -> "InitialRule":
        L = np.atleast_2d(np.asarray(L, dtype=float))
        return cls(np.zeros(L.shape[0]), L)

    @property
    def xbar_dim(self) -> int:
        return 0 if self.L is None else self.L.shape[1]

    def apply(self, xbar=None) -> np.ndarray:
        if self.L is None:
            return self.fixed.copy()
        xbar = np.zeros(self.xbar_dim) if xbar is None else np.asarray(xbar, dtype=float).ravel()
        if xbar.size != self.xbar_dim:
            raise DimensionError(f"xbar has length {xbar.size}, expected {self.xbar_dim}")
        return self.L @ xbar + self.fixed

    def to_json(self) -> dict:
        d: dict = {"fixed": self.fixed.tolist()}
        if self.L is not None:
            d["L"] = self.L.tolist()
        return d

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "InitialRule":
        return cls(d.get("fixed", []), d.get("L"))


def _stack(*mats) -> np.ndarray:
    return np.concatenate([np.asarray(m, dtype=float).ravel() for m in mats]) if mats else np.zeros(0)


# -- auxiliary systems ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AuxiliarySystem:
    """Auxiliary dynamics ``z' = g(z, x, u)`` with output ``phi``.

    Catalog kinds are ``lti`` (driven by ``w = [u; y]``), ``example4``
    (``z' = -z - psi(z) u^2 + y``), ``hook`` and ``none``.
    """

    kind: str
    nz: int
    m: int = 1
    p: int = 1
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    D: np.ndarray | None = None
    psi: StaticMap | None = None
    hook_g: Callable | None = None
    init: InitialRule = field(default_factory=lambda: InitialRule.zero(0))

    def __post_init__(self):
        if self.init.fixed.size != self.nz:
            raise DimensionError(f"initial rule has size {self.init.fixed.size}, aux state {self.nz}")

    @classmethod
    def none(cls) -> "AuxiliarySystem":
        return cls("none", 0, 0, 0)

    @classmethod
    def lti(cls, A, B, m: int, p: int, C=None, D=None, init: InitialRule | None = None) -> "AuxiliarySystem":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        nz = A.shape[0]
        B = np.asarray(B, dtype=float).reshape(nz, m + p)
        C = np.eye(nz) if C is None else np.atleast_2d(np.asarray(C, dtype=float))
        D = np.zeros((C.shape[0], m + p)) if D is None else np.asarray(D, dtype=float).reshape(C.shape[0], m + p)
        return cls("lti", nz, m, p, A, B, C, D, init=init or InitialRule.zero(nz))

    @classmethod
    def filter(cls, channel: str = "u", pole: float = 1.0, m: int = 1, p: int = 1,
               init: InitialRule | None = None) -> "AuxiliarySystem":
        """First-order filter ``z' = -pole z + u`` (or ``+ y``)."""
        if channel not in ("u", "y"):
            raise OperatorError("channel must be 'u' or 'y'")
        n = m if channel == "u" else p
        B = np.zeros((n, m + p))
        B[:, :m] = np.eye(m) if channel == "u" else 0.0
        if channel == "y":
            B[:, m:] = np.eye(p)
        return cls.lti(-pole * np.eye(n), B, m, p, init=init)

    @classmethod
    def example4(cls, psi: StaticMap, init: InitialRule | None = None) -> "AuxiliarySystem":
        return cls("example4", 1, 1, 1, psi=psi, init=init or InitialRule.zero(1))

    @classmethod
    def hook(cls, g: Callable, nz: int, m: int, p: int, init: InitialRule | None = None) -> "AuxiliarySystem":
        """Auxiliary system from ``g(z, x, u, y)``."""
        return cls("hook", nz, m, p, hook_g=g, init=init or InitialRule.zero(nz))

    def encode(self) -> tuple:
        """Kernel tuple ``(kind, nz, params, hook_g)``."""
        if self.kind == "none":
            return (K.AUX_NONE, 0, np.zeros(0), None)
        if self.kind == "lti":
            return (K.AUX_LTI, self.nz, _stack(self.A, self.B), None)
        if self.kind == "example4":
            return (K.AUX_EX4, 1, np.array(self.psi.encode()), None)
        return (K.AUX_HOOK, self.nz, np.zeros(0), self.hook_g)

    def output(self, z, u, y) -> np.ndarray:
        """Auxiliary output ``phi`` for sampled rows of ``z``, ``u``, ``y``."""
        z = np.atleast_2d(z)
        if self.kind == "lti":
            w = np.hstack([np.atleast_2d(u), np.atleast_2d(y)])
            return z @ self.C.T + w @ self.D.T
        return z.copy()

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind, "nz": self.nz, "m": self.m, "p": self.p, "init": self.init.to_json()}
        if self.kind == "lti":
            d.update(A=self.A.tolist(), B=self.B.tolist(), C=self.C.tolist(), D=self.D.tolist())
        elif self.kind == "example4":
            d["psi"] = self.psi.to_json()
        elif self.kind == "hook":
            raise OperatorError("hook auxiliary systems are not serializable")
        return d

    @classmethod
    def from_json(cls, d: Mapping[str, Any] | None) -> "AuxiliarySystem":
        if d is None or d.get("kind", "none") == "none":
            return cls.none()
        init = InitialRule.from_json(d["init"]) if "init" in d else None
        if d["kind"] == "lti":
            return cls.lti(d["A"], d["B"], d["m"], d["p"], d.get("C"), d.get("D"), init)
        if d["kind"] == "example4":
            return cls.example4(StaticMap.from_json(d["psi"]), init)
        raise OperatorError(f"auxiliary kind {d['kind']!r} cannot be loaded from a file")


# -- operator quadruplets --------------------------------------------------------

def _block_json(b):
    if isinstance(b, LinearRealization):
        return {"realization": b.to_json()}
    return {"matrix": np.asarray(b, dtype=float).tolist()}


def _block_from_json(d):
    if "realization" in d:
        return LinearRealization.from_json(d["realization"])
    return np.asarray(d["matrix"], dtype=float)


@dataclass(frozen=True, eq=False)
class Quadruplet:
    """Operator ``Theta = [[Psi, Pi], [Upsilon, Omega]]`` acting on ``[u; y]``.

    Each block is a static matrix or a :class:`LinearRealization`.
    """

    psi: Any
    pi: Any
    upsilon: Any
    omega: Any
    m: int
    p: int

    def __post_init__(self):
        shapes = {"psi": (self.m, self.m), "pi": (self.m, self.p),
                  "upsilon": (self.p, self.m), "omega": (self.p, self.p)}
        for name, shape in shapes.items():
            b = getattr(self, name)
            if isinstance(b, LinearRealization):
                got = (b.p, b.m)
            else:
                b = np.asarray(b, dtype=float)
                if b.size == shape[0] * shape[1]:
                    b = b.reshape(shape)
                object.__setattr__(self, name, b)
                got = b.shape
            if tuple(got) != shape:
                raise DimensionError(f"block {name} has shape {got}, expected {shape}")

    @classmethod
    def static(cls, theta, m: int, p: int) -> "Quadruplet":
        T = np.asarray(theta, dtype=float)
        if T.shape != (m + p, m + p):
            raise DimensionError(f"Theta must be {(m + p, m + p)}")
        return cls(T[:m, :m], T[:m, m:], T[m:, :m], T[m:, m:], m, p)

    @classmethod
    def small_gain(cls, r: float, m: int = 1, p: int = 1) -> "Quadruplet":
        return cls(r * r * np.eye(m), np.zeros((m, p)), np.zeros((p, m)), -np.eye(p), m, p)

    @classmethod
    def indices(cls, delta: float, eps: float, m: int = 1) -> "Quadruplet":
        """Input-feedforward / output-feedback passivity indices."""
        I = np.eye(m)
        return cls(-delta * I, 0.5 * I, 0.5 * I, -eps * I, m, m)

    @property
    def blocks(self):
        return ((self.psi, 0, 0), (self.pi, 0, self.m), (self.upsilon, self.m, 0), (self.omega, self.m, self.m))

    @property
    def is_static(self) -> bool:
        return not any(isinstance(b, LinearRealization) and b.n > 0 for b, _, _ in self.blocks)

    def realization(self) -> LinearRealization:
        """Single state-space realization of ``Theta`` (``w -> Theta w``)."""
        q = self.m + self.p
        As, Bs, Cs = [], [], []
        D = np.zeros((q, q))
        for b, r0, c0 in self.blocks:
            if isinstance(b, LinearRealization):
                rows, cols = b.p, b.m
                D[r0:r0 + rows, c0:c0 + cols] += b.D
                if b.n:
                    Bf = np.zeros((b.n, q))
                    Bf[:, c0:c0 + cols] = b.B
                    Cf = np.zeros((q, b.n))
                    Cf[r0:r0 + rows, :] = b.C
                    As.append(b.A)
                    Bs.append(Bf)
                    Cs.append(Cf)
            else:
                rows, cols = b.shape
                D[r0:r0 + rows, c0:c0 + cols] += b
        if not As:
            return LinearRealization.static(D)
        n = sum(a.shape[0] for a in As)
        A = np.zeros((n, n))
        i = 0
        for a in As:
            k = a.shape[0]
            A[i:i + k, i:i + k] = a
            i += k
        return LinearRealization(A, np.vstack(Bs), np.hstack(Cs), D)

    def to_json(self) -> dict:
        return {"m": self.m, "p": self.p, "psi": _block_json(self.psi), "pi": _block_json(self.pi),
                "upsilon": _block_json(self.upsilon), "omega": _block_json(self.omega)}

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "Quadruplet":
        return cls(_block_from_json(d["psi"]), _block_from_json(d["pi"]), _block_from_json(d["upsilon"]),
                   _block_from_json(d["omega"]), int(d["m"]), int(d["p"]))


@dataclass(frozen=True)
class PermutationH:
    """Block permutation ``H = [[0, I_p], [I_m, 0]]`` mapping ``[u; y]`` to ``[y; u]``."""

    m: int
    p: int

    def matrix(self) -> np.ndarray:
        H = np.zeros((self.p + self.m, self.m + self.p))
        H[:self.p, self.m:] = np.eye(self.p)
        H[self.p:, :self.m] = np.eye(self.m)
        return H

    def inverse(self) -> "PermutationH":
        return PermutationH(self.p, self.m)


# -- supply rates ----------------------------------------------------------------

_VARIANTS = ("static_quadratic", "dynamic_quadratic", "quadruplet", "icd", "sector", "example4", "ioni")


def _sym(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


@dataclass(frozen=True, eq=False)
class SupplyRate:
    """Dynamic supply rate ``xi = Xi(u, y, xbar)``.

    Build instances with the named constructors.  Quadratic variants
    evaluate ``xi = (Psi w)' (Pi w)`` with ``w = [u; y]``; the first factor
    owns the leading block of the internal state.

    Attributes
    ----------
    base_prime : bool
        ``True`` when ``xbar`` is pinned to the plant's initial state.
    swapped : bool
        Input and output arguments are exchanged before evaluation.
    scale : float
        Multiplier applied to ``xi``.
    """

    variant: str
    m: int
    p: int
    params: Mapping[str, Any]
    init: InitialRule
    base_prime: bool = False
    swapped: bool = False
    scale: float = 1.0

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise OperatorError(f"unknown supply-rate variant {self.variant!r}")
        if self.init.fixed.size != self.ns:
            raise DimensionError(f"initial rule has size {self.init.fixed.size}, rate state {self.ns}")

    # constructors
    @classmethod
    def dynamic_quadratic(cls, psi: LinearRealization, pi: LinearRealization, m: int, p: int,
                          init: InitialRule | None = None, prime: bool = False,
                          variant: str = "dynamic_quadratic", extra: Mapping | None = None) -> "SupplyRate":
        if psi.m != m + p or pi.m != m + p or psi.p != pi.p:
            raise DimensionError("Psi and Pi must both map [u; y] to a common width")
        params = {"psi": psi, "pi": pi, **(extra or {})}
        return cls(variant, m, p, params, init or InitialRule.zero(psi.n + pi.n), prime)

    @classmethod
    def static_quadratic(cls, P, m: int, p: int) -> "SupplyRate":
        """``xi = [u; y]' P [u; y]`` (``P`` is symmetrized)."""
        P = _sym(P)
        if P.shape != (m + p, m + p):
            raise DimensionError(f"P must be {(m + p, m + p)}")
        return cls.dynamic_quadratic(LinearRealization.static(np.eye(m + p)), LinearRealization.static(P),
                                     m, p, variant="static_quadratic", extra={"P": P})

    @classmethod
    def quadruplet(cls, theta: Quadruplet) -> "SupplyRate":
        """``xi = w' (Theta w)``; dynamic blocks start from zero state."""
        real = theta.realization()
        real = LinearRealization(real.A, real.B, real.C, _sym(real.D)) if real.n else LinearRealization.static(_sym(real.D))
        q = theta.m + theta.p
        return cls.dynamic_quadratic(LinearRealization.static(np.eye(q)), real, theta.m, theta.p,
                                     variant="quadruplet", extra={"theta": theta})

    @classmethod
    def icd(cls, prime: bool = True) -> "SupplyRate":
        """``z' = -z + u``, ``z(0) = [0 1] xbar``, ``xi = u (3 z + y)``."""
        psi = LinearRealization.static([[1.0, 0.0]])
        pi = LinearRealization([[-1.0]], [[1.0, 0.0]], [[3.0]], [[0.0, 1.0]])
        return cls.dynamic_quadratic(psi, pi, 1, 1, InitialRule.linear([[0.0, 1.0]]), prime, variant="icd")

    @classmethod
    def sector(cls, b: float) -> "SupplyRate":
        """``z' = -z + u``, ``z(0) = xbar``, ``xi = -y (z - (1 + b) u + y)``."""
        psi = LinearRealization.static([[0.0, -1.0]])
        pi = LinearRealization([[-1.0]], [[1.0, 0.0]], [[1.0]], [[-(1.0 + b), 1.0]])
        return cls.dynamic_quadratic(psi, pi, 1, 1, InitialRule.linear([[1.0]]), False,
                                     variant="sector", extra={"b": float(b)})

    @classmethod
    def example4(cls, psi: StaticMap) -> "SupplyRate":
        """``z' = -z - psi(z) u^2 + y``, ``z(0) = xbar``, ``xi = y (z + u + psi(y)^2)``."""
        return cls("example4", 1, 1, {"psi": psi}, InitialRule.linear([[1.0]]))

    @classmethod
    def ioni(cls, plant: LinearRealization, delta: float, eps: float, phi: LinearRealization) -> "SupplyRate":
        """``xi = 2 ybar'^T u - delta |ybar'|^2 - eps |Phi u|^2``.

        ``ybar' = C (A x + B u)`` is computed exactly from the plant, so this
        rate needs the plant state and only applies to LTI plants.
        """
        if phi.m != plant.m or phi.p != plant.m:
            raise DimensionError("Phi must be square with the plant input width")
        return cls("ioni", plant.m, plant.p,
                   {"plant": plant, "delta": float(delta), "eps": float(eps), "phi": phi},
                   InitialRule.zero(phi.n))

    # properties
    @property
    def ns(self) -> int:
        if self.variant == "example4":
            return 1
        if self.variant == "ioni":
            return self.params["phi"].n
        return self.params["psi"].n + self.params["pi"].n

    @property
    def prime(self) -> bool:
        return self.base_prime and not self.swapped

    @property
    def u_dim(self) -> int:
        return self.p if self.swapped else self.m

    @property
    def y_dim(self) -> int:
        return self.m if self.swapped else self.p

    @property
    def xbar_dim(self) -> int:
        return self.init.xbar_dim

    @property
    def is_static(self) -> bool:
        return self.ns == 0 and self.variant != "ioni"

    def needs_state(self) -> bool:
        return self.variant == "ioni"

    def scaled(self, c: float) -> "SupplyRate":
        return dataclasses.replace(self, scale=self.scale * float(c))

    def encode(self) -> tuple:
        """Kernel tuple ``(kind, ns, params, swap, scale)``."""
        v = self.variant
        if v == "example4":
            return (K.RATE_EX4, 1, np.array(self.params["psi"].encode()), self.swapped, self.scale)
        if v == "ioni":
            pl, ph = self.params["plant"], self.params["phi"]
            par = _stack([pl.n, pl.m, ph.n, self.params["delta"], self.params["eps"]],
                         pl.A, pl.B, pl.C, ph.A, ph.B, ph.C, ph.D)
            return (K.RATE_IONI, ph.n, par, self.swapped, self.scale)
        psi, pi = self.params["psi"], self.params["pi"]
        par = _stack([psi.n, pi.n, psi.p], psi.A, psi.B, psi.C, psi.D, pi.A, pi.B, pi.C, pi.D)
        return (K.RATE_QUAD, self.ns, par, self.swapped, self.scale)

    def to_json(self) -> dict:
        d: dict = {"variant": self.variant, "m": self.m, "p": self.p, "prime": self.base_prime,
                   "swapped": self.swapped, "scale": self.scale}
        v = self.variant
        if v == "static_quadratic":
            d["P"] = np.asarray(self.params["P"]).tolist()
        elif v == "quadruplet":
            d["theta"] = self.params["theta"].to_json()
        elif v == "sector":
            d["b"] = self.params["b"]
        elif v == "example4":
            d["psi"] = self.params["psi"].to_json()
        elif v == "ioni":
            d.update(plant=self.params["plant"].to_json(), phi=self.params["phi"].to_json(),
                     delta=self.params["delta"], eps=self.params["eps"])
        elif v == "dynamic_quadratic":
            d.update(psi=self.params["psi"].to_json(), pi=self.params["pi"].to_json(), init=self.init.to_json())
        return d

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> "SupplyRate":
        v = d["variant"]
        if v == "static_quadratic":
            r = cls.static_quadratic(d["P"], d["m"], d["p"])
        elif v == "quadruplet":
            r = cls.quadruplet(Quadruplet.from_json(d["theta"]))
        elif v == "icd":
            r = cls.icd(d.get("prime", True))
        elif v == "sector":
            r = cls.sector(d["b"])
        elif v == "example4":
            r = cls.example4(StaticMap.from_json(d["psi"]))
        elif v == "ioni":
            r = cls.ioni(LinearRealization.from_json(d["plant"]), d["delta"], d["eps"],
                         LinearRealization.from_json(d["phi"]))
        elif v == "dynamic_quadratic":
            init = InitialRule.from_json(d["init"]) if "init" in d else None
            r = cls.dynamic_quadratic(LinearRealization.from_json(d["psi"]), LinearRealization.from_json(d["pi"]),
                                      d["m"], d["p"], init, d.get("prime", False))
        else:
            raise OperatorError(f"unknown supply-rate variant {v!r}")
        return dataclasses.replace(r, base_prime=bool(d.get("prime", r.base_prime)),
                                   swapped=bool(d.get("swapped", False)), scale=float(d.get("scale", 1.0)))

    def same_as(self, other: "SupplyRate") -> bool:
        """Structural equality through the serialized form."""
        try:
            return self.to_json() == other.to_json()
        except (OperatorError, ModelError):
            return self is other


def swap_supply(xi: SupplyRate) -> SupplyRate:
    """Compose with the swap ``(u, y, xbar) -> (y, u, xbar)``."""
    return dataclasses.replace(xi, swapped=not xi.swapped)


def invert_supply(xi: SupplyRate) -> SupplyRate:
    """Complementary rate ``(u, y, xbar) -> -xi(y, u, xbar)``.

    The result is never prime: ``xbar`` is a free parameter for the
    complementary subsystem.  Inverting twice returns the original rate.
    """
    return dataclasses.replace(xi, swapped=not xi.swapped, scale=-xi.scale)


# -- sampled evaluation ----------------------------------------------------------

def _check_grid(grid, *signals) -> tuple[np.ndarray, float]:
    t = np.asarray(grid, dtype=float).ravel()
    if t.size < 2:
        raise OperatorError("grid needs at least two points")
    d = np.diff(t)
    h = float(d.mean())
    if np.any(d <= 0) or np.max(np.abs(d - h)) > 1e-9 * max(1.0, abs(t[-1])):
        raise OperatorError("grid must be uniform and strictly increasing")
    for s in signals:
        if s is not None and s.shape[0] != t.size:
            raise OperatorError(f"signal has {s.shape[0]} samples, grid has {t.size}")
    return t, h


def _rows(v, n: int, N: int) -> np.ndarray:
    if v is None:
        return np.zeros((N, n))
    a = np.asarray(v, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1) if n == 1 or a.size == N else a.reshape(N, n)
    return a


def _midpoints(S: np.ndarray) -> np.ndarray:
    """Causal quadratic interpolation of samples at interval midpoints."""
    mid = np.empty((S.shape[0] - 1, S.shape[1]))
    mid[0] = 0.5 * (S[0] + S[1])
    mid[1:] = (-S[:-2] + 6.0 * S[1:-1] + 3.0 * S[2:]) / 8.0
    return mid


def _sampled_rk4(deriv, s0: np.ndarray, sig: np.ndarray, h: float, bound: float) -> np.ndarray:
    """Integrate ``s' = deriv(s, row)`` driven by sampled rows ``sig``."""
    N = sig.shape[0]
    out = np.empty((N, s0.size))
    out[0] = s0
    if s0.size == 0:
        return out
    mid = _midpoints(sig)
    s = [float(v) for v in s0]
    dim = len(s)
    half = 0.5 * h
    for k in range(N - 1):
        a, mk, b = sig[k].tolist(), mid[k].tolist(), sig[k + 1].tolist()
        k1 = deriv(s, a)
        k2 = deriv([s[i] + half * k1[i] for i in range(dim)], mk)
        k3 = deriv([s[i] + half * k2[i] for i in range(dim)], mk)
        k4 = deriv([s[i] + h * k3[i] for i in range(dim)], b)
        s = [s[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) for i in range(dim)]
        if _kp._diverged(s, bound):
            raise OperatorError(f"internal state diverged at t index {k + 1}")
        out[k + 1] = s
    return out


def supply_trace(xi: SupplyRate, u, y, grid, xbar=None, x=None, bound: float = 1e9) -> np.ndarray:
    """Evaluate ``xi(t)`` along sampled signals.

    Internal rate dynamics are integrated by RK4 on ``grid``; values between
    samples are interpolated causally, so ``xi[k]`` depends only on samples
    ``0..k``.

    Parameters
    ----------
    xi : SupplyRate
    u, y : array_like
        Samples of shape ``(N, m)`` and ``(N, p)`` in the rate's argument order.
    grid : array_like
        Uniform time grid of length ``N``.
    xbar : array_like, optional
        Initial-condition parameter; zeros when omitted.
    x : array_like, optional
        Plant state samples, required by the ``ioni`` variant.
    """
    t = np.asarray(grid, dtype=float).ravel()
    N = t.size
    U = _rows(u, xi.u_dim, N)
    Y = _rows(y, xi.y_dim, N)
    if U.shape[1] != xi.u_dim or Y.shape[1] != xi.y_dim:
        raise DimensionError("signal widths do not match the supply rate")
    if xi.needs_state() and x is None:
        raise OperatorError("the ioni rate needs plant-state samples")
    X = _rows(x, xi.params["plant"].n, N) if xi.needs_state() else np.zeros((N, 0))
    _, h = _check_grid(t, U, Y, X)
    rate = _kp._prepare(xi.encode(), 2)
    nu, ny, nx = U.shape[1], Y.shape[1], X.shape[1]
    sig = np.hstack([U, Y, X])

    def deriv(s, row):
        return _kp.rate_deriv(rate, s, row[:nu], row[nu:nu + ny], row[nu + ny:])

    S = _sampled_rk4(deriv, xi.init.apply(xbar), sig, h, bound)
    out = np.empty(N)
    for k in range(N):
        row = sig[k].tolist()
        out[k] = _kp.rate_out(rate, S[k].tolist(), row[:nu], row[nu:nu + ny], row[nu + ny:])
    return out


def quadruplet_supply(theta: Quadruplet, u, y, grid) -> np.ndarray:
    """``xi = w' (Theta w)`` along sampled ``w = [u; y]``, blocks from rest."""
    return supply_trace(SupplyRate.quadruplet(theta), u, y, grid)


def aux_trace(phi: AuxiliarySystem, x, u, grid, xbar=None, y=None, bound: float = 1e9):
    """Integrate an auxiliary system along sampled signals.

    Returns
    -------
    z : ndarray, shape (N, nz)
    out : ndarray
        Auxiliary output ``phi`` on the grid.
    """
    t = np.asarray(grid, dtype=float).ravel()
    N = t.size
    U = _rows(u, phi.m, N)
    Y = _rows(y, phi.p, N)
    X = np.asarray(x, dtype=float).reshape(N, -1) if x is not None else np.zeros((N, 0))
    _, h = _check_grid(t, U, Y, X)
    aux = _kp._prepare(phi.encode(), 2)
    nu, ny = U.shape[1], Y.shape[1]
    sig = np.hstack([U, Y, X])

    def deriv(z, row):
        return _kp.aux_g(aux, z, row[nu + ny:], row[:nu], row[nu:nu + ny])

    Z = _sampled_rk4(deriv, phi.init.apply(xbar), sig, h, bound)
    return Z, phi.output(Z, U, Y)
