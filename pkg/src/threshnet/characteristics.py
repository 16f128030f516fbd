"""Resistor current-voltage laws for network links.

Each law is a small frozen dataclass exposing

* ``forward(v)``    current as a function of voltage drop (phi)
* ``derivative(v)`` d phi / d v
* ``inverse(u)``    voltage drop as a function of current (g = phi^-1)
* ``primitive(u)``  f(u) = integral of g from 0 to u (convex, f(0) = 0)
* ``cocontent(v)``  integral of phi from 0 to v (the potential whose gradient
  in node voltages is the KCL residual; used as a Newton merit function)

All methods accept scalars or arrays. The parameters may themselves be arrays,
which is how :class:`LinkLaws` evaluates a whole network in one numpy pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields

import numpy as np

from .errors import MultivaluedInverseError, UnsupportedEvaluationError


def _ret(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


def _positive(name, value):
    if not np.all(np.asarray(value, dtype=float) > 0):
        raise ValueError(f"{name} must be positive, got {value!r}")


class Characteristic:
    """Common interface. Concrete laws override what they support."""

    kind = "abstract"

    def forward(self, v):
        raise UnsupportedEvaluationError(f"{self.kind} characteristic cannot be evaluated forward")

    def derivative(self, v):
        raise UnsupportedEvaluationError(f"{self.kind} characteristic has no derivative")

    def cocontent(self, v):
        raise UnsupportedEvaluationError(f"{self.kind} characteristic has no co-content")

    def inverse(self, u):
        raise NotImplementedError

    def primitive(self, u):
        raise NotImplementedError

    @property
    def rigidity(self) -> float:
        """Threshold voltage used as the link weight by the path oracle."""
        return 0.0

    @property
    def evaluable(self) -> bool:
        return True


@dataclass(frozen=True)
class Linear(Characteristic):
    R: float
    kind = "linear"

    def __post_init__(self):
        _positive("R", self.R)

    def forward(self, v):
        return _ret(np.asarray(v, dtype=float) / self.R)

    def derivative(self, v):
        return _ret(np.ones_like(np.asarray(v, dtype=float)) / self.R)

    def inverse(self, u):
        return _ret(self.R * np.asarray(u, dtype=float))

    def primitive(self, u):
        u = np.asarray(u, dtype=float)
        return _ret(0.5 * self.R * u * u)

    def cocontent(self, v):
        v = np.asarray(v, dtype=float)
        return _ret(0.5 * v * v / self.R)

    def __str__(self):
        return f"linear R={float(self.R)!r}"


@dataclass(frozen=True)
class PiecewiseThreshold(Characteristic):
    """Slope ``eps`` inside [-V, V], slope ``r`` outside; continuous at +-V."""

    V: float
    eps: float
    r: float
    kind = "pwl"

    def __post_init__(self):
        _positive("V", self.V)
        _positive("eps", self.eps)
        _positive("r", self.r)

    def forward(self, v):
        v = np.asarray(v, dtype=float)
        a, s = np.abs(v), np.sign(v)
        return _ret(np.where(a <= self.V, self.eps * v, s * (self.r * (a - self.V) + self.V * self.eps)))

    def derivative(self, v):
        a = np.abs(np.asarray(v, dtype=float))
        return _ret(np.where(a <= self.V, self.eps, self.r) * np.ones_like(a))

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        a, s = np.abs(u), np.sign(u)
        knee = self.V * self.eps
        return _ret(np.where(a <= knee, u / self.eps, s * (self.V + (a - knee) / self.r)))

    def primitive(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        knee = self.V * self.eps
        over = a - knee
        outer = 0.5 * knee * self.V + self.V * over + 0.5 * over * over / self.r
        return _ret(np.where(a <= knee, 0.5 * a * a / self.eps, outer))

    def cocontent(self, v):
        a = np.abs(np.asarray(v, dtype=float))
        over = a - self.V
        outer = 0.5 * self.eps * self.V * self.V + self.V * self.eps * over + 0.5 * self.r * over * over
        return _ret(np.where(a <= self.V, 0.5 * self.eps * a * a, outer))

    @property
    def rigidity(self):
        return self.V

    def __str__(self):
        return f"pwl V={float(self.V)!r} eps={float(self.eps)!r} r={float(self.r)!r}"


@dataclass(frozen=True)
class PolynomialThreshold(Characteristic):
    """phi(v) = (v / V) ** (2 r + 1) with integer ``r``."""

    V: float
    r: int
    kind = "poly"

    def __post_init__(self):
        _positive("V", self.V)
        _positive("r", self.r)
        if not np.all(np.asarray(self.r) == np.round(self.r)):
            raise ValueError(f"r must be an integer, got {self.r!r}")

    @property
    def _p(self):
        return 2 * np.asarray(self.r, dtype=float) + 1

    def forward(self, v):
        v = np.asarray(v, dtype=float)
        return _ret(np.sign(v) * (np.abs(v) / self.V) ** self._p)

    def derivative(self, v):
        a = np.abs(np.asarray(v, dtype=float))
        p = self._p
        return _ret(p / self.V * (a / self.V) ** (p - 1))

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        return _ret(np.sign(u) * self.V * np.abs(u) ** (1.0 / self._p))

    def primitive(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        p = self._p
        return _ret(self.V * p / (p + 1) * a ** ((p + 1) / p))

    def cocontent(self, v):
        a = np.abs(np.asarray(v, dtype=float))
        p = self._p
        return _ret(self.V / (p + 1) * (a / self.V) ** (p + 1))

    @property
    def rigidity(self):
        return self.V

    def __str__(self):
        return f"poly V={float(self.V)!r} r={int(self.r)}"


@dataclass(frozen=True)
class IdealThreshold(Characteristic):
    """The sharp limit law. Only its inverse and primitive are defined."""

    V: float
    kind = "ideal"

    def __post_init__(self):
        _positive("V", self.V)

    def inverse(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u == 0):
            raise MultivaluedInverseError("ideal threshold inverse at u=0 is the whole interval [-V, V]")
        return _ret(np.sign(u) * self.V)

    def primitive(self, u):
        return _ret(self.V * np.abs(np.asarray(u, dtype=float)))

    @property
    def rigidity(self):
        return self.V

    @property
    def evaluable(self):
        return False

    def __str__(self):
        return f"ideal V={float(self.V)!r}"


KINDS = {
    "linear": (Linear, {"R": float}),
    "pwl": (PiecewiseThreshold, {"V": float, "eps": float, "r": float}),
    "poly": (PolynomialThreshold, {"V": float, "r": int}),
    "ideal": (IdealThreshold, {"V": float}),
}

_PARAM = re.compile(r"^(\w+)=(\S+)$")


def parse_characteristic(text: str) -> Characteristic:
    """Parse ``"pwl V=0.5 eps=1e-5 r=800"`` style strings."""
    tokens = text.split()
    if not tokens or tokens[0] not in KINDS:
        raise ValueError(f"unknown characteristic: {text!r}")
    cls, schema = KINDS[tokens[0]]
    params = {}
    for tok in tokens[1:]:
        match = _PARAM.match(tok)
        if not match or match.group(1) not in schema:
            raise ValueError(f"bad parameter {tok!r} in {text!r}")
        params[match.group(1)] = schema[match.group(1)](match.group(2))
    missing = set(schema) - set(params)
    if missing:
        raise ValueError(f"missing parameters {sorted(missing)} in {text!r}")
    return cls(**params)


def format_characteristic(char: Characteristic) -> str:
    return str(char)


class LinkLaws:
    """Vectorised evaluation of one characteristic per link.

    Links are grouped by law type; each group is evaluated by a single
    instance whose parameters are arrays.
    """

    def __init__(self, chars):
        self.m = len(chars)
        groups: dict[type, list[int]] = {}
        for k, c in enumerate(chars):
            groups.setdefault(type(c), []).append(k)
        self._groups = []
        for cls, idx in groups.items():
            members = [chars[k] for k in idx]
            params = {f.name: np.array([getattr(c, f.name) for c in members], dtype=float) for f in fields(cls)}
            self._groups.append((np.asarray(idx), cls(**params)))
        self.kinds = frozenset(cls.kind for cls in groups)

    @property
    def evaluable(self) -> bool:
        return "ideal" not in self.kinds

    @property
    def all_linear(self) -> bool:
        return self.kinds <= {"linear"}

    def _apply(self, method, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise ValueError(f"expected shape ({self.m},), got {x.shape}")
        out = np.empty(self.m)
        for idx, law in self._groups:
            out[idx] = getattr(law, method)(x[idx])
        return out

    def forward(self, x):
        return self._apply("forward", x)

    def derivative(self, x):
        return self._apply("derivative", x)

    def inverse(self, u):
        return self._apply("inverse", u)

    def primitive(self, u):
        return self._apply("primitive", u)

    def cocontent(self, x):
        return self._apply("cocontent", x)
