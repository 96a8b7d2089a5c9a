"""Bathymetries, reference constants, initial data and manufactured solutions.

Sign conventions: the bottom sits at ``z = -beta(x)``, ``eta`` is the
free-surface elevation, ``H = d = beta + eta`` is the water depth. The
momentum equation is ``u_t + g eta_x + u u_x = 0``; ``g = 1`` gives the
nondimensional system.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import InvalidArgumentError

GRAVITY = 9.812

Fn = Callable[[np.ndarray], np.ndarray]
FnXT = Callable[[np.ndarray, float], np.ndarray]


class Formulation(enum.Enum):
    DIRICHLET_VELOCITY = "dirichlet_velocity"
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value) -> "Formulation":
        if isinstance(value, cls):
            return value
        aliases = {"supercritical_char": "supercritical", "subcritical_char": "subcritical",
                   "periodic_balance_law": "periodic", "balance_law": "periodic",
                   "dirichlet": "dirichlet_velocity"}
        key = str(value).lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise InvalidArgumentError(f"unknown formulation {value!r}") from None


@dataclass(frozen=True, eq=False)
class Bathymetry:
    kind: str
    params: dict
    beta: Fn
    dbeta: Fn
    left: float = 0.0
    right: float = 1.0
    far_depth: float = 1.0
    kinks: tuple = ()

    def __post_init__(self):
        x = np.linspace(self.left, self.right, 10001)
        if not np.min(self.beta(x)) > 0.0:
            raise InvalidArgumentError(f"{self.kind} bathymetry is not positive on the domain")

    def __call__(self, x):
        return self.beta(x)


def _const(value: float) -> Fn:
    return lambda x: np.full(np.shape(x), float(value))


def bathy_flat(depth: float = 1.0, left: float = 0.0, right: float = 1.0) -> Bathymetry:
    if depth <= 0:
        raise InvalidArgumentError("depth must be positive")
    return Bathymetry("flat", {"depth": depth}, _const(depth), _const(0.0),
                      left, right, far_depth=depth)


def bathy_gaussian(depth: float = 1.0, amp: float = 0.04, rate: float = 100.0,
                   center: float = 0.5, left: float = 0.0, right: float = 1.0) -> Bathymetry:
    """beta(x) = depth - amp * exp(-rate (x - center)^2)."""
    if depth - abs(amp) <= 0:
        raise InvalidArgumentError("minimum depth must be positive")

    def beta(x):
        return depth - amp * np.exp(-rate * (np.asarray(x) - center) ** 2)

    def dbeta(x):
        s = np.asarray(x) - center
        return 2.0 * amp * rate * s * np.exp(-rate * s * s)

    return Bathymetry("gaussian", dict(depth=depth, amp=amp, rate=rate, center=center),
                      beta, dbeta, left, right, far_depth=depth)


def bathy_trapezoid(L: float = 1e6, delta0: float = 500.0, kappa: float | None = None,
                    c: float = 1.0, h0: float = 1000.0) -> Bathymetry:
    """Depth ``h0`` minus a trapezoidal ridge of height ``delta0`` centred at L/2.

    The ridge top spans ``kappa``; its ramps reach out to ``c * kappa`` on
    either side of the centre. Slopes at kinks are right limits.
    """
    kappa = L / 10 if kappa is None else kappa
    if c <= 0.5:
        raise InvalidArgumentError("need c > 1/2 for nondegenerate ramps")
    if h0 <= delta0:
        raise InvalidArgumentError("need h0 > delta0")
    slope = delta0 / (c * kappa - kappa / 2)
    mid = L / 2

    def ridge(x):
        s = np.asarray(x, dtype=float) - mid
        out = np.zeros_like(s)
        up = (s >= -c * kappa) & (s <= -kappa / 2)
        top = (s > -kappa / 2) & (s < kappa / 2)
        down = (s >= kappa / 2) & (s <= c * kappa)
        out[up] = slope * (s[up] + c * kappa)
        out[top] = delta0
        out[down] = -slope * (s[down] - c * kappa)
        return out

    def dridge(x):
        s = np.asarray(x, dtype=float) - mid
        out = np.zeros_like(s)
        out[(s >= -c * kappa) & (s < -kappa / 2)] = slope
        out[(s >= kappa / 2) & (s < c * kappa)] = -slope
        return out

    kinks = (mid - c * kappa, mid - kappa / 2, mid + kappa / 2, mid + c * kappa)
    return Bathymetry("trapezoid", dict(L=L, delta0=delta0, kappa=kappa, c=c, h0=h0),
                      lambda x: h0 - ridge(x), lambda x: -dridge(x),
                      0.0, L, far_depth=h0, kinks=kinks)


def bathy_cosine(L: float = 1e6, delta: float = 5000.0, kappa: float | None = None,
                 h0: float = 1e4) -> Bathymetry:
    """Depth ``h0`` minus a raised-cosine hump of height ``delta`` and half-width kappa."""
    kappa = L / 10 if kappa is None else kappa
    if h0 <= delta:
        raise InvalidArgumentError("need h0 > delta")
    mid = L / 2

    def hump(x):
        s = np.asarray(x, dtype=float) - mid
        return np.where(np.abs(s) < kappa, 0.5 * delta * (1 + np.cos(np.pi * s / kappa)), 0.0)

    def dhump(x):
        s = np.asarray(x, dtype=float) - mid
        slope = -0.5 * delta * np.pi / kappa * np.sin(np.pi * s / kappa)
        return np.where(np.abs(s) < kappa, slope, 0.0)

    return Bathymetry("cosine", dict(L=L, delta=delta, kappa=kappa, h0=h0),
                      lambda x: h0 - hump(x), lambda x: -dhump(x),
                      0.0, L, far_depth=h0, kinks=(mid - kappa, mid + kappa))


def bathy_periodic(depth: float = 1.0, amp: float = 0.05, left: float = 0.0,
                   right: float = 1.0) -> Bathymetry:
    """beta(x) = depth + amp cos(2 pi x / length); smooth and periodic."""
    k = 2 * np.pi / (right - left)
    return Bathymetry("periodic_cosine", dict(depth=depth, amp=amp),
                      lambda x: depth + amp * np.cos(k * (np.asarray(x) - left)),
                      lambda x: -amp * k * np.sin(k * (np.asarray(x) - left)),
                      left, right, far_depth=depth)


def make_bathymetry(kind: str, **params) -> Bathymetry:
    builders = {"flat": bathy_flat, "gaussian": bathy_gaussian, "trapezoid": bathy_trapezoid,
                "cosine": bathy_cosine, "periodic_cosine": bathy_periodic}
    try:
        builder = builders[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown bathymetry kind {kind!r}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidArgumentError(f"bad parameters for {kind} bathymetry: {exc}") from None


@dataclass(frozen=True, eq=False)
class ManufacturedSolution:
    """Closed-form (eta, u) with partial derivatives; forcings follow from them.

    ``forcing_eta = eta_t + ((beta + eta) u)_x`` and
    ``forcing_u = u_t + g eta_x + u u_x``; the other formulations combine
    these two (see ``semidiscrete``).
    """

    eta: FnXT
    u: FnXT
    eta_t: FnXT
    eta_x: FnXT
    u_t: FnXT
    u_x: FnXT
    bathymetry: Bathymetry
    g: float = 1.0
    extras: dict = field(default_factory=dict)

    def forcing(self, x, t, beta=None, dbeta=None) -> tuple:
        """Residuals (F_eta, F_u) of the exact solution; bottom values may be passed in."""
        b = self.bathymetry.beta(x) if beta is None else beta
        db = self.bathymetry.dbeta(x) if dbeta is None else dbeta
        eta, u = self.eta(x, t), self.u(x, t)
        eta_x, u_x = self.eta_x(x, t), self.u_x(x, t)
        fe = self.eta_t(x, t) + (db + eta_x) * u + (b + eta) * u_x
        fu = self.u_t(x, t) + self.g * eta_x + u * u_x
        return fe, fu

    def forcing_eta(self, x, t):
        return self.forcing(x, t)[0]

    def forcing_u(self, x, t):
        return self.forcing(x, t)[1]


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    formulation: Formulation
    bathymetry: Bathymetry
    eta0: float = 0.0
    u0: float = 0.0
    H0: float | None = None
    g: float = 1.0
    eta_init: Fn | None = None
    u_init: Fn | None = None
    manufactured: ManufacturedSolution | None = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "formulation", Formulation.parse(self.formulation))
        if self.H0 is None:
            object.__setattr__(self, "H0", self.bathymetry.far_depth + self.eta0)
        if self.eta_init is None:
            object.__setattr__(self, "eta_init", _const(self.eta0))
        if self.u_init is None:
            object.__setattr__(self, "u_init", _const(self.u0))
        if self.g <= 0:
            raise InvalidArgumentError("gravity must be positive")
        x = np.linspace(self.left, self.right, 2001)
        if self.formulation is Formulation.SUPERCRITICAL:
            c = np.sqrt(self.g * (self.bathymetry.beta(x) + self.eta0))
            if not np.all(self.u0 > c):
                raise InvalidArgumentError(
                    "supercritical setup needs u0 > sqrt(g (beta + eta0)) on the domain")
        elif self.formulation is Formulation.SUBCRITICAL:
            if not (self.H0 > 0 and self.u0 ** 2 < self.g * self.H0):
                raise InvalidArgumentError("subcritical setup needs H0 > 0 and u0^2 < g H0")

    @property
    def left(self) -> float:
        return self.bathymetry.left

    @property
    def right(self) -> float:
        return self.bathymetry.right

    @property
    def delta0(self) -> float:
        """Far-field gravity-wave speed sqrt(g H0); sqrt(H0) when g = 1."""
        return math.sqrt(self.g * self.H0)

    @property
    def froude(self) -> float:
        return self.u0 / math.sqrt(self.g * self.bathymetry.far_depth)

    def with_(self, **changes) -> "ProblemConfig":
        return replace(self, **changes)


def manufactured_supercritical() -> ProblemConfig:
    eta0, u0 = 1.0, 3.0
    bathy = bathy_gaussian(1.0, 0.04, 100.0, 0.5)
    pi = np.pi

    def shape(x):
        return 1.0 - x - np.cos(pi * x)

    ms = ManufacturedSolution(
        eta=lambda x, t: x * np.exp(-x * t) + eta0,
        u=lambda x, t: shape(x) * np.exp(2 * t) + u0,
        eta_t=lambda x, t: -x * x * np.exp(-x * t),
        eta_x=lambda x, t: (1.0 - x * t) * np.exp(-x * t),
        u_t=lambda x, t: 2.0 * shape(x) * np.exp(2 * t),
        u_x=lambda x, t: (-1.0 + pi * np.sin(pi * x)) * np.exp(2 * t),
        bathymetry=bathy,
    )
    return ProblemConfig(Formulation.SUPERCRITICAL, bathy, eta0=eta0, u0=u0, g=1.0,
                         eta_init=lambda x: ms.eta(x, 0.0), u_init=lambda x: ms.u(x, 0.0),
                         manufactured=ms, name="manufactured_supercritical")


def manufactured_subcritical() -> ProblemConfig:
    eta0, u0 = 1.0, 1.0
    bathy = bathy_gaussian(1.0, 0.04, 100.0, 0.5)
    pi = np.pi

    def eta(x, t):
        return (x + 1.0) * np.exp(-x * t)

    def A(t):
        return 2 * math.sqrt(1 + 2 * math.exp(-t)) + u0 - 2 * math.sqrt(1 + eta0)

    def dA(t):
        return -2 * math.exp(-t) / math.sqrt(1 + 2 * math.exp(-t))

    def B(t):
        return -2 * math.sqrt(1 + 1.0) + u0 + 2 * math.sqrt(1 + eta0)

    def shape(x):
        return 2 * x + np.cos(pi * x) - 1.0

    ms = ManufacturedSolution(
        eta=eta,
        u=lambda x, t: shape(x) * math.exp(t) + x * A(t) + (1 - x) * B(t),
        eta_t=lambda x, t: -x * (x + 1.0) * np.exp(-x * t),
        eta_x=lambda x, t: (1.0 - (x + 1.0) * t) * np.exp(-x * t),
        # B is constant because eta(0, t) = 1 for all t
        u_t=lambda x, t: shape(x) * math.exp(t) + x * dA(t),
        u_x=lambda x, t: (2.0 - pi * np.sin(pi * x)) * math.exp(t) + A(t) - B(t),
        bathymetry=bathy,
        extras={"A": A, "B": B},
    )
    return ProblemConfig(Formulation.SUBCRITICAL, bathy, eta0=eta0, u0=u0, H0=1.0 + eta0,
                         g=1.0, eta_init=lambda x: ms.eta(x, 0.0), u_init=lambda x: ms.u(x, 0.0),
                         manufactured=ms, name="manufactured_subcritical")


def manufactured_periodic(g: float = 1.0) -> ProblemConfig:
    """Smooth travelling-wave solution of the periodic balance-law problem."""
    bathy = bathy_periodic(1.0, 0.05)
    k = 2 * np.pi
    w = 2 * np.pi

    def beta(x):
        return bathy.beta(x)

    ms = ManufacturedSolution(
        eta=lambda x, t: 0.2 + 0.1 * np.sin(k * x - w * t) - (beta(x) - 1.0),
        u=lambda x, t: 0.3 + 0.1 * np.cos(k * x - w * t),
        eta_t=lambda x, t: -0.1 * w * np.cos(k * x - w * t),
        eta_x=lambda x, t: 0.1 * k * np.cos(k * x - w * t) - bathy.dbeta(x),
        u_t=lambda x, t: 0.1 * w * np.sin(k * x - w * t),
        u_x=lambda x, t: -0.1 * k * np.sin(k * x - w * t),
        bathymetry=bathy,
        g=g,
    )
    return ProblemConfig(Formulation.PERIODIC, bathy, g=g,
                         eta_init=lambda x: ms.eta(x, 0.0), u_init=lambda x: ms.u(x, 0.0),
                         manufactured=ms, name="manufactured_periodic")


def gaussian_pulse(base: float, amp: float, rate: float, center: float,
                   scale: float = 1.0) -> Fn:
    """x -> base + amp exp(-rate ((x - center) / scale)^2)."""
    return lambda x: base + amp * np.exp(-rate * ((np.asarray(x) - center) / scale) ** 2)


def hump_supercritical() -> ProblemConfig:
    """Constant inflow state over a deep Gaussian hollow of the bottom."""
    return ProblemConfig(Formulation.SUPERCRITICAL, bathy_gaussian(1.0, 0.4, 100.0, 0.5),
                         eta0=1.0, u0=3.0, name="hump_supercritical")


def wavetrain_supercritical() -> ProblemConfig:
    return ProblemConfig(Formulation.SUPERCRITICAL, bathy_gaussian(1.0, 0.04, 1000.0, 0.75),
                         eta0=1.0, u0=3.0,
                         eta_init=gaussian_pulse(1.0, 0.05, 400.0, 0.25),
                         u_init=gaussian_pulse(3.0, 0.1, 400.0, 0.25),
                         name="wavetrain_supercritical")


def hump_subcritical() -> ProblemConfig:
    return ProblemConfig(Formulation.SUBCRITICAL, bathy_gaussian(1.0, 0.04, 100.0, 0.5),
                         eta0=1.0, u0=1.0, name="hump_subcritical")


def wavetrain_subcritical() -> ProblemConfig:
    return ProblemConfig(Formulation.SUBCRITICAL, bathy_gaussian(1.0, 0.04, 100.0, 0.75),
                         eta0=1.0, u0=1.0,
                         eta_init=gaussian_pulse(1.0, 0.05, 400.0, 0.5),
                         u_init=gaussian_pulse(1.0, 0.1, 400.0, 0.5), name="wavetrain_subcritical")


def trapezoid_supercritical(froude: float = 2.0, c: float = 1.0, L: float = 1e6,
                            delta0: float = 500.0, h0: float = 1000.0,
                            g: float = GRAVITY) -> ProblemConfig:
    bathy = bathy_trapezoid(L, delta0, L / 10, c, h0)
    u0 = froude * math.sqrt(g * h0)
    return ProblemConfig(Formulation.SUPERCRITICAL, bathy, eta0=0.0, u0=u0, g=g,
                         name="trapezoid_supercritical")


def cosine_subcritical(L: float = 1e6, delta: float = 5000.0, h0: float = 1e4,
                       epsilon: float = 0.2, g: float = GRAVITY) -> ProblemConfig:
    bathy = bathy_cosine(L, delta, L / 10, h0)
    # initial elevation exactly as printed, including the inner division by 10
    eta_init = gaussian_pulse(0.0, 0.2 * epsilon * h0, 5e-8, 3 * L / 20, scale=10.0)
    return ProblemConfig(Formulation.SUBCRITICAL, bathy, eta0=0.0, u0=0.0, H0=h0, g=g,
                         eta_init=eta_init, name="cosine_subcritical")


def lake_at_rest(amp: float = 0.3, rate: float = 1000.0) -> ProblemConfig:
    bathy = bathy_gaussian(1.0, amp, rate, 0.5)
    return ProblemConfig(Formulation.PERIODIC, bathy, name="lake_at_rest")


PRESETS = {
    "manufactured_supercritical": manufactured_supercritical,
    "manufactured_subcritical": manufactured_subcritical,
    "manufactured_periodic": manufactured_periodic,
    "hump_supercritical": hump_supercritical,
    "wavetrain_supercritical": wavetrain_supercritical,
    "hump_subcritical": hump_subcritical,
    "wavetrain_subcritical": wavetrain_subcritical,
    "trapezoid_supercritical": trapezoid_supercritical,
    "cosine_subcritical": cosine_subcritical,
    "lake_at_rest": lake_at_rest,
}


def preset(name: str, **params) -> ProblemConfig:
    try:
        builder = PRESETS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown preset {name!r}") from None
    return builder(**params)


@dataclass
class CriticalityReport:
    passed: bool
    margins: dict
    worst_x: dict

    def __str__(self):
        parts = [f"{k}: margin {v:.4g} at x={self.worst_x[k]:.4g}" for k, v in self.margins.items()]
        return ("PASS" if self.passed else "FAIL") + " (" + "; ".join(parts) + ")"


def _sample(f, x):
    return f(x) if callable(f) else np.full_like(x, float(f))


def _report(margins_arr: dict, x) -> CriticalityReport:
    margins, worst = {}, {}
    for key, m in margins_arr.items():
        i = int(np.argmin(m))
        margins[key] = float(m[i])
        worst[key] = float(x[i])
    return CriticalityReport(all(v >= 0 for v in margins.values()), margins, worst)


def check_supercriticality(eta_h, u_h, cfg: ProblemConfig, a: float, b: float,
                           samples: int = 4001) -> CriticalityReport:
    """Strengthened supercriticality: depth >= b, u >= 2a, depth <= (u - a)(u - 2a/3).

    ``eta_h``/``u_h`` are physical elevation and velocity (callables, CoefVecs
    or constants); depth uses ``g (beta + eta)`` so the test is dimension-aware.
    """
    x = np.linspace(cfg.left, cfg.right, samples)
    depth = cfg.g * (cfg.bathymetry.beta(x) + _sample(eta_h, x))
    u = _sample(u_h, x)
    return _report({
        "depth_lower": depth - b,
        "velocity_lower": u - 2 * a,
        "depth_upper": (u - a) * (u - 2 * a / 3) - depth,
    }, x)


def check_subcriticality(eta_h, u_h, cfg: ProblemConfig, c0: float,
                         samples: int = 4001) -> CriticalityReport:
    """u + sqrt(gH) >= c0 and u - sqrt(gH) <= -c0 on a dense grid."""
    x = np.linspace(cfg.left, cfg.right, samples)
    c = np.sqrt(cfg.g * (cfg.bathymetry.beta(x) + _sample(eta_h, x)))
    u = _sample(u_h, x)
    return _report({"lambda1": u + c - c0, "lambda2": -(u - c) - c0}, x)
