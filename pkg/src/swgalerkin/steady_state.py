"""Analytic steady flows over a variable bottom.

A steady state carries constant discharge ``Q = (beta + eta) u`` and constant
head ``E = g eta + u^2/2``. Eliminating ``u`` gives, for the depth ``H``,

    g H^3 - (E + g beta) H^2 + Q^2/2 = 0,

whose positive roots straddle ``H* = 2 (E + g beta) / (3 g)``: the root below
is the supercritical one, the root above the subcritical one. Both exist
only while the bottom stays below the critical level.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NoSteadyStateError
from .mesh_space import make_uniform_mesh, make_perturbed_mesh
from .problems import GRAVITY, Bathymetry, Formulation, ProblemConfig
from .time_integration import run


class Branch(enum.Enum):
    SUPERCRITICAL = "supercritical"
    SUBCRITICAL = "subcritical"

    @classmethod
    def parse(cls, value) -> "Branch":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown branch {value!r}") from None


def _cubic(H, a, g, Q):
    return g * H ** 3 - a * H ** 2 + 0.5 * Q * Q


def _solve_depth(a: np.ndarray, g: float, Q: float, branch: Branch,
                 max_iter: int = 200) -> np.ndarray:
    """Bracketed Newton with bisection fallback, vectorised over x."""
    Hs = 2.0 * a / (3.0 * g)
    if branch is Branch.SUPERCRITICAL:
        lo, hi = np.zeros_like(a), Hs.copy()
        H = np.abs(Q) / np.sqrt(2.0 * np.maximum(a, 1e-300))  # kinetic-dominated guess
    else:
        lo, hi = Hs.copy(), a / g
        H = a / g
    # f(lo) and f(hi) have fixed signs on each branch
    lo_sign = 1.0 if branch is Branch.SUPERCRITICAL else -1.0
    H = np.clip(H, lo, hi)
    for _ in range(max_iter):
        f = _cubic(H, a, g, Q)
        on_lo = np.sign(f) == lo_sign
        lo = np.where(on_lo, H, lo)
        hi = np.where(on_lo, hi, H)
        df = 3.0 * g * H * H - 2.0 * a * H
        with np.errstate(divide="ignore", invalid="ignore"):
            step = f / df
        Hn = H - step
        bad = ~np.isfinite(Hn) | (Hn <= lo) | (Hn >= hi)
        Hn = np.where(bad, 0.5 * (lo + hi), Hn)
        done = np.abs(Hn - H) <= 1e-15 * np.maximum(np.abs(H), 1e-300)
        H = Hn
        if np.all(done | (hi - lo <= 2e-16 * np.abs(H))):
            break
    return H


@dataclass(frozen=True, eq=False)
class SteadyProfile:
    """Steady (eta, u) over ``bathymetry`` with inflow data (eta0, u0) at the left end."""

    bathymetry: Bathymetry
    eta0: float
    u0: float
    g: float
    branch: Branch

    @property
    def discharge(self) -> float:
        b = self.bathymetry
        return self.u0 * (self.eta0 + float(b.beta(np.array([b.left]))[0]))

    @property
    def head(self) -> float:
        return self.g * self.eta0 + 0.5 * self.u0 ** 2

    def depth(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        a = self.head + self.g * self.bathymetry.beta(x)
        return _solve_depth(np.atleast_1d(a), self.g, self.discharge, self.branch).reshape(x.shape)

    def eta(self, x) -> np.ndarray:
        return self.depth(x) - self.bathymetry.beta(np.asarray(x, dtype=float))

    def u(self, x) -> np.ndarray:
        return self.discharge / self.depth(x)

    def residual(self, x) -> np.ndarray:
        """Cubic residual scaled by Q^2/2 + g H^3."""
        x = np.asarray(x, dtype=float)
        H = self.depth(x)
        a = self.head + self.g * self.bathymetry.beta(x)
        Q = self.discharge
        return _cubic(H, a, self.g, Q) / (0.5 * Q * Q + self.g * H ** 3)


def critical_beta(eta0: float, u0: float, beta_left: float, g: float = 1.0) -> float:
    """Smallest bottom value below the surface that still admits smooth steady flow."""
    Q = u0 * (eta0 + beta_left)
    Hc = (Q * Q / g) ** (1.0 / 3.0)
    E = g * eta0 + 0.5 * u0 ** 2
    return 1.5 * Hc - E / g


def solve_steady(bathymetry: Bathymetry, eta0: float, u0: float, g: float = 1.0,
                 branch="supercritical", samples: int = 20001) -> SteadyProfile:
    """Steady profile on the requested branch.

    Raises NoSteadyStateError if the bottom rises above the critical level
    anywhere (checked on ``samples`` points and at the bottom's kinks).
    """
    branch = Branch.parse(branch)
    if not g > 0:
        raise InvalidArgumentError("gravity must be positive")
    beta0 = float(bathymetry.beta(np.array([bathymetry.left]))[0])
    H0 = eta0 + beta0
    if not H0 > 0:
        raise InvalidArgumentError("inflow depth must be positive")
    fr2 = u0 * u0 / (g * H0)
    if branch is Branch.SUPERCRITICAL and not fr2 > 1:
        raise InvalidArgumentError("supercritical branch needs u0^2 > g (eta0 + beta(0))")
    if branch is Branch.SUBCRITICAL and not fr2 < 1:
        raise InvalidArgumentError("subcritical branch needs u0^2 < g (eta0 + beta(0))")
    bc = critical_beta(eta0, u0, beta0, g)
    x = np.linspace(bathymetry.left, bathymetry.right, samples)
    x = np.union1d(x, np.asarray(bathymetry.kinks, dtype=float))
    bmin = float(np.min(bathymetry.beta(x)))
    if bmin < bc:
        raise NoSteadyStateError(
            f"bottom reaches beta={bmin:.6g}, below the critical value {bc:.6g}: "
            "no smooth steady state", critical_beta=bc)
    return SteadyProfile(bathymetry, float(eta0), float(u0), float(g), branch)


@dataclass
class PreservationReport:
    drift: np.ndarray
    N: int
    T: float
    dt: float

    @property
    def eta(self) -> float:
        return float(self.drift[0])

    @property
    def u(self) -> float:
        return float(self.drift[1])


def steady_preservation_test(profile: SteadyProfile, formulation=None, N: int = 400,
                             r: int = 2, ratio: float = 0.1, T: float = 0.6,
                             tableau="rk4", perturbation: float = 0.0,
                             seed: int = 0) -> PreservationReport:
    """Start from the projected profile, integrate to T and report the L2 drift of (eta, u)."""
    if formulation is None:
        formulation = (Formulation.SUPERCRITICAL if profile.branch is Branch.SUPERCRITICAL
                       else Formulation.SUBCRITICAL)
    formulation = Formulation.parse(formulation)
    expected = {Branch.SUPERCRITICAL: Formulation.SUPERCRITICAL,
                Branch.SUBCRITICAL: Formulation.SUBCRITICAL}[profile.branch]
    if formulation is not expected:
        raise InvalidArgumentError(
            f"{profile.branch.value} profile needs the {expected.value} formulation")
    bathy = profile.bathymetry
    cfg = ProblemConfig(formulation, bathy, eta0=profile.eta0, u0=profile.u0, g=profile.g,
                        eta_init=profile.eta, u_init=profile.u, name="steady_profile")
    if perturbation:
        mesh = make_perturbed_mesh(N, bathy.left, bathy.right, perturbation, seed)
    else:
        mesh = make_uniform_mesh(N, bathy.left, bathy.right)
    res = run(cfg, mesh, r=r, tableau=tableau, ratio=ratio, T=T)
    drift = res.scheme.physical_difference(res.final.y, res.initial.y)
    return PreservationReport(drift, N, T, res.dt)


__all__ = ["Branch", "SteadyProfile", "solve_steady", "critical_beta",
           "steady_preservation_test", "PreservationReport", "GRAVITY"]
