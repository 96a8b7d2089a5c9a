"""Standard Galerkin semidiscretizations of the shallow water equations.

Each scheme owns its finite element spaces, quadrature data and factored mass
matrices, and maps a flat coefficient vector ``y`` to ``dy/dt``. Nonlinear
terms are formed pointwise at the Gauss points from spline values and spline
derivatives; with ``flux_form="weak"`` the balance-law fluxes are instead
tested against derivatives of the basis (integration by parts, no boundary
terms in the periodic setting).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import (MAX_GAUSS_POINTS, gauss_rule, l2_project,
                       space_quadrature)
from .errors import DryStateError, InvalidArgumentError
from .mesh_space import Constraint, CoefVec, Mesh, make_space
from .problems import Formulation, ProblemConfig

DEPTH_FLOOR = 1e-10


@dataclass
class SimState:
    t: float
    y: np.ndarray
    spaces: tuple

    @property
    def fields(self) -> tuple:
        out, i = [], 0
        for V in self.spaces:
            out.append(CoefVec(V, self.y[i:i + V.dim]))
            i += V.dim
        return tuple(out)

    def copy(self) -> "SimState":
        return SimState(self.t, self.y.copy(), self.spaces)


class Scheme:
    """Common machinery: spaces, quadrature, mass matrices, field layout."""

    formulation: Formulation
    field_names: tuple = ()

    def __init__(self, cfg: ProblemConfig, mesh: Mesh, r: int = 2,
                 continuity: int | None = None, s: int | None = None):
        if cfg.formulation is not self.formulation:
            raise InvalidArgumentError(
                f"{type(self).__name__} cannot run a {cfg.formulation.value} problem")
        if abs(mesh.left - cfg.left) > 1e-12 * max(1.0, abs(cfg.right)) or \
                abs(mesh.right - cfg.right) > 1e-12 * max(1.0, abs(cfg.right)):
            raise InvalidArgumentError("mesh does not cover the problem domain")
        self.cfg = cfg
        self.mesh = mesh
        self.r = r
        self.continuity = r - 2 if continuity is None else continuity
        self.rule = gauss_rule(r + 1 if s is None else s)
        # fields sharing a constraint share one space object so data is reused
        uniq = {}
        for c in self.constraints():
            if c not in uniq:
                uniq[c] = make_space(mesh, r, self.continuity, c)
        self.spaces = tuple(uniq[c] for c in self.constraints())
        self.sq = tuple(space_quadrature(V, self.rule) for V in self.spaces)
        self.x = self.sq[0].x
        self.beta = cfg.bathymetry.beta(self.x)
        self.dbeta = cfg.bathymetry.dbeta(self.x)
        self.sizes = tuple(V.dim for V in self.spaces)
        self.offsets = np.cumsum((0,) + self.sizes)
        self.ms = cfg.manufactured

    def constraints(self) -> tuple:
        raise NotImplementedError

    @property
    def dim(self) -> int:
        return int(self.offsets[-1])

    def split(self, y: np.ndarray) -> tuple:
        return tuple(y[self.offsets[i]:self.offsets[i + 1]] for i in range(len(self.sizes)))

    def state(self, t: float, *coefs) -> SimState:
        return SimState(t, np.concatenate(coefs), self.spaces)

    def initial_state(self, t: float = 0.0) -> SimState:
        raise NotImplementedError

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rhs_state(self, state: SimState) -> tuple:
        dy = self.rhs(state.t, state.y)
        return SimState(state.t, dy, self.spaces).fields

    def _solve(self, loads: list) -> np.ndarray:
        return np.concatenate([sq.mass.solve(b) for sq, b in zip(self.sq, loads)])

    # physical variables ---------------------------------------------------
    def physical_at(self, y: np.ndarray, sqs) -> tuple:
        """(eta, u) at the points of per-field quadrature data ``sqs``."""
        raise NotImplementedError

    def physical(self, y: np.ndarray, x) -> tuple:
        raise NotImplementedError

    def field_norms(self, y: np.ndarray) -> np.ndarray:
        return np.array([np.sqrt(max(c @ sq.mass.matvec(c), 0.0))
                         for c, sq in zip(self.split(y), self.sq)])

    def error_quadrature(self, s: int | None = None):
        rule = gauss_rule(min(MAX_GAUSS_POINTS, self.r + 3) if s is None else s)
        return tuple(space_quadrature(V, rule) for V in self.spaces)

    def nodal_weights(self) -> np.ndarray:
        """Discrete L2 weights at the mesh nodes; all equal to h on a uniform mesh."""
        h = self.mesh.widths
        return np.concatenate([[h[0]], 0.5 * (h[:-1] + h[1:]), [h[-1]]])

    def errors(self, y: np.ndarray, t: float, eta_exact=None, u_exact=None,
               norm: str = "quadrature") -> dict:
        """L2 errors of the physical (eta, u) against exact callables of (x, t).

        ``norm="quadrature"`` integrates with r+3 Gauss points per element;
        ``norm="nodal"`` is the discrete norm ``sqrt(sum_i w_i e(x_i)^2)`` over
        the mesh nodes.
        """
        if eta_exact is None:
            if self.ms is None:
                raise InvalidArgumentError("no exact solution available")
            eta_exact, u_exact = self.ms.eta, self.ms.u
        if norm == "nodal":
            x, w = self.mesh.nodes, self.nodal_weights()
            eta, u = self.physical(y, x)
        elif norm == "quadrature":
            sqs = self.error_quadrature()
            eta, u = self.physical_at(y, sqs)
            x, w = sqs[0].x, sqs[0].wJ
        else:
            raise InvalidArgumentError(f"unknown norm {norm!r}")
        e1 = eta - eta_exact(x, t)
        e2 = u - u_exact(x, t)
        return {"eta": float(np.sqrt(w @ (e1 * e1))), "u": float(np.sqrt(w @ (e2 * e2)))}

    def physical_norms(self, y: np.ndarray) -> np.ndarray:
        sqs = self.error_quadrature()
        eta, u = self.physical_at(y, sqs)
        w = sqs[0].wJ
        return np.array([np.sqrt(w @ (eta * eta)), np.sqrt(w @ (u * u))])

    def physical_difference(self, y1: np.ndarray, y2: np.ndarray) -> np.ndarray:
        """L2 norms of the (eta, u) differences between two states."""
        sqs = self.error_quadrature()
        a, b = self.physical_at(y1, sqs), self.physical_at(y2, sqs)
        w = sqs[0].wJ
        return np.array([np.sqrt(w @ ((p - q) ** 2)) for p, q in zip(a, b)])

    def _forcing(self, t: float):
        if self.ms is None:
            return 0.0, 0.0
        return self.ms.forcing(self.x, t, self.beta, self.dbeta)


class DirichletVelocityScheme(Scheme):
    """eta in the unconstrained space, u vanishing at both ends."""

    formulation = Formulation.DIRICHLET_VELOCITY
    field_names = ("eta", "u")

    def constraints(self):
        return (Constraint.FREE, Constraint.ZERO_BOTH)

    def initial_state(self, t: float = 0.0) -> SimState:
        eta = l2_project(self.spaces[0], self.cfg.eta_init, self.rule).coefficients
        u = l2_project(self.spaces[1], self.cfg.u_init, self.rule).coefficients
        return self.state(t, eta, u)

    def rhs(self, t, y):
        ce, cu = self.split(y)
        Se, Su = self.sq
        e, ex = Se.values_and_slopes(ce)
        u, ux = Su.values_and_slopes(cu)
        fe, fu = self._forcing(t)
        ge = fe - (ex * u + e * ux + self.dbeta * u + self.beta * ux)
        gu = fu - (self.cfg.g * ex + u * ux)
        return self._solve([Se.load(ge), Su.load(gu)])

    def physical_at(self, y, sqs):
        ce, cu = self.split(y)
        return sqs[0].values(ce), sqs[1].values(cu)

    def physical(self, y, x):
        ce, cu = self.split(y)
        return self.spaces[0].evaluate(ce, x), self.spaces[1].evaluate(cu, x)


class SupercriticalScheme(Scheme):
    """Deviations from the inflow constants, both vanishing at x = left."""

    formulation = Formulation.SUPERCRITICAL
    field_names = ("eta", "u")

    def constraints(self):
        return (Constraint.ZERO_LEFT, Constraint.ZERO_LEFT)

    def initial_state(self, t: float = 0.0) -> SimState:
        cfg, V = self.cfg, self.spaces[0]
        eta = l2_project(V, lambda x: cfg.eta_init(x) - cfg.eta0, self.rule).coefficients
        u = l2_project(V, lambda x: cfg.u_init(x) - cfg.u0, self.rule).coefficients
        return self.state(t, eta, u)

    def rhs(self, t, y):
        cfg = self.cfg
        S = self.sq[0]
        n = self.spaces[0].dim
        C = y.reshape(2, n).T
        vals, ders = S.values(C), S.values(C, 1)
        e, u = vals[:, 0], vals[:, 1]
        ex, ux = ders[:, 0], ders[:, 1]
        fe, fu = self._forcing(t)
        ge = fe - (cfg.u0 * ex + (self.beta + cfg.eta0) * ux + ex * u + e * ux
                   + (u + cfg.u0) * self.dbeta)
        gu = fu - (cfg.g * ex + cfg.u0 * ux + u * ux)
        rhs = S.ops_t[0] @ (S.wJ[:, None] * np.column_stack([ge, gu]))
        return S.mass.solve(rhs).T.ravel()

    def physical_at(self, y, sqs):
        ce, cu = self.split(y)
        return self.cfg.eta0 + sqs[0].values(ce), self.cfg.u0 + sqs[0].values(cu)

    def physical(self, y, x):
        ce, cu = self.split(y)
        V = self.spaces[0]
        return self.cfg.eta0 + V.evaluate(ce, x), self.cfg.u0 + V.evaluate(cu, x)


class SubcriticalScheme(Scheme):
    """Diagonal (Riemann-variable) scheme: v vanishes on the left, w on the right.

    With ``c = sqrt(g H)`` and ``delta0 = sqrt(g H0)``:
    ``v = (u - u0)/2 + (c - delta0)``, ``w = (u - u0)/2 - (c - delta0)``.
    """

    formulation = Formulation.SUBCRITICAL
    field_names = ("v", "w")

    def constraints(self):
        return (Constraint.ZERO_LEFT, Constraint.ZERO_RIGHT)

    def to_riemann(self, H, u):
        cfg = self.cfg
        c = np.sqrt(cfg.g * H)
        v = 0.5 * (u - cfg.u0) + (c - cfg.delta0)
        w = 0.5 * (u - cfg.u0) - (c - cfg.delta0)
        return v, w

    def from_riemann(self, v, w):
        cfg = self.cfg
        c = 0.5 * (v - w) + cfg.delta0
        return c * c / cfg.g, v + w + cfg.u0

    def initial_state(self, t: float = 0.0) -> SimState:
        cfg = self.cfg

        def H(x):
            return cfg.bathymetry.beta(x) + cfg.eta_init(x)

        v = l2_project(self.spaces[0], lambda x: self.to_riemann(H(x), cfg.u_init(x))[0], self.rule)
        w = l2_project(self.spaces[1], lambda x: self.to_riemann(H(x), cfg.u_init(x))[1], self.rule)
        return self.state(t, v.coefficients, w.coefficients)

    def _forcing(self, t):
        if self.ms is None:
            return 0.0, 0.0
        g = self.cfg.g
        fe, fu = self.ms.forcing(self.x, t, self.beta, self.dbeta)
        c = np.sqrt(g * (self.beta + self.ms.eta(self.x, t)))
        return 0.5 * fu + 0.5 * g / c * fe, 0.5 * fu - 0.5 * g / c * fe

    def rhs(self, t, y):
        cfg = self.cfg
        cv, cw = self.split(y)
        Sv, Sw = self.sq
        v, vx = Sv.values_and_slopes(cv)
        w, wx = Sw.values_and_slopes(cw)
        fv, fw = self._forcing(t)
        src = 0.5 * cfg.g * self.dbeta
        gv = src + fv - (cfg.u0 + cfg.delta0 + 1.5 * v + 0.5 * w) * vx
        gw = src + fw - (cfg.u0 - cfg.delta0 + 1.5 * w + 0.5 * v) * wx
        return self._solve([Sv.load(gv), Sw.load(gw)])

    def physical_at(self, y, sqs):
        cv, cw = self.split(y)
        H, u = self.from_riemann(sqs[0].values(cv), sqs[1].values(cw))
        return H - self.cfg.bathymetry.beta(sqs[0].x), u

    def physical(self, y, x):
        cv, cw = self.split(y)
        H, u = self.from_riemann(self.spaces[0].evaluate(cv, x), self.spaces[1].evaluate(cw, x))
        return H - self.cfg.bathymetry.beta(x), u

    def recover_physical(self, y):
        """Recovered depth, velocity and elevation.

        Returns ``(H, u, eta)``: ``u`` as a CoefVec in the unconstrained space
        (exact coefficient sum plus the constant), ``H`` and ``eta`` as
        pointwise evaluators; ``H.projected`` holds an L2-projected CoefVec.
        """
        cv, cw = self.split(y)
        V, W = self.spaces
        free = make_space(self.mesh, self.r, self.continuity, Constraint.FREE)
        cu = np.full(free.dim, self.cfg.u0)
        cu[1:] += cv
        cu[:-1] += cw

        def H(x):
            return self.from_riemann(V.evaluate(cv, x), W.evaluate(cw, x))[0]

        def eta(x):
            return H(x) - self.cfg.bathymetry.beta(x)

        H.projected = l2_project(free, H, self.rule)
        return H, CoefVec(free, cu), eta


class BalanceLawScheme(Scheme):
    """Periodic balance-law form advancing depth d and discharge q = d u.

    ``source_mode``: ``"analytic"`` uses beta' in the bottom source,
    ``"projected"`` uses the derivative of the spline approximation of beta
    (its L2 projection, or nodal interpolant with ``approx="interpolation"``).
    """

    formulation = Formulation.PERIODIC
    field_names = ("d", "q")

    def __init__(self, cfg, mesh, r=2, continuity=None, s=None, source_mode="projected",
                 approx="projection", flux_form="weak", depth_floor=DEPTH_FLOOR):
        super().__init__(cfg, mesh, r, continuity, s)
        if source_mode not in ("analytic", "projected"):
            raise InvalidArgumentError(f"unknown source mode {source_mode!r}")
        if approx not in ("projection", "interpolation"):
            raise InvalidArgumentError(f"unknown approximation {approx!r}")
        if flux_form not in ("weak", "pointwise"):
            raise InvalidArgumentError(f"unknown flux form {flux_form!r}")
        self.source_mode = source_mode
        self.approx = approx
        self.flux_form = flux_form
        self.depth_floor = depth_floor
        self.beta_h = self.approximate(cfg.bathymetry.beta)
        if source_mode == "projected":
            self.source_slope = self.sq[0].values(self.beta_h.coefficients, 1)
        else:
            self.source_slope = self.dbeta

    def constraints(self):
        return (Constraint.PERIODIC, Constraint.PERIODIC)

    def approximate(self, f) -> CoefVec:
        V = self.spaces[0]
        if self.approx == "interpolation":
            return V.interpolate_nodes(f)
        return l2_project(V, f, self.rule)

    def initial_state(self, t: float = 0.0) -> SimState:
        cfg, V = self.cfg, self.spaces[0]
        d = self.approximate(lambda x: cfg.bathymetry.beta(x) + cfg.eta_init(x))
        u = self.approximate(cfg.u_init)
        q = l2_project(V, lambda x: d(x) * u(x), self.rule)
        return self.state(t, d.coefficients, q.coefficients)

    def _forcing(self, t):
        if self.ms is None:
            return 0.0, 0.0
        fe, fu = self.ms.forcing(self.x, t, self.beta, self.dbeta)
        d = self.beta + self.ms.eta(self.x, t)
        return fe, self.ms.u(self.x, t) * fe + d * fu

    def rhs(self, t, y):
        g = self.cfg.g
        S = self.sq[0]
        n = self.spaces[0].dim
        C = y.reshape(2, n).T
        vals, ders = S.values(C), S.values(C, 1)
        d, q = vals[:, 0], vals[:, 1]
        dx, qx = ders[:, 0], ders[:, 1]
        if not np.min(d) > self.depth_floor:
            i = int(np.argmin(d))
            raise DryStateError(f"depth {d[i]:.3e} at x={self.x[i]:.6g}, t={t:.6g}")
        u = q / d
        fd, fq = self._forcing(t)
        source = g * self.source_slope * d + fq
        w = S.wJ[:, None]
        if self.flux_form == "weak":
            flux = q * u + 0.5 * g * d * d
            rhs = S.ops_t[1] @ (w * np.column_stack([q, flux])) \
                + S.ops_t[0] @ (w * np.column_stack([np.broadcast_to(fd, d.shape), source]))
        else:
            ux = (qx - u * dx) / d
            dflux = qx * u + q * ux + g * d * dx
            rhs = S.ops_t[0] @ (w * np.column_stack([fd - qx, source - dflux]))
        return S.mass.solve(rhs).T.ravel()

    def physical_at(self, y, sqs):
        cd, cq = self.split(y)
        d, q = sqs[0].values(cd), sqs[0].values(cq)
        return d - self.cfg.bathymetry.beta(sqs[0].x), q / d

    def physical(self, y, x):
        cd, cq = self.split(y)
        V = self.spaces[0]
        d, q = V.evaluate(cd, x), V.evaluate(cq, x)
        return d - self.cfg.bathymetry.beta(x), q / d

    def total_mass(self, y) -> float:
        S = self.sq[0]
        return S.integrate(S.values(self.split(y)[0]))


SCHEMES = {
    Formulation.DIRICHLET_VELOCITY: DirichletVelocityScheme,
    Formulation.SUPERCRITICAL: SupercriticalScheme,
    Formulation.SUBCRITICAL: SubcriticalScheme,
    Formulation.PERIODIC: BalanceLawScheme,
}


def build_scheme(cfg: ProblemConfig, mesh: Mesh, r: int = 2, continuity: int | None = None,
                 s: int | None = None, **options) -> Scheme:
    cls = SCHEMES[cfg.formulation]
    return cls(cfg, mesh, r, continuity, s, **options)


def _checked(scheme: Scheme, cls, state: SimState) -> tuple:
    if not isinstance(scheme, cls):
        raise InvalidArgumentError(f"state formulation does not match {cls.__name__}")
    return scheme.rhs_state(state)


def rhs_dirichlet(scheme: Scheme, state: SimState) -> tuple:
    return _checked(scheme, DirichletVelocityScheme, state)


def rhs_supercritical(scheme: Scheme, state: SimState) -> tuple:
    return _checked(scheme, SupercriticalScheme, state)


def rhs_subcritical(scheme: Scheme, state: SimState) -> tuple:
    return _checked(scheme, SubcriticalScheme, state)


def rhs_balance_law(scheme: Scheme, state: SimState) -> tuple:
    return _checked(scheme, BalanceLawScheme, state)


def recover_physical(scheme: SubcriticalScheme, state: SimState):
    return scheme.recover_physical(state.y)
