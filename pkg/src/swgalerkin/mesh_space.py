"""Partitions of an interval and spline finite element spaces on them.

Spaces are spanned by B-splines of degree ``r - 1`` whose interior knots have
multiplicity ``r - 1 - continuity``, so members are ``C^continuity`` across
mesh nodes. Boundary constraints drop the endpoint-interpolatory B-spline of a
clamped knot vector; periodic spaces wrap the B-splines that straddle the
periodic seam onto the first degrees of freedom.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgumentError


class Constraint(enum.Enum):
    FREE = "free"
    ZERO_LEFT = "zero_left"
    ZERO_RIGHT = "zero_right"
    ZERO_BOTH = "zero_both"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value: "Constraint | str") -> "Constraint":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidArgumentError(f"unknown constraint {value!r}") from None


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    uniform: bool = False

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidArgumentError("a mesh needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidArgumentError("mesh nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidArgumentError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def left(self) -> float:
        return float(self.nodes[0])

    @property
    def right(self) -> float:
        return float(self.nodes[-1])

    @property
    def length(self) -> float:
        return self.right - self.left

    @cached_property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def h_max(self) -> float:
        return float(self.widths.max())

    def locate(self, x) -> np.ndarray:
        """Element index of each point; breakpoints belong to the element on
        their right, except the right endpoint which belongs to the last one."""
        x = np.asarray(x, dtype=float)
        tol = 1e-13 * max(1.0, abs(self.left), abs(self.right))
        if np.any(x < self.left - tol) or np.any(x > self.right + tol):
            raise InvalidArgumentError("evaluation point outside the mesh")
        e = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(e, 0, self.n_elements - 1)


def _check_bounds(left: float, right: float) -> None:
    if not (math.isfinite(left) and math.isfinite(right)):
        raise InvalidArgumentError("domain bounds must be finite")
    if left >= right:
        raise InvalidArgumentError("need left < right")


def make_uniform_mesh(N: int, left: float = 0.0, right: float = 1.0) -> Mesh:
    if int(N) != N or N < 1:
        raise InvalidArgumentError("N must be a positive integer")
    _check_bounds(left, right)
    nodes = left + (right - left) * np.arange(N + 1) / N
    nodes[-1] = right
    return Mesh(nodes, uniform=True)


def make_perturbed_mesh(N: int, left: float = 0.0, right: float = 1.0,
                        amplitude: float = 0.2, seed: int = 0) -> Mesh:
    """Uniform mesh with interior nodes shifted by up to ``amplitude * h``.

    Amplitudes below 0.5 keep the nodes ordered; the range is capped at 0.45
    so every element keeps at least a tenth of the uniform width.
    """
    if not (0.0 <= amplitude < 0.45):
        raise InvalidArgumentError("perturbation amplitude must lie in [0, 0.45)")
    base = make_uniform_mesh(N, left, right)
    if amplitude == 0.0:
        return base
    h = (right - left) / N
    rng = np.random.default_rng(seed)
    nodes = base.nodes.copy()
    nodes[1:-1] += amplitude * h * rng.uniform(-1.0, 1.0, size=N - 1)
    return Mesh(nodes, uniform=False)


def snap_nodes(mesh: Mesh, points, rtol: float = 1e-12) -> Mesh:
    """Move nodes lying within ``rtol * length`` of a given point onto it."""
    nodes = mesh.nodes.copy()
    for p in np.atleast_1d(points):
        i = int(np.argmin(np.abs(nodes - p)))
        if abs(nodes[i] - p) < rtol * mesh.length:
            nodes[i] = p
    return Mesh(nodes, uniform=mesh.uniform)


def bspline_derivatives(knots: np.ndarray, p: int, spans: np.ndarray,
                        x: np.ndarray, nd: int) -> np.ndarray:
    """Nonzero B-splines of degree ``p`` and their derivatives at ``x``.

    ``spans[i]`` is the knot span containing ``x[i]``. Returns an array of
    shape ``(nd + 1, len(x), p + 1)``; entry ``[k, i, a]`` is the k-th
    derivative of B-spline ``spans[i] - p + a`` at ``x[i]``.
    Vectorised form of the triangular-table recurrence of Piegl & Tiller.
    """
    x = np.asarray(x, dtype=float)
    spans = np.asarray(spans)
    npts = x.size
    ndu = np.zeros((p + 1, p + 1, npts))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, npts))
    right = np.zeros((p + 1, npts))
    for j in range(1, p + 1):
        left[j] = x - knots[spans + 1 - j]
        right[j] = knots[spans + j] - x
        saved = np.zeros(npts)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((nd + 1, npts, p + 1))
    for j in range(p + 1):
        ders[0, :, j] = ndu[j, p]
    for r in range(p + 1):
        s1, s2 = 0, 1
        a = np.zeros((2, p + 1, npts))
        a[0, 0] = 1.0
        for k in range(1, min(nd, p) + 1):
            d = np.zeros(npts)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[k, :, r] = d
            s1, s2 = s2, s1
    factor = float(p)
    for k in range(1, min(nd, p) + 1):
        ders[k] *= factor
        factor *= p - k
    return ders


class FemSpace:
    """Spline space of order ``r`` (degree ``r - 1``) on a mesh.

    Degrees of freedom are numbered left to right. Each element carries
    ``r`` local basis functions; ``element_dofs`` gives their global numbers,
    with constrained (dropped) functions mapped to the sentinel ``dim``.
    """

    def __init__(self, mesh: Mesh, r: int, continuity: int | None = None,
                 constraint: Constraint | str = Constraint.FREE):
        if int(r) != r or r < 2:
            raise InvalidArgumentError("order r must be an integer >= 2")
        if continuity is None:
            continuity = r - 2
        if int(continuity) != continuity or not (0 <= continuity <= r - 2):
            raise InvalidArgumentError(f"continuity must lie in [0, {r - 2}]")
        self.mesh = mesh
        self.r = int(r)
        self.continuity = int(continuity)
        self.constraint = Constraint.parse(constraint)
        self.degree = self.r - 1
        self.multiplicity = self.degree - self.continuity

        p, m, N = self.degree, self.multiplicity, mesh.n_elements
        x = mesh.nodes
        if self.constraint is Constraint.PERIODIC:
            n = N * m
            offset = self.continuity + 1
            j = np.arange(-offset, n + p + 1)
            base = np.repeat(x[:-1], m)
            self.knots = base[j % n] + mesh.length * np.floor_divide(j, n)
            ext_to_dof = (np.arange(n + offset) - offset) % n
            self.dim = n
        else:
            self.knots = np.concatenate(
                [np.full(p + 1, x[0]), np.repeat(x[1:-1], m), np.full(p + 1, x[-1])])
            n_ext = self.knots.size - p - 1
            drop_left = self.constraint in (Constraint.ZERO_LEFT, Constraint.ZERO_BOTH)
            drop_right = self.constraint in (Constraint.ZERO_RIGHT, Constraint.ZERO_BOTH)
            self.dim = n_ext - int(drop_left) - int(drop_right)
            ext_to_dof = np.arange(n_ext) - int(drop_left)
            if drop_left:
                ext_to_dof[0] = self.dim
            if drop_right:
                ext_to_dof[-1] = self.dim
            offset = 0
        if self.dim < 1:
            raise InvalidArgumentError("space has no degrees of freedom")
        self.knots.setflags(write=False)
        first = np.arange(N) * m
        # the periodic offset k + 1 plus m - 1 trailing copies also equals p
        self.spans = first + p
        self.element_dofs = ext_to_dof[first[:, None] + np.arange(p + 1)]

    def __repr__(self):
        return (f"FemSpace(N={self.mesh.n_elements}, r={self.r}, "
                f"continuity={self.continuity}, {self.constraint.value}, dim={self.dim})")

    @property
    def periodic(self) -> bool:
        return self.constraint is Constraint.PERIODIC

    def local_basis(self, x, nd: int = 0, elements=None):
        """Local basis derivatives at ``x`` plus the dof numbers they map to.

        Returns ``(values, dofs)`` with ``values`` of shape
        ``(nd + 1, len(x), r)`` and ``dofs`` of shape ``(len(x), r)``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=float))
        e = self.mesh.locate(x) if elements is None else np.asarray(elements)
        vals = bspline_derivatives(self.knots, self.degree, self.spans[e], x, nd)
        return vals, self.element_dofs[e]

    def evaluate(self, coefficients, x, deriv: int = 0) -> np.ndarray:
        if deriv not in (0, 1, 2):
            raise InvalidArgumentError("deriv must be 0, 1 or 2")
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.dim,):
            raise InvalidArgumentError(f"expected {self.dim} coefficients, got {c.shape}")
        scalar = np.ndim(x) == 0
        vals, dofs = self.local_basis(x, deriv)
        cpad = np.append(c, 0.0)
        out = np.einsum("ia,ia->i", vals[deriv], cpad[dofs])
        return float(out[0]) if scalar else out

    def basis_function(self, i: int) -> "CoefVec":
        c = np.zeros(self.dim)
        c[i] = 1.0
        return CoefVec(self, c)

    def collocation_matrix(self, x, deriv: int = 0) -> np.ndarray:
        """Dense matrix ``A[k, i] = phi_i^{(deriv)}(x_k)``."""
        vals, dofs = self.local_basis(x, deriv)
        x = np.atleast_1d(x)
        A = np.zeros((x.size, self.dim + 1))
        rows = np.repeat(np.arange(x.size), self.r)
        np.add.at(A, (rows, dofs.ravel()), vals[deriv].ravel())
        return A[:, :self.dim]

    def interpolate_nodes(self, f) -> "CoefVec":
        """Interpolant at the mesh nodes; defined when ``dim`` matches the
        number of free nodal values (hats, or periodic maximal-smoothness
        splines)."""
        x = self.mesh.nodes
        if self.periodic:
            x = x[:-1]
        elif self.constraint is Constraint.ZERO_LEFT:
            x = x[1:]
        elif self.constraint is Constraint.ZERO_RIGHT:
            x = x[:-1]
        elif self.constraint is Constraint.ZERO_BOTH:
            x = x[1:-1]
        if x.size != self.dim:
            raise InvalidArgumentError("nodal interpolation needs one free node per dof")
        A = self.collocation_matrix(x)
        return CoefVec(self, np.linalg.solve(A, f(x)))


def make_space(mesh: Mesh, r: int, continuity: int | None = None,
               constraint: Constraint | str = Constraint.FREE) -> FemSpace:
    return FemSpace(mesh, r, continuity, constraint)


@dataclass(eq=False)
class CoefVec:
    space: FemSpace
    coefficients: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.coefficients is None:
            self.coefficients = np.zeros(self.space.dim)
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.dim,):
            raise InvalidArgumentError("coefficient length does not match the space")

    def __call__(self, x, deriv: int = 0):
        return self.space.evaluate(self.coefficients, x, deriv)

    def eval(self, x, deriv: int = 0):
        return self(x, deriv)


def eval(f: CoefVec, x, deriv: int = 0):  # noqa: A001 - mirrors the public operation name
    return f(x, deriv)
