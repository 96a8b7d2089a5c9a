"""Quadrature, mass matrices, L2 projection and load vectors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import InvalidArgumentError, SingularMatrixError
from .mesh_space import CoefVec, FemSpace

MAX_GAUSS_POINTS = 16

_pbtrs = sla.get_lapack_funcs("pbtrs", dtype=np.float64)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    s: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate_reference(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def _legendre(n: int, x: np.ndarray):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_rule(s: int) -> QuadratureRule:
    """s-point Gauss-Legendre rule on [-1, 1] via Newton iteration."""
    if int(s) != s or not (1 <= s <= MAX_GAUSS_POINTS):
        raise InvalidArgumentError(f"s must be an integer in [1, {MAX_GAUSS_POINTS}]")
    s = int(s)
    i = np.arange(1, s + 1)
    x = np.cos(np.pi * (i - 0.25) / (s + 0.5))
    for _ in range(100):
        p, dp = _legendre(s, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    p, dp = _legendre(s, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # symmetrise so odd moments cancel exactly
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    if s % 2:
        x[s // 2] = 0.0
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(s, x, w)


def default_rule(space: FemSpace) -> QuadratureRule:
    return gauss_rule(space.r + 1)


class BandedSPD:
    """Symmetric positive definite banded (or cyclic-banded) matrix.

    Built from the upper-triangular band; periodic matrices additionally hold
    the corner blocks produced by the wrap-around coupling and are solved with
    a Woodbury correction on top of the banded Cholesky factor.
    """

    def __init__(self, dim: int, bandwidth: int, rows, cols, vals, cyclic: bool = False):
        self.dim = int(dim)
        self.bandwidth = int(bandwidth)
        self.cyclic = bool(cyclic)
        rows = np.asarray(rows)
        cols = np.asarray(cols)
        vals = np.asarray(vals, dtype=float)
        n, p = self.dim, self.bandwidth
        dense_fallback = cyclic and n <= 2 * p + 1
        self._dense = None
        if dense_fallback:
            A = np.zeros((n, n))
            np.add.at(A, (rows, cols), vals)
            # wrap-around entries accumulate in different orders; a + b == b + a exactly
            self._dense = 0.5 * (A + A.T)
            self._from_dense()
            return

        # upper band storage: ab[p + i - j, j] = A[i, j] for i <= j
        self.band = np.zeros((p + 1, n))
        off = cols - rows
        if cyclic:
            off = np.where(off > n // 2, off - n, off)
            off = np.where(off < -(n // 2), off + n, off)
        if np.any(np.abs(off) > p):
            raise InvalidArgumentError("entries outside the declared bandwidth")
        inband = np.abs(cols - rows) <= p
        up = inband & (rows <= cols)
        np.add.at(self.band, (p + rows[up] - cols[up], cols[up]), vals[up])
        # corner coupling between the first p and last p unknowns
        corner = ~inband & (rows < cols)
        self._corner = np.zeros((p, p))
        if cyclic:
            np.add.at(self._corner, (rows[corner], cols[corner] - (n - p)), vals[corner])
        try:
            self._chol = sla.cholesky_banded(self.band, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            if not cyclic:
                raise SingularMatrixError(str(exc)) from exc
            self._dense = self.to_dense()
            self._from_dense()
            return
        if not np.all(np.isfinite(self._chol)):
            raise SingularMatrixError("non-finite Cholesky factor")
        if cyclic and np.any(self._corner):
            idx = np.concatenate([np.arange(p), np.arange(n - p, n)])
            U = np.zeros((n, 2 * p))
            U[idx, np.arange(2 * p)] = 1.0
            # V^T: the corner rows, so that A = band + U V^T
            Vt = np.zeros((2 * p, n))
            Vt[:p, n - p:] = self._corner
            Vt[p:, :p] = self._corner.T
            Z = sla.cho_solve_banded((self._chol, False), U, check_finite=False)
            cap = np.eye(2 * p) + Vt @ Z
            self._woodbury = (Z, Vt, sla.lu_factor(cap, check_finite=False))
        else:
            self._woodbury = None

    def _from_dense(self):
        try:
            self._dense_chol = sla.cho_factor(self._dense, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc

    def to_dense(self) -> np.ndarray:
        if self._dense is not None:
            return self._dense.copy()
        n, p = self.dim, self.bandwidth
        A = np.zeros((n, n))
        for d in range(p + 1):
            i = np.arange(n - d)
            A[i, i + d] = self.band[p - d, d:]
            A[i + d, i] = self.band[p - d, d:]
        if self.cyclic:
            A[:p, n - p:] += self._corner
            A[n - p:, :p] += self._corner.T
        return A

    def matvec(self, x: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense @ x
        n, p = self.dim, self.bandwidth
        x = np.asarray(x, dtype=float)
        y = self.band[p] * x if x.ndim == 1 else self.band[p][:, None] * x
        for d in range(1, p + 1):
            diag = self.band[p - d, d:]
            if x.ndim > 1:
                diag = diag[:, None]
            y[:-d] += diag * x[d:]
            y[d:] += diag * x[:-d]
        if self.cyclic:
            y[:p] += self._corner @ x[n - p:]
            y[n - p:] += self._corner.T @ x[:p]
        return y

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return sla.cho_solve(self._dense_chol, b, check_finite=False)
        y, info = _pbtrs(self._chol, b)
        if info != 0:
            raise SingularMatrixError(f"banded solve failed (info={info})")
        if self._woodbury is None:
            return y
        Z, Vt, lu = self._woodbury
        return y - Z @ sla.lu_solve(lu, Vt @ y, check_finite=False)


class SpaceQuadrature:
    """Basis data of a space at the Gauss points of every element.

    ``ops[d]`` is a sparse matrix mapping coefficients to the d-th derivative
    at all quadrature points (element-major order); ``wJ`` carries the
    quadrature weights times element Jacobians.
    """

    def __init__(self, space: FemSpace, rule: QuadratureRule):
        self.space = space
        self.rule = rule
        mesh = space.mesh
        E, q, r = mesh.n_elements, rule.s, space.r
        a = mesh.nodes[:-1, None]
        hw = 0.5 * mesh.widths[:, None]
        self.points = (a + hw * (rule.nodes[None, :] + 1.0))
        self.wJ = (hw * rule.weights[None, :]).ravel()
        self.x = self.points.ravel()
        elements = np.repeat(np.arange(E), q)
        vals, dofs = space.local_basis(self.x, nd=2, elements=elements)
        self.local = vals.reshape(3, E, q, r)
        self.dofs = space.element_dofs
        keep = dofs.ravel() < space.dim
        rows = np.repeat(np.arange(E * q), r)[keep]
        cols = dofs.ravel()[keep]
        self.ops = []
        self.ops_t = []
        for d in range(3):
            m = sp.csr_matrix((vals[d].ravel()[keep], (rows, cols)), shape=(E * q, space.dim))
            self.ops.append(m)
            self.ops_t.append(m.T.tocsr())
        # values and first derivatives in one product
        self._ops01 = sp.vstack([self.ops[0], self.ops[1]]).tocsr()
        self._mass = None

    @property
    def n_points(self) -> int:
        return self.x.size

    def values(self, coefficients, deriv: int = 0) -> np.ndarray:
        return self.ops[deriv] @ coefficients

    def values_and_slopes(self, coefficients) -> tuple:
        """Values and first derivatives at the points, from a single sparse product."""
        out = self._ops01 @ coefficients
        n = self.x.size
        return out[:n], out[n:]

    def load(self, g, deriv: int = 0) -> np.ndarray:
        """(g, phi_i^{(deriv)}) for all basis functions, g sampled at the points."""
        return self.ops_t[deriv] @ (self.wJ * g)

    def integrate(self, g) -> float:
        return float(np.dot(self.wJ, g))

    @property
    def mass(self) -> BandedSPD:
        if self._mass is None:
            self._mass = self._assemble_mass()
        return self._mass

    def _assemble_mass(self) -> BandedSPD:
        B = self.local[0]
        w = self.wJ.reshape(B.shape[:2])
        local = np.einsum("eq,eqa,eqb->eab", w, B, B)
        dofs = self.dofs
        r = self.space.r
        ii = np.broadcast_to(dofs[:, :, None], local.shape)
        jj = np.broadcast_to(dofs[:, None, :], local.shape)
        keep = (ii < self.space.dim) & (jj < self.space.dim)
        return BandedSPD(self.space.dim, r - 1, ii[keep], jj[keep], local[keep],
                         cyclic=self.space.periodic)


def space_quadrature(space: FemSpace, rule: QuadratureRule | None = None) -> SpaceQuadrature:
    """Cached quadrature data for a (space, rule) pair."""
    rule = rule or default_rule(space)
    cache = space.__dict__.setdefault("_quadrature_cache", {})
    sq = cache.get(rule.s)
    if sq is None:
        sq = SpaceQuadrature(space, rule)
        cache[rule.s] = sq
    return sq


def mass_matrix(space: FemSpace, rule: QuadratureRule | None = None) -> BandedSPD:
    return space_quadrature(space, rule).mass


def weak_load(space: FemSpace, g, rule: QuadratureRule | None = None) -> np.ndarray:
    """b_i = (g, phi_i) by elementwise quadrature; g is a callable of x."""
    sq = space_quadrature(space, rule)
    return sq.load(np.broadcast_to(g(sq.x), sq.x.shape))


def l2_project(space: FemSpace, f, rule: QuadratureRule | None = None) -> CoefVec:
    sq = space_quadrature(space, rule)
    b = sq.load(np.broadcast_to(f(sq.x), sq.x.shape))
    return CoefVec(space, sq.mass.solve(b))


def _error_rule(space: FemSpace, rule: QuadratureRule | None) -> QuadratureRule:
    return rule or gauss_rule(min(MAX_GAUSS_POINTS, space.r + 3))


def _sampled(f, sq: SpaceQuadrature) -> np.ndarray:
    if isinstance(f, CoefVec):
        return sq.values(f.coefficients) if f.space is sq.space else f(sq.x)
    return np.broadcast_to(f(sq.x), sq.x.shape)


def l2_norm(f, rule: QuadratureRule | None = None, space: FemSpace | None = None) -> float:
    """L2 norm of a CoefVec, or of a callable on the mesh of ``space``."""
    if isinstance(f, CoefVec):
        space = f.space
    if space is None:
        raise InvalidArgumentError("a callable needs a space to supply the mesh")
    sq = space_quadrature(space, _error_rule(space, rule))
    v = _sampled(f, sq)
    return math.sqrt(sq.integrate(v * v))


def l2_error(f_h: CoefVec, f_exact, rule: QuadratureRule | None = None) -> float:
    sq = space_quadrature(f_h.space, _error_rule(f_h.space, rule))
    e = sq.values(f_h.coefficients) - _sampled(f_exact, sq)
    return math.sqrt(sq.integrate(e * e))


def linf_error(f_h: CoefVec, f_exact, samples_per_element: int = 20) -> float:
    x = sample_points(f_h.space.mesh, samples_per_element)
    return float(np.max(np.abs(f_h(x) - f_exact(x))))


def sample_points(mesh, per_element: int = 20) -> np.ndarray:
    t = np.arange(per_element) / per_element
    x = (mesh.nodes[:-1, None] + mesh.widths[:, None] * t[None, :]).ravel()
    return np.append(x, mesh.right)
