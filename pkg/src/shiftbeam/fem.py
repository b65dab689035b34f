"""Discrete spaces, assembly and solve for the mixed formulation.

With the auxiliary variable w = eps*u'' the problem becomes: find (u,w) with

    B((u,w),(y,z)) = -eps<w',y'> + <b u',y'> + <b' u',y> + <c u,y>
                     + <d u(.-1), y>_(1,2) + eps<u',z'> + <w,z>
                   = <f,y> - <d phi(.-1), y>_(0,1) = F(y),

u in H^1_0(0,2) and w in H^1 (m=1) or H^1_0 (m=2).  Both components are
continuous piecewise polynomials of degree q on the same mesh, in a nodal
Gauss-Lobatto Lagrange basis.  The shift term couples each cell of (1,2) to
the cells of (0,1) its preimage overlaps; integration splits at the images
1 + x_j of left-mesh nodes so every product is a polynomial per segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.linalg import spsolve

from .meshes import Mesh1D
from .problem import ProblemSpec

__all__ = [
    "RefBasis",
    "reference_basis",
    "quadrature",
    "DiscreteSpace",
    "PairField",
    "AssembledSystem",
    "assemble",
    "solve",
    "bilinear_eval",
    "eval_field",
    "piecewise_eval",
    "norm_grams",
    "assemble_second_order",
    "SolverError",
]


class SolverError(RuntimeError):
    """Linear solve failed or produced an unacceptable residual."""


@lru_cache(maxsize=32)
def quadrature(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre points/weights on [0,1]; exact to degree 2*order-1."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


def _gauss_lobatto(q: int) -> np.ndarray:
    if q == 1:
        return np.array([0.0, 1.0])
    interior = np.polynomial.legendre.Legendre.basis(q).deriv().roots()
    return np.concatenate([[0.0], 0.5 * (interior + 1.0), [1.0]])


class RefBasis:
    """Nodal Lagrange basis at Gauss-Lobatto points on [0,1].

    Basis polynomials are stored by monomial coefficients, which is well
    conditioned on [0,1] for the moderate degrees used here (q <= 8).
    """

    def __init__(self, q: int):
        if q < 1:
            raise ValueError("polynomial degree must be >= 1")
        self.q = q
        self.nodes = _gauss_lobatto(q)
        coeffs = np.empty((q + 1, q + 1))
        for j in range(q + 1):
            roots = np.delete(self.nodes, j)
            c = np.polynomial.polynomial.polyfromroots(roots)
            c /= np.polynomial.polynomial.polyval(self.nodes[j], c)
            coeffs[j] = c
        self._coeffs = coeffs  # (basis, monomial power)

    def eval(self, x, deriv: int = 0) -> np.ndarray:
        """Array (len(x), q+1) of basis values (or deriv-th derivatives)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        c = self._coeffs
        for _ in range(deriv):
            c = c[:, 1:] * np.arange(1, c.shape[1])
        if c.shape[1] == 0:
            return np.zeros((len(x), self.q + 1))
        return np.polynomial.polynomial.polyval(x, c.T, tensor=True).T


@lru_cache(maxsize=16)
def reference_basis(q: int) -> RefBasis:
    return RefBasis(q)


@dataclass(frozen=True)
class DiscreteSpace:
    """Mesh x degree x boundary pattern, with global numbering per component.

    Global nodes are q*N+1 per component, cell i owning nodes i*q .. i*q+q.
    Endpoint u-nodes are always eliminated; endpoint w-nodes only for m=2.
    """

    mesh: Mesh1D
    q: int
    m: int

    @property
    def n_nodes(self) -> int:
        return self.q * self.mesh.N + 1

    @property
    def node_coords(self) -> np.ndarray:
        ref = reference_basis(self.q).nodes
        x = self.mesh.nodes
        pts = x[:-1, None] + np.diff(x)[:, None] * ref[None, :]
        return np.concatenate([pts[:, :-1].ravel(), [x[-1]]])

    def cell_dofs(self) -> np.ndarray:
        N, q = self.mesh.N, self.q
        return np.arange(N)[:, None] * q + np.arange(q + 1)[None, :]

    def free_indices(self) -> np.ndarray:
        nn = self.n_nodes
        keep = np.ones(2 * nn, dtype=bool)
        keep[[0, nn - 1]] = False
        if self.m == 2:
            keep[[nn, 2 * nn - 1]] = False
        return np.where(keep)[0]

    @property
    def n_unknowns(self) -> int:
        return len(self.free_indices())


@dataclass
class PairField:
    """Coefficient vectors of a (u, w) pair in a DiscreteSpace."""

    space: DiscreteSpace
    u_coeffs: np.ndarray
    w_coeffs: np.ndarray

    def eval_u(self, x, deriv: int = 0):
        return piecewise_eval(self.space.mesh.nodes, self.space.q,
                              self.u_coeffs, x, deriv)

    def eval_w(self, x, deriv: int = 0):
        return piecewise_eval(self.space.mesh.nodes, self.space.q,
                              self.w_coeffs, x, deriv)


@dataclass
class AssembledSystem:
    """Full (unconstrained) matrix and rhs; elimination happens at solve time."""

    matrix: csr_matrix
    rhs: np.ndarray
    space: DiscreteSpace


def piecewise_eval(nodes: np.ndarray, q: int, coeffs: np.ndarray, x,
                   deriv: int = 0) -> np.ndarray:
    """Evaluate a continuous piecewise polynomial given nodal coefficients.

    At interior mesh nodes the left cell is used (side='left' lookup); the
    fields themselves are continuous, only higher derivatives may jump.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < nodes[0] - 1e-12) or np.any(x > nodes[-1] + 1e-12):
        raise ValueError("evaluation point outside the mesh interval")
    basis = reference_basis(q)
    cell = np.clip(np.searchsorted(nodes, x, side="left") - 1, 0, len(nodes) - 2)
    h = nodes[cell + 1] - nodes[cell]
    xi = np.clip((x - nodes[cell]) / h, 0.0, 1.0)
    vals = basis.eval(xi, deriv)           # (npts, q+1)
    dofs = cell[:, None] * q + np.arange(q + 1)[None, :]
    return np.einsum("pj,pj->p", vals, coeffs[dofs]) / h ** deriv


def _element_blocks(space: DiscreteSpace, spec: ProblemSpec):
    """Cellwise local matrices for all volume terms, vectorized over cells."""
    q = space.q
    basis = reference_basis(q)
    ng = q + 3
    xg, wg = quadrature(ng)
    V = basis.eval(xg, 0)                  # (ng, q+1)
    D = basis.eval(xg, 1)
    x = space.mesh.nodes
    h = np.diff(x)                          # (N,)
    xp = x[:-1, None] + h[:, None] * xg[None, :]   # (N, ng)
    bv = spec.b(xp)
    bpv = spec.b_derivative(xp)
    cv = spec.c(xp)

    loc_uu = np.einsum("ag,gi,gj->aij", wg * bv / h[:, None], D, D)
    loc_uu += np.einsum("ag,gi,gj->aij", wg * bpv, V, D)
    loc_uu += np.einsum("ag,gi,gj->aij", (wg * cv) * h[:, None], V, V)
    loc_stiff = np.einsum("g,gi,gj->ij", wg, D, D)[None, :, :] / h[:, None, None]
    loc_mass = np.einsum("g,gi,gj->ij", wg, V, V)[None, :, :] * h[:, None, None]

    fv = spec.f(xp)
    rhs_u = np.einsum("ag,gi->ai", (wg * fv) * h[:, None], V)
    # history load on (0,1): -<d phi(.-1), y>
    left = x[:-1] < 1.0 - 1e-14
    if np.any(left):
        xl = xp[left]
        dv = spec.d(xl)
        phv = spec.history(xl - 1.0)
        rhs_u[left] -= np.einsum("ag,gi->ai", (wg * dv * phv) * h[left, None], V)
    return loc_uu, loc_stiff, loc_mass, rhs_u


def _shift_blocks(space: DiscreteSpace, spec: ProblemSpec):
    """Couplings <d u(.-1), y> of the (1,2) cells to the (0,1) cells."""
    q = space.q
    basis = reference_basis(q)
    xg, wg = quadrature(q + 3)
    x = space.mesh.nodes
    N = space.mesh.N
    rows, cols, vals = [], [], []
    dofs = space.cell_dofs()
    for i in range(N // 2, N):
        xl, xr = x[i], x[i + 1]
        h = xr - xl
        a, b = xl - 1.0, xr - 1.0
        lo = np.searchsorted(x, a + 1e-14, side="right") - 1
        hi = np.searchsorted(x, b - 1e-14, side="right") - 1
        cuts = np.concatenate([[a], x[lo + 1:hi + 1], [b]])
        for src, (s0, s1) in zip(range(lo, hi + 1), zip(cuts[:-1], cuts[1:])):
            if s1 - s0 <= 1e-15:
                continue
            xs = s0 + xg * (s1 - s0)
            wseg = wg * (s1 - s0)
            hs = x[src + 1] - x[src]
            Vt = basis.eval((xs + 1.0 - xl) / h, 0)
            Vs = basis.eval((xs - x[src]) / hs, 0)
            dv = spec.d(xs + 1.0)
            blk = np.einsum("g,gi,gj->ij", wseg * dv, Vt, Vs)
            r, c = np.meshgrid(dofs[i], dofs[src], indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
            vals.append(blk.ravel())
    if not rows:
        return np.array([], dtype=int), np.array([], dtype=int), np.array([])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def assemble(spec: ProblemSpec, space: DiscreteSpace) -> AssembledSystem:
    """Assemble the full block system (u rows/cols first, then w)."""
    if spec.m != space.m:
        raise ValueError("boundary-condition order of spec and space differ")
    nn = space.n_nodes
    eps = spec.epsilon
    loc_uu, loc_stiff, loc_mass, rhs_u = _element_blocks(space, spec)
    dofs = space.cell_dofs()
    r = np.broadcast_to(dofs[:, :, None], loc_uu.shape).ravel()
    c = np.broadcast_to(dofs[:, None, :], loc_uu.shape).ravel()

    rows = [r, r, r + nn, r + nn]
    cols = [c, c + nn, c, c + nn]
    vals = [loc_uu.ravel(), (-eps * loc_stiff).ravel(),
            (eps * loc_stiff).ravel(), loc_mass.ravel()]
    sr, sc, sv = _shift_blocks(space, spec)
    rows.append(sr)
    cols.append(sc)
    vals.append(sv)

    A = coo_matrix((np.concatenate(vals),
                    (np.concatenate(rows), np.concatenate(cols))),
                   shape=(2 * nn, 2 * nn)).tocsr()
    rhs = np.zeros(2 * nn)
    np.add.at(rhs, dofs.ravel(), rhs_u.ravel())
    return AssembledSystem(A, rhs, space)


def solve(system: AssembledSystem) -> PairField:
    """Direct sparse solve with an a-posteriori residual check."""
    space = system.space
    nn = space.n_nodes
    idx = space.free_indices()
    A = system.matrix[idx][:, idx].tocsc()
    b = system.rhs[idx]
    with np.errstate(all="ignore"):
        xr = spsolve(A, b)
    if not np.all(np.isfinite(xr)):
        raise SolverError("factorization produced non-finite values "
                          "(singular or severely ill-conditioned system)")
    res = np.max(np.abs(A @ xr - b))
    scale = np.max(np.abs(A).sum(axis=1)) * np.max(np.abs(xr)) + np.max(np.abs(b))
    if res > 1e-10 * scale:
        raise SolverError(f"residual {res:.3e} exceeds 1e-10 * {scale:.3e}")
    full = np.zeros(2 * nn)
    full[idx] = xr
    return PairField(space, full[:nn], full[nn:])


def bilinear_eval(spec: ProblemSpec, space: DiscreteSpace,
                  pair1: PairField, pair2: PairField,
                  system: Optional[AssembledSystem] = None) -> float:
    """B(pair1, pair2) for two discrete pairs in the same space."""
    for p in (pair1, pair2):
        if p.space.q != space.q or not np.array_equal(p.space.mesh.nodes,
                                                      space.mesh.nodes):
            raise ValueError("pairs must live in the given space")
    if system is None:
        system = assemble(spec, space)
    x1 = np.concatenate([pair1.u_coeffs, pair1.w_coeffs])
    x2 = np.concatenate([pair2.u_coeffs, pair2.w_coeffs])
    return float(x2 @ (system.matrix @ x1))


def functional_eval(system: AssembledSystem, pair: PairField) -> float:
    """F(y) of the assembled right-hand side at a discrete test pair."""
    x = np.concatenate([pair.u_coeffs, pair.w_coeffs])
    return float(system.rhs @ x)


def eval_field(pair: PairField, x, deriv: int = 0):
    """(u, w) values (or first derivatives) at points x in [0,2]."""
    if deriv not in (0, 1):
        raise ValueError("only derivative orders 0 and 1 are supported")
    return pair.eval_u(x, deriv), pair.eval_w(x, deriv)


def norm_grams(spec: ProblemSpec, space: DiscreteSpace):
    """Gram matrices (G_u, G_w) with |||(u,w)|||^2 = u^T G_u u + w^T G_w w."""
    q = space.q
    basis = reference_basis(q)
    xg, wg = quadrature(q + 3)
    V = basis.eval(xg, 0)
    D = basis.eval(xg, 1)
    h = space.mesh.widths
    mass = np.einsum("g,gi,gj->ij", wg, V, V)[None, :, :] * h[:, None, None]
    stiff = np.einsum("g,gi,gj->ij", wg, D, D)[None, :, :] / h[:, None, None]
    loc_u = 0.5 * spec.beta ** 2 * stiff + spec.delta * mass
    dofs = space.cell_dofs()
    r = np.broadcast_to(dofs[:, :, None], mass.shape).ravel()
    c = np.broadcast_to(dofs[:, None, :], mass.shape).ravel()
    nn = space.n_nodes
    G_u = coo_matrix((loc_u.ravel(), (r, c)), shape=(nn, nn)).tocsr()
    G_w = coo_matrix((mass.ravel(), (r, c)), shape=(nn, nn)).tocsr()
    return G_u, G_w


def export_solution_csv(pair: PairField, path, samples: np.ndarray,
                        header_lines: tuple[str, ...] = ()) -> None:
    """Sampled CSV with columns x, u, du, w, dw."""
    u = pair.eval_u(samples, 0)
    du = pair.eval_u(samples, 1)
    w = pair.eval_w(samples, 0)
    dw = pair.eval_w(samples, 1)
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x,u,du,w,dw\n")
        for row in zip(samples, u, du, w, dw):
            fh.write(",".join(f"{v:.10e}" for v in row) + "\n")


def assemble_second_order(spec: ProblemSpec, nodes: np.ndarray, q: int):
    """FEM system for the reduced problem -b S'' + c S + d S(.-1) = rhs.

    Same weak structure as the u-u block of the mixed system (including the
    shift coupling and the history load), Dirichlet values S(0)=S(2)=0.
    Returns nodal coefficients of S on (nodes, q).
    """
    from .meshes import Mesh1D as _M
    mesh = _M(nodes, "uniform", "uniform", 0.0, 0.0, 1.0, q, "stype")
    space = DiscreteSpace(mesh, q, 1)
    loc_uu, _, _, rhs_u = _element_blocks(space, spec)
    dofs = space.cell_dofs()
    r = np.broadcast_to(dofs[:, :, None], loc_uu.shape).ravel()
    c = np.broadcast_to(dofs[:, None, :], loc_uu.shape).ravel()
    nn = space.n_nodes
    rows, cols, vals = [r], [c], [loc_uu.ravel()]
    sr, sc, sv = _shift_blocks(space, spec)
    rows.append(sr)
    cols.append(sc)
    vals.append(sv)
    A = coo_matrix((np.concatenate(vals),
                    (np.concatenate(rows), np.concatenate(cols))),
                   shape=(nn, nn)).tocsr()
    rhs = np.zeros(nn)
    np.add.at(rhs, dofs.ravel(), rhs_u.ravel())
    keep = np.ones(nn, dtype=bool)
    keep[[0, nn - 1]] = False
    idx = np.where(keep)[0]
    sol = spsolve(A[idx][:, idx].tocsc(), rhs[idx])
    if not np.all(np.isfinite(sol)):
        raise SolverError("reduced solve failed")
    full = np.zeros(nn)
    full[idx] = sol
    return full
