"""Energy norm, discrete reference solutions and convergence reports.

The energy norm is the one the bilinear form is coercive in,

    |||(u,w)|||^2 = ||w||^2 + (beta^2/2) ||u'||^2 + delta ||u||^2.

No closed-form solution exists for the benchmarks, so errors are measured
against a fine discrete reference (higher degree, finer Bakhvalov-S mesh).
Differences of fields living on different meshes are integrated on the
union mesh, where both are polynomials per cell.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import interp as _interp
from .fem import (DiscreteSpace, PairField, assemble, piecewise_eval,
                  quadrature, solve)
from .meshes import Mesh1D, build_stype
from .problem import ProblemSpec

__all__ = [
    "ErrorReport",
    "ReferenceSolution",
    "energy_norm",
    "l2_norm",
    "compute_reference",
    "error_report",
    "eoc",
    "union_nodes",
]


@dataclass
class ErrorReport:
    energy_error: float
    l2_u: float
    l2_w: float
    supercloseness: float
    postprocessed_energy: Optional[float] = None
    meta: dict = field(default_factory=dict)


@dataclass
class ReferenceSolution:
    pair: PairField
    spec_name: str
    epsilon: float
    m: int
    q_ref: int
    N_ref: int
    family: str
    sigma: float

    def dominates(self, space: DiscreteSpace) -> bool:
        return self.N_ref >= 4 * space.mesh.N and self.q_ref >= space.q + 1


def union_nodes(a: np.ndarray, b: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    merged = np.sort(np.concatenate([a, b]))
    keep = np.concatenate([[True], np.diff(merged) > tol])
    return merged[keep]


def _fields_on(points, nodes, q, u, w):
    return (piecewise_eval(nodes, q, u, points, 0),
            piecewise_eval(nodes, q, u, points, 1),
            piecewise_eval(nodes, q, w, points, 0))


def _pair_data(pair_or_tuple):
    """Accept a PairField or a raw (nodes, q, u_coeffs, w_coeffs) tuple."""
    if isinstance(pair_or_tuple, PairField):
        s = pair_or_tuple.space
        return s.mesh.nodes, s.q, pair_or_tuple.u_coeffs, pair_or_tuple.w_coeffs
    return pair_or_tuple


def energy_norm(spec: ProblemSpec, pair, other=None, quad_extra: int = 3) -> float:
    """|||pair||| or |||pair - other|||, integrated on the union mesh."""
    nodes1, q1, u1, w1 = _pair_data(pair)
    if other is None:
        grid = nodes1
        qmax = q1
    else:
        nodes2, q2, u2, w2 = _pair_data(other)
        grid = union_nodes(nodes1, nodes2)
        qmax = max(q1, q2)
    xg, wg = quadrature(qmax + quad_extra)
    h = np.diff(grid)
    pts = (grid[:-1, None] + h[:, None] * xg[None, :]).ravel()
    wts = (h[:, None] * wg[None, :]).ravel()
    u, du, w = _fields_on(pts, nodes1, q1, u1, w1)
    if other is not None:
        u2v, du2v, w2v = _fields_on(pts, nodes2, q2, u2, w2)
        u, du, w = u - u2v, du - du2v, w - w2v
    val = np.sum(wts * (w ** 2 + 0.5 * spec.beta ** 2 * du ** 2
                        + spec.delta * u ** 2))
    return float(np.sqrt(val))


def l2_norm(pair, other=None, component: str = "u", quad_extra: int = 3) -> float:
    """L2 norm of one component (or a difference) on the union mesh."""
    nodes1, q1, u1, w1 = _pair_data(pair)
    c1 = u1 if component == "u" else w1
    if other is None:
        grid, qmax = nodes1, q1
    else:
        nodes2, q2, u2, w2 = _pair_data(other)
        c2 = u2 if component == "u" else w2
        grid = union_nodes(nodes1, nodes2)
        qmax = max(q1, q2)
    xg, wg = quadrature(qmax + quad_extra)
    h = np.diff(grid)
    pts = (grid[:-1, None] + h[:, None] * xg[None, :]).ravel()
    wts = (h[:, None] * wg[None, :]).ravel()
    v = piecewise_eval(nodes1, q1, c1, pts, 0)
    if other is not None:
        v = v - piecewise_eval(nodes2, q2, c2, pts, 0)
    return float(np.sqrt(np.sum(wts * v ** 2)))


def _cache_key(spec: ProblemSpec, q_ref: int, N_ref: int, family: str,
               sigma: float) -> str:
    return (f"{spec.name}_eps{spec.epsilon:.6e}_m{spec.m}_q{q_ref}"
            f"_N{N_ref}_{family}_sigma{sigma:g}")


def _write_cache(path: str, ref: ReferenceSolution) -> None:
    with open(path, "w") as fh:
        fh.write(f"# example: {ref.spec_name}\n# epsilon: {ref.epsilon:.17g}\n")
        fh.write(f"# m: {ref.m}\n# q_ref: {ref.q_ref}\n# N_ref: {ref.N_ref}\n")
        fh.write(f"# family: {ref.family}\n# sigma: {ref.sigma:.17g}\n")
        for vec in (ref.pair.u_coeffs, ref.pair.w_coeffs):
            fh.write(" ".join(f"{v:.17g}" for v in vec) + "\n")


def _read_cache(path: str, space: DiscreteSpace) -> Optional[tuple]:
    try:
        with open(path) as fh:
            lines = [ln for ln in fh if not ln.startswith("#")]
        u = np.array([float(v) for v in lines[0].split()])
        w = np.array([float(v) for v in lines[1].split()])
    except (OSError, IndexError, ValueError):
        return None
    if len(u) != space.n_nodes or len(w) != space.n_nodes:
        return None
    return u, w


def compute_reference(spec: ProblemSpec, q_ref: int = 5, N_ref: int = 1024,
                      family: str = "bakhvalov_s", sigma: Optional[float] = None,
                      cache_dir: Optional[str] = None) -> ReferenceSolution:
    """Solve a fine discrete reference; optionally cache it to disk."""
    sigma = float(sigma if sigma is not None else q_ref + 1)
    mesh = build_stype(N_ref, spec.epsilon, sigma, spec.beta, family,
                       q_hint=q_ref)
    space = DiscreteSpace(mesh, q_ref, spec.m)
    path = None
    if cache_dir is not None:
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir,
                            _cache_key(spec, q_ref, N_ref, family, sigma) + ".txt")
        cached = _read_cache(path, space)
        if cached is not None:
            pair = PairField(space, cached[0], cached[1])
            return ReferenceSolution(pair, spec.name, spec.epsilon, spec.m,
                                     q_ref, N_ref, family, sigma)
    pair = solve(assemble(spec, space))
    ref = ReferenceSolution(pair, spec.name, spec.epsilon, spec.m,
                            q_ref, N_ref, family, sigma)
    if path is not None:
        _write_cache(path, ref)
    return ref


def error_report(spec: ProblemSpec, solution: PairField,
                 reference: ReferenceSolution,
                 with_supercloseness: bool = True,
                 with_postprocessing: bool = False) -> ErrorReport:
    """Energy/L2 errors of a discrete solution against a dominating reference.

    Supercloseness is |||(I1 u_ref - u_h, I2 w_ref - w_h)||| with the
    reference interpolated into the solution's own space.
    """
    if not reference.dominates(solution.space):
        raise ValueError("reference resolution does not dominate the run")
    ref_pair = reference.pair
    en = energy_norm(spec, ref_pair, solution)
    l2u = l2_norm(ref_pair, solution, "u")
    l2w = l2_norm(ref_pair, solution, "w")
    sc = float("nan")
    if with_supercloseness:
        ipair = _interp.interpolate_pair(ref_pair, solution.space)
        sc = energy_norm(spec, ipair, solution)
    pp = None
    if with_postprocessing:
        macro, qq, us, ws = _interp.postprocess_pair(solution)
        pp = energy_norm(spec, (macro, qq, us, ws), ref_pair)
    mesh = solution.space.mesh
    meta = {
        "example": spec.name, "epsilon": spec.epsilon, "m": spec.m,
        "q": solution.space.q, "N": mesh.N, "sigma": mesh.sigma,
        "family_boundary": mesh.family_boundary,
        "family_inner": mesh.family_inner, "kind": mesh.kind,
    }
    return ErrorReport(en, l2u, l2w, sc, pp, meta)


def eoc(e_coarse: float, e_fine: float) -> float:
    """Experimental order of convergence under mesh doubling."""
    if e_coarse <= 0 or e_fine <= 0:
        raise ValueError("eoc needs positive errors")
    return float(np.log2(e_coarse / e_fine))
