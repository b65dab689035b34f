"""Vertex-moment interpolation and macro-mesh postprocessing.

On every cell the interpolant of degree q matches the function at both cell
endpoints and has the same moments against all polynomials of degree q-2.
These q+1 conditions determine it uniquely; for q=1 the moment set is empty
and the operator reduces to nodal interpolation.  The same operator serves
both solution components; for m=1 they only differ in which endpoint
degrees of freedom the target space eliminates, which the interpolant
honours automatically (the data already satisfies the essential conditions).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .fem import DiscreteSpace, PairField, piecewise_eval, quadrature, reference_basis

__all__ = [
    "interpolate",
    "interpolate_field",
    "interpolate_pair",
    "local_interp_error_bound_check",
    "linf_stability_constant",
    "postprocess",
    "postprocess_pair",
]

#: composite rule used for moments of analytic functions
MOMENT_PANELS = 8


def _legendre01(m: int, x):
    """Shifted Legendre polynomial P_m(2x-1); orthogonal basis for moments."""
    return np.polynomial.legendre.legval(2.0 * np.asarray(x) - 1.0,
                                         [0.0] * m + [1.0])


@lru_cache(maxsize=16)
def _local_operator(q: int):
    """Precompute the reference-cell system of the endpoint+moment conditions.

    Rows: value at 0, value at 1, moments against P_0..P_{q-2} (shifted).
    Columns: nodal Gauss-Lobatto basis coefficients.
    """
    basis = reference_basis(q)
    xg, wg = quadrature(q + 2)
    V = basis.eval(xg, 0)
    M = np.zeros((q + 1, q + 1))
    M[0] = basis.eval(np.array([0.0]), 0)[0]
    M[1] = basis.eval(np.array([1.0]), 0)[0]
    for m in range(q - 1):
        M[2 + m] = (wg * _legendre01(m, xg)) @ V
    return np.linalg.inv(M), xg, wg


def _cell_moments_fn(fn: Callable, a: float, b: float, q: int) -> np.ndarray:
    """Moments int_a^b fn * P_m((x-a)/(b-a)) dx / (b-a), composite Gauss."""
    order = q + 6
    xg, wg = quadrature(order)
    out = np.zeros(max(q - 1, 0))
    for p in range(MOMENT_PANELS):
        lo = p / MOMENT_PANELS
        hi = (p + 1) / MOMENT_PANELS
        xi = lo + (hi - lo) * xg
        x = a + (b - a) * xi
        fv = np.asarray(fn(x), dtype=float)
        for m in range(q - 1):
            out[m] += np.sum(wg * (hi - lo) * fv * _legendre01(m, xi))
    return out


def _cell_moments_field(nodes: np.ndarray, qs: int, coeffs: np.ndarray,
                        a: float, b: float, q: int) -> np.ndarray:
    """Exact moments of a piecewise polynomial source over one target cell."""
    inner = nodes[(nodes > a + 1e-14) & (nodes < b - 1e-14)]
    cuts = np.concatenate([[a], inner, [b]])
    xg, wg = quadrature(((qs + q) // 2) + 2)
    out = np.zeros(max(q - 1, 0))
    for s0, s1 in zip(cuts[:-1], cuts[1:]):
        x = s0 + (s1 - s0) * xg
        fv = piecewise_eval(nodes, qs, coeffs, x, 0)
        xi = (x - a) / (b - a)
        for m in range(q - 1):
            out[m] += np.sum(wg * fv * _legendre01(m, xi)) * (s1 - s0) / (b - a)
    return out


def _interpolate_cells(values_at_ends: np.ndarray, moments: np.ndarray,
                       q: int) -> np.ndarray:
    """Solve the local systems; returns (ncells, q+1) nodal coefficients."""
    Minv, _, _ = _local_operator(q)
    ncells = values_at_ends.shape[0]
    rhs = np.zeros((ncells, q + 1))
    rhs[:, 0] = values_at_ends[:, 0]
    rhs[:, 1] = values_at_ends[:, 1]
    if q >= 2:
        rhs[:, 2:] = moments
    return rhs @ Minv.T


def _scatter(local: np.ndarray, q: int) -> np.ndarray:
    ncells = local.shape[0]
    out = np.zeros(q * ncells + 1)
    for i in range(ncells):
        out[i * q:i * q + q + 1] = local[i]
    return out


def interpolate(fn: Callable, mesh_nodes: np.ndarray, q: int) -> np.ndarray:
    """Nodal coefficients of the vertex-moment interpolant of a callable."""
    x = np.asarray(mesh_nodes, dtype=float)
    ncells = len(x) - 1
    ends = np.column_stack([np.asarray(fn(x[:-1]), dtype=float),
                            np.asarray(fn(x[1:]), dtype=float)])
    moments = np.zeros((ncells, max(q - 1, 0)))
    for i in range(ncells):
        moments[i] = _cell_moments_fn(fn, x[i], x[i + 1], q)
    return _scatter(_interpolate_cells(ends, moments, q), q)


def interpolate_field(src_nodes: np.ndarray, src_q: int, src_coeffs: np.ndarray,
                      mesh_nodes: np.ndarray, q: int) -> np.ndarray:
    """Interpolate a piecewise-polynomial field; moments are exact."""
    x = np.asarray(mesh_nodes, dtype=float)
    ncells = len(x) - 1
    ue = piecewise_eval(src_nodes, src_q, src_coeffs, x, 0)
    ends = np.column_stack([ue[:-1], ue[1:]])
    moments = np.zeros((ncells, max(q - 1, 0)))
    for i in range(ncells):
        moments[i] = _cell_moments_field(src_nodes, src_q, src_coeffs,
                                         x[i], x[i + 1], q)
    return _scatter(_interpolate_cells(ends, moments, q), q)


def interpolate_pair(reference: PairField, space: DiscreteSpace) -> PairField:
    """(I1 u_ref, I2 w_ref) in the target space.

    Eliminated endpoint degrees of freedom are set to zero exactly; the
    interpolated data already satisfies them up to roundoff.
    """
    rs = reference.space
    u = interpolate_field(rs.mesh.nodes, rs.q, reference.u_coeffs,
                          space.mesh.nodes, space.q)
    w = interpolate_field(rs.mesh.nodes, rs.q, reference.w_coeffs,
                          space.mesh.nodes, space.q)
    u[0] = u[-1] = 0.0
    if space.m == 2:
        w[0] = w[-1] = 0.0
    return PairField(space, u, w)


def local_interp_error_bound_check(derivs: Sequence[Callable],
                                   mesh_nodes: np.ndarray, q: int,
                                   ell: int, s: int) -> dict:
    """Cellwise ratio ||(v-Iv)^(ell)|| / ||h^(s-ell) v^(s)||.

    ``derivs`` lists the function and its derivatives, derivs[k] = v^(k),
    up to at least order s; requires 0 <= ell < s <= q+1.  The maximum
    ratio is the implied constant of the local estimate.
    """
    if not (0 <= ell < s <= q + 1):
        raise ValueError("need 0 <= ell < s <= q+1")
    if len(derivs) <= s:
        raise ValueError("need derivatives up to order s")
    x = np.asarray(mesh_nodes, dtype=float)
    coeffs = interpolate(derivs[0], x, q)
    xg, wg = quadrature(q + 6)
    ratios = []
    for i in range(len(x) - 1):
        h = x[i + 1] - x[i]
        lhs = rhs = 0.0
        for p in range(MOMENT_PANELS):
            xi = (p + xg) / MOMENT_PANELS
            xp = x[i] + h * xi
            iv = piecewise_eval(x, q, coeffs, xp, ell)
            fv = np.asarray(derivs[ell](xp), float)
            lhs += np.sum(wg * (fv - iv) ** 2) * h / MOMENT_PANELS
            rhs += np.sum(wg * (h ** (s - ell)
                                * np.asarray(derivs[s](xp), float)) ** 2) \
                * h / MOMENT_PANELS
        ratios.append(np.sqrt(lhs / rhs) if rhs > 0 else 0.0)
    ratios = np.asarray(ratios)
    return {"ratios": ratios, "max_ratio": float(ratios.max())}


def linf_stability_constant(q: int, rng: np.random.Generator,
                            trials: int = 50) -> float:
    """Measured sup-norm stability constant of the operator on one cell."""
    xs = np.linspace(0.0, 1.0, 401)
    worst = 0.0
    for _ in range(trials):
        c = rng.standard_normal(6)
        fn = lambda x: (c[0] + c[1] * np.sin(3 * x + c[2])
                        + c[3] * np.cos(5 * x + c[4]) + c[5] * x ** 2)
        coeffs = interpolate(fn, np.array([0.0, 1.0]), q)
        iv = piecewise_eval(np.array([0.0, 1.0]), q, coeffs, xs, 0)
        worst = max(worst, np.max(np.abs(iv)) / np.max(np.abs(fn(xs))))
    return worst


def _macro_pairs(nodes: np.ndarray) -> np.ndarray:
    ncells = len(nodes) - 1
    if ncells % 2:
        raise ValueError("macro pairing needs an even cell count")
    macro = nodes[::2]
    if not np.any(np.abs(macro - 1.0) <= 1e-14):
        raise ValueError("a macro cell straddles x=1")
    return macro


def postprocess(nodes: np.ndarray, q: int, coeffs: np.ndarray):
    """Lift a degree-q field to degree q+1 on the macro mesh.

    Adjacent cells (2i, 2i+1) form one macro cell; the lifted polynomial is
    the least-squares fit of the 2q+1 distinct nodal values, which for q=1
    is plain interpolation.  Reproduces P_{q+1} data exactly.
    """
    macro = _macro_pairs(nodes)
    qq = q + 1
    basis = reference_basis(qq)
    gl = reference_basis(q).nodes
    out_local = np.zeros((len(macro) - 1, qq + 1))
    for i in range(len(macro) - 1):
        a, mmid, b = nodes[2 * i], nodes[2 * i + 1], nodes[2 * i + 2]
        pts = np.concatenate([a + (mmid - a) * gl[:-1], [mmid],
                              mmid + (b - mmid) * gl[1:]])
        vals = piecewise_eval(nodes, q, coeffs, pts, 0)
        xi = (pts - a) / (b - a)
        V = basis.eval(xi, 0)
        sol, *_ = np.linalg.lstsq(V, vals, rcond=None)
        out_local[i] = sol
    return macro, qq, _scatter(out_local, qq)


def postprocess_pair(pair: PairField):
    """Postprocess both components; returns (macro_nodes, q+1, u*, w*)."""
    nodes = pair.space.mesh.nodes
    q = pair.space.q
    macro, qq, u = postprocess(nodes, q, pair.u_coeffs)
    _, _, w = postprocess(nodes, q, pair.w_coeffs)
    return macro, qq, u, w
