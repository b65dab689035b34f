"""Layer-adapted meshes on [0,2].

Four families are supported.  The classical S-type mesh grades N/8 cells
into each of the four layer regions (two boundary layers, two sides of the
interior layer at x=1) using a mesh generating function phi with phi(0)=0,
phi(1/2)=ln N.  The weak variants coarsen the interior-layer regions: the
weak equidistant mesh replaces them by uniform cells up to a transition mu,
the weak S-type mesh keeps the grading but widens the transition to nu.

The [1,2] half is the mirror image of the [0,1] half, so boundary regions
always carry the boundary family and interior-layer regions the interior
family.  For a single family this coincides with the translate-symmetric
construction (x_{i+N/2} = 1 + x_i).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Mesh1D",
    "MESH_FAMILIES",
    "transition_lambda",
    "transition_mu",
    "transition_nu",
    "weak_exponent",
    "build_stype",
    "build_weak_equidistant",
    "build_weak_stype",
    "build_mesh",
    "mesh_diagnostics",
    "max_psi_prime",
    "write_nodes",
]

MESH_FAMILIES = ("shishkin", "bakhvalov_s")


def _phi(family: str, t, N: int):
    t = np.asarray(t, dtype=float)
    if family == "shishkin":
        return 2.0 * t * np.log(N)
    if family == "bakhvalov_s":
        return -np.log(1.0 - 2.0 * t * (1.0 - 1.0 / N))
    raise ValueError(f"unknown mesh family {family!r}")


def max_psi_prime(family: str, N: int, samples: int = 4001) -> float:
    """max |psi'| on [0,1/2] for psi = exp(-phi), computed numerically."""
    t = np.linspace(0.0, 0.5, samples)
    psi = np.exp(-_phi(family, t, N))
    return float(np.max(np.abs(np.gradient(psi, t))))


def transition_lambda(epsilon: float, sigma: float, beta: float, N: int) -> float:
    """Boundary transition point lambda = min(sigma*eps*ln(N)/beta, 1/4)."""
    return min(sigma * epsilon * np.log(N) / beta, 0.25)


def weak_exponent(q: int, strength: int = 3) -> float:
    """Grading exponent 1 - (2s-1)/(2(q+1)) for a layer of amplitude eps^s.

    The interior layer has amplitude eps^3 in the primal variable and eps^2
    in the auxiliary one; equidistributing against the auxiliary layer
    (strength 2) yields the narrower transitions the reported experiments
    use, while strength 3 is the stated transition law.
    """
    return 1.0 - (2.0 * strength - 1.0) / (2.0 * (q + 1.0))


def transition_mu(q: int, epsilon: float, beta: float,
                  strength: int = 3) -> float:
    """Weak-equidistant transition: 1/4 for q<=2, else capped power of eps.

    The q<=2 branch applies to the default strength only; for strength 2
    the power law is used for every q.
    """
    if strength == 3 and q <= 2:
        return 0.25
    return min(epsilon ** weak_exponent(q, strength) / beta, 0.25)


def transition_nu(q: int, epsilon: float, sigma: float, beta: float, N: int,
                  strength: int = 3) -> float:
    """Weak S-type transition min(sigma/beta eps^(1-(2s-1)/(2(q+1))) lnN, 1/4)."""
    expo = weak_exponent(q, strength)
    nu = min(sigma / beta * epsilon ** expo * np.log(N), 0.25)
    lam = transition_lambda(epsilon, sigma, beta, N)
    return max(nu, lam)


@dataclass(frozen=True)
class Mesh1D:
    """Sorted node vector on [0,2] plus family metadata."""

    nodes: np.ndarray
    family_boundary: str
    family_inner: str
    lam: float
    inner_transition: float
    sigma: float
    q_hint: int
    kind: str                      # stype | weak_equidistant | weak_stype
    lambda_capped: bool = False
    inner_capped: bool = False

    @property
    def N(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))


def _graded_block(scale: float, transition: float, ncells: int, family: str,
                  N: int, capped: bool) -> np.ndarray:
    """Nodes 0..transition with grading anchored at 0 (uniform when capped)."""
    i = np.arange(ncells + 1)
    if capped:
        return transition * i / ncells
    t = 0.5 * i / ncells          # phi argument runs over [0, 1/2]
    x = scale * _phi(family, t, N)
    x[0] = 0.0
    x[-1] = transition
    return x


def _assemble_half(bnd_block: np.ndarray, mid: np.ndarray,
                   inner_block: np.ndarray) -> np.ndarray:
    """[0,1] from boundary grading, uniform middle, mirrored interior grading."""
    inner = 1.0 - inner_block[::-1]
    inner[-1] = 1.0
    return np.concatenate([bnd_block[:-1], mid[:-1], inner])


def _mirror(half: np.ndarray) -> np.ndarray:
    right = 2.0 - half[::-1]
    right[0] = 1.0
    right[-1] = 2.0
    return np.concatenate([half[:-1], right])


def _check_N(N: int) -> None:
    if N < 8 or N % 8:
        raise ValueError("N must be a positive multiple of 8")


def build_stype(N: int, epsilon: float, sigma: float, beta: float,
                boundary_family: str = "bakhvalov_s",
                inner_family: Optional[str] = None,
                q_hint: int = 1) -> Mesh1D:
    """Classical S-type mesh: transition lambda for all four layer regions."""
    _check_N(N)
    inner_family = inner_family or boundary_family
    lam = transition_lambda(epsilon, sigma, beta, N)
    capped = lam >= 0.25
    scale = sigma * epsilon / beta
    bnd = _graded_block(scale, lam, N // 8, boundary_family, N, capped)
    inn = _graded_block(scale, lam, N // 8, inner_family, N, capped)
    mid = np.linspace(lam, 1.0 - lam, N // 4 + 1)
    half = _assemble_half(bnd, mid, inn)
    return Mesh1D(_mirror(half), boundary_family, inner_family, lam, lam,
                  sigma, q_hint, "stype", capped, capped)


def build_weak_equidistant(N: int, epsilon: float, sigma: float, beta: float,
                           q: int, boundary_family: str = "bakhvalov_s",
                           strength: int = 3) -> Mesh1D:
    """Graded boundary regions, equidistant interior with transition mu."""
    _check_N(N)
    lam = transition_lambda(epsilon, sigma, beta, N)
    mu = transition_mu(q, epsilon, beta, strength)
    if lam >= 1.0 - mu:
        raise ValueError("region boundaries are non-increasing (lambda >= 1-mu)")
    capped = lam >= 0.25
    scale = sigma * epsilon / beta
    bnd = _graded_block(scale, lam, N // 8, boundary_family, N, capped)
    mid = np.linspace(lam, 1.0 - mu, N // 4 + 1)
    # interior region (1-mu, 1+mu) gets N/4 uniform cells; its left half ends at 1
    inner_half = np.linspace(1.0 - mu, 1.0, N // 8 + 1)
    half = np.concatenate([bnd[:-1], mid[:-1], inner_half])
    half[-1] = 1.0
    return Mesh1D(_mirror(half), boundary_family, "weak_equidistant", lam, mu,
                  sigma, q, "weak_equidistant", capped, mu >= 0.25)


def build_weak_stype(N: int, epsilon: float, sigma: float, beta: float, q: int,
                     boundary_family: str = "bakhvalov_s",
                     inner_family: str = "shishkin",
                     strength: int = 3) -> Mesh1D:
    """S-type layout with the widened transition nu in the interior regions."""
    _check_N(N)
    lam = transition_lambda(epsilon, sigma, beta, N)
    nu = transition_nu(q, epsilon, sigma, beta, N, strength)
    if lam >= 1.0 - nu:
        raise ValueError("regions collide (lambda >= 1-nu)")
    lam_capped = lam >= 0.25
    nu_capped = nu >= 0.25
    expo = weak_exponent(q, strength)
    bnd = _graded_block(sigma * epsilon / beta, lam, N // 8,
                        boundary_family, N, lam_capped)
    inn = _graded_block(sigma * epsilon ** expo / beta, nu, N // 8,
                        inner_family, N, nu_capped)
    mid = np.linspace(lam, 1.0 - nu, N // 4 + 1)
    half = _assemble_half(bnd, mid, inn)
    return Mesh1D(_mirror(half), boundary_family, inner_family, lam, nu,
                  sigma, q, "weak_stype", lam_capped, nu_capped)


def build_mesh(kind: str, N: int, epsilon: float, sigma: float, beta: float,
               q: int, boundary_family: str = "bakhvalov_s",
               inner_family: Optional[str] = None,
               strength: int = 3) -> Mesh1D:
    """Uniform front-end used by the experiment runner."""
    if kind == "stype":
        return build_stype(N, epsilon, sigma, beta, boundary_family,
                           inner_family, q_hint=q)
    if kind == "weak_equidistant":
        return build_weak_equidistant(N, epsilon, sigma, beta, q,
                                      boundary_family, strength)
    if kind == "weak_stype":
        return build_weak_stype(N, epsilon, sigma, beta, q, boundary_family,
                                inner_family or "shishkin", strength)
    raise ValueError(f"unknown mesh kind {kind!r}")


def mesh_diagnostics(mesh: Mesh1D, beta: float = 1.0,
                     epsilon: Optional[float] = None) -> dict:
    """Cell-width statistics and invariant flags for a mesh."""
    x = mesh.nodes
    N = mesh.N
    h = mesh.widths
    report = {
        "N": N,
        "min_width": float(h.min()),
        "max_width": float(h.max()),
        "strictly_increasing": bool(np.all(h > 0)),
        "node_at_one": abs(x[N // 2] - 1.0) <= 1e-15,
        "endpoints": (x[0] == 0.0 and x[-1] == 2.0),
        "x_N8_is_lambda": abs(x[N // 8] - mesh.lam) <= 1e-13 * max(1.0, mesh.lam),
        "x_3N8_is_transition": abs(x[3 * N // 8] - (1.0 - mesh.inner_transition))
                               <= 1e-13,
        "lambda_capped": mesh.lambda_capped,
        "inner_capped": mesh.inner_capped,
    }
    shifted = 1.0 + x[: N // 2 + 1]
    report["translate_symmetric"] = bool(
        np.max(np.abs(shifted - x[N // 2:])) <= 1e-13)
    counts = {
        "boundary_left": int(N // 8),
        "mid_left": int(N // 4),
        "inner_left": int(N // 8),
    }
    report["region_counts"] = counts
    if epsilon is not None and mesh.kind == "stype" and not mesh.lambda_capped:
        # layer-region width bound h_i <= C eps/N max|psi'| exp(beta x/(sigma eps))
        mp = max(max_psi_prime(mesh.family_boundary, N),
                 max_psi_prime(mesh.family_inner, N))
        C = 4.0 * mesh.sigma / beta
        bound_ok = True
        for i in range(N // 8):
            hi = h[i]
            cap = C * epsilon / N * mp * np.exp(beta * x[i + 1] /
                                                (mesh.sigma * epsilon))
            if hi > cap * (1.0 + 1e-10):
                bound_ok = False
        report["layer_width_bound"] = bound_ok
    return report


def write_nodes(mesh: Mesh1D, path) -> None:
    """One node per line, 17 significant digits."""
    with open(path, "w") as fh:
        for v in mesh.nodes:
            fh.write(f"{v:.17g}\n")
