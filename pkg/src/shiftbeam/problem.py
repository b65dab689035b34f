"""Continuous problem definition.

The equation on (0,2) is

    eps^2 u'''' - b(x) u'' + c(x) u + d(x) u(x-1) = f(x),
    u = phi on (-1,0),   u(0) = u(2) = 0,   u^(m)(0) = u^(m)(2) = 0,

with m in {1,2}.  Coefficients are callables on [0,2]; the history ``phi``
is a callable on [-1,0].  The constants ``beta`` (with b >= beta^2) and
``delta`` (the coercivity margin) are derived by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ProblemSpec",
    "derive_constants",
    "make_example1",
    "make_example2",
    "validate",
]

#: number of sample points used when deriving beta/delta from callables
CONSTANT_GRID = 10_001


def _vectorize(fn: Callable) -> Callable:
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        out = fn(x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy()

    return wrapped


def constant(value: float) -> Callable:
    """Coefficient callable that is identically ``value``."""

    def fn(x):
        x = np.asarray(x, dtype=float)
        return np.full_like(x, float(value))

    return fn


def _checked_history(phi: Callable) -> Callable:
    def wrapped(s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -1.0 - 1e-14) or np.any(s > 1e-14):
            raise ValueError("history is only defined on [-1, 0]")
        return np.broadcast_to(np.asarray(phi(s), dtype=float), s.shape).copy()

    return wrapped


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable description of one problem instance."""

    epsilon: float
    m: int
    b: Callable
    c: Callable
    d: Callable
    f: Callable
    phi: Callable
    beta: float
    delta: float
    b_prime: Optional[Callable] = None
    name: str = "custom"
    constant_coefficients: bool = False

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.m not in (1, 2):
            raise ValueError("m must be 1 or 2")

    def history(self, s):
        """Evaluate phi; raises outside [-1, 0]."""
        return _checked_history(self.phi)(s)

    def b_derivative(self, x):
        """b'(x), analytic if supplied, else central differences."""
        if self.b_prime is not None:
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(np.asarray(self.b_prime(x), dtype=float), x.shape).copy()
        x = np.asarray(x, dtype=float)
        h = 1e-6
        xl = np.clip(x - h, 0.0, 2.0)
        xr = np.clip(x + h, 0.0, 2.0)
        return (self.b(xr) - self.b(xl)) / (xr - xl)

    def with_epsilon(self, epsilon: float) -> "ProblemSpec":
        return replace(self, epsilon=float(epsilon))


def derive_constants(b: Callable, c: Callable, d: Callable,
                     b_prime: Optional[Callable] = None,
                     grid_n: int = CONSTANT_GRID) -> tuple[float, float]:
    """Sample-based stand-ins for the analytic constants.

    beta  = sqrt(min b) over [0,2];
    delta = min over [0,2] of c - sup|d|_(1,2)/2 - sup|b'|^2/(2 beta^2).

    The c-term is taken pointwise (infimum over the interval); the d and b'
    contributions are global sups, matching the assumption the analysis makes.
    """
    x = np.linspace(0.0, 2.0, grid_n)
    bv = np.asarray(b(x), dtype=float)
    if bv.ndim == 0:
        bv = np.full_like(x, float(bv))
    bmin = bv.min()
    if bmin <= 0:
        raise ValueError("b must be positive on [0,2]")
    beta = float(np.sqrt(bmin))

    x12 = np.linspace(1.0, 2.0, grid_n // 2)
    dv = np.abs(np.asarray(d(x12), dtype=float))
    d_sup = float(dv.max()) if dv.ndim else float(dv)

    if b_prime is not None:
        bp = np.abs(np.asarray(b_prime(x), dtype=float))
        if bp.ndim == 0:
            bp = np.full_like(x, float(bp))
    else:
        bp = np.abs(np.gradient(bv, x))
    bp_sup = float(bp.max())

    cv = np.asarray(c(x), dtype=float)
    if cv.ndim == 0:
        cv = np.full_like(x, float(cv))
    delta = float(cv.min() - d_sup / 2.0 - bp_sup ** 2 / (2.0 * beta ** 2))
    if delta <= 0:
        raise ValueError(
            f"coercivity margin delta={delta:.3e} is not positive; "
            "problem violates the standing assumptions")
    return beta, delta


def make_example1(epsilon: float) -> ProblemSpec:
    """First benchmark: b=1, c=2, d=1, f=5, phi=0, clamped ends (m=1)."""
    beta, delta = 1.0, 1.5
    return ProblemSpec(
        epsilon=float(epsilon), m=1,
        b=constant(1.0), c=constant(2.0), d=constant(1.0), f=constant(5.0),
        phi=constant(0.0), beta=beta, delta=delta,
        b_prime=constant(0.0), name="ex1", constant_coefficients=True)


def make_example2(epsilon: float) -> ProblemSpec:
    """Second benchmark: same data as the first, supported ends (m=2)."""
    return replace(make_example1(epsilon), m=2, name="ex2")


def validate(spec: ProblemSpec, grid_n: int = 2001) -> None:
    """Check the standing assumptions on a sample grid; raises on failure."""
    x = np.linspace(0.0, 2.0, grid_n)
    bv = np.asarray(spec.b(x), dtype=float)
    if np.any(bv < spec.beta ** 2 - 1e-12):
        raise ValueError("b(x) >= beta^2 violated")
    x12 = x[x >= 1.0]
    d_sup = float(np.max(np.abs(spec.d(x12))))
    bp_sup = float(np.max(np.abs(spec.b_derivative(x))))
    margin = np.asarray(spec.c(x), dtype=float) - d_sup / 2.0 \
        - bp_sup ** 2 / (2.0 * spec.beta ** 2)
    if np.any(margin < spec.delta - 1e-10):
        raise ValueError("coercivity margin smaller than the stored delta")
    if abs(float(spec.history(0.0))) > 1e-12:
        raise ValueError("history must vanish at 0")
    # m-th derivative of phi at 0 by one-sided differences inside [-1,0]
    h = 1e-4
    if spec.m == 1:
        dphi = (spec.history(0.0) - spec.history(-h)) / h
    else:
        dphi = (spec.history(0.0) - 2 * spec.history(-h)
                + spec.history(-2 * h)) / h ** 2
    if abs(float(dphi)) > 1e-6:
        raise ValueError("phi^(m)(0) = 0 compatibility violated")
