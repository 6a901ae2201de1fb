"""Equilibrium measure of a finite union of real intervals.

The density on ``E = U [alpha_i, beta_i]`` is ``|Z(s)| / (pi sqrt|Y(s)|)``
where ``Y`` is the product over all endpoints and ``Z`` the monic polynomial
with one root ``zeta_i`` in each gap.  The roots are fixed by the vanishing
of the gap integrals of ``Z/sqrt|Y|``.  Each gap integral is a Chebyshev-Gauss
sum which is linear in its own root, so a Gauss-Seidel sweep that solves
equation ``i`` exactly for ``zeta_i`` converges quickly; the Jacobian is
strongly diagonally dominant.

All products of many linear factors are accumulated as sums of logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numba
import numpy as np

from .errors import ConvergenceError, DomainError, NumericError, ParameterError, StateError
from .ifs import DiscreteMeasure, IntervalUnion
from .quadrature import chebyshev_nodes

DEFAULT_GAP_ORDER = 64
DEFAULT_RESID_TOL = 1e-10
DEFAULT_MAX_ITER = 500
_CLAMP = 1e-12


@dataclass(frozen=True)
class GapRootSystem:
    """Gap roots of the equilibrium problem plus solver bookkeeping."""

    intervals: IntervalUnion
    roots: np.ndarray
    gap_order: np.ndarray
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0))
    iterations: int = 0
    converged: bool = False
    step_tol: float = 0.0
    resid_tol: float = DEFAULT_RESID_TOL

    def __post_init__(self):
        N = self.intervals.N
        roots = np.array(self.roots, dtype=float).ravel()
        if len(roots) != N - 1:
            raise ParameterError(f"{N} intervals need {N - 1} gap roots, got {len(roots)}")
        gaps = self.intervals.gaps
        if len(roots) and not (np.all(roots > gaps[:, 0]) and np.all(roots < gaps[:, 1])):
            raise DomainError("every gap root must lie strictly inside its gap")
        order = np.broadcast_to(np.asarray(self.gap_order, dtype=np.int64), (N - 1,)).copy()
        if np.any(order < 1):
            raise ParameterError("gap quadrature order must be >= 1")
        for arr in (roots, order):
            arr.setflags(write=False)
        object.__setattr__(self, "roots", roots)
        object.__setattr__(self, "gap_order", order)

    @property
    def N(self) -> int:
        return self.intervals.N

    def to_dict(self) -> dict:
        return {
            "intervals": self.intervals.to_list(),
            "roots": self.roots.tolist(),
            "residuals": np.asarray(self.residuals).tolist(),
            "gap_order": self.gap_order.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "step_tol": self.step_tol,
            "resid_tol": self.resid_tol,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GapRootSystem":
        return cls(IntervalUnion(data["intervals"]), np.array(data["roots"], dtype=float),
                   np.array(data["gap_order"], dtype=np.int64),
                   np.array(data.get("residuals", []), dtype=float),
                   int(data.get("iterations", 0)), bool(data.get("converged", False)),
                   float(data.get("step_tol", 0.0)),
                   float(data.get("resid_tol", DEFAULT_RESID_TOL)))


# -- kernels ---------------------------------------------------------------

@numba.njit(cache=True)
def _log_weight(s, roots, alpha, beta, skip_iv, skip_gap):
    """``log|Z(s)| - 0.5 log|Y~(s)|`` and the sign of ``Z(s)``.

    ``Y~`` omits the endpoints of interval ``skip_iv`` or, when ``skip_gap``
    is non-negative, the two endpoints of that gap (``beta[g], alpha[g+1]``).
    Root ``skip_gap`` is left out of ``Z`` as well when ``skip_gap >= 0``.
    """
    N = len(alpha)
    lg = 0.0
    neg = 0
    for j in range(len(roots)):
        if j == skip_gap:
            continue
        dz = s - roots[j]
        if dz < 0:
            neg += 1
        lg += math.log(abs(dz))
    for k in range(N):
        if k == skip_iv:
            continue
        da = s - alpha[k]
        db = s - beta[k]
        if skip_gap >= 0:
            if k == skip_gap:
                db = 1.0
            elif k == skip_gap + 1:
                da = 1.0
        prod = da * db
        if prod == 0.0:
            return -math.inf, 0
        lg -= 0.5 * math.log(abs(prod))
    return lg, neg


@numba.njit(cache=True)
def _gap_logq(i, roots, alpha, beta, theta, out):
    """Log-magnitudes of ``prod_{j!=i}(v - zeta_j)/sqrt|Y~_i(v)|`` at gap nodes."""
    lo = beta[i]
    hi = alpha[i + 1]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    bad = False
    for l in range(len(theta)):
        v = mid + half * theta[l]
        lg, _ = _log_weight(v, roots, alpha, beta, -1, i)
        out[l] = lg
        if lg == -math.inf:
            bad = True
    return bad


@numba.njit(cache=True)
def _sweep(roots, alpha, beta, thetas, offsets, orders, clamp):
    """One Gauss-Seidel pass; returns the largest root displacement."""
    maxdisp = 0.0
    buf = np.empty(orders.max())
    for i in range(len(roots)):
        G = orders[i]
        theta = thetas[offsets[i]:offsets[i] + G]
        logq = buf[:G]
        if _gap_logq(i, roots, alpha, beta, theta, logq):
            return -1.0
        top = logq.max()
        lo = beta[i]
        hi = alpha[i + 1]
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        num = 0.0
        den = 0.0
        for l in range(G):
            q = math.exp(logq[l] - top)
            num += (mid + half * theta[l]) * q
            den += q
        new = num / den
        edge = clamp * (hi - lo)
        if new <= lo + edge:
            new = lo + edge
        elif new >= hi - edge:
            new = hi - edge
        disp = abs(new - roots[i])
        if disp > maxdisp:
            maxdisp = disp
        roots[i] = new
    return maxdisp


@numba.njit(cache=True)
def _residual(i, roots, alpha, beta, theta):
    lo = beta[i]
    hi = alpha[i + 1]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    # sign of prod_{j != i}(v - zeta_j) is constant on gap i
    sign = 1.0 if (len(roots) - 1 - i) % 2 == 0 else -1.0
    total = 0.0
    for l in range(len(theta)):
        v = mid + half * theta[l]
        lg, _ = _log_weight(v, roots, alpha, beta, -1, i)
        if lg == -math.inf:
            return math.nan
        total += (v - roots[i]) * math.exp(lg)
    return sign * total / len(theta)


@numba.njit(cache=True)
def _all_residuals(roots, alpha, beta, thetas, offsets, orders, out):
    for i in range(len(roots)):
        out[i] = _residual(i, roots, alpha, beta, thetas[offsets[i]:offsets[i] + orders[i]])


@numba.njit(cache=True)
def _atom_weights(roots, alpha, beta, theta, xs, ws):
    G = len(theta)
    N = len(alpha)
    for i in range(N):
        mid = 0.5 * (alpha[i] + beta[i])
        half = 0.5 * (beta[i] - alpha[i])
        for l in range(G):
            s = mid + half * theta[l]
            lg, _ = _log_weight(s, roots, alpha, beta, i, -1)
            xs[i * G + l] = s
            ws[i * G + l] = math.exp(lg) / G


@numba.njit(cache=True)
def _log_density(s, roots, alpha, beta):
    lg, _ = _log_weight(s, roots, alpha, beta, -1, -1)
    return lg


# -- helpers ---------------------------------------------------------------

def _gap_nodes(orders: np.ndarray):
    offsets = np.zeros(len(orders), dtype=np.int64)
    if len(orders):
        offsets[1:] = np.cumsum(orders)[:-1]
    thetas = np.concatenate([chebyshev_nodes(int(G)) for G in orders]) if len(orders) \
        else np.empty(0)
    return thetas, offsets


def _arrays(sys: GapRootSystem):
    iv = sys.intervals
    return (np.ascontiguousarray(sys.roots), np.ascontiguousarray(iv.alpha),
            np.ascontiguousarray(iv.beta))


# -- operations ------------------------------------------------------------

def gap_residual(sys: GapRootSystem, i: int) -> float:
    """Chebyshev-Gauss estimate of ``int_{gap i} Z/sqrt|Y| ds`` (1-based ``i``)."""
    if sys.N < 2:
        raise ParameterError("a single interval has no gaps")
    if not 1 <= i <= sys.N - 1:
        raise ParameterError(f"gap index must be in 1..{sys.N - 1}")
    roots, alpha, beta = _arrays(sys)
    val = _residual(i - 1, roots, alpha, beta, chebyshev_nodes(int(sys.gap_order[i - 1])))
    if math.isnan(val):
        raise NumericError("gap node coincides with an interval endpoint")
    return float(val)


def solve_gap_roots(intervals: IntervalUnion, gap_order=DEFAULT_GAP_ORDER,
                    step_tol: float | None = None, resid_tol: float = DEFAULT_RESID_TOL,
                    max_iter: int = DEFAULT_MAX_ITER, initial=None) -> GapRootSystem:
    """Solve for the gap roots by Gauss-Seidel sweeps.

    ``gap_order`` is an integer or one order per gap.  Iteration stops once a
    sweep moves no root by more than ``step_tol`` (default ``1e-13`` times
    the hull width) and every gap residual is at most ``resid_tol``.
    """
    N = intervals.N
    lo, hi = intervals.hull
    if step_tol is None:
        step_tol = 1e-13 * (hi - lo)
    orders = np.broadcast_to(np.asarray(gap_order, dtype=np.int64), (max(N - 1, 0),)).copy()
    if N == 1:
        return GapRootSystem(intervals, np.empty(0), orders, np.empty(0), 0, True,
                             step_tol, resid_tol)
    if max_iter < 1:
        raise ParameterError("max_iter must be >= 1")
    gaps = intervals.gaps
    roots = gaps.mean(axis=1) if initial is None else np.array(initial, dtype=float)
    alpha = np.ascontiguousarray(intervals.alpha)
    beta = np.ascontiguousarray(intervals.beta)
    thetas, offsets = _gap_nodes(orders)
    resid = np.full(N - 1, np.inf)
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        disp = _sweep(roots, alpha, beta, thetas, offsets, orders, _CLAMP)
        if disp < 0:
            raise NumericError("gap node coincides with an interval endpoint")
        if disp <= step_tol:
            _all_residuals(roots, alpha, beta, thetas, offsets, orders, resid)
            if np.max(np.abs(resid)) <= resid_tol:
                converged = True
                break
    if not converged:
        _all_residuals(roots, alpha, beta, thetas, offsets, orders, resid)
    sys = GapRootSystem(intervals, roots, orders, resid, it, converged, step_tol, resid_tol)
    if not converged:
        raise ConvergenceError(
            f"gap roots did not converge in {max_iter} sweeps "
            f"(last max |K| = {np.max(np.abs(resid)):.3e})", sys)
    return sys


def sweep_once(sys: GapRootSystem) -> tuple[GapRootSystem, float]:
    """One more Gauss-Seidel pass from ``sys``; returns the new system and displacement."""
    roots, alpha, beta = _arrays(sys)
    roots = roots.copy()
    thetas, offsets = _gap_nodes(sys.gap_order)
    disp = _sweep(roots, alpha, beta, thetas, offsets, sys.gap_order, _CLAMP)
    return replace(sys, roots=roots, iterations=sys.iterations + 1), float(disp)


def equilibrium_atoms(sys: GapRootSystem, G: int) -> DiscreteMeasure:
    """Discrete approximation with ``G`` Chebyshev-Gauss atoms per interval.

    The atoms are not renormalised; their mass tends to 1 as ``G`` grows.
    """
    if not sys.converged:
        raise StateError("gap roots have not converged")
    if G < 1:
        raise ParameterError("G must be >= 1")
    roots, alpha, beta = _arrays(sys)
    theta = chebyshev_nodes(G)[::-1].copy()
    xs = np.empty(sys.N * G)
    ws = np.empty(sys.N * G)
    _atom_weights(roots, alpha, beta, theta, xs, ws)
    return DiscreteMeasure(xs, ws)


def equilibrium_density(sys: GapRootSystem, s: float) -> float:
    """Density of the equilibrium measure at an interior point ``s``."""
    if sys.intervals.locate(s) < 0:
        raise DomainError(f"{s!r} is not inside any interval of the support")
    roots, alpha, beta = _arrays(sys)
    return math.exp(_log_density(float(s), roots, alpha, beta)) / math.pi


def equilibrium_measure(intervals: IntervalUnion, G: int, **solver) -> DiscreteMeasure:
    """Convenience: solve the gap roots, then build the ``G``-point atoms."""
    return equilibrium_atoms(solve_gap_roots(intervals, **solver), G)
