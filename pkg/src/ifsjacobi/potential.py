"""Complex logarithmic potential, capacity and root asymptotics.

Conventions: ``L(z) = int log(z - s) dnu(s)`` with the principal branch per
atom, ``V = -Re L``, ``rotation = Im L`` and ``g = -V - log(cap)``.  The
monic polynomials of a Jacobi matrix satisfy ``(1/j) log P_j(z) -> L(z)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import ParameterError, PoleError, SingularityError
from .ifs import DiscreteMeasure, IntervalUnion
from .jacobi import JacobiMatrix
from .quadrature import chebyshev_nodes, map_to_interval

QUADRATURE = "quadrature"
ROOT_ASYMPTOTICS = "root_asymptotics"

_COLLISION = 1e-300
_POLE = 1e-300


@dataclass(frozen=True)
class PotentialSample:
    z: complex
    L: complex
    method: str = QUADRATURE
    g: float | None = None
    j_used: int | None = None
    window: int | None = None

    @property
    def V(self) -> float:
        return -self.L.real

    @property
    def rotation(self) -> float:
        return self.L.imag

    def with_capacity(self, cap: float) -> "PotentialSample":
        return PotentialSample(self.z, self.L, self.method, greens_value(self.V, cap),
                               self.j_used, self.window)


@dataclass(frozen=True)
class CapacityEstimate:
    value: float
    spread: float
    probes: np.ndarray

    def __float__(self) -> float:
        return self.value


# -- quadrature route ------------------------------------------------------

def log_transform(measure: DiscreteMeasure, z: complex) -> PotentialSample:
    """``L(z) = sum_i w_i log(z - x_i)`` by direct summation over the atoms."""
    z = complex(z)
    d = z - measure.x
    k = int(np.argmin(np.abs(d)))
    if abs(d[k]) < _COLLISION:
        raise SingularityError(f"z={z!r} coincides with the atom at {float(measure.x[k])!r}",
                               atom=float(measure.x[k]))
    if z.imag == 0.0:
        # principal branch on the real axis: arg(negative) = +pi
        L = complex(np.dot(measure.w, np.log(np.abs(d))),
                    math.pi * float(measure.w[d.real < 0].sum()))
    else:
        L = complex(np.dot(measure.w, np.log(d)))
    return PotentialSample(z, L, QUADRATURE)


def potential(measure: DiscreteMeasure, z: complex) -> float:
    return log_transform(measure, z).V


def capacity_probes(measure: DiscreteMeasure, intervals: IntervalUnion | None = None,
                    per_interval: int = 5) -> np.ndarray:
    """Interior probe points for the capacity estimate.

    Base points sit at Chebyshev positions of each interval; each is replaced
    by the two points at 1/6 and 5/6 of the span between its neighbouring
    atoms, where the discretisation error of ``V`` cancels to leading order.
    """
    if per_interval < 1:
        raise ParameterError("per_interval must be >= 1")
    x = measure.x
    if len(x) < 2:
        raise ParameterError("need at least two atoms to place probes")
    if intervals is None:
        intervals = IntervalUnion([[x[0], x[-1]]])
    out = []
    for lo, hi in intervals.intervals:
        for p in map_to_interval(chebyshev_nodes(per_interval), (lo, hi)):
            k = int(np.searchsorted(x, p))
            if k == 0 or k == len(x):
                continue
            left, right = x[k - 1], x[k]
            out.extend([left + (right - left) / 6.0, left + 5.0 * (right - left) / 6.0])
    if not out:
        raise ParameterError("no probe falls between two atoms")
    return np.array(out)


def capacity_from_potential(measure: DiscreteMeasure, intervals: IntervalUnion | None = None,
                            probes=None, per_interval: int = 5) -> CapacityEstimate:
    """``exp(-V(z0))`` averaged over probe points ``z0`` inside the support.

    ``probes`` overrides the automatic placement of :func:`capacity_probes`.
    """
    if probes is None:
        probes = capacity_probes(measure, intervals, per_interval)
    probes = np.atleast_1d(np.asarray(probes, dtype=float))
    caps = np.array([math.exp(-potential(measure, p)) for p in probes])
    return CapacityEstimate(float(caps.mean()), float(caps.max() - caps.min()), probes)


def energy(measure: DiscreteMeasure, intervals: IntervalUnion | None = None, **kw) -> float:
    """Logarithmic energy ``-log Cap`` through the capacity estimate."""
    return -math.log(capacity_from_potential(measure, intervals, **kw).value)


# -- Jacobi route ----------------------------------------------------------

@numba.njit(cache=True)
def _ratios(a, b, z, jmax, out):
    """Fill ``out[j-1] = rho_j``; return the first index with a pole, or 0."""
    rho = z - a[0]
    out[0] = rho
    if abs(rho) < _POLE:
        return 1
    for j in range(1, jmax):
        rho = (z - a[j]) - b[j] * b[j] / rho
        out[j] = rho
        if abs(rho) < _POLE:
            return j + 1
    return 0


@dataclass(frozen=True)
class RatioSequence:
    """``rho_1..rho_J`` with running means of ``log|rho|`` and ``arg rho`` in [0, 2 pi)."""

    rho: np.ndarray
    log_mean: np.ndarray
    arg_mean: np.ndarray

    @property
    def running(self) -> np.ndarray:
        return self.log_mean + 1j * self.arg_mean


def ratio_sequence(J: JacobiMatrix, z: complex, j_max: int | None = None) -> RatioSequence:
    """``rho_{j+1} = (z - a_j) - b_j**2 / rho_j`` with ``rho_1 = z - a_0``."""
    j_max = J.rank if j_max is None else j_max
    if not 1 <= j_max <= J.rank:
        raise ParameterError(f"j_max must lie in [1, {J.rank}]")
    rho = np.empty(j_max, dtype=np.complex128)
    bad = _ratios(J.a, J.b, complex(z), j_max, rho)
    if bad:
        raise PoleError(f"z={z!r} is a zero of P_{bad}", index=bad)
    j = np.arange(1, j_max + 1)
    log_mean = np.cumsum(np.log(np.abs(rho))) / j
    arg_mean = np.cumsum(np.mod(np.angle(rho), 2 * math.pi)) / j
    return RatioSequence(rho, log_mean, arg_mean)


def root_asymptotics(J: JacobiMatrix, z: complex, j_hi: int, L: int,
                     cap: float | None = None, full: bool = False) -> PotentialSample:
    """``L(z)`` from the running means of ``log rho`` averaged over ``l in [j_hi, j_hi+L)``.

    With ``full=True`` the average runs over ``l in [1, j_hi]`` instead.
    """
    if j_hi < 1 or L < 1:
        raise ParameterError("j_hi and L must be >= 1")
    top = j_hi if full else j_hi + L - 1
    if top > J.rank:
        raise ParameterError(f"need rank >= {top}, have {J.rank}")
    seq = ratio_sequence(J, z, top)
    run = seq.running
    est = run[:j_hi].mean() if full else run[j_hi - 1:top].mean()
    s = PotentialSample(complex(z), complex(est), ROOT_ASYMPTOTICS,
                        j_used=j_hi, window=j_hi if full else L)
    return s.with_capacity(cap) if cap is not None else s


def default_window(rank: int) -> tuple[int, int]:
    """``(j_hi, L)`` averaging over the last 4% of the rank (at least 50 rows)."""
    L = max(50, math.ceil(0.04 * rank))
    if L >= rank:
        L = max(1, rank // 2)
    return rank - L + 1, L


def greens_value(V: float, cap: float) -> float:
    if not cap > 0:
        raise ParameterError("capacity must be positive")
    return -V - math.log(cap)


def greens_function(sample: PotentialSample, cap: float) -> float:
    """``g(z) = -V(z) - log(cap)``."""
    return greens_value(sample.V, cap)


def evaluate(source, z: complex, cap: float | None = None, j_hi: int | None = None,
             L: int | None = None) -> PotentialSample:
    """Potential sample from a measure (quadrature) or a Jacobi matrix (asymptotics)."""
    if isinstance(source, DiscreteMeasure):
        s = log_transform(source, z)
        return s.with_capacity(cap) if cap is not None else s
    if isinstance(source, JacobiMatrix):
        if j_hi is None or L is None:
            j_hi, L = default_window(source.rank)
        return root_asymptotics(source, z, j_hi, L, cap)
    raise ParameterError("source must be a DiscreteMeasure or a JacobiMatrix")


# -- batch files -----------------------------------------------------------

def read_points_csv(path) -> list[complex]:
    from .serialize import read_csv
    _, rows = read_csv(path)
    try:
        return [complex(float(r["re"]), float(r["im"])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ParameterError(f"{path}: expected columns re,im ({exc})") from exc


def write_samples_csv(path, samples) -> None:
    from .serialize import write_csv
    write_csv(path, ["re", "im", "V", "rotation", "g"],
              [(s.z.real, s.z.imag, s.V, s.rotation, s.g) for s in samples])
