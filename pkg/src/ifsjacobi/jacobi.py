"""Jacobi matrices of discrete measures.

The workhorse is a streaming form of the RKPW (Rutishauser, Kahan, Pal,
Walker) scheme of Gragg and Harrod in squared variables: atoms are folded
one at a time into the current tridiagonal matrix by a chain of implicit
plane rotations, with the diagonal shifted by the new atom's position.  The
chain only couples row ``k-1`` to row ``k``, so it can be cut at any rank
without changing the rows above the cut, and the row range can be split
among pipelined workers.

A discrete Stieltjes procedure is kept as an independent (unstable) oracle,
and Golub-Welsch turns a matrix back into Gauss nodes and weights.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InstabilityError, NumericError, ParameterError
from .ifs import DiscreteMeasure

#: Rank cap for the Stieltjes oracle; it loses all accuracy well before this.
STIELTJES_MAX_RANK = 64


@dataclass(frozen=True)
class JacobiMatrix:
    """Recurrence coefficients of an orthonormal polynomial family.

    ``a[j]`` is the diagonal for ``j = 0..rank-1``; ``b[j]`` the off-diagonal
    for ``j = 1..rank-1`` (``b[0]`` is stored as 0).  ``mass`` is the total
    integral of the measure.
    """

    a: np.ndarray
    b: np.ndarray
    mass: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float).ravel()
        b = np.array(self.b, dtype=float).ravel()
        if a.shape != b.shape:
            raise ParameterError("a and b must have the same length (b[0] is a placeholder)")
        if len(a):
            b[0] = 0.0
            if not self.mass > 0:
                raise ParameterError("mass must be positive")
            if np.any(~(b[1:] > 0)):
                raise NumericError("off-diagonal entries must be positive")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "mass", float(self.mass))

    @classmethod
    def empty(cls) -> "JacobiMatrix":
        return cls(np.empty(0), np.empty(0), 0.0)

    @property
    def rank(self) -> int:
        return len(self.a)

    def truncate(self, rank: int) -> "JacobiMatrix":
        rank = min(rank, self.rank)
        return JacobiMatrix(self.a[:rank], self.b[:rank], self.mass)

    def b_with_mass(self) -> np.ndarray:
        """Off-diagonal with ``b[0] = sqrt(mass)``."""
        out = self.b.copy()
        if len(out):
            out[0] = math.sqrt(self.mass)
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.a) + np.diag(self.b[1:], 1) + np.diag(self.b[1:], -1)


# -- RKPW ----------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _rkpw_rows(a, B, xs, ws, rank0, nbar, k0, k1, i0, i1,
               st_g, st_s, st_t, st_pi):
    """Fold atoms ``i0..i1-1`` into rows ``k0..k1-1``.

    ``B`` holds squared off-diagonals with ``B[0]`` the mass.  Rows outside
    the range belong to other workers: the recurrence state leaving row
    ``k1-1`` is written to ``st_*[i]`` and the state entering row ``k0`` is
    read from there.
    """
    for i in range(i0, i1):
        cur = min(rank0 + i, nbar)
        lam = xs[i]
        if cur == 0:
            if k0 == 0:
                a[0] = lam
                B[0] = ws[i]
            continue
        kmax = min(cur, nbar - 1)
        if kmax < k0:
            continue
        if k0 == 0:
            g2p = 1.0
            s2p = 0.0
            tp = 0.0
            pi2 = ws[i]
        else:
            g2p = st_g[i]
            s2p = st_s[i]
            tp = st_t[i]
            pi2 = st_pi[i]
        kend = min(k1 - 1, kmax)
        for k in range(k0, kend + 1):
            if k == cur:
                a[k] = lam
                B[k] = 0.0
            bold = B[k]
            rho2 = bold + pi2
            B[k] = g2p * rho2
            if rho2 == 0.0:
                g2 = 1.0
                s2 = 0.0
            else:
                g2 = bold / rho2
                s2 = pi2 / rho2
            t = s2 * (a[k] - lam) - g2 * tp
            a[k] -= t - tp
            if s2 == 0.0:
                pi2 = s2p * bold
            else:
                pi2 = t * t / s2
            g2p = g2
            s2p = s2
            tp = t
        if kend < kmax:
            st_g[i] = g2p
            st_s[i] = s2p
            st_t[i] = tp
            st_pi[i] = pi2


def _partition(nbar: int, parts: int) -> list[int]:
    parts = max(1, min(parts, nbar))
    return [round(q * nbar / parts) for q in range(parts + 1)]


def _stream_order(x: np.ndarray) -> np.ndarray:
    """Atoms sorted by distance from the midpoint of their range, ties by position."""
    if len(x) == 0:
        return np.arange(0)
    c = 0.5 * (x.min() + x.max())
    return np.lexsort((x, np.abs(x - c)))


def _rkpw_stream(J: JacobiMatrix, xs: np.ndarray, ws: np.ndarray, nbar: int,
                 threads: int = 1, batch: int = 4096) -> JacobiMatrix:
    if nbar < 1:
        raise ParameterError("truncation rank must be >= 1")
    rank0 = min(J.rank, nbar)
    final_rank = min(rank0 + len(xs), nbar)
    if len(xs) == 0:
        return J.truncate(nbar)
    a = np.zeros(nbar)
    B = np.zeros(nbar)
    a[:rank0] = J.a[:rank0]
    B[:rank0] = J.b[:rank0] ** 2
    if rank0:
        B[0] = J.mass
    order = _stream_order(np.asarray(xs, dtype=float))
    xs = np.ascontiguousarray(np.asarray(xs, dtype=float)[order])
    ws = np.ascontiguousarray(np.asarray(ws, dtype=float)[order])
    n = len(xs)
    bounds = _partition(nbar, threads)
    if len(bounds) == 2:
        dummy = np.empty(0)
        _rkpw_rows(a, B, xs, ws, rank0, nbar, 0, nbar, 0, n,
                   dummy, dummy, dummy, dummy)
    else:
        st = [np.zeros(n) for _ in range(4)]
        _rkpw_pipeline(a, B, xs, ws, rank0, nbar, bounds, batch, st)
    out_B = B[:final_rank]
    if final_rank > 1 and np.any(~(out_B[1:] > 0)):
        raise NumericError("RKPW produced a non-positive off-diagonal entry")
    b = np.sqrt(out_B)
    return JacobiMatrix(a[:final_rank].copy(), b, float(out_B[0]))


def _rkpw_pipeline(a, B, xs, ws, rank0, nbar, bounds, batch, st):
    """Row-range pipeline: worker ``q`` owns rows ``bounds[q]:bounds[q+1]``.

    Worker ``q`` handles atom batch ``m`` once worker ``q-1`` has handed over
    the recurrence states of that batch.  Every row sees the atoms in the
    same order as the serial sweep, so the result is bit-identical to it.
    """
    n = len(xs)
    starts = list(range(0, n, batch))
    workers = len(bounds) - 1
    done = [[threading.Event() for _ in starts] for _ in range(workers)]
    errors = []

    def run(q):
        try:
            for m, i0 in enumerate(starts):
                if q > 0:
                    done[q - 1][m].wait()
                    if errors:
                        return
                _rkpw_rows(a, B, xs, ws, rank0, nbar, bounds[q], bounds[q + 1],
                           i0, min(i0 + batch, n), *st)
                done[q][m].set()
        except BaseException as exc:  # pragma: no cover - surfaced below
            errors.append(exc)
            for ev in done[q]:
                ev.set()

    pool = [threading.Thread(target=run, args=(q,)) for q in range(workers)]
    for th in pool:
        th.start()
    for th in pool:
        th.join()
    if errors:
        raise errors[0]


def rkpw_jacobi(measure: DiscreteMeasure, nbar: int, threads: int = 1) -> JacobiMatrix:
    """Truncated Jacobi matrix (rank ``min(nbar, #atoms)``) of a discrete measure.

    Atoms are streamed from the middle of their range outwards; on symmetric
    measures this keeps the effective rank at tight tolerances from stalling
    the way ascending order does.  ``threads > 1`` splits the row range among
    pipelined workers; results equal the serial ones bit for bit.
    """
    if len(measure) == 0:
        raise ParameterError("cannot build a Jacobi matrix of an empty measure")
    return _rkpw_stream(JacobiMatrix.empty(), measure.x, measure.w, nbar, threads)


def rkpw_add_atoms(J: JacobiMatrix, atoms: DiscreteMeasure, nbar: int | None = None,
                   threads: int = 1) -> JacobiMatrix:
    """Add the atoms of ``atoms`` to the measure whose Jacobi matrix is ``J``.

    The result has rank ``min(nbar, J.rank + #atoms)``; ``nbar`` defaults to
    ``J.rank`` when ``J`` is non-empty.  Only the leading ``J.rank`` rows of
    the underlying measure are known, so the first ``J.rank`` rows of the
    result are exact and later ones describe the Gauss-rule surrogate of
    ``J``.
    """
    if nbar is None:
        nbar = J.rank if J.rank else len(atoms)
    if len(atoms) == 0:
        return J.truncate(nbar)
    return _rkpw_stream(J, atoms.x, atoms.w, nbar, threads)


# -- Stieltjes oracle ----------------------------------------------------

def stieltjes_jacobi(measure: DiscreteMeasure, nbar: int) -> JacobiMatrix:
    """Discrete Stieltjes procedure; an oracle for small ranks only."""
    if len(measure) == 0:
        raise ParameterError("cannot build a Jacobi matrix of an empty measure")
    if nbar > STIELTJES_MAX_RANK:
        raise ParameterError(f"Stieltjes oracle is capped at rank {STIELTJES_MAX_RANK}")
    nbar = min(nbar, len(measure))
    x, w = measure.x, measure.w
    a = np.zeros(nbar)
    b = np.zeros(nbar)
    p_prev = np.zeros_like(x)
    p = np.full_like(x, 1.0 / math.sqrt(measure.mass))
    for j in range(nbar):
        a[j] = np.dot(w, x * p * p)
        if j + 1 == nbar:
            break
        q = (x - a[j]) * p - b[j] * p_prev
        b2 = np.dot(w, q * q)
        if not b2 > 0:
            raise InstabilityError(f"Stieltjes lost positivity at row {j + 1}")
        b[j + 1] = math.sqrt(b2)
        p_prev, p = p, q / b[j + 1]
    return JacobiMatrix(a, b, measure.mass)


# -- Golub-Welsch --------------------------------------------------------

@numba.njit(cache=True)
def _imtql_first_row(d, e, z):
    """Implicit-shift QL on a symmetric tridiagonal matrix.

    ``d`` is the diagonal, ``e[i]`` couples rows ``i`` and ``i+1``
    (``e[-1] = 0``).  ``z`` is rotated along with the eigenvectors and ends
    up holding their first components.  Returns -1 on success or the index
    of the eigenvalue that exhausted its 30 sweeps.
    """
    n = len(d)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) + dd == dd:
                    break
                m += 1
            if m == l:
                break
            if it == 30:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                bb = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                f = z[i + 1]
                z[i + 1] = s * z[i] + c * f
                z[i] = c * z[i] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def golub_welsch(J: JacobiMatrix, N: int | None = None) -> DiscreteMeasure:
    """Gauss nodes and weights of the leading ``N x N`` block of ``J``."""
    N = J.rank if N is None else N
    if not 1 <= N <= J.rank:
        raise ParameterError(f"need 1 <= N <= rank ({J.rank}), got {N}")
    d = J.a[:N].copy()
    e = np.zeros(N)
    e[:N - 1] = J.b[1:N]
    z = np.zeros(N)
    z[0] = 1.0
    bad = _imtql_first_row(d, e, z)
    if bad >= 0:
        raise NumericError(f"QL iteration did not converge for eigenvalue {bad}")
    return DiscreteMeasure(d, J.mass * z * z)


# -- comparisons ---------------------------------------------------------

def coincidence_range(J: JacobiMatrix, Jp: JacobiMatrix, eps: float,
                      compare_mass: bool = True) -> int:
    """Number of leading rows on which two Jacobi matrices agree within ``eps``.

    Row ``j`` holds the coefficients produced by step ``j`` of the
    recurrence, ``a_j`` and ``b_{j+1}`` (the latter only where both ranks
    exceed ``j+1``); row 0 also compares the masses unless
    ``compare_mass`` is false.  The result is capped at the smaller rank.
    """
    if not eps > 0:
        raise ParameterError("eps must be positive")
    n = min(J.rank, Jp.rank)
    if n == 0:
        return 0
    ok = np.abs(J.a[:n] - Jp.a[:n]) <= eps
    ok[:n - 1] &= np.abs(J.b[1:n] - Jp.b[1:n]) <= eps
    if compare_mass:
        ok[0] &= abs(J.mass - Jp.mass) <= eps
    bad = np.flatnonzero(~ok)
    return int(bad[0]) if len(bad) else n


def matrix_l1_row_error(J: JacobiMatrix, Jp: JacobiMatrix, j: int) -> float:
    """Mean absolute difference of ``b_0..b_j`` with ``b_0 = sqrt(mass)``."""
    if not (J.rank > j and Jp.rank > j):
        raise ParameterError("both ranks must exceed j")
    return float(np.mean(np.abs(J.b_with_mass()[:j + 1] - Jp.b_with_mass()[:j + 1])))
