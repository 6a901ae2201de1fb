"""Convergence loops for Jacobi matrices of balanced and equilibrium measures.

``algorithm0`` tracks balanced measures against a high-generation proxy,
``algorithm1`` fixes the generation and compares two quadrature orders, and
``algorithm2`` alternates generation and quadrature order to approach the
equilibrium measure of the attractor.

Every coincidence range is computed adaptively: truncated RKPW is exact on
the rows it keeps, so a range smaller than the truncation rank is final and
a range equal to it triggers a recomputation at twice the rank.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .equilibrium import GapRootSystem, equilibrium_atoms, solve_gap_roots
from .errors import BudgetError, ParameterError
from .ifs import (DiscreteMeasure, IFSSystem, IntervalUnion, balanced_atoms,
                  interval_union, julia_exact_jacobi)
from .jacobi import JacobiMatrix, coincidence_range, rkpw_jacobi
from .serialize import write_csv

CSV_COLUMNS = ["n", "G", "N_eps", "H_eps", "Y_eps", "seconds",
               "N_eps_prev", "iterations", "rank", "rank_capped"]


@dataclass
class StepRecord:
    """One (n, G) cell of a convergence run."""

    n: int
    G: int | None = None
    N_eps: int | None = None
    H_eps: int | None = None
    Y_eps: int | None = None
    seconds: float = 0.0
    N_eps_prev: int | None = None
    iterations: int | None = None
    rank: int | None = None
    rank_capped: bool = False

    def row(self) -> list:
        return [getattr(self, c) for c in CSV_COLUMNS]


@dataclass
class ConvergenceReport:
    algorithm: str
    params: dict
    steps: list[StepRecord] = field(default_factory=list)
    jacobi: JacobiMatrix | None = None
    effective_rank: int | None = None
    fit: dict = field(default_factory=dict)
    aborted: str | None = None

    @property
    def rank_capped(self) -> bool:
        return any(s.rank_capped for s in self.steps)

    def to_dict(self, with_matrix: bool = False) -> dict:
        out = {"algorithm": self.algorithm, "params": self.params,
               "steps": [asdict(s) for s in self.steps],
               "effective_rank": self.effective_rank, "fit": self.fit,
               "rank_capped": self.rank_capped, "aborted": self.aborted}
        if with_matrix and self.jacobi is not None:
            from .serialize import jacobi_to_dict
            out["jacobi"] = jacobi_to_dict(self.jacobi)
        return out

    def write_csv(self, path) -> None:
        write_csv(path, CSV_COLUMNS,
                  [["" if v is None else int(v) if isinstance(v, bool) else v
                    for v in s.row()] for s in self.steps])


# -- helpers ---------------------------------------------------------------

class _Budget:
    def __init__(self, max_atoms: int | None, max_seconds: float | None):
        self.max_atoms = max_atoms
        self.max_seconds = max_seconds
        self.atoms = 0
        self.t0 = time.perf_counter()

    def charge(self, atoms: int, report: ConvergenceReport) -> None:
        self.atoms += atoms
        if self.max_atoms is not None and self.atoms > self.max_atoms:
            report.aborted = f"atom budget {self.max_atoms} exhausted"
            raise BudgetError(report.aborted, partial=report)
        if self.max_seconds is not None and time.perf_counter() - self.t0 > self.max_seconds:
            report.aborted = f"time budget {self.max_seconds}s exhausted"
            raise BudgetError(report.aborted, partial=report)


class _LazyJacobi:
    """Jacobi matrix of a fixed measure, recomputed at a larger rank on demand."""

    def __init__(self, measure: DiscreteMeasure, bound: int | None = None, threads: int = 1):
        self.measure = measure
        self.bound = len(measure) if bound is None else min(bound, len(measure))
        self.threads = threads
        self.J: JacobiMatrix | None = None

    @property
    def full(self) -> bool:
        return self.J is not None and self.J.rank >= self.bound

    def at(self, rank: int) -> JacobiMatrix:
        rank = min(rank, self.bound)
        if self.J is None or self.J.rank < rank:
            self.J = rkpw_jacobi(self.measure, rank, self.threads)
        return self.J.truncate(rank)


def _adaptive_range(A: _LazyJacobi, B: _LazyJacobi, eps: float, start: int,
                    compare_mass: bool) -> tuple[int, bool]:
    """Coincidence range of two lazily computed matrices; returns (range, capped)."""
    rank = max(1, start)
    while True:
        JA, JB = A.at(rank), B.at(rank)
        N = coincidence_range(JA, JB, eps, compare_mass)
        top = min(JA.rank, JB.rank)
        if N < top:
            return N, False
        if A.full or B.full:
            exhausted = (A.bound == len(A.measure)) or (B.bound == len(B.measure))
            return N, not exhausted
        rank *= 2


def _true_range(A: _LazyJacobi, ref_fn, eps: float, compare_mass: bool) -> int:
    """Coincidence range against a reference matrix built by ``ref_fn(rank)``."""
    rank = A.J.rank if A.J is not None else 64
    while True:
        JA = A.at(rank)
        ref = ref_fn(JA.rank)
        Y = coincidence_range(JA, ref, eps, compare_mass)
        if Y < min(JA.rank, ref.rank) or A.full or ref.rank < JA.rank:
            return Y
        rank *= 2


def _as_union(source, n: int) -> IntervalUnion:
    if isinstance(source, IntervalUnion):
        return source
    if isinstance(source, IFSSystem):
        return interval_union(source, n)
    raise ParameterError("source must be an IFSSystem or an IntervalUnion")


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise ParameterError("eps must be positive")


def ols(x, y) -> tuple[float, float]:
    """Least-squares line ``y = slope*x + intercept``."""
    slope, intercept = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope), float(intercept)


def loglog_slope(x, y) -> float:
    return ols(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)))[0]


# -- Algorithm 1 -----------------------------------------------------------

def algorithm1(source, n: int, G: int, g: int, eps: float, *, rank: int | None = None,
               start_rank: int = 64, compare_mass: bool = True,
               gap_system: GapRootSystem | None = None, solver: dict | None = None,
               threads: int = 1):
    """Jacobi matrix of ``nu_n^G`` and its effective rank ``N_eps(n, G)``.

    ``source`` is an IFS (then ``E_n`` is built from it) or any interval
    union.  ``rank`` bounds the truncation; a range that reaches it is
    flagged as rank-capped.  Returns ``(J, N_eps, report)`` where ``J`` is
    truncated at a rank strictly above ``N_eps`` unless capped.
    """
    _check_eps(eps)
    if n < 0:
        raise ParameterError("n must be >= 0")
    if not (G > g >= 1):
        raise ParameterError("need G > g >= 1")
    report = ConvergenceReport("algorithm1", {"n": n, "G": G, "g": g, "eps": eps,
                                              "rank": rank, "compare_mass": compare_mass})
    t0 = time.perf_counter()
    sys = gap_system or solve_gap_roots(_as_union(source, n), **(solver or {}))
    mA = equilibrium_atoms(sys, G)
    mB = equilibrium_atoms(sys, G - g)
    A = _LazyJacobi(mA, rank, threads)
    B = _LazyJacobi(mB, rank, threads)
    N, capped = _adaptive_range(A, B, eps, start_rank, compare_mass)
    J = A.J
    report.steps.append(StepRecord(n=n, G=G, N_eps=N, seconds=time.perf_counter() - t0,
                                   iterations=sys.iterations, rank=J.rank,
                                   rank_capped=capped))
    report.jacobi = J
    report.effective_rank = N
    return J, N, report


# -- Algorithm 2 -----------------------------------------------------------

def algorithm2(ifs: IFSSystem, n_max: int, G0: int, eps: float, eta: float = 1.25, *,
               g: int = 1, compare_mass: bool = True, exact: JacobiMatrix | None = None,
               solver: dict | None = None, max_atoms: int | None = None,
               max_seconds: float | None = None, max_G: int = 100000, threads: int = 1):
    """Alternate generation and quadrature order towards ``J(nu_E)``.

    For each ``n`` from 2 to ``n_max`` the matrices of ``nu_{n-1}^{MG}`` and
    ``nu_n^G`` are compared; while their coincidence range ``H`` equals the
    smaller of their own effective ranks, ``G`` grows to ``max(ceil(eta G),
    G+1)``.  ``Y_eps`` is filled against ``exact`` when given, or against the
    renormalisation recursion for Julia systems.  Returns ``(J, H, report)``.
    """
    _check_eps(eps)
    if n_max < 2 or G0 < 2 or not eta > 1 or g < 1 or G0 <= g:
        raise ParameterError("need n_max >= 2, G0 >= 2, eta > 1, 1 <= g < G0")
    report = ConvergenceReport("algorithm2", {"n_max": n_max, "G0": G0, "eps": eps, "eta": eta,
                                              "g": g, "compare_mass": compare_mass,
                                              "ifs": ifs.to_dict()})
    budget = _Budget(max_atoms, max_seconds)
    systems: dict[int, GapRootSystem] = {}

    def system(k):
        if k not in systems:
            systems[k] = solve_gap_roots(interval_union(ifs, k), **(solver or {}))
        return systems[k]

    if exact is not None:
        def ref_fn(r):
            return exact.truncate(r)
    elif ifs.is_julia:
        def ref_fn(r):
            return julia_exact_jacobi(ifs.lam, max(r, 2))
    else:
        ref_fn = None
    M = ifs.M
    G = G0
    H = 0
    J = None
    for n in range(2, n_max + 1):
        while True:
            t0 = time.perf_counter()
            sA, sB = system(n - 1), system(n)
            budget.charge(2 * sA.N * M * G + 2 * sB.N * G, report)
            A = _LazyJacobi(equilibrium_atoms(sA, M * G), threads=threads)
            Ag = _LazyJacobi(equilibrium_atoms(sA, M * G - g), threads=threads)
            B = _LazyJacobi(equilibrium_atoms(sB, G), threads=threads)
            Bg = _LazyJacobi(equilibrium_atoms(sB, G - g), threads=threads)
            NA, _ = _adaptive_range(A, Ag, eps, 64, compare_mass)
            NB, _ = _adaptive_range(B, Bg, eps, 64, compare_mass)
            H, _ = _adaptive_range(A, B, eps, max(64, 2 * min(NA, NB)), compare_mass)
            Nmin = min(NA, NB)
            Y = None if ref_fn is None else _true_range(B, ref_fn, eps, compare_mass)
            report.steps.append(StepRecord(n=n, G=G, N_eps=NB, H_eps=H, Y_eps=Y,
                                           seconds=time.perf_counter() - t0,
                                           N_eps_prev=NA,
                                           iterations=sA.iterations + sB.iterations,
                                           rank=B.J.rank))
            J = B.J
            if H == Nmin:
                G_new = max(math.ceil(eta * G), G + 1)
                if G_new > max_G:
                    report.aborted = f"G would exceed max_G={max_G}"
                    raise BudgetError(report.aborted, partial=report)
                G = G_new
                continue
            break
    report.jacobi = J.truncate(max(H, 1))
    report.effective_rank = H
    return report.jacobi, H, report


def extrapolate_H(H_n: int, H_nm1: int) -> float:
    """``H_n**2 / H_{n-1}``, a sharper estimate of the exact rows at level n."""
    if H_nm1 == 0:
        raise ParameterError("H_{n-1} must be nonzero")
    return H_n * H_n / H_nm1


# -- Algorithm 0 -----------------------------------------------------------

def algorithm0(ifs: IFSSystem, eps: float, n_ref: int, n_range, *, start_rank: int = 256,
               compare_mass: bool = True, threads: int = 1,
               max_atoms: int | None = None) -> ConvergenceReport:
    """Effective ranks ``N_eps(n)`` of balanced measures against generation ``n_ref``.

    Also fits ``N_eps(n) ~ C (M^n)**beta`` by least squares in log-log space;
    the exponent is reported in ``fit["beta"]``.
    """
    _check_eps(eps)
    n_range = list(n_range)
    if not n_range:
        raise ParameterError("n_range is empty")
    report = ConvergenceReport("algorithm0", {"eps": eps, "n_ref": n_ref, "n_range": n_range,
                                              "compare_mass": compare_mass,
                                              "ifs": ifs.to_dict()})
    kw = {} if max_atoms is None else {"max_atoms": max_atoms}
    ref = _LazyJacobi(balanced_atoms(ifs, n_ref, **kw), threads=threads)
    for n in n_range:
        t0 = time.perf_counter()
        cur = _LazyJacobi(balanced_atoms(ifs, n, **kw), threads=threads)
        N, capped = _adaptive_range(ref, cur, eps, start_rank, compare_mass)
        report.steps.append(StepRecord(n=n, N_eps=N, seconds=time.perf_counter() - t0,
                                       rank=cur.J.rank, rank_capped=capped))
    ns = np.array([s.n for s in report.steps])
    Ns = np.array([s.N_eps for s in report.steps], dtype=float)
    if len(ns) >= 2 and np.all(Ns > 0):
        report.fit["beta"] = loglog_slope(float(ifs.M) ** ns, Ns)
    report.effective_rank = int(Ns[-1])
    report.jacobi = cur.J
    return report


# -- maximal rank probe ----------------------------------------------------

def detect_plateau(values, run: int = 2) -> int | None:
    """Index of the first running maximum not exceeded by any of the next ``run`` entries."""
    values = list(values)
    for i in range(len(values) - run):
        if values[i] >= max(values[:i + 1]) and all(v <= values[i]
                                                    for v in values[i + 1:i + 1 + run]):
            return i
    return None


def max_rank_probe(source, n: int, eps_list, *, G0: int = 50, eta: float = 1.25, g: int = 1,
                   max_G: int = 4000, compare_mass: bool = True, solver: dict | None = None,
                   threads: int = 1) -> list[tuple[float, int, int]]:
    """Plateau value ``N_up(eps)`` of ``N_eps(n, G)`` as ``G`` grows.

    Returns ``(eps, N_up, G_plateau)`` per tolerance.  Raises
    :class:`BudgetError` if ``G`` passes ``max_G`` before a plateau shows.
    """
    sys = solve_gap_roots(_as_union(source, n), **(solver or {}))
    out = []
    for eps in eps_list:
        _check_eps(eps)
        Gs, Ns = [], []
        G = G0
        while True:
            _, N, _ = algorithm1(source, n, G, g, eps, gap_system=sys,
                                 compare_mass=compare_mass, threads=threads)
            Gs.append(G)
            Ns.append(N)
            i = detect_plateau(Ns)
            if i is not None:
                out.append((eps, Ns[i], Gs[i]))
                break
            G = max(math.ceil(eta * G), G + 1)
            if G > max_G:
                raise BudgetError(f"no plateau below G={max_G} for eps={eps}",
                                  partial={"eps": eps, "G": Gs, "N": Ns})
    return out
