"""Iterated function systems on the real line.

Two families are supported: affine maps ``s -> delta*(s - gamma) + gamma``
and the inverse branches ``x -> +-sqrt(x + lam)`` of ``z**2 - lam``, whose
attractor is a real Julia set for ``lam >= 2``.  The module builds the nested
interval unions ``E_n``, the atoms of the balanced-measure iterates, and the
closed-form Jacobi matrix of the Julia-set equilibrium measure.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BudgetError, DomainError, NumericError, ParameterError

AFFINE = "affine"
JULIA = "julia"

#: Largest atom count ``balanced_atoms`` agrees to materialise.
MAX_ATOMS = 1 << 26


@dataclass(frozen=True)
class IFSSystem:
    """A weighted family of contractions.

    Use the :meth:`affine`, :meth:`julia` and :meth:`cantor` constructors
    rather than calling the class directly.
    """

    kind: str
    delta: tuple = ()
    gamma: tuple = ()
    weights: tuple = ()
    lam: float | None = None

    def __post_init__(self):
        if self.kind == AFFINE:
            d = np.asarray(self.delta, dtype=float)
            g = np.asarray(self.gamma, dtype=float)
            p = np.asarray(self.weights, dtype=float)
            if not (d.ndim == g.ndim == p.ndim == 1 and len(d) == len(g) == len(p) >= 1):
                raise ParameterError("delta, gamma and weights must be equal-length sequences")
            if np.any(d <= 0) or np.any(d >= 1):
                raise ParameterError("contraction ratios must lie in (0, 1)")
            if np.any(np.diff(g) <= 0):
                raise ParameterError("fixed points must be strictly increasing")
            if np.any(p <= 0):
                raise ParameterError("weights must be positive")
            if abs(p.sum() - 1.0) > 1e-15 * max(1, len(p)):
                raise ParameterError(f"weights sum to {p.sum()!r}, not 1")
        elif self.kind == JULIA:
            if self.lam is None or not self.lam >= 2:
                raise ParameterError("Julia parameter lambda must be >= 2")
        else:
            raise ParameterError(f"unknown IFS kind {self.kind!r}")

    @classmethod
    def affine(cls, delta: Sequence[float], gamma: Sequence[float],
               weights: Sequence[float] | None = None) -> "IFSSystem":
        if weights is None:
            weights = [1.0 / len(delta)] * len(delta)
        return cls(AFFINE, tuple(map(float, delta)), tuple(map(float, gamma)),
                   tuple(map(float, weights)))

    @classmethod
    def julia(cls, lam: float) -> "IFSSystem":
        return cls(JULIA, weights=(0.5, 0.5), lam=float(lam))

    @classmethod
    def cantor(cls) -> "IFSSystem":
        """Middle-third Cantor set with equal weights."""
        return cls.affine([1 / 3, 1 / 3], [0.0, 1.0], [0.5, 0.5])

    @property
    def M(self) -> int:
        return len(self.weights)

    @property
    def is_julia(self) -> bool:
        return self.kind == JULIA

    def apply(self, m: int, x):
        """Image of ``x`` under map ``m`` (0-based, ordered left to right)."""
        x = np.asarray(x, dtype=float)
        if self.kind == AFFINE:
            return self.delta[m] * (x - self.gamma[m]) + self.gamma[m]
        shifted = x + self.lam
        if np.any(shifted < 0):
            raise DomainError("square-root branch evaluated below -lambda")
        root = np.sqrt(shifted)
        return -root if m == 0 else root

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        if self.kind == JULIA:
            return {"kind": JULIA, "lambda": self.lam}
        return {"kind": AFFINE,
                "maps": [{"delta": d, "gamma": g, "pi": p}
                         for d, g, p in zip(self.delta, self.gamma, self.weights)]}

    @classmethod
    def from_dict(cls, data: dict) -> "IFSSystem":
        kind = data.get("kind")
        if kind == JULIA:
            return cls.julia(data["lambda"])
        if kind == AFFINE:
            maps = data["maps"]
            return cls.affine([m["delta"] for m in maps], [m["gamma"] for m in maps],
                              [m["pi"] for m in maps])
        raise ParameterError(f"unknown IFS kind {kind!r}")

    @classmethod
    def load(cls, path) -> "IFSSystem":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        from .serialize import dumps
        Path(path).write_text(dumps(self.to_dict()) + "\n")


@dataclass(frozen=True)
class IntervalUnion:
    """Ordered disjoint closed intervals ``[alpha_i, beta_i]``."""

    intervals: np.ndarray
    generation: int = 0

    def __post_init__(self):
        iv = np.array(self.intervals, dtype=float).reshape(-1, 2)
        if len(iv) == 0:
            raise ParameterError("an interval union needs at least one interval")
        if np.any(iv[:, 0] >= iv[:, 1]):
            raise ParameterError("each interval needs alpha < beta")
        if np.any(iv[1:, 0] <= iv[:-1, 1]):
            raise ParameterError("intervals must be disjoint and ascending")
        iv.setflags(write=False)
        object.__setattr__(self, "intervals", iv)

    @property
    def N(self) -> int:
        return len(self.intervals)

    @property
    def alpha(self) -> np.ndarray:
        return self.intervals[:, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.intervals[:, 1]

    @property
    def gaps(self) -> np.ndarray:
        """``(N-1, 2)`` array of open gaps ``(beta_i, alpha_{i+1})``."""
        return np.column_stack([self.beta[:-1], self.alpha[1:]])

    @property
    def hull(self) -> tuple[float, float]:
        return float(self.alpha[0]), float(self.beta[-1])

    def locate(self, s: float) -> int:
        """Index of the open interval containing ``s``, or -1."""
        i = int(np.searchsorted(self.alpha, s, side="right")) - 1
        if i >= 0 and self.alpha[i] < s < self.beta[i]:
            return i
        return -1

    def symmetric_center(self, tol: float = 1e-14) -> float | None:
        """Centre ``c`` if the union is mirror symmetric about it."""
        c = 0.5 * (self.alpha[0] + self.beta[-1])
        scale = max(1.0, abs(self.alpha[0]), abs(self.beta[-1]))
        if np.allclose(2 * c - self.beta[::-1], self.alpha, rtol=0, atol=tol * scale):
            return c
        return None

    def to_list(self) -> list:
        return self.intervals.tolist()


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite positive measure ``sum_i w_i D_{x_i}`` in canonical form.

    Positions are sorted ascending; atoms at identical positions are merged
    by adding their weights.
    """

    x: np.ndarray
    w: np.ndarray
    mass: float = field(init=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).ravel()
        w = np.asarray(self.w, dtype=float).ravel()
        if x.shape != w.shape:
            raise ParameterError("positions and weights differ in length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(w))):
            raise ParameterError("atoms must be finite")
        if np.any(w <= 0):
            raise ParameterError("atom weights must be strictly positive")
        order = np.argsort(x, kind="stable")
        x, w = x[order], w[order]
        if len(x) > 1 and np.any(x[1:] == x[:-1]):
            x, inverse = np.unique(x, return_inverse=True)
            w = np.bincount(inverse, weights=w)
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "mass", float(math.fsum(w)))

    def __len__(self) -> int:
        return len(self.x)

    @classmethod
    def empty(cls) -> "DiscreteMeasure":
        return cls(np.empty(0), np.empty(0))

    def split(self, k: int) -> tuple["DiscreteMeasure", "DiscreteMeasure"]:
        """Split into the first ``k`` atoms and the rest."""
        return (DiscreteMeasure(self.x[:k], self.w[:k]),
                DiscreteMeasure(self.x[k:], self.w[k:]))

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(np.concatenate([self.x, other.x]),
                               np.concatenate([self.w, other.w]))


# -- operations -----------------------------------------------------------

def _julia_beta(lam: float) -> float:
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * lam))


def convex_hull(ifs: IFSSystem) -> IntervalUnion:
    """``E_0``: the smallest interval containing the attractor."""
    if ifs.is_julia:
        b = _julia_beta(ifs.lam)
        return IntervalUnion([[-b, b]], 0)
    return IntervalUnion([[ifs.gamma[0], ifs.gamma[-1]]], 0)


def _merge(iv: np.ndarray) -> np.ndarray:
    iv = iv[np.argsort(iv[:, 0], kind="stable")]
    out = [list(iv[0])]
    for a, b in iv[1:]:
        # closed intervals: touching endpoints merge
        if a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return np.array(out)


def refine(ifs: IFSSystem, E: IntervalUnion) -> IntervalUnion:
    """Apply the Hutchinson operator once: ``Phi(E) = U_m phi_m(E)``."""
    a, b = E.alpha, E.beta
    if ifs.is_julia:
        if np.any(a + ifs.lam < 0):
            raise DomainError("interval extends below -lambda; square root undefined")
        lo, hi = np.sqrt(a + ifs.lam), np.sqrt(b + ifs.lam)
        images = np.vstack([np.column_stack([-hi, -lo]), np.column_stack([lo, hi])])
    else:
        images = np.vstack([np.column_stack([ifs.apply(m, a), ifs.apply(m, b)])
                            for m in range(ifs.M)])
    return IntervalUnion(_merge(images), E.generation + 1)


def interval_union(ifs: IFSSystem, n: int) -> IntervalUnion:
    """``E_n = Phi^n(E_0)``."""
    if n < 0:
        raise ParameterError("generation must be >= 0")
    E = convex_hull(ifs)
    for _ in range(n):
        E = refine(ifs, E)
    return E


def balanced_atoms(ifs: IFSSystem, n: int, max_atoms: int = MAX_ATOMS) -> DiscreteMeasure:
    """Atoms of ``(T*)^n D_c`` with ``c`` the hull midpoint.

    Positions are all ``n``-fold compositions of the maps applied to ``c``;
    weights are the products of the map probabilities along each word.
    """
    if n < 0:
        raise ParameterError("n must be >= 0")
    if ifs.M ** n > max_atoms:
        raise BudgetError(f"{ifs.M}**{n} atoms exceed the limit of {max_atoms}")
    lo, hi = convex_hull(ifs).hull
    x = np.array([0.5 * (lo + hi)])
    w = np.array([1.0])
    p = np.asarray(ifs.weights)
    for _ in range(n):
        x = np.concatenate([ifs.apply(m, x) for m in range(ifs.M)])
        w = np.concatenate([p[m] * w for m in range(ifs.M)])
    return DiscreteMeasure(x, w)


def julia_exact_jacobi(lam: float, rank: int):
    """Jacobi matrix of the Julia-set equilibrium measure by renormalisation.

    The recursion runs on the squared off-diagonal entries:
    ``B_1 = lam``, ``B_{2j} = B_j / B_{2j-1}``, ``B_{2j+1} = lam - B_{2j}``.
    """
    from .jacobi import JacobiMatrix

    if rank < 1:
        raise ParameterError("rank must be >= 1")
    if not lam >= 2:
        raise ParameterError("lambda must be >= 2")
    B = np.zeros(max(rank, 2))
    B[1] = lam
    for k in range(2, rank):
        if k % 2 == 0:
            j = k // 2
            if B[2 * j - 1] == 0:
                raise NumericError(f"zero divisor B[{2 * j - 1}] in Julia recursion")
            B[k] = B[j] / B[2 * j - 1]
        else:
            B[k] = lam - B[k - 1]
    if np.any(B[1:rank] <= 0):
        raise NumericError("non-positive squared entry in Julia recursion")
    b = np.zeros(rank)
    b[1:] = np.sqrt(B[1:rank])
    return JacobiMatrix(np.zeros(rank), b, 1.0)
