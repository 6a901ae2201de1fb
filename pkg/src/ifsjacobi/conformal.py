"""Exterior conformal map ``F = exp(L - log cap)`` and its Joukowsky composition."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ParameterError
from .ifs import DiscreteMeasure
from .jacobi import JacobiMatrix
from .potential import default_window, log_transform, root_asymptotics


def joukowsky(w: complex) -> complex:
    """``(w + 1/w) / 2``."""
    w = complex(w)
    if w == 0:
        raise DomainError("the Joukowsky map is singular at 0")
    return 0.5 * (w + 1.0 / w)


def conformal_map(source, cap: float, z: complex, j_hi: int | None = None,
                  L: int | None = None) -> complex:
    """``F(z) = exp(L(z) - log cap)``; ``|F| >= 1`` off the set and ``F ~ z/cap``.

    ``source`` is a measure (summed directly) or a Jacobi matrix (moving
    Cesaro average of the root asymptotics; default window is the last 4% of
    the rank, at least 50 rows).
    """
    if not cap > 0:
        raise ParameterError("capacity must be positive")
    z = complex(z)
    if z.imag < 0 or (z.imag == 0 and not isinstance(source, DiscreteMeasure)):
        raise DomainError("z must lie in the upper half-plane")
    if isinstance(source, DiscreteMeasure):
        Lz = log_transform(source, z).L
    elif isinstance(source, JacobiMatrix):
        if j_hi is None or L is None:
            j_hi, L = default_window(source.rank)
        Lz = root_asymptotics(source, z, j_hi, L).L
    else:
        raise ParameterError("source must be a DiscreteMeasure or a JacobiMatrix")
    return complex(np.exp(Lz - math.log(cap)))


@dataclass(frozen=True)
class Segment:
    """Horizontal (``kind='h'``: fixed ``y``) or vertical (``'v'``: fixed ``x``) segment."""

    kind: str
    fixed: float
    lo: float
    hi: float
    count: int
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("h", "v"):
            raise ParameterError("segment kind must be 'h' or 'v'")
        if self.count < 1:
            raise ParameterError("segment count must be >= 1")

    def points(self) -> np.ndarray:
        t = np.linspace(self.lo, self.hi, self.count) if self.count > 1 else np.array([self.lo])
        if self.kind == "h":
            return t + 1j * self.fixed
        return self.fixed + 1j * t

    def to_dict(self) -> dict:
        return {"kind": self.kind, "fixed": self.fixed, "lo": self.lo, "hi": self.hi,
                "count": self.count, "label": self.label}

    @classmethod
    def from_dict(cls, d: dict) -> "Segment":
        return cls(d["kind"], float(d["fixed"]), float(d["lo"]), float(d["hi"]),
                   int(d["count"]), d.get("label", ""))


@dataclass
class MappedPolyline:
    label: str
    segment: Segment
    z: np.ndarray
    F: np.ndarray
    JF: np.ndarray | None = field(default=None)


def map_segments(source, cap: float, segments, compose_joukowsky: bool = True,
                 j_hi: int | None = None, L: int | None = None) -> list[MappedPolyline]:
    """Evaluate ``F`` (and ``J o F``) along each segment, in input order."""
    out = []
    for k, seg in enumerate(segments):
        z = seg.points()
        if np.any(z.imag <= 0):
            raise DomainError(f"segment {seg.label or k} leaves the open upper half-plane")
        F = np.array([conformal_map(source, cap, zz, j_hi, L) for zz in z])
        JF = np.array([joukowsky(f) for f in F]) if compose_joukowsky else None
        out.append(MappedPolyline(seg.label or f"seg{k:03d}", seg, z, F, JF))
    return out


def horizontal_family(x_lo: float, x_hi: float, y_lo: float, y_hi: float, lines: int,
                      count: int, geometric: bool = True) -> list[Segment]:
    """``lines`` horizontal segments with ordinates spaced geometrically (or linearly)."""
    ys = np.geomspace(y_lo, y_hi, lines) if geometric else np.linspace(y_lo, y_hi, lines)
    return [Segment("h", float(y), x_lo, x_hi, count, f"h{k:03d}") for k, y in enumerate(ys)]


def write_polylines(polylines, outdir) -> Path:
    """One CSV per polyline plus ``index.json``; returns the index path."""
    from .serialize import dump, write_csv

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    index = []
    for p in polylines:
        name = f"{p.label}.csv"
        JF = p.JF if p.JF is not None else np.full(len(p.z), np.nan + 0j)
        write_csv(outdir / name, ["re_z", "im_z", "re_F", "im_F", "re_JF", "im_JF"],
                  [(z.real, z.imag, f.real, f.imag, j.real, j.imag)
                   for z, f, j in zip(p.z, p.F, JF)])
        index.append({"label": p.label, "file": name, "segment": p.segment.to_dict()})
    path = outdir / "index.json"
    dump({"polylines": index}, path)
    return path
