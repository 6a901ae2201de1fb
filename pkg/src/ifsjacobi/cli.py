"""Command-line front end.

Subcommands ``build``, ``experiment``, ``potential`` and ``conformal``.  Every
option may also come from a JSON file given with ``--config``; flags given on
the command line override it.  Errors are reported as one JSON object on
stderr with exit codes 2 (configuration), 3 (convergence or numerics),
4 (budget) and 1 (anything else).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (BudgetError, ConvergenceError, DomainError, IFSJacobiError, NumericError,
                     ParameterError, SingularityError)

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_BUDGET = 0, 1, 2, 3, 4

KINDS = ("balanced", "equilibrium", "exact-julia")


class ConfigError(ParameterError):
    """One or more configuration problems, reported together."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


@dataclass
class RunConfig:
    command: str
    ifs: dict | None = None
    kind: str | None = None
    n: int | None = None
    G: int | None = None
    rank: int | None = None
    lam: float | None = None
    id: int | None = None
    params: dict = field(default_factory=dict)
    measure: str | None = None
    jacobi: str | None = None
    points: str | None = None
    cap: float | None = None
    j_hi: int | None = None
    L: int | None = None
    segments: list | None = None
    lines: int | None = None
    count: int | None = None
    x: list | None = None
    y: list | None = None
    out: str | None = None
    measure_out: str | None = None
    threads: int = 1
    seed: int = 0
    max_atoms: int | None = None
    max_seconds: float | None = None

    def problems(self) -> list[str]:
        """Every violation of the documented ranges."""
        p = []

        def positive(name, v, allow_none=True):
            if v is None:
                if not allow_none:
                    p.append(f"{name} is required")
            elif not v > 0:
                p.append(f"{name} must be positive (got {v!r})")

        positive("threads", self.threads, False)
        positive("max_atoms", self.max_atoms)
        positive("max_seconds", self.max_seconds)
        if self.out is None:
            p.append("out is required")
        if self.command == "build":
            if self.kind not in KINDS:
                p.append(f"kind must be one of {', '.join(KINDS)} (got {self.kind!r})")
            positive("rank", self.rank, False)
            if self.kind == "exact-julia":
                if self.lam is None and not (self.ifs and self.ifs.get("kind") == "julia"):
                    p.append("exact-julia needs lambda or a julia ifs")
                elif self.lam is not None and not self.lam >= 2:
                    p.append(f"lambda must be >= 2 (got {self.lam!r})")
            elif self.kind not in KINDS:
                if self.n is not None and self.n < 0:
                    p.append("n must be a non-negative integer")
            else:
                if self.ifs is None:
                    p.append("ifs is required")
                if self.n is None or self.n < 0:
                    p.append("n must be a non-negative integer")
                if self.kind == "equilibrium":
                    if self.G is None or self.G < 2:
                        p.append("G must be an integer >= 2")
        elif self.command == "experiment":
            if self.id not in range(1, 8):
                p.append(f"experiment id must be 1..7 (got {self.id!r})")
        elif self.command in ("potential", "conformal"):
            sources = [s for s in (self.measure, self.jacobi, self.ifs) if s is not None]
            if len(sources) != 1:
                p.append("give exactly one of measure, jacobi or ifs")
            if self.ifs is not None:
                if self.n is None or self.n < 0:
                    p.append("n must be a non-negative integer")
                if self.G is None or self.G < 2:
                    p.append("G must be an integer >= 2")
            positive("cap", self.cap)
            positive("j_hi", self.j_hi)
            positive("L", self.L)
            if (self.j_hi is None) != (self.L is None):
                p.append("j_hi and L must be given together")
            if self.command == "potential" and self.points is None:
                p.append("points is required")
            if self.command == "conformal" and self.segments is None:
                if None in (self.lines, self.count, self.x, self.y):
                    p.append("conformal needs segments or lines, count, x and y")
                else:
                    positive("lines", self.lines)
                    positive("count", self.count)
                    for name, v in (("x", self.x), ("y", self.y)):
                        if len(v) != 2 or not v[0] < v[1]:
                            p.append(f"{name} must be an increasing pair")
                    if len(self.y) == 2 and not self.y[0] > 0:
                        p.append("y must lie in the open upper half-plane")
        return p

    def validate(self) -> "RunConfig":
        p = self.problems()
        if p:
            raise ConfigError(p)
        return self


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with default values for any option")
    common.add_argument("--threads", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--max-atoms", dest="max_atoms", type=int)
    common.add_argument("--max-seconds", dest="max_seconds", type=float)
    common.add_argument("--out", help="output file or directory")

    ap = argparse.ArgumentParser(prog="ifsjacobi", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", parents=[common], help="Jacobi matrix of a measure on E_n")
    b.add_argument("--ifs", help="IFS JSON file")
    b.add_argument("--kind", choices=KINDS)
    b.add_argument("--n", type=int)
    b.add_argument("--G", type=int)
    b.add_argument("--rank", type=int)
    b.add_argument("--lambda", dest="lam", type=float)
    b.add_argument("--measure-out", dest="measure_out", help="also write the atoms (x,w CSV)")

    e = sub.add_parser("experiment", parents=[common], help="run a desk-scale experiment")
    e.add_argument("id", type=int, nargs="?")
    e.add_argument("--param", action="append", default=None, metavar="KEY=JSON",
                   help="override one experiment parameter")

    for name in ("potential", "conformal"):
        s = sub.add_parser(name, parents=[common], help=f"batch {name} evaluation")
        s.add_argument("--measure", help="atoms CSV (x,w)")
        s.add_argument("--jacobi", help="Jacobi CSV or JSON")
        s.add_argument("--ifs", help="IFS JSON; the equilibrium measure of E_n is used")
        s.add_argument("--n", type=int)
        s.add_argument("--G", type=int)
        s.add_argument("--cap", type=float)
        s.add_argument("--j-hi", dest="j_hi", type=int)
        s.add_argument("--L", type=int)
        if name == "potential":
            s.add_argument("--points", help="CSV with columns re,im")
        else:
            s.add_argument("--segments", help="JSON list of segment specs")
            s.add_argument("--lines", type=int)
            s.add_argument("--count", type=int)
            s.add_argument("--x", type=float, nargs=2)
            s.add_argument("--y", type=float, nargs=2)
    return ap


def _load_ifs(value):
    if value is None or isinstance(value, dict):
        return value
    from .serialize import load_json
    try:
        return load_json(value)
    except OSError as exc:
        raise ConfigError([f"cannot read ifs file {value}: {exc.strerror}"]) from exc


def parse_config(argv=None) -> RunConfig:
    ns = _parser().parse_args(argv)
    merged: dict = {}
    if ns.config:
        from .serialize import load_json
        try:
            data = load_json(ns.config)
        except OSError as exc:
            raise ConfigError([f"cannot read config {ns.config}: {exc.strerror}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["config must be a JSON object"])
        merged.update({k.replace("-", "_"): v for k, v in data.items()})
        if "lambda" in merged:
            merged["lam"] = merged.pop("lambda")
    for k, v in vars(ns).items():
        if k in ("config", "param") or v is None:
            continue
        merged[k] = v
    problems = []
    params = dict(merged.get("params") or {})
    for item in getattr(ns, "param", None) or []:
        key, sep, val = item.partition("=")
        if not sep:
            problems.append(f"--param expects KEY=JSON (got {item!r})")
            continue
        try:
            params[key] = json.loads(val)
        except json.JSONDecodeError:
            params[key] = val
    merged["params"] = params
    known = set(RunConfig.__dataclass_fields__)
    unknown = sorted(set(merged) - known)
    problems.extend(f"unknown option {k!r}" for k in unknown)
    cfg = RunConfig(**{k: v for k, v in merged.items() if k in known})
    try:
        cfg.ifs = _load_ifs(cfg.ifs)
    except ConfigError as exc:
        problems.extend(exc.problems)
    problems.extend(cfg.problems())
    if problems:
        raise ConfigError(problems)
    return cfg


# -- commands --------------------------------------------------------------

def _ifs(cfg: RunConfig):
    from .ifs import IFSSystem
    return IFSSystem.from_dict(cfg.ifs)


def cmd_build(cfg: RunConfig) -> dict:
    from .equilibrium import equilibrium_atoms, solve_gap_roots
    from .ifs import MAX_ATOMS, balanced_atoms, interval_union, julia_exact_jacobi
    from .jacobi import rkpw_jacobi
    from .serialize import save_jacobi, write_measure_csv

    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    info = {"kind": cfg.kind, "rank": cfg.rank, "out": str(out)}
    budget = cfg.max_atoms or MAX_ATOMS
    if cfg.kind == "exact-julia":
        lam = cfg.lam if cfg.lam is not None else float(cfg.ifs["lambda"])
        save_jacobi(julia_exact_jacobi(lam, cfg.rank), out)
        info["lambda"] = lam
        return info
    ifs = _ifs(cfg)
    if cfg.kind == "balanced":
        m = balanced_atoms(ifs, cfg.n, budget)
    else:
        atoms = len(interval_union(ifs, cfg.n).intervals) * cfg.G
        if atoms > budget:
            raise BudgetError(f"{atoms} atoms exceed the limit of {budget}")
        sysg = solve_gap_roots(interval_union(ifs, cfg.n))
        m = equilibrium_atoms(sysg, cfg.G)
        info["gap_roots"] = sysg.roots
    save_jacobi(rkpw_jacobi(m, cfg.rank, cfg.threads), out)
    if cfg.measure_out:
        write_measure_csv(m, cfg.measure_out)
    info.update({"n": cfg.n, "atoms": len(m)})
    return info


def cmd_experiment(cfg: RunConfig) -> dict:
    from .experiments import run_experiment
    return run_experiment(cfg.id, cfg.out, cfg.params, cfg.threads)


def _source(cfg: RunConfig):
    from .equilibrium import equilibrium_measure
    from .ifs import interval_union
    from .serialize import load_jacobi, read_measure_csv

    if cfg.measure:
        return read_measure_csv(cfg.measure), None
    if cfg.jacobi:
        return load_jacobi(cfg.jacobi), None
    E = interval_union(_ifs(cfg), cfg.n)
    return equilibrium_measure(E, cfg.G), E


def _capacity(cfg: RunConfig, src, E):
    from .ifs import DiscreteMeasure
    from .potential import capacity_from_potential

    if cfg.cap is not None:
        return cfg.cap
    if isinstance(src, DiscreteMeasure):
        return capacity_from_potential(src, E).value
    return None


def cmd_potential(cfg: RunConfig) -> dict:
    from .potential import evaluate, read_points_csv, write_samples_csv

    pts = read_points_csv(cfg.points)
    src, E = _source(cfg)
    cap = _capacity(cfg, src, E)
    samples = [evaluate(src, z, cap, cfg.j_hi, cfg.L) for z in pts]
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    write_samples_csv(cfg.out, samples)
    return {"points": len(samples), "cap": cap, "out": cfg.out}


def cmd_conformal(cfg: RunConfig) -> dict:
    from .conformal import Segment, horizontal_family, map_segments, write_polylines
    from .serialize import load_json

    if cfg.segments is not None:
        raw = load_json(cfg.segments) if isinstance(cfg.segments, str) else cfg.segments
        segs = [Segment.from_dict(d) for d in raw]
    else:
        segs = horizontal_family(cfg.x[0], cfg.x[1], cfg.y[0], cfg.y[1], cfg.lines, cfg.count)
    src, E = _source(cfg)
    cap = _capacity(cfg, src, E)
    if cap is None:
        raise ConfigError(["cap is required with a Jacobi source"])
    index = write_polylines(map_segments(src, cap, segs, j_hi=cfg.j_hi, L=cfg.L), cfg.out)
    return {"polylines": len(segs), "cap": cap, "index": str(index)}


COMMANDS = {"build": cmd_build, "experiment": cmd_experiment,
            "potential": cmd_potential, "conformal": cmd_conformal}


def _error_body(exc: BaseException) -> tuple[int, dict]:
    body = {"error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        body["problems"] = exc.problems
    if isinstance(exc, SingularityError):
        body["atom"] = exc.atom
    if isinstance(exc, BudgetError):
        return EXIT_BUDGET, body
    if isinstance(exc, (ConvergenceError, NumericError)):
        return EXIT_CONVERGENCE, body
    if isinstance(exc, (ParameterError, DomainError, ValueError, OSError, KeyError)):
        return EXIT_CONFIG, body
    return EXIT_OTHER, body


def main(argv=None) -> int:
    from .serialize import dumps

    t0 = time.perf_counter()
    try:
        cfg = parse_config(argv)
        np.random.seed(cfg.seed)
        result = COMMANDS[cfg.command](cfg)
    except (IFSJacobiError, ValueError, OSError, KeyError) as exc:
        code, body = _error_body(exc)
        sys.stderr.write(dumps(body, indent=None) + "\n")
        return code
    if isinstance(result, dict):
        result.setdefault("seconds", time.perf_counter() - t0)
        summary = {k: v for k, v in result.items() if k not in ("params",)}
        sys.stdout.write(dumps(summary, indent=None) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
