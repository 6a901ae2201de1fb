"""File formats: JSON and CSV with 17 significant digits for every float."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .ifs import DiscreteMeasure
from .jacobi import JacobiMatrix

_TOKEN = "\x00F"
_TOKEN_RE = re.compile(r'"\\u0000F([^"]*)"')


def fmt(x) -> str:
    """A float in 17 significant digits (round-trip exact)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _tokenize(obj):
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return x
        return _TOKEN + format(x, ".17g")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, complex):
        return {"re": _tokenize(obj.real), "im": _tokenize(obj.imag)}
    if isinstance(obj, dict):
        return {str(k): _tokenize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_tokenize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_tokenize(v) for v in obj.tolist()]
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "to_dict"):
        return _tokenize(obj.to_dict())
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    """``json.dumps`` with floats written as 17 significant digits."""
    text = json.dumps(_tokenize(obj), indent=indent)
    return _TOKEN_RE.sub(lambda m: m.group(1), text)


def dump(obj, path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from exc


def write_csv(path, header, rows, comments=()) -> None:
    """Write a CSV; floats go through :func:`fmt`, ``None`` becomes empty."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else fmt(v) if isinstance(v, (float, np.floating))
                    else v for v in row])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> tuple[dict, list[dict]]:
    """Return (``# key=value`` comments, rows as dicts)."""
    meta = {}
    lines = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val.strip()
        elif line.strip():
            lines.append(line)
    return meta, list(csv.DictReader(lines))


# -- Jacobi matrices -------------------------------------------------------

def jacobi_to_dict(J: JacobiMatrix) -> dict:
    return {"rank": J.rank, "mass": J.mass, "a": J.a, "b": J.b[1:]}


def jacobi_from_dict(data: dict) -> JacobiMatrix:
    a = np.asarray(data["a"], dtype=float)
    b = np.concatenate([[0.0], np.asarray(data["b"], dtype=float)]) if len(a) else np.empty(0)
    return JacobiMatrix(a, b, float(data["mass"]))


def write_jacobi_csv(J: JacobiMatrix, path) -> None:
    rows = [(j, float(J.a[j]), None if j == 0 else float(J.b[j])) for j in range(J.rank)]
    write_csv(path, ["j", "a", "b"], rows, comments=[f"mass={fmt(J.mass)}"])


def read_jacobi_csv(path) -> JacobiMatrix:
    meta, rows = read_csv(path)
    if "mass" not in meta:
        raise ParameterError(f"{path}: missing '# mass=' line")
    a = np.array([float(r["a"]) for r in rows])
    b = np.array([0.0] + [float(r["b"]) for r in rows[1:]])
    return JacobiMatrix(a, b[:len(a)], float(meta["mass"]))


def save_jacobi(J: JacobiMatrix, path) -> None:
    """CSV or JSON by file suffix."""
    if str(path).endswith(".json"):
        dump(jacobi_to_dict(J), path)
    else:
        write_jacobi_csv(J, path)


def load_jacobi(path) -> JacobiMatrix:
    if str(path).endswith(".json"):
        return jacobi_from_dict(load_json(path))
    return read_jacobi_csv(path)


# -- discrete measures -----------------------------------------------------

def write_measure_csv(m: DiscreteMeasure, path) -> None:
    write_csv(path, ["x", "w"], zip(m.x.tolist(), m.w.tolist()),
              comments=[f"mass={fmt(m.mass)}"])


def read_measure_csv(path) -> DiscreteMeasure:
    _, rows = read_csv(path)
    return DiscreteMeasure([float(r["x"]) for r in rows], [float(r["w"]) for r in rows])
