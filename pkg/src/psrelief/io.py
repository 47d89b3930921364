"""Instance and table file formats.

Instances are JSON objects with keys m, n, s, d_lo, d_hi, gamma, omega,
beta, cost_a, cost_b, vis_k; matrices are row-major lists of lists (see
docs/instance-schema.md).  Matrices travel as CSV with header ``k,l,value``
and 1-based indices; lines starting with ``#`` carry embedded metadata and
are skipped on load.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from psrelief.relief import ReliefInstance


class InputError(ValueError):
    """User-input problem (bad file, bad shape); carries a positioned message."""


def load_instance(path: str | Path) -> ReliefInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise InputError(f"{path}:1:1: expected a JSON object")
    missing = [k for k in ("m", "n", "s", "d_lo", "d_hi", "gamma", "omega",
                           "beta", "cost_a", "cost_b", "vis_k") if k not in data]
    if missing:
        raise InputError(f"{path}:1:1: missing keys: {', '.join(missing)}")
    try:
        return ReliefInstance.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}:1:1: malformed instance: {exc}") from exc


def save_instance(inst: ReliefInstance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(inst.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def format_matrix_csv(matrix: np.ndarray, header_comments: list[str] | None = None) -> str:
    lines = [f"# {c}" for c in (header_comments or [])]
    lines.append("k,l,value")
    m, n = matrix.shape
    for k in range(m):
        for l in range(n):
            lines.append(f"{k + 1},{l + 1},{float(matrix[k][l])!r}")
    return "\n".join(lines) + "\n"


def write_matrix_csv(matrix: np.ndarray, path: str | Path, header_comments: list[str] | None = None) -> None:
    Path(path).write_text(format_matrix_csv(matrix, header_comments), encoding="utf-8")


def load_matrix_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read: {exc.strerror or exc}") from exc
    return parse_matrix_csv(text, origin=str(path))


def parse_matrix_csv(text: str, origin: str = "<memory>") -> np.ndarray:
    entries: dict[tuple[int, int], float] = {}
    header_seen = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != ["k", "l", "value"]:
                raise InputError(f"{origin}:{line_no}:1: expected header 'k,l,value'")
            header_seen = True
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise InputError(f"{origin}:{line_no}:1: expected 'k,l,value'")
        try:
            k, l, value = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise InputError(f"{origin}:{line_no}:1: {exc}") from exc
        if k < 1 or l < 1:
            raise InputError(f"{origin}:{line_no}:1: indices are 1-based")
        if (k, l) in entries:
            raise InputError(f"{origin}:{line_no}:1: duplicate cell ({k},{l})")
        entries[(k, l)] = value
    if not header_seen:
        raise InputError(f"{origin}:1:1: empty table")
    m = max(k for k, _ in entries)
    n = max(l for _, l in entries)
    if len(entries) != m * n:
        raise InputError(f"{origin}:1:1: table is not a full {m}x{n} matrix")
    out = np.zeros((m, n))
    for (k, l), value in entries.items():
        out[k - 1][l - 1] = value
    return out
