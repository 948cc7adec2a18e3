"""Machine-readable report emission: a versioned JSON envelope written
atomically, plus fixed-column CSV/TSV emitters for sweeps and evolutions.
"""

from __future__ import annotations

import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from importlib import metadata as _ilmd
from typing import Any, Optional

import numpy as np

SCHEMA = "qdslab-report/1"

SWEEP_COLUMNS = ("dim", "lambda", "ell_norm", "q_limit_norm",
                 "explosion_mass", "verdict")
EVOLUTION_COLUMNS = ("t", "trace", "min_eig", "max_eig",
                     "explosion_min_eig", "explosion_max_eig")


def _tool_version() -> str:
    try:
        return _ilmd.version("qdslab")
    except _ilmd.PackageNotFoundError:
        return "0.0.0+local"


def _jsonable(obj: Any):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return _jsonable(np.stack([obj.real, obj.imag], axis=-1))
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


@dataclass
class ReportEnvelope:
    """Top-level report: config echo, task results, timings, verdicts."""

    config: dict
    results: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    verdict_summary: str = ""

    def add(self, task: str, result: Any, seconds: float | None = None):
        self.results[task] = _jsonable(result)
        if seconds is not None:
            self.timings[task] = round(seconds, 6)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "tool_version": _tool_version(),
            "config": _jsonable(self.config),
            "results": self.results,
            "wall_clock_seconds": self.timings,
            "verdict_summary": self.verdict_summary,
        }

    def write_json(self, path: str):
        atomic_write(path, json.dumps(self.to_dict(), indent=2) + "\n")


def atomic_write(path: str, text: str):
    """Write the whole file in one rename so readers never see partials."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qdslab-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _delimited(rows: list[dict], columns: tuple[str, ...], sep: str) -> str:
    lines = [sep.join(columns)]
    for row in rows:
        cells = []
        for c in columns:
            v = row.get(c, "")
            if isinstance(v, float):
                cells.append(f"{v:.12g}")
            else:
                cells.append(str(v))
        lines.append(sep.join(cells))
    return "\n".join(lines) + "\n"


def sweep_rows(sweep) -> list[dict]:
    """Flatten a truncation sweep into fixed-column rows."""
    rows = []
    for dim, cert in zip(sweep.dims, sweep.certificates):
        rows.append({
            "dim": dim,
            "lambda": cert.lam,
            "ell_norm": cert.ell_norm,
            "q_limit_norm": cert.q_limit_norm,
            "explosion_mass": cert.probe_mass,
            "verdict": cert.verdict,
        })
    return rows


def sweep_table(sweep, sep: str = ",") -> str:
    return _delimited(sweep_rows(sweep), SWEEP_COLUMNS, sep)


def evolution_table(result, sep: str = ",") -> str:
    rows = result.to_rows()
    cols = EVOLUTION_COLUMNS if result.explosion is not None \
        else EVOLUTION_COLUMNS[:4]
    return _delimited(rows, cols, sep)


def defect_samples_table(grid, u, sep: str = "\t") -> str:
    """Two-column table of (x, |u(x)|) for plotting defect vectors."""
    rows = [{"x": float(x), "abs_u": float(abs(v))} for x, v in zip(grid, u)]
    return _delimited(rows, ("x", "abs_u"), sep)


class TaskTimer:
    """Context manager stashing the wall-clock of one report task."""

    def __init__(self, envelope: ReportEnvelope, task: str):
        self.envelope = envelope
        self.task = task

    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.envelope.timings[self.task] = round(
            time.perf_counter() - self._t0, 6
        )
        return False
