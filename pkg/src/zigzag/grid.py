"""Propagation grids: container, CSV/JSON export and comparison."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "CSV_HEADER",
    "CompareReport",
    "GridMismatchError",
    "PropagationGrid",
    "compare_grids",
    "read_grid",
    "write_curves",
    "write_grid",
]

CSV_HEADER = ["Z", "m", "re", "im", "intensity", "flag"]


class GridMismatchError(ValueError):
    """Two grids do not share the same Z samples and site range."""


@dataclass
class PropagationGrid:
    """Complex amplitudes on a rectangle of distances ``z`` and sites ``m``.

    ``values[i, j]`` is the amplitude at ``z[i]``, site ``m[j]``.
    """

    z: np.ndarray
    m: np.ndarray
    values: np.ndarray
    flags: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        self.m = np.asarray(self.m, dtype=int)
        self.values = np.asarray(self.values, dtype=complex)
        if self.flags is None:
            self.flags = np.zeros(self.values.shape, dtype=bool)
        self.flags = np.asarray(self.flags, dtype=bool)
        shape = (self.z.size, self.m.size)
        if self.values.shape != shape or self.flags.shape != shape:
            raise ValueError(f"grid arrays must have shape {shape}, got "
                             f"{self.values.shape} and {self.flags.shape}")

    @property
    def re(self) -> np.ndarray:
        return self.values.real

    @property
    def im(self) -> np.ndarray:
        return self.values.imag

    @property
    def intensity(self) -> np.ndarray:
        re, im = self.re, self.im
        return re * re + im * im

    @property
    def total_power(self) -> np.ndarray:
        """Sum of intensities over the site range, one value per Z row."""
        return self.intensity.sum(axis=1)

    @property
    def any_flagged(self) -> bool:
        return bool(self.flags.any())

    def check_finite(self) -> None:
        if not np.all(np.isfinite(self.values)):
            bad = np.argwhere(~np.isfinite(self.values))[0]
            raise ValueError(f"non-finite amplitude at Z={self.z[bad[0]]}, m={self.m[bad[1]]}")


def _num(x: float) -> str:
    # shortest decimal that round-trips to the same double
    return repr(float(x))


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _grid_csv(grid: PropagationGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    intensity = grid.intensity
    for i, z in enumerate(grid.z):
        for j, m in enumerate(grid.m):
            v = grid.values[i, j]
            writer.writerow([_num(z), int(m), _num(v.real), _num(v.imag),
                             _num(intensity[i, j]), int(grid.flags[i, j])])
    return buf.getvalue()


def _grid_json(grid: PropagationGrid) -> str:
    doc = {
        "meta": grid.meta,
        "z": [float(z) for z in grid.z],
        "m": [int(m) for m in grid.m],
        "cells": {
            "re": [float(x) for x in grid.re.ravel()],
            "im": [float(x) for x in grid.im.ravel()],
            "intensity": [float(x) for x in grid.intensity.ravel()],
            "flag": [bool(x) for x in grid.flags.ravel()],
        },
    }
    return json.dumps(doc, allow_nan=False, indent=None) + "\n"


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_grid(grid: PropagationGrid, path, fmt: str | None = None) -> Path:
    """Write ``grid`` as CSV or JSON; the file is replaced atomically.

    CSV has one row per cell, Z-major then ``m`` ascending; metadata goes to
    a ``<path>.meta.json`` sidecar.  Non-finite values are rejected.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    grid.check_finite()
    if fmt == "csv":
        _atomic_write(path, _grid_csv(grid))
        _atomic_write(_meta_path(path), json.dumps(grid.meta, indent=2, allow_nan=False) + "\n")
    elif fmt == "json":
        _atomic_write(path, _grid_json(grid))
    else:
        raise ValueError(f"unknown grid format {fmt!r}; expected 'csv' or 'json'")
    return path


def read_grid(path, fmt: str | None = None) -> PropagationGrid:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "json":
        doc = json.loads(path.read_text())
        z = np.array(doc["z"], dtype=float)
        m = np.array(doc["m"], dtype=int)
        cells = doc["cells"]
        shape = (z.size, m.size)
        values = (np.array(cells["re"], dtype=float)
                  + 1j * np.array(cells["im"], dtype=float)).reshape(shape)
        flags = np.array(cells["flag"], dtype=bool).reshape(shape)
        return PropagationGrid(z, m, values, flags, doc.get("meta", {}))
    if fmt != "csv":
        raise ValueError(f"unknown grid format {fmt!r}; expected 'csv' or 'json'")

    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        rows = list(reader)
    zs = list(dict.fromkeys(float(r[0]) for r in rows))
    ms = list(dict.fromkeys(int(r[1]) for r in rows))
    if len(rows) != len(zs) * len(ms):
        raise ValueError(f"{path}: {len(rows)} rows do not form a {len(zs)}x{len(ms)} grid")
    values = np.array([float(r[2]) + 1j * float(r[3]) for r in rows]).reshape(len(zs), len(ms))
    flags = np.array([r[5] not in ("0", "false", "False") for r in rows]).reshape(len(zs), len(ms))
    meta_file = _meta_path(path)
    meta = json.loads(meta_file.read_text()) if meta_file.exists() else {}
    return PropagationGrid(np.array(zs), np.array(ms), values, flags, meta)


def write_curves(path, columns: dict[str, np.ndarray], fmt: str | None = None,
                 meta: dict | None = None) -> Path:
    """Export equal-length named columns (e.g. xi curves) as CSV or JSON."""
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float) for k in names]
    if len({a.size for a in arrays}) > 1:
        raise ValueError("curve columns must have equal length")
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise ValueError("curve data contains non-finite values")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*arrays):
            writer.writerow([_num(x) for x in row])
        _atomic_write(path, buf.getvalue())
    elif fmt == "json":
        doc = {"meta": meta or {}, **{k: [float(x) for x in a] for k, a in zip(names, arrays)}}
        _atomic_write(path, json.dumps(doc, allow_nan=False) + "\n")
    else:
        raise ValueError(f"unknown curve format {fmt!r}")
    return path


@dataclass(frozen=True)
class CompareReport:
    max_abs_error: float
    rel_l2_error: float
    worst_cell: tuple[float, int]
    per_z_max: np.ndarray
    threshold: float
    metric: str

    @property
    def value(self) -> float:
        return self.rel_l2_error if self.metric == "rel_l2" else self.max_abs_error

    @property
    def passed(self) -> bool:
        return self.value < self.threshold

    def to_dict(self) -> dict:
        return {
            "max_abs_error": self.max_abs_error,
            "rel_l2_error": self.rel_l2_error,
            "worst_cell": {"Z": self.worst_cell[0], "m": self.worst_cell[1]},
            "per_z_max": [float(x) for x in self.per_z_max],
            "metric": self.metric,
            "threshold": self.threshold,
            "passed": self.passed,
        }

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: max|dI| = {self.max_abs_error:.3e} at Z={self.worst_cell[0]:g}, "
                f"m={self.worst_cell[1]}; relL2 = {self.rel_l2_error:.3e} "
                f"({self.metric} threshold {self.threshold:g})")


def compare_grids(a: PropagationGrid, b: PropagationGrid, threshold: float = 1e-5,
                  metric: str = "rel_l2") -> CompareReport:
    """Intensity differences of ``b`` against the reference ``a``."""
    if metric not in ("rel_l2", "max_abs"):
        raise ValueError("metric must be 'rel_l2' or 'max_abs'")
    if a.z.shape != b.z.shape or not np.allclose(a.z, b.z, rtol=0, atol=1e-12):
        raise GridMismatchError("grids have different Z samples")
    if not np.array_equal(a.m, b.m):
        raise GridMismatchError("grids have different site ranges")
    diff = np.abs(a.intensity - b.intensity)
    i, j = np.unravel_index(np.argmax(diff), diff.shape) if diff.size else (0, 0)
    ref = np.linalg.norm(a.intensity)
    dnorm = np.linalg.norm(diff)
    rel = dnorm / ref if ref > 0 else (0.0 if dnorm == 0 else math.inf)
    return CompareReport(
        max_abs_error=float(diff.max()) if diff.size else 0.0,
        rel_l2_error=float(rel),
        worst_cell=(float(a.z[i]), int(a.m[j])),
        per_z_max=diff.max(axis=1) if diff.size else np.zeros(a.z.size),
        threshold=float(threshold),
        metric=metric,
    )
