"""Atomic file output: CSV tables, legacy VTK fields, JSON reports, gnuplot
scripts and the plain-text basis dump."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text: str) -> Path:
    """Write through a temporary file in the target directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def fmt(value) -> str:
    """Round-trip float formatting (17 significant digits)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return "%.17g" % v


def write_csv(path, header, rows) -> Path:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path):
    """Header and float rows of a file written by :func:`write_csv`."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = text[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in text[1:]]
    return header, np.array(rows)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def vtk_text(mesh, point_data=None, cell_data=None, title="thermovisco field") -> str:
    """Legacy ASCII VTK (version 2.0) unstructured grid of the triangulation.

    Point data: scalars ``(N,)`` or 2-vectors ``(N, 2)``.  Cell data:
    scalars ``(E,)`` or tensors ``(E, 3, 3)``.
    """
    out = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII",
           "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_nodes} double"]
    out += [f"{fmt(x)} {fmt(y)} 0" for x, y in mesh.nodes]
    E = mesh.n_elements
    out.append(f"CELLS {E} {4 * E}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {E}")
    out += ["5"] * E
    if point_data:
        out.append(f"POINT_DATA {mesh.n_nodes}")
        for name, arr in point_data.items():
            out += _vtk_array(name, np.asarray(arr, dtype=float))
    if cell_data:
        out.append(f"CELL_DATA {E}")
        for name, arr in cell_data.items():
            out += _vtk_array(name, np.asarray(arr, dtype=float))
    return "\n".join(out) + "\n"


def _vtk_array(name, arr):
    if arr.ndim == 1:
        return [f"SCALARS {name} double 1", "LOOKUP_TABLE default"] + [fmt(v) for v in arr]
    if arr.ndim == 2 and arr.shape[1] == 2:
        return [f"VECTORS {name} double"] + [f"{fmt(a)} {fmt(b)} 0" for a, b in arr]
    if arr.ndim == 3 and arr.shape[1:] == (3, 3):
        lines = [f"TENSORS {name} double"]
        for t in arr:
            lines += [" ".join(fmt(v) for v in row) for row in t]
        return lines
    raise ValueError(f"unsupported VTK array shape {arr.shape} for {name}")


def write_vtk(path, mesh, point_data=None, cell_data=None, title="thermovisco field") -> Path:
    return atomic_write_text(path, vtk_text(mesh, point_data, cell_data, title))


def basis_dump_text(bases) -> str:
    """Structured text: mesh, eigenvalues and coefficient arrays."""
    mesh = bases.mesh
    lines = [f"mesh Lx={fmt(mesh.Lx)} Ly={fmt(mesh.Ly)} nx={mesh.nx} ny={mesh.ny}",
             f"nodes {mesh.n_nodes}"]
    lines += [f"{fmt(x)} {fmt(y)}" for x, y in mesh.nodes]
    lines.append(f"triangles {mesh.n_elements}")
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"temperature_eigenvalues {bases.l}")
    lines += [fmt(v) for v in bases.mu]
    lines.append(f"displacement_eigenvalues {bases.k}")
    lines += [fmt(v) for v in bases.lam]
    lines.append(f"temperature_modes {mesh.n_nodes} {bases.l}")
    lines += [" ".join(fmt(v) for v in row) for row in bases.V]
    lines.append(f"displacement_modes {mesh.n_nodes} 2 {bases.k}")
    lines += [" ".join(fmt(v) for v in row) for row in bases.W.reshape(mesh.n_nodes, -1)]
    lines.append(f"complement_modes {bases.l} {mesh.n_elements} 4")
    for z in bases.zeta:
        comps = np.stack([z[:, 0, 0], z[:, 1, 1], z[:, 2, 2], z[:, 0, 1]], axis=1)
        lines += [" ".join(fmt(v) for v in row) for row in comps]
    return "\n".join(lines) + "\n"


def plot_script(files: dict) -> str:
    """Gnuplot command script; ``files`` maps a CSV name to a list of
    ``(x_column, y_column, title)`` triples (1-based columns)."""
    out = ["# generated plot script; run with: gnuplot plots.gp",
           "set datafile separator ','", "set key autotitle columnhead", "set terminal pngcairo size 900,600"]
    for name, series in files.items():
        stem = Path(name).stem
        out.append(f"set output '{stem}.png'")
        plots = [f"'{name}' using {x}:{y} with linespoints title '{title}'" for x, y, title in series]
        out.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(out) + "\n"
