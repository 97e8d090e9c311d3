"""Artifact writers: HBGF grids, RFC 4180 CSV tables and preview PNGs."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import hbgf
from .errors import BeamHoloError


class OutputError(BeamHoloError, OSError):
    exit_code = 4


@dataclass
class Table:
    header: list
    rows: list


def to_png_array(grid) -> np.ndarray:
    """Max-normalize, gamma 2.2 encode and quantize to 8 bits.

    Complex grids are shown as intensity; grids with negative values are
    shifted to start at zero first. RGB input (``H x W x 3``) is only scaled.
    """
    g = np.asarray(grid)
    if np.iscomplexobj(g):
        g = np.abs(g) ** 2
    g = np.nan_to_num(g.astype(np.float64))
    if g.ndim == 2 and g.min() < 0:
        g = g - g.min()
    peak = g.max()
    if peak > 0:
        g = g / peak
    g = np.clip(g, 0.0, 1.0) ** (1.0 / 2.2)
    return np.rint(g * 255).astype(np.uint8)


def csv_bytes(table: Table) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(table.header)
    for row in table.rows:
        writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


class OutputWriter:
    """Writes artifacts named ``<command>_<config hash>_<name>.<ext>``.

    Paths are tracked so a failed run can remove what it already wrote.
    """

    def __init__(self, directory, command: str, config_hash: str, formats=("hbgf", "csv", "png")):
        self.directory = Path(directory)
        self.prefix = f"{command}_{config_hash}"
        self.formats = set(formats)
        self.paths: list[Path] = []

    def _path(self, name: str, ext: str) -> Path:
        return self.directory / f"{self.prefix}_{name}.{ext}"

    def _write(self, path: Path, data: bytes) -> Path:
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        self.paths.append(path)
        return path

    def grid(self, name: str, grid, png: bool = True) -> list[Path]:
        out = []
        grid = np.asarray(grid)
        if "hbgf" in self.formats and grid.ndim == 2:
            out.append(self._write(self._path(name, "hbgf"), hbgf.encode(grid)))
        if png and "png" in self.formats:
            out.append(self.png(name, grid))
        return out

    def png(self, name: str, grid) -> Path:
        buf = io.BytesIO()
        Image.fromarray(to_png_array(grid)).save(buf, format="PNG")
        return self._write(self._path(name, "png"), buf.getvalue())

    def table(self, name: str, table: Table) -> Path | None:
        if "csv" not in self.formats:
            return None
        return self._write(self._path(name, "csv"), csv_bytes(table))

    def cleanup(self) -> None:
        for p in self.paths:
            p.unlink(missing_ok=True)
        self.paths.clear()


def write_outputs(results: dict, writer: OutputWriter) -> list[Path]:
    """Write every named result: 2D/3D arrays as grids (+PNG), :class:`Table` as CSV."""
    paths = []
    for name, value in results.items():
        if isinstance(value, Table):
            p = writer.table(name, value)
            if p is not None:
                paths.append(p)
        else:
            arr = np.asarray(value)
            if arr.ndim == 3:
                if "png" in writer.formats:
                    paths.append(writer.png(name, arr))
            else:
                paths.extend(writer.grid(name, arr))
    return paths
