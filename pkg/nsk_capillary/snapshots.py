from __future__ import annotations

import csv
import logging
import os
import struct
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FieldError
from .models import Grid, LedgerRecord, OutputSpec, ScalarField, State, VectorField

logger = logging.getLogger(__name__)

HEADER = struct.Struct("<IIdI")  # dim, n, L, ncomp
OUT_DIR_ENV = "NSK_OUT_DIR"

Field = Union[ScalarField, VectorField]


def output_root(spec: OutputSpec) -> Path:
    override = os.environ.get(OUT_DIR_ENV)
    return Path(override) if override else Path(spec.dir)


# --- Field snapshots ------------------------------------------------------------


def _components(field: Field) -> np.ndarray:
    if isinstance(field, VectorField):
        return field.values
    return field.values[None, ...]


def _from_components(grid: Grid, comps: np.ndarray) -> Field:
    if comps.shape[0] == 1:
        return ScalarField(grid, comps[0])
    if comps.shape[0] == grid.dim:
        return VectorField(grid, comps)
    raise FieldError(f"{comps.shape[0]} components fit neither a scalar nor a {grid.dim}-vector field")


def write_field(path: Path, field: Field) -> Path:
    return _write_components(path, field.grid, _components(field))


def _write_components(path: Path, grid: Grid, comps: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(HEADER.pack(grid.dim, grid.n, grid.L, comps.shape[0]))
        fh.write(np.ascontiguousarray(comps, dtype="<f8").tobytes())
    return path


def _read_components(path: Path) -> Tuple[Grid, np.ndarray]:
    data = path.read_bytes()
    if len(data) < HEADER.size:
        raise FieldError(f"{path}: truncated header")
    dim, n, L, ncomp = HEADER.unpack_from(data)
    grid = Grid(dim, n, L)
    expected = ncomp * grid.cell_count * 8
    body = data[HEADER.size:]
    if len(body) != expected:
        raise FieldError(f"{path}: expected {expected} data bytes, found {len(body)}")
    comps = np.frombuffer(body, dtype="<f8").reshape((ncomp, *grid.shape))
    return grid, comps


def read_field(path: Path) -> Field:
    grid, comps = _read_components(path)
    return _from_components(grid, comps)


def write_field_csv(path: Path, field: Field) -> Path:
    return _write_components_csv(path, field.grid, _components(field))


def _write_components_csv(path: Path, grid: Grid, comps: np.ndarray) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(f"dim={grid.dim},n={grid.n},L={grid.L!r},ncomp={comps.shape[0]}\n")
        for value in comps.ravel():
            fh.write(f"{float(value)!r}\n")
    return path


def read_field_csv(path: Path) -> Field:
    return _from_components(*_read_components_csv(path))


def _read_components_csv(path: Path) -> Tuple[Grid, np.ndarray]:
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().strip()
        meta = dict(part.split("=", 1) for part in header.split(","))
        values = np.array([float(line) for line in fh if line.strip()])
    grid = Grid(int(meta["dim"]), int(meta["n"]), float(meta["L"]))
    ncomp = int(meta["ncomp"])
    if values.size != ncomp * grid.cell_count:
        raise FieldError(f"{path}: expected {ncomp * grid.cell_count} values, found {values.size}")
    return grid, values.reshape((ncomp, *grid.shape))


def write_state(directory: Path, state: State, step: int, fmt: str = "bin") -> Path:
    """rho followed by the momentum components, as one (1 + dim)-component snapshot."""
    comps = np.concatenate([state.rho.values[None, ...], state.m.values])
    if fmt == "bin":
        path = _write_components(directory / f"snap_{step}.bin", state.grid, comps)
    elif fmt == "csv":
        path = _write_components_csv(directory / f"snap_{step}.csv", state.grid, comps)
    else:
        raise FieldError(f"unknown snapshot format {fmt!r}")
    _append_index(directory, step, state.t, path.name)
    return path


def read_state(path: Path, t: float = 0.0) -> State:
    if path.suffix == ".csv":
        grid, comps = _read_components_csv(path)
    else:
        grid, comps = _read_components(path)
    if comps.shape[0] != 1 + grid.dim:
        raise FieldError(f"{path}: state snapshot needs {1 + grid.dim} components, found {comps.shape[0]}")
    return State(t, ScalarField(grid, comps[0]), VectorField(grid, comps[1:]))


def _append_index(directory: Path, step: int, t: float, name: str) -> None:
    index = directory / "snapshots.csv"
    fresh = not index.exists()
    with index.open("a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(["step", "t", "file"])
        writer.writerow([step, repr(float(t)), name])


# --- Ledger CSV -----------------------------------------------------------------


def ledger_row(record: LedgerRecord, extras: Sequence[str]) -> List[float]:
    row = [record.t, record.mass, *record.momentum, record.kinetic, record.free, record.nonlocal_,
           record.dissipation_cum, record.vacuum_cum]
    return row + [record.extras.get(name, float("nan")) for name in extras]


class LedgerWriter:
    """Streams ledger records to CSV: the fixed columns, then the extras, under one header row."""

    def __init__(self, path: Path, columns: Sequence[str], extras: Sequence[str]) -> None:
        self.path = path
        self.extras = list(extras)
        self.columns = list(columns) + self.extras
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = path.open("w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(self.columns)

    def write(self, record: LedgerRecord) -> None:
        self._writer.writerow([repr(float(v)) for v in ledger_row(record, self.extras)])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "LedgerWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def read_ledger(path: Path) -> Tuple[List[str], np.ndarray]:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration as exc:
            raise FieldError(f"{path}: empty ledger (header row is mandatory)") from exc
        rows = [[float(v) for v in row] for row in reader if row]
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(columns):
            raise FieldError(f"{path}:{lineno}: row has {len(row)} values, header has {len(columns)} columns")
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return columns, data


def write_gnuplot(path: Path, columns: Sequence[str], data: np.ndarray) -> Path:
    """Whitespace-separated columns with a commented header, as gnuplot reads them."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(f"{i + 1}:{name}" for i, name in enumerate(columns)) + "\n")
        for row in data:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    return path


def ledger_to_gnuplot(csv_path: Path, out_path: Optional[Path] = None) -> Path:
    columns, data = read_ledger(csv_path)
    target = out_path or csv_path.with_suffix(".dat")
    logger.info("wrote %d ledger rows to %s", len(data), target)
    return write_gnuplot(target, columns, data)


def records_to_rows(records: Iterable[LedgerRecord], extras: Sequence[str]) -> np.ndarray:
    return np.array([ledger_row(r, extras) for r in records], dtype=float)
