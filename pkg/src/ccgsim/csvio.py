"""CSV artifacts with self-describing headers.

Every emitted file carries its fully resolved settings as comment lines
and a schema line naming each column with its unit, so any figure made
from it can be regenerated from the file alone.  Numbers are written
with shortest round-trip formatting; a file read back parses to exactly
the values that were written.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = ["CsvTable", "write_csv", "read_csv", "format_table"]

MAGIC = "ccgsim-csv 1"


@dataclass
class CsvTable:
    meta: dict
    columns: list
    units: list
    data: np.ndarray

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"no column {name!r}; have {self.columns}")
        return self.data[:, self.columns.index(name)]


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def format_table(meta: dict, columns, units, rows) -> str:
    """Render the full file contents as a string."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != len(columns):
        raise ValueError(f"rows shape {rows.shape} does not match {len(columns)} columns")
    if len(units) != len(columns):
        raise ValueError("one unit per column required")
    out = io.StringIO()
    out.write(f"# {MAGIC}\n")
    for key in sorted(meta):
        out.write(f"# {key} = {meta[key]}\n")
    schema = ",".join(f"{c}[{u}]" for c, u in zip(columns, units))
    out.write(f"# schema: {schema}\n")
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue()


def write_csv(path, meta: dict, columns, units, rows) -> None:
    text = format_table(meta, columns, units, rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_csv(path) -> CsvTable:
    """Parse a file written by write_csv, validating it against its own schema."""
    meta: dict = {}
    schema = None
    header = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if first != f"# {MAGIC}":
            raise ConfigError(f"{path}: not a recognized table (missing magic line)")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# schema: "):
                schema = line[len("# schema: "):]
            elif line.startswith("# "):
                key, _, value = line[2:].partition(" = ")
                meta[key] = value
            elif header is None:
                header = line.split(",")
            else:
                rows.append([float(v) for v in line.split(",")])
    if schema is None or header is None:
        raise ConfigError(f"{path}: missing schema or header line")
    columns = []
    units = []
    for entry in schema.split(","):
        if not entry.endswith("]") or "[" not in entry:
            raise ConfigError(f"{path}: malformed schema entry {entry!r}")
        name, _, unit = entry[:-1].partition("[")
        columns.append(name)
        units.append(unit)
    if header != columns:
        raise ConfigError(f"{path}: header row disagrees with the schema line")
    data = np.asarray(rows, dtype=float) if rows else np.empty((0, len(columns)))
    if data.size and data.shape[1] != len(columns):
        raise ConfigError(f"{path}: ragged data rows")
    return CsvTable(meta=meta, columns=columns, units=units, data=data)
