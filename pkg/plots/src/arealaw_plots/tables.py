"""Strict CSV parsing for the simulation sweep tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path


class SweepError(ValueError):
    """The CSV is missing, empty, malformed, or lacks required columns."""


NUMERIC_COLUMNS = {
    "seed", "N", "D", "d", "X", "sigma_size", "boundary_size", "T_steps",
    "dt", "T_tot", "h_norm", "I_bits", "bound_bits", "margin_bits", "m",
    "t_alpha", "t_beta", "I_ab_bits", "trotter_error",
    "rate_bits_per_time", "rate_bound_bits_per_time",
}


@dataclass(frozen=True)
class SweepTable:
    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    @classmethod
    def read(cls, path: str | Path) -> "SweepTable":
        try:
            with open(path, newline="") as fh:
                reader = csv.reader(fh)
                lines = list(reader)
        except OSError as e:
            raise SweepError(f"cannot read {path}: {e}") from e
        if not lines:
            raise SweepError(f"{path} is empty")
        header = tuple(lines[0])
        if len(lines) == 1:
            raise SweepError(f"{path} has a header but no data rows")
        rows = []
        for i, line in enumerate(lines[1:], start=2):
            if len(line) != len(header):
                raise SweepError(f"{path}:{i}: expected {len(header)} fields, got {len(line)}")
            row = {}
            for col, field in zip(header, line):
                if col in NUMERIC_COLUMNS:
                    try:
                        row[col] = float(field)
                    except ValueError as e:
                        raise SweepError(f"{path}:{i}: column {col!r} has "
                                         f"non-numeric value {field!r}") from e
                else:
                    row[col] = field
            rows.append(row)
        return cls(header, tuple(rows))

    def require(self, *columns: str) -> None:
        missing = [c for c in columns if c not in self.columns]
        if missing:
            raise SweepError(f"missing required columns: {missing}")

    def column(self, name: str) -> list:
        self.require(name)
        return [r[name] for r in self.rows]

    def groups(self, *keys: str) -> dict[tuple, list[dict]]:
        self.require(*keys)
        out: dict[tuple, list[dict]] = {}
        for r in self.rows:
            out.setdefault(tuple(r[k] for k in keys), []).append(r)
        return out
