"""Small column-table container for CSV-ready numeric results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class SpectrumTable:
    """Rectangular numeric table with a fixed column order.

    ``data`` has one row per grid point and one column per name in
    ``columns``.  ``provenance`` records how the values were produced
    (e.g. "analytic-matrix, analytic-closed-form" or "simulated").
    """

    columns: tuple[str, ...]
    data: np.ndarray
    provenance: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError(
                f"data shape {self.data.shape} does not match columns {self.columns}"
            )

    @property
    def n_rows(self) -> int:
        return self.data.shape[0]

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]

    def csv_lines(self) -> list[str]:
        """Header plus one line per row; floats via repr for exact round-trip."""
        lines = [",".join(self.columns)]
        for row in self.data:
            lines.append(",".join(repr(float(v)) for v in row))
        return lines

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(self.csv_lines()) + "\n")
