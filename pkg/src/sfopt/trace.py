"""Per-step run records and their CSV form.

CSV layout: a header row, then one row per recorded step.  Floats are
written with 17 significant digits so a parsed file reproduces the original
doubles bit for bit; ``nan``/``inf`` appear literally.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["RunTrace", "format_float", "write_csv", "read_csv"]


def format_float(v: float) -> str:
    """17 significant digits: enough to round-trip every finite double."""
    return format(float(v), ".17g")


def write_csv(path, header: list[str], rows):
    """Plain comma-separated output with CRLF line endings.

    Cells must already be strings; numeric formatting is the caller's
    decision, quoting is the writer's.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_csv(path):
    """Inverse of :func:`write_csv`: header list plus string rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            return [], []
        return header, list(reader)


@dataclass
class RunTrace:
    """What one optimizer run leaves behind.

    Always present: the 1-based step index, the schedule value and the loss
    observed at the pre-step iterate (NaN when the problem serves no values).
    ``err_inf`` is filled when the problem knows its minimizer.  The heavier
    fields are flag-gated: ``iterates`` holds every post-step iterate,
    ``update_mags`` the per-coordinate ``|delta x|`` of every step.
    """

    steps: np.ndarray
    eta: np.ndarray
    loss: np.ndarray
    err_inf: np.ndarray | None = None
    iterates: np.ndarray | None = None
    update_mags: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return int(self.steps.shape[0])

    @property
    def final_loss(self) -> float:
        return float(self.loss[-1]) if self.n_steps else float("nan")

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t": self.steps, "eta": self.eta, "loss": self.loss}
        if self.err_inf is not None:
            cols["err_inf"] = self.err_inf
        return cols

    def to_csv(self, path):
        cols = self.columns()
        names = list(cols)
        rows = []
        for i in range(self.n_steps):
            row = [str(int(cols["t"][i]))]
            row += [format_float(cols[name][i]) for name in names[1:]]
            rows.append(row)
        write_csv(path, names, rows)

    @classmethod
    def from_csv(cls, path) -> "RunTrace":
        header, rows = read_csv(path)
        expected = {"t", "eta", "loss", "err_inf"}
        if not header or header[0] != "t" or not set(header) <= expected:
            raise ValueError(f"not a run trace file: header {header!r}")
        data = {name: [] for name in header}
        for row in rows:
            for name, cell in zip(header, row):
                data[name].append(cell)
        return cls(
            steps=np.asarray(data["t"], dtype=np.int64),
            eta=np.asarray(data["eta"], dtype=np.float64),
            loss=np.asarray(data["loss"], dtype=np.float64),
            err_inf=(np.asarray(data["err_inf"], dtype=np.float64)
                     if "err_inf" in data else None),
        )
