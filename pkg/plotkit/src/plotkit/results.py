"""Parser for simulation results files.

The file format is '#'-commented text: a header block (including a
"# measures:" label line), one data row per converged parameter
(parameter, then estimate/margin/errors/trials per measure, then a sample
count), and an optional fully-commented STATE section, which is skipped
like any other comment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ResultsTable", "load_results"]


@dataclass
class ResultsTable:
    """Per-parameter estimates and interval margins, sorted by parameter."""

    labels: list[str]
    parameters: np.ndarray  # (n,)
    estimates: np.ndarray  # (n, k)
    margins: np.ndarray  # (n, k)
    errors: np.ndarray  # (n, k) integer counts
    trials: np.ndarray  # (n, k) integer counts
    samples: np.ndarray  # (n,)

    def __len__(self) -> int:
        return self.parameters.size

    @property
    def measure_count(self) -> int:
        return len(self.labels)


def load_results(path: str) -> ResultsTable:
    """Read a results file; comment and STATE lines are skipped entirely."""
    labels: list[str] = []
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                if stripped.startswith("# measures:"):
                    labels = stripped.split(":", 1)[1].split()
                continue
            fields = stripped.split()
            if not labels:
                raise ValueError(f"{path}:{lineno}: data row before the measures header")
            k = len(labels)
            if len(fields) != 2 + 4 * k:
                raise ValueError(
                    f"{path}:{lineno}: expected {2 + 4 * k} fields for {k} measures, "
                    f"got {len(fields)}"
                )
            try:
                rows.append(
                    (
                        float(fields[0]),
                        [float(fields[1 + 4 * m]) for m in range(k)],
                        [float(fields[2 + 4 * m]) for m in range(k)],
                        [int(fields[3 + 4 * m]) for m in range(k)],
                        [int(fields[4 + 4 * m]) for m in range(k)],
                        int(fields[-1]),
                    )
                )
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in data row") from None
    k = len(labels)
    if not rows:
        return ResultsTable(labels, np.empty(0), np.empty((0, k)), np.empty((0, k)),
                            np.empty((0, k), dtype=np.int64),
                            np.empty((0, k), dtype=np.int64), np.empty(0, dtype=np.int64))
    rows.sort(key=lambda r: r[0])
    table = ResultsTable(
        labels=labels,
        parameters=np.array([r[0] for r in rows]),
        estimates=np.array([r[1] for r in rows]),
        margins=np.array([r[2] for r in rows]),
        errors=np.array([r[3] for r in rows], dtype=np.int64),
        trials=np.array([r[4] for r in rows], dtype=np.int64),
        samples=np.array([r[5] for r in rows], dtype=np.int64),
    )
    if np.any(table.margins < 0):
        raise ValueError(f"{path}: negative interval margin in data rows")
    return table
