"""Plain CSV reading and writing for curves, flow snapshots and run summaries.

Numbers are written with ``repr`` so files round-trip exactly and repeated
runs produce identical bytes.
"""

import csv
from pathlib import Path
from typing import Iterable, List, Sequence

import numpy as np

from .errors import InversiveError
from .flow import FlowState

CURVE_COLUMNS = ("u", "re", "im")
SNAPSHOT_COLUMNS = ("t", "i", "u", "Q", "rho")
SUMMARY_COLUMNS = ("t", "ell", "normQ2", "normQs2", "dissipation_residual")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def read_table(path, n_columns: int) -> np.ndarray:
    """Float table with ``n_columns`` columns; a non-numeric first line is a header."""
    path = Path(path)
    if not path.exists():
        raise InversiveError("FILE_NOT_FOUND", f"{path} does not exist")
    rows: List[List[float]] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue
                raise InversiveError("BAD_CSV", f"{path}:{lineno}: non-numeric field")
            if len(vals) != n_columns:
                raise InversiveError(
                    "BAD_CSV", f"{path}:{lineno}: expected {n_columns} columns, got {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise InversiveError("BAD_CSV", f"{path}: no data rows")
    return np.array(rows)


def write_curve(path, u, z) -> None:
    z = np.asarray(z)
    write_rows(path, CURVE_COLUMNS, zip(u, z.real, z.imag))


def read_curve(path):
    """(u, z) from a ``u,re,im`` file."""
    a = read_table(path, 3)
    return a[:, 0], a[:, 1] + 1j * a[:, 2]


def snapshot_rows(states: Iterable[FlowState]):
    for st in states:
        for i in range(st.N):
            yield (st.t, i, i / st.N, st.Q[i], st.rho[i])


def write_snapshots(path, states: Sequence[FlowState]) -> None:
    write_rows(path, SNAPSHOT_COLUMNS, snapshot_rows(states))


def read_snapshots(path) -> List[FlowState]:
    """Snapshots grouped by time, in file order."""
    a = read_table(path, 5)
    out = []
    for t in dict.fromkeys(a[:, 0]):
        block = a[a[:, 0] == t]
        block = block[np.argsort(block[:, 1])]
        out.append(FlowState(block[:, 3], block[:, 4], t=float(t)))
    return out


def write_summary(path, rows: Sequence[Sequence[float]]) -> None:
    write_rows(path, SUMMARY_COLUMNS, rows)


def read_profile(path):
    """(x, Q) from a two-column profile file such as ``s,Q``."""
    a = read_table(path, 2)
    return a[:, 0], a[:, 1]
