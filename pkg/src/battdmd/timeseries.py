"""Uniformly sampled voltage/current records: validation, CSV I/O, chronological splits."""

from __future__ import annotations

import csv
import math
from dataclasses import InitVar, dataclass, field

import numpy as np

CSV_HEADER = ("time_s", "current_a", "voltage_v")
CSV_SIG_DIGITS = 9
DT_REL_TOL = 1e-9  # allowed |t[k+1]-t[k]-dt| as a fraction of dt
DEFAULT_V_WINDOW = (0.0, 10.0)  # plausibility bounds for measured voltage, V


class DataFormatError(ValueError):
    """Malformed or physically implausible record data."""


@dataclass(frozen=True)
class TimeSeries:
    """Time-aligned (t, i, v) record with a uniform sample step.

    Current is signed discharge-positive: a 10 A discharge pulse is i = +10.
    Arrays are copied and locked read-only; instances are safe to share.

    Rows in error messages are 1-based data rows (header excluded), matching
    the CSV layout written by :func:`save_csv`.
    """

    t: np.ndarray
    i: np.ndarray
    v: np.ndarray
    meta: dict = field(default_factory=dict)
    v_window: InitVar[tuple[float, float] | None] = DEFAULT_V_WINDOW

    def __post_init__(self, v_window):
        for name in ("t", "i", "v"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise DataFormatError(f"{name} must be one-dimensional")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if not (self.t.size == self.i.size == self.v.size):
            raise DataFormatError(
                f"column lengths differ: t={self.t.size}, i={self.i.size}, v={self.v.size}"
            )
        for name in ("t", "i", "v"):
            arr = getattr(self, name)
            bad = np.nonzero(~np.isfinite(arr))[0]
            if bad.size:
                raise DataFormatError(f"non-finite {name} value at row {bad[0] + 1}")
        if self.t.size >= 2:
            steps = np.diff(self.t)
            dt = steps[0]
            if dt <= 0:
                raise DataFormatError("non-monotone time at row 2")
            nonpos = np.nonzero(steps <= 0)[0]
            if nonpos.size:
                raise DataFormatError(f"non-monotone time at row {nonpos[0] + 2}")
            off = np.nonzero(np.abs(steps - dt) > DT_REL_TOL * dt)[0]
            if off.size:
                raise DataFormatError(f"non-uniform sampling at row {off[0] + 2}")
        if v_window is not None:
            lo, hi = v_window
            bad = np.nonzero((self.v < lo) | (self.v > hi))[0]
            if bad.size:
                raise DataFormatError(
                    f"voltage {self.v[bad[0]]:g} V at row {bad[0] + 1} outside "
                    f"plausibility window [{lo:g}, {hi:g}] V"
                )

    def __len__(self) -> int:
        return self.t.size

    @property
    def dt(self) -> float:
        """Sample step in seconds (nan for records shorter than 2 samples)."""
        if self.t.size < 2:
            return math.nan
        return float(self.t[1] - self.t[0])


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/evaluation split by leading fraction."""

    train_fraction: float = 0.6

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")


def _slice(series: TimeSeries, start: int, stop: int) -> TimeSeries:
    # Parts inherit validity from the parent; the evaluation part may be
    # shorter than 2 samples (or empty when train_fraction is 1.0).
    return TimeSeries(
        series.t[start:stop],
        series.i[start:stop],
        series.v[start:stop],
        meta=dict(series.meta),
        v_window=None,
    )


def split(series: TimeSeries, spec: SplitSpec) -> tuple[TimeSeries, TimeSeries]:
    """Split into (train, evaluation) parts; both keep absolute timestamps.

    The train part holds floor(train_fraction * L) samples; concatenating the
    parts reproduces the input bit-exactly.
    """
    n = len(series)
    # epsilon guards against 0.29 * 100 = 28.999... style float droop
    n_train = int(math.floor(spec.train_fraction * n + 1e-9))
    if n_train < 2:
        raise ValueError(
            f"split leaves train part with {n_train} samples (need at least 2); "
            f"L={n}, train_fraction={spec.train_fraction}"
        )
    return _slice(series, 0, n_train), _slice(series, n_train, n)


def csv_text(series: TimeSeries) -> str:
    """Render `time_s,current_a,voltage_v` rows, 9 significant digits, LF endings."""
    if len(series) < 2:
        raise ValueError(f"refusing to write a record with {len(series)} samples (need at least 2)")
    lines = [",".join(CSV_HEADER)]
    for tk, ik, vk in zip(series.t, series.i, series.v):
        lines.append(f"{tk:.{CSV_SIG_DIGITS}g},{ik:.{CSV_SIG_DIGITS}g},{vk:.{CSV_SIG_DIGITS}g}")
    return "\n".join(lines) + "\n"


def save_csv(series: TimeSeries, path) -> None:
    """Write the record as CSV (see :func:`csv_text` for the format)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(csv_text(series))


def load_csv(path, schema: dict[str, str] | None = None) -> TimeSeries:
    """Read a record written by :func:`save_csv` (or any CSV with the mapped columns).

    schema maps canonical names (time_s, current_a, voltage_v) to the file's
    column names; by default the canonical names are looked up directly.
    The sample step dt is inferred from the first two rows and enforced
    against all subsequent rows.
    """
    schema = schema or {}
    wanted = {name: schema.get(name, name) for name in CSV_HEADER}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        cols = {}
        for name, label in wanted.items():
            if label not in header:
                raise DataFormatError(f"{path}: missing column '{label}'")
            cols[name] = header.index(label)
        data: dict[str, list[float]] = {name: [] for name in CSV_HEADER}
        for row_no, row in enumerate(reader, start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore trailing blank line
            for name, idx in cols.items():
                if idx >= len(row):
                    raise DataFormatError(f"{path}: short row {row_no}")
                cell = row[idx].strip()
                try:
                    data[name].append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: unparseable numeric cell '{cell}' at row {row_no}, "
                        f"column '{wanted[name]}'"
                    ) from None
    if len(data["time_s"]) < 2:
        raise DataFormatError(f"{path}: need at least 2 data rows, got {len(data['time_s'])}")
    try:
        return TimeSeries(
            np.array(data["time_s"]),
            np.array(data["current_a"]),
            np.array(data["voltage_v"]),
            meta={"source": str(path)},
        )
    except DataFormatError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
