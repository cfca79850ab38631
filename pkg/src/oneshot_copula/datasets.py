"""Embedded Serial Sacrifice data and CSV ingestion.

CSV layout, one row per test condition, header required::

    inspection_time,stress,n0,n1,n2,n12
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

from .data import OneShotDataset, validate_dataset

CSV_HEADER = ("inspection_time", "stress", "n0", "n1", "n2", "n12")


class DataFormatError(ValueError):
    """Malformed data file. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class NamedDataset:
    name: str
    dataset: OneShotDataset
    stress_labels: dict[float, str] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()


# Mice sacrificed at 100..700 days. Columns: healthy, disease (I) only,
# disease (II) only, both. Category (I) is failure mode 1.
_CONTROL = [
    (100, 58, 13, 0, 1),
    (200, 40, 23, 1, 1),
    (300, 18, 41, 1, 3),
    (400, 8, 25, 1, 6),
    (500, 1, 21, 1, 16),
    (600, 1, 11, 0, 21),
    (700, 0, 9, 1, 39),
]
_IRRADIATED = [
    (100, 54, 12, 1, 0),
    (200, 36, 24, 3, 5),
    (300, 13, 35, 1, 17),
    (400, 0, 13, 2, 28),
    (500, 0, 3, 1, 35),
    (600, 0, 0, 1, 30),
    (700, 0, 0, 1, 28),
]


def serial_sacrifice() -> NamedDataset:
    """Radiation serial-sacrifice mice: control at stress 0, irradiated at stress 1."""
    rows = [(t, 0.0, *n) for t, *n in _CONTROL] + [(t, 1.0, *n) for t, *n in _IRRADIATED]
    return NamedDataset(
        name="serial-sacrifice",
        dataset=OneShotDataset.from_rows(rows),
        stress_labels={0.0: "control", 1.0: "irradiated"},
    )


BUILTIN_DATASETS = {"serial-sacrifice": serial_sacrifice}


def _parse_count(text: str, column: str, line: int) -> int:
    try:
        value = int(text.strip())
    except ValueError:
        raise DataFormatError(f"{column} must be an integer, got {text!r}", line) from None
    if value < 0:
        raise DataFormatError(f"{column} must be nonnegative, got {value}", line)
    return value


def _parse_real(text: str, column: str, line: int) -> float:
    try:
        # float() is locale independent and only accepts '.' decimals
        value = float(text.strip())
    except ValueError:
        raise DataFormatError(f"{column} must be a number, got {text!r}", line) from None
    if not math.isfinite(value):
        raise DataFormatError(f"{column} must be finite, got {text!r}", line)
    return value


def parse_csv(text: str, name: str = "dataset") -> NamedDataset:
    reader = csv.reader(io.StringIO(text))
    rows = []
    header_seen = False
    for record in reader:
        line = reader.line_num
        if not record or all(not f.strip() for f in record):
            continue
        if not header_seen:
            header = tuple(f.strip() for f in record)
            if header != CSV_HEADER:
                raise DataFormatError(f"expected header {','.join(CSV_HEADER)!r}, got {','.join(header)!r}", line)
            header_seen = True
            continue
        if len(record) != len(CSV_HEADER):
            raise DataFormatError(f"expected {len(CSV_HEADER)} fields, got {len(record)}", line)
        it = _parse_real(record[0], "inspection_time", line)
        if not it > 0:
            raise DataFormatError(f"inspection_time must be positive, got {it}", line)
        x = _parse_real(record[1], "stress", line)
        counts = [_parse_count(f, col, line) for f, col in zip(record[2:], CSV_HEADER[2:])]
        rows.append((it, x, *counts))
    if not header_seen:
        raise DataFormatError("file is empty")
    ds = OneShotDataset.from_rows(rows)
    problems = validate_dataset(ds)
    fatal = [p for p in problems if not p.startswith("slope unidentified")]
    if fatal:
        raise DataFormatError("; ".join(fatal))
    return NamedDataset(name=name, dataset=ds, warnings=tuple(problems))


def load_csv(path: str | os.PathLike) -> NamedDataset:
    """Read a dataset file. LF and CRLF line endings are both accepted.

    A dataset with a single stress level loads (with a warning); fitting a
    slope to it fails later.
    """
    with open(path, encoding="utf-8-sig", newline="") as fh:
        text = fh.read()
    stem = os.path.splitext(os.path.basename(os.fspath(path)))[0]
    return parse_csv(text, name=stem)


def _fmt_real(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else repr(float(value))


def to_csv(ds: OneShotDataset) -> str:
    """Canonical CSV text: LF endings, integral reals written without a decimal point."""
    out = [",".join(CSV_HEADER)]
    for it, x, n0, n1, n2, n12 in ds.rows():
        out.append(",".join((_fmt_real(it), _fmt_real(x), str(n0), str(n1), str(n2), str(n12))))
    return "\n".join(out) + "\n"


def write_csv(ds: OneShotDataset, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(ds))
