"""CSV reading and writing with the project's output conventions.

All files are UTF-8, comma separated, with a mandatory header row and LF line
endings. Reals are written with 17 significant digits so that every float
round-trips exactly.
"""

import csv
import io
import math
import numbers
from pathlib import Path

import numpy as np

from .errors import FormatError

SPECTRUM_HEADER = ("mu", "energy", "re_c", "im_c")
PERTURBED_HEADER = (
    "mu", "energy_exact", "energy_approx", "re_c", "im_c", "re_c_approx", "im_c_approx",
)
SERIES_HEADER = ("time", "overlap_re", "overlap_im", "deviation")
HORIZON_HEADER = ("dim", "dE", "threshold", "tp_theory", "tp_empirical", "amp_theory", "amp_empirical")
CONVERGENCE_HEADER = ("D", "level", "error")
STUDY_SUMMARY_HEADER = ("model", "lambda", "alpha_hat", "r2")
COST_SCAN_HEADER = ("T", "dE", "n_bits", "D", "adds", "muls", "divs", "model_cost")
FIT_SUMMARY_HEADER = ("system", "model_kind", "exponent", "r2", "classification")
DIVERGENCE_HEADER = ("step", "separation")
CLASSICAL_COST_HEADER = COST_SCAN_HEADER + ("cost_notion",)


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".16e")
    return str(value)


def dumps(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise FormatError(f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps(header, rows))
    return path


def read_csv(path, required=()):
    """Read a CSV into a dict of column name -> list of strings.

    Raises FormatError naming the first missing column, or when the file has
    no header or no data rows.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise FormatError(f"{path}: empty file") from None
            rows = [r for r in reader if r]
    except FileNotFoundError:
        raise FormatError(f"{path}: file not found") from None
    for col in required:
        if col not in header:
            raise FormatError(f"{path}: missing column {col!r}", column=col)
    if not rows:
        raise FormatError(f"{path}: no data rows")
    columns = {name: [] for name in header}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        for name, cell in zip(header, row):
            columns[name].append(cell)
    return columns


def float_column(columns, name):
    try:
        return np.array([float(v) for v in columns[name]])
    except KeyError:
        raise FormatError(f"missing column {name!r}", column=name) from None
    except ValueError as exc:
        raise FormatError(f"column {name!r}: {exc}", column=name) from None
