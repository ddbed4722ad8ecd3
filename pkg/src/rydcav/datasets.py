"""Plain-text dataset I/O.

Files are comma-separated with a single header row. Two schemas are
understood, distinguished by the first column name:

    duration_s,population,sigma      -> RabiTrace
    frequency_hz,population,sigma    -> Spectrum

The sigma column may be omitted; readers then assume uniform unit
uncertainties and emit a warning. Frequencies are ordinary frequencies in Hz
on disk and angular frequencies (rad/s) in memory. Values are written with
shortest round-trip float formatting, so write -> read is an identity.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import DataFormatError
from .experiment import RabiTrace, Spectrum

__all__ = ["read_dataset", "write_dataset", "RABI_COLUMNS", "RAMSEY_COLUMNS"]

RABI_COLUMNS = ("duration_s", "population", "sigma")
RAMSEY_COLUMNS = ("frequency_hz", "population", "sigma")

_TWO_PI = 2.0 * np.pi


def _parse_rows(lines, n_cols, path):
    rows = []
    for lineno, raw in lines:
        parts = [p.strip() for p in raw.split(",")]
        if len(parts) != n_cols:
            raise DataFormatError(
                f"{path}: line {lineno}: expected {n_cols} columns, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float), [ln for ln, _ in lines]


def read_dataset(path):
    """Read a dataset file; returns a RabiTrace or a Spectrum by schema.

    Raises DataFormatError (with the line number) for malformed rows,
    out-of-range populations, non-positive sigmas, or a non-monotone
    abscissa.
    """
    with open(path, "r", encoding="utf-8") as fh:
        numbered = [
            (i, line.strip())
            for i, line in enumerate(fh, start=1)
            if line.strip() and not line.strip().startswith("#")
        ]
    if not numbered:
        raise DataFormatError(f"{path}: empty file")
    header = tuple(h.strip() for h in numbered[0][1].split(","))
    kinds = {RABI_COLUMNS[0]: RABI_COLUMNS, RAMSEY_COLUMNS[0]: RAMSEY_COLUMNS}
    if header and header[0] in kinds:
        expected = kinds[header[0]]
    else:
        raise DataFormatError(
            f"{path}: line {numbered[0][0]}: unknown schema; first column must be "
            f"'{RABI_COLUMNS[0]}' or '{RAMSEY_COLUMNS[0]}'"
        )
    if header not in (expected, expected[:2]):
        raise DataFormatError(
            f"{path}: line {numbered[0][0]}: header must be "
            f"{','.join(expected)} (sigma optional), got {','.join(header)}"
        )
    values, linenos = _parse_rows(numbered[1:], len(header), path)

    x = values[:, 0]
    pop = values[:, 1]
    if np.any(np.diff(x) <= 0):
        bad = int(np.argmax(np.diff(x) <= 0)) + 1
        raise DataFormatError(
            f"{path}: line {linenos[bad]}: non-monotone {header[0]} column"
        )
    for i, p in enumerate(pop):
        if not 0.0 <= p <= 1.0:
            raise DataFormatError(
                f"{path}: line {linenos[i]}: population {p} outside [0, 1]"
            )
    if len(header) == 3:
        sigma = values[:, 2]
        for i, s in enumerate(sigma):
            if not np.isfinite(s) or s <= 0:
                raise DataFormatError(
                    f"{path}: line {linenos[i]}: sigma {s} must be > 0"
                )
    else:
        warnings.warn(
            f"{path}: no sigma column; assuming uniform unit uncertainties",
            stacklevel=2,
        )
        sigma = np.ones(x.size)

    if expected is RABI_COLUMNS:
        return RabiTrace(durations=x, population=pop, sigma=sigma)
    return Spectrum(omega_grid=_TWO_PI * x, population=pop, sigma=sigma)


def _format_row(values):
    return ",".join(repr(float(v)) for v in values)


def write_dataset(obj, path, extra_columns=None):
    """Write a RabiTrace or Spectrum; inverse of `read_dataset`.

    The sigma column is written only when the object carries sigmas.
    `extra_columns` is an optional mapping of name -> array appended after
    the schema columns (used for model overlays).
    """
    if isinstance(obj, RabiTrace):
        names, x = list(RABI_COLUMNS[:2]), obj.durations
    elif isinstance(obj, Spectrum):
        names, x = list(RAMSEY_COLUMNS[:2]), obj.omega_grid / _TWO_PI
    else:
        raise TypeError(f"cannot write object of type {type(obj).__name__}")
    columns = [x, obj.population]
    if obj.sigma is not None:
        names.append("sigma")
        columns.append(obj.sigma)
    for name, col in (extra_columns or {}).items():
        names.append(name)
        columns.append(np.asarray(col, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in zip(*columns):
            fh.write(_format_row(row) + "\n")
