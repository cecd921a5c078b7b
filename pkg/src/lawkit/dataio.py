"""Dataset ingestion: CSV loading, unit files, normalization.

CSV files hold raw measurements (SI or instrument units) with a mandatory
header row.  A unit file can attach a dimension to each column, declare
whether fitted constants may carry units, and give per-column divisors;
the loaded dataset holds normalized values along with the divisors so the
mapping back to raw space stays exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .dims import DEFAULT_BASIS, parse_unit_spec, vector_from_spec

__all__ = ["DataError", "Dataset", "load_dataset", "add_extra_point"]


class DataError(ValueError):
    """Malformed dataset or unit file."""


@dataclass(frozen=True, eq=False)
class Dataset:
    variables: tuple
    target: str
    X: np.ndarray          # (m, n), normalized
    y: np.ndarray          # (m,), normalized
    x_divisors: np.ndarray  # (n,)
    y_divisor: float
    var_units: tuple = None      # unit vector per variable, or None
    target_unit: tuple = None
    constants_have_units: bool = False
    basis: tuple = DEFAULT_BASIS

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def raw_X(self) -> np.ndarray:
        return self.X * self.x_divisors

    def raw_y(self) -> np.ndarray:
        return self.y * self.y_divisor

    def bounding_box(self):
        """Smallest per-variable interval containing the data (normalized)."""
        return tuple(
            (float(self.X[:, j].min()), float(self.X[:, j].max()))
            for j in range(self.n)
        )


def _parse_units_file(path, names):
    """Returns (units per column or None, constants_have_units, divisors,
    basis).  Column units stay None when the file assigns none."""
    specs = {}
    divisors = {}
    constants_have_units = False
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    for ln in lines:
        if not ln or ln.startswith("#"):
            continue
        if ln.startswith("normalize "):
            parts = ln[len("normalize "):].split("/")
            if len(parts) != 2:
                raise DataError(f"bad normalize line: {ln!r}")
            name = parts[0].strip()
            try:
                div = float(parts[1])
            except ValueError:
                raise DataError(f"bad divisor in line: {ln!r}")
            if div <= 0:
                raise DataError(f"normalization divisor must be positive: {ln!r}")
            divisors[name] = div
            continue
        if ":" not in ln:
            raise DataError(f"unparseable unit line: {ln!r}")
        key, _, value = ln.partition(":")
        key, value = key.strip(), value.strip()
        if key == "constants_have_units":
            if value.lower() not in ("true", "false"):
                raise DataError(f"constants_have_units must be true or false: {ln!r}")
            constants_have_units = value.lower() == "true"
            continue
        specs[key] = parse_unit_spec(value)

    for name in list(specs) + list(divisors):
        if name not in names and name != "target":
            raise DataError(f"unit file mentions unknown column {name!r}")

    basis = list(DEFAULT_BASIS)
    for spec in specs.values():
        for dim in spec:
            if dim not in basis:
                basis.append(dim)
    basis = tuple(basis)

    units = None
    if specs:
        missing = [n for n in names[:-1] if n not in specs]
        if "target" not in specs and names[-1] not in specs:
            missing.append("target")
        if missing:
            raise DataError(f"unit file lacks entries for {missing}")
        units = [vector_from_spec(specs[n], basis) for n in names[:-1]]
        tspec = specs.get("target", specs.get(names[-1]))
        units.append(vector_from_spec(tspec, basis))
    return units, constants_have_units, divisors, basis


def load_dataset(path, units_path=None) -> Dataset:
    """Load a CSV with a header row, applying any unit-file normalization."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = [row for row in reader if row and any(c.strip() for c in row)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    if len(header) < 2:
        raise DataError(f"{path}: need at least one variable and a target column")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    data = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        try:
            data.append([float(c) for c in row])
        except ValueError as exc:
            raise DataError(f"{path}: row {i}: {exc}")
    arr = np.array(data, dtype=float)

    units = None
    constants_have_units = False
    divisors = {}
    basis = DEFAULT_BASIS
    if units_path is not None:
        units, constants_have_units, divisors, basis = _parse_units_file(
            units_path, header)

    div = np.array([divisors.get(name, 1.0) for name in header])
    arr = arr / div
    return Dataset(
        variables=tuple(header[:-1]),
        target=header[-1],
        X=arr[:, :-1],
        y=arr[:, -1],
        x_divisors=div[:-1],
        y_divisor=float(div[-1]),
        var_units=tuple(units[:-1]) if units else None,
        target_unit=units[-1] if units else None,
        constants_have_units=constants_have_units,
        basis=basis,
    )


def add_extra_point(data: Dataset, value: float) -> Dataset:
    """Append one point with every coordinate and the target set to value.

    Mirrors the small-pressure anchor used for isotherm fits.
    """
    if value <= 0:
        raise ValueError("extra point value must be positive")
    X = np.vstack([data.X, np.full((1, data.n), float(value))])
    y = np.append(data.y, float(value))
    return replace(data, X=X, y=y)
