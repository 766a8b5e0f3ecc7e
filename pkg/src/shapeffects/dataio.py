"""CSV loading and saving for observed-data samples.

The loader needs a header row; the schema names the optional output column
and any categorical columns. Continuous cells must parse as decimals; rows
with unparseable cells are skipped and reported with their 1-based line
numbers. Categorical labels are interned in sorted order, so the code
assignment is independent of row order.
"""

from __future__ import annotations

import csv

import numpy as np

from .errors import DataError, EmptyDataError, MissingColumnError, RaggedRowError
from .givendata import ColumnKind, DataSample


def load_csv(path, output_col=None, categorical=(), standardize: bool = True) -> DataSample:
    """Read a CSV into a DataSample.

    The returned sample carries `rejected_rows`, a tuple of (line_number,
    reason) for rows that were skipped because a cell failed to parse.
    """
    categorical = tuple(categorical)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: file is empty") from None
        header = [name.strip() for name in header]
        for name in ((output_col,) if output_col else ()) + categorical:
            if name not in header:
                raise MissingColumnError(f"{path}: column {name!r} not found in header {header}")
        raw_rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # blank line
            if len(row) != len(header):
                raise RaggedRowError(
                    f"{path}:{line_no}: expected {len(header)} fields, found {len(row)}"
                )
            raw_rows.append((line_no, [cell.strip() for cell in row]))
    if not raw_rows:
        raise EmptyDataError(f"{path}: no data rows")

    out_pos = header.index(output_col) if output_col else None
    x_names = [name for i, name in enumerate(header) if i != out_pos]
    x_pos = [i for i in range(len(header)) if i != out_pos]
    kinds = tuple(
        ColumnKind.CATEGORICAL if name in categorical else ColumnKind.CONTINUOUS
        for name in x_names
    )

    # intern categorical labels in sorted order so codes don't depend on row order
    label_maps: dict = {}
    for j, name in enumerate(x_names):
        if kinds[j] is ColumnKind.CATEGORICAL:
            labels = sorted({row[x_pos[j]] for _, row in raw_rows})
            label_maps[j] = {label: code for code, label in enumerate(labels)}

    data_rows, outputs, rejected = [], [], []
    for line_no, row in raw_rows:
        parsed = np.empty(len(x_names))
        try:
            for j in range(len(x_names)):
                cell = row[x_pos[j]]
                if kinds[j] is ColumnKind.CATEGORICAL:
                    parsed[j] = label_maps[j][cell]
                else:
                    parsed[j] = float(cell)
            y = float(row[out_pos]) if out_pos is not None else None
        except ValueError as exc:
            rejected.append((line_no, str(exc)))
            continue
        data_rows.append(parsed)
        if y is not None:
            outputs.append(y)
    if not data_rows:
        raise EmptyDataError(
            f"{path}: all {len(rejected)} data rows were rejected "
            f"(first: line {rejected[0][0]}: {rejected[0][1]})"
        )

    sample = DataSample(
        np.array(data_rows),
        kinds=kinds,
        outputs=np.array(outputs) if output_col else None,
        names=x_names,
        categories={j: tuple(sorted(label_maps[j])) for j in label_maps},
        standardize=standardize,
    )
    sample.rejected_rows = tuple(rejected)
    sample.output_name = output_col
    return sample


def save_csv(sample: DataSample, path, output_col=None) -> None:
    """Write a DataSample back to CSV; round-trips through load_csv exactly."""
    output_name = output_col or getattr(sample, "output_name", None) or "y"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(sample.names)
        if sample.outputs is not None:
            header.append(output_name)
        writer.writerow(header)
        for i in range(sample.n):
            row = []
            for j in range(sample.p):
                value = sample.data[i, j]
                if sample.kinds[j] is ColumnKind.CATEGORICAL:
                    row.append(sample.categories[j][int(value)])
                else:
                    row.append(repr(float(value)))
            if sample.outputs is not None:
                row.append(repr(float(sample.outputs[i])))
            writer.writerow(row)


def sample_to_arrays(sample: DataSample):
    """Convenience view: (data, kinds, outputs) as plain arrays/tuples."""
    return sample.data, sample.kinds, sample.outputs
