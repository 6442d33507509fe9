"""CSV ingestion and matrix/edge-list files."""
import csv
from pathlib import Path

import numpy as np

from .irrep import SupportSet
from .simulation import Dataset

STANDARDIZATION = "column mean 0, sample standard deviation (divisor n - 1) equal to 1"


class InputError(ValueError):
    """Malformed input file; the message names the offending row or column."""


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise InputError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    if not rows:
        raise InputError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_header(path):
    """Column names from the header row."""
    return [h.strip() for h in _read_rows(path)[0]]


def ingest_csv(path, standardize=False):
    """Read a numeric CSV with one header row into a :class:`Dataset`.

    With ``standardize`` each column is centered and divided by its sample
    standard deviation (divisor ``n - 1``). Without it the parsed values are
    passed through unchanged.
    """
    header, body = _read_rows(path)
    names = [h.strip() for h in header]
    if not body:
        raise InputError(f"{path}: no data rows")
    width = len(names)
    data = np.empty((len(body), width))
    for r, row in enumerate(body):
        line = r + 2
        if len(row) != width:
            raise InputError(f"{path}: row {line} has {len(row)} fields, header has {width}")
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise InputError(f"{path}: row {line}, column {names[c]!r}: non-numeric value {cell!r}") from None
            if not np.isfinite(data[r, c]):
                raise InputError(f"{path}: row {line}, column {names[c]!r}: non-finite value {cell!r}")
    if standardize:
        if data.shape[0] < 2:
            raise InputError(f"{path}: standardization needs at least two data rows")
        sd = data.std(axis=0, ddof=1)
        for c in np.flatnonzero(sd == 0):
            raise InputError(f"{path}: column {names[c]!r} is constant and cannot be standardized")
        data = (data - data.mean(axis=0)) / sd
    return Dataset(data, names)


def read_matrix(path, square=True):
    """``(matrix, names)`` from a CSV whose header names the columns."""
    ds = ingest_csv(path)
    if square and ds.n != ds.p:
        raise InputError(f"{path}: expected a square matrix, got {ds.n} x {ds.p}")
    return ds.rows, ds.names


def write_matrix(path, m, names):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in np.asarray(m):
            w.writerow([repr(float(x)) for x in row])


def read_edge_list(path, names):
    """Support from lines ``SRC -> DST`` (an optional tab-separated weight is ignored)."""
    index = {n: k for k, n in enumerate(names)}
    edges = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("\t")[0].strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise InputError(f"{path}: line {line_no} is not of the form 'SRC -> DST'")
        src, dst = (part.strip() for part in line.split("->", 1))
        for node in (src, dst):
            if node not in index:
                raise InputError(f"{path}: line {line_no} names unknown variable {node!r}")
        edges.append((index[src], index[dst]))
    return SupportSet.from_edges(len(names), edges)


def read_support(path, names):
    """Support from an edge list or from the nonzero pattern of a matrix CSV."""
    text = Path(path).read_text(encoding="utf-8") if Path(path).is_file() else ""
    if "->" in text:
        return read_edge_list(path, names)
    m, _ = read_matrix(path)
    if m.shape[0] != len(names):
        raise InputError(f"{path}: matrix is {m.shape[0]} x {m.shape[0]}, data have {len(names)} variables")
    return SupportSet.from_mask(m != 0)


def write_edge_list(path, support, names, weights=None):
    """Lines ``NAME_i -> NAME_j<TAB>weight``; the weight is ``M[j, i]`` when given."""
    with open(path, "w", encoding="utf-8") as fh:
        for src, dst in support.edges:
            w = "" if weights is None else repr(float(weights[dst, src]))
            fh.write(f"{names[src]} -> {names[dst]}\t{w}\n")
