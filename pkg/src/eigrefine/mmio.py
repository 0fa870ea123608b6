"""Matrix Market reading and writing.

Two layouts are supported: ``matrix coordinate real symmetric`` (sparse
matrices; only one triangle is stored) and ``matrix array real general``
(dense matrices and vector blocks, column-major).  ``coordinate real
general`` files are accepted when their entries are symmetric.  Values are
written with 17 significant digits so a write/read round trip is bit-exact.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .linalg import DenseSym, SparseSym


class MatrixMarketError(ValueError):
    pass


def _parse_header(line):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0].lower() != "%%matrixmarket":
        raise MatrixMarketError(f"malformed Matrix Market header: {line.strip()!r}")
    obj, fmt, field, symm = (p.lower() for p in parts[1:])
    if obj != "matrix":
        raise MatrixMarketError(f"unsupported object {obj!r}")
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(f"unsupported format {fmt!r}")
    if field not in ("real", "double", "integer"):
        raise MatrixMarketError(f"field {field!r} is not real")
    if symm not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry {symm!r}")
    return fmt, symm


def _data_lines(fh):
    for raw in fh:
        line = raw.strip()
        if line and not line.startswith("%"):
            yield line


def mm_read(path):
    """Read a Matrix Market file.

    Coordinate files give a :class:`SparseSym` (the stored triangle is
    mirrored); array files give a float64 ``ndarray`` block.
    """
    with open(path) as fh:
        fmt, symm = _parse_header(fh.readline())
        lines = _data_lines(fh)
        try:
            size = [int(t) for t in next(lines).split()]
        except (StopIteration, ValueError):
            raise MatrixMarketError("missing or malformed size line") from None
        if fmt == "coordinate":
            return _read_coordinate(lines, size, symm)
        return _read_array(lines, size, symm)


def _read_coordinate(lines, size, symm):
    if len(size) != 3:
        raise MatrixMarketError("coordinate size line needs 'rows cols nnz'")
    nrows, ncols, nnz = size
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is {nrows}x{ncols}, expected square")
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    count = 0
    for line in lines:
        if count == nnz:
            raise MatrixMarketError("more entries than declared")
        tok = line.split()
        if len(tok) != 3:
            raise MatrixMarketError(f"malformed entry line {line!r}")
        i, j = int(tok[0]), int(tok[1])
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range for n={nrows}")
        rows[count], cols[count], vals[count] = i - 1, j - 1, float(tok[2])
        count += 1
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}")
    if not np.all(np.isfinite(vals)):
        raise MatrixMarketError("non-finite value")

    if symm == "symmetric":
        seen = {}
        for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
            key = (min(i, j), max(i, j))
            if key in seen and seen[key] != v:
                raise MatrixMarketError(
                    f"entries ({i + 1}, {j + 1}) and ({j + 1}, {i + 1}) disagree "
                    "in a file declared symmetric"
                )
            seen[key] = v
        lo = np.array([k[0] for k in seen], dtype=np.int64)
        hi = np.array([k[1] for k in seen], dtype=np.int64)
        v = np.array(list(seen.values()), dtype=np.float64)
        off = lo != hi
        r = np.concatenate([hi, lo[off]])
        c = np.concatenate([lo, hi[off]])
        d = np.concatenate([v, v[off]])
        m = sp.coo_matrix((d, (r, c)), shape=(nrows, ncols)).tocsr()
        return SparseSym(m, check=False)

    m = sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)).tocsr()
    try:
        return SparseSym(m)
    except ValueError:
        raise MatrixMarketError("coordinate file is not symmetric") from None


def _read_array(lines, size, symm):
    if len(size) != 2:
        raise MatrixMarketError("array size line needs 'rows cols'")
    if symm != "general":
        raise MatrixMarketError("only 'array real general' is supported")
    nrows, ncols = size
    try:
        vals = [float(line) for line in lines]
    except ValueError as exc:
        raise MatrixMarketError(f"malformed array value: {exc}") from None
    if len(vals) != nrows * ncols:
        raise MatrixMarketError(f"expected {nrows * ncols} values, found {len(vals)}")
    return np.array(vals, dtype=np.float64).reshape((ncols, nrows)).T.copy()


def read_operator(path):
    """Read a symmetric matrix as :class:`SparseSym` or :class:`DenseSym`."""
    obj = mm_read(path)
    if isinstance(obj, SparseSym):
        return obj
    if obj.shape[0] != obj.shape[1]:
        raise MatrixMarketError(f"array file holds a {obj.shape} block, not a square matrix")
    if not np.array_equal(obj, obj.T):
        raise MatrixMarketError("array matrix is not symmetric")
    return DenseSym(obj)


def _fmt(x):
    return f"{x:.17g}"


def mm_write(path, obj, comment=None):
    """Write a matrix or block.

    :class:`SparseSym` goes out as ``coordinate real symmetric`` (lower
    triangle); :class:`DenseSym` and plain arrays as ``array real general``.
    """
    with open(path, "w") as fh:
        if isinstance(obj, SparseSym):
            low = sp.tril(obj.matrix).tocoo()
            order = np.lexsort((low.row, low.col))
            fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
            if comment:
                fh.write(f"% {comment}\n")
            fh.write(f"{obj.n} {obj.n} {low.nnz}\n")
            for t in order:
                fh.write(f"{low.row[t] + 1} {low.col[t] + 1} {_fmt(low.data[t])}\n")
            return
        arr = obj.entries if isinstance(obj, DenseSym) else np.asarray(obj, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        fh.write("%%MatrixMarket matrix array real general\n")
        if comment:
            fh.write(f"% {comment}\n")
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        fh.write("\n".join(_fmt(x) for x in arr.T.ravel()))
        fh.write("\n")


def sample_path(name="sample_sym.mtx"):
    """Filesystem path of a matrix bundled with the package."""
    from importlib.resources import files

    return str(files("eigrefine") / "data" / name)
