"""Hot loops, each with a numba kernel and a pure-numpy twin.

The backend is picked from ``DFAUDIT_BACKEND`` (``numba`` or ``numpy``) at import
time, defaulting to numba when it is importable. ``set_backend`` switches at runtime.
Both backends return identical integer results.
"""

from __future__ import annotations

import logging
import os

import numpy as np

try:
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba installed
    numba = None
    HAVE_NUMBA = False

# status codes returned by parse_labels
PARSE_OK = 0
PARSE_BAD_TOKEN = 1
PARSE_TOO_FEW = 2
PARSE_TOO_MANY = 3

_COMMA = 44
_NEWLINE = 10
_CR = 13
_MINUS = 45
_ZERO = 48
_ONE = 49


def _njit(func):
    if not HAVE_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


# ---------------------------------------------------------------- numba kernels


@_njit
def _parse_labels_nb(buf, n_rows, colmap, out):
    # buf holds n_rows lines of comma-separated labels, each terminated by \n.
    n_cols = colmap.shape[0]
    pos = 0
    n = buf.shape[0]
    for r in range(n_rows):
        c = 0
        while True:
            start = pos
            while pos < n and buf[pos] != _COMMA and buf[pos] != _NEWLINE:
                pos += 1
            end = pos
            if end > start and buf[end - 1] == _CR and (pos >= n or buf[pos] == _NEWLINE):
                end -= 1
            width = end - start
            v = 2
            if width == 1:
                if buf[start] == _ZERO:
                    v = 0
                elif buf[start] == _ONE:
                    v = 1
            elif width == 2 and buf[start] == _MINUS and buf[start + 1] == _ONE:
                v = -1
            if c >= n_cols:
                return PARSE_TOO_MANY, r, c
            if v == 2:
                return PARSE_BAD_TOKEN, r, c
            out[r, colmap[c]] = v
            c += 1
            if pos >= n or buf[pos] == _NEWLINE:
                pos += 1
                break
            pos += 1
        if c < n_cols:
            return PARSE_TOO_FEW, r, c
    return PARSE_OK, -1, -1


@_njit
def _group_counts_nb(labels, codes):
    n, a = labels.shape
    out = np.zeros((a, 3, 4), dtype=np.int64)
    for i in range(n):
        c = codes[i]
        for j in range(a):
            out[j, labels[i, j] + 1, c] += 1
    return out


@_njit
def _subset_counts_nb(codes, idx):
    out = np.zeros(4, dtype=np.int64)
    for k in range(idx.shape[0]):
        out[codes[idx[k]]] += 1
    return out


@_njit
def _popcount(v):
    v = v - ((v >> np.uint64(1)) & np.uint64(0x5555555555555555))
    v = (v & np.uint64(0x3333333333333333)) + ((v >> np.uint64(2)) & np.uint64(0x3333333333333333))
    v = (v + (v >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
    return (v * np.uint64(0x0101010101010101)) >> np.uint64(56)


@_njit
def _cooccurrence_nb(labels):
    # per attribute, bitsets of +1 and -1 rows; pair sums come from popcounts
    n, a = labels.shape
    words = (n + 63) // 64
    pos = np.zeros((a, words), dtype=np.uint64)
    neg = np.zeros((a, words), dtype=np.uint64)
    for i in range(n):
        w = i >> 6
        bit = np.uint64(1) << np.uint64(i & 63)
        for j in range(a):
            v = labels[i, j]
            if v == 1:
                pos[j, w] |= bit
            elif v == -1:
                neg[j, w] |= bit
    xx = np.zeros((a, a), dtype=np.int64)
    xd = np.zeros((a, a), dtype=np.int64)
    dd = np.zeros((a, a), dtype=np.int64)
    for j in range(a):
        for k in range(j, a):
            pp = np.uint64(0)
            pn = np.uint64(0)
            np_ = np.uint64(0)
            nn = np.uint64(0)
            for w in range(words):
                pp += _popcount(pos[j, w] & pos[k, w])
                pn += _popcount(pos[j, w] & neg[k, w])
                np_ += _popcount(neg[j, w] & pos[k, w])
                nn += _popcount(neg[j, w] & neg[k, w])
            c_pp, c_pn, c_np, c_nn = np.int64(pp), np.int64(pn), np.int64(np_), np.int64(nn)
            xx[j, k] = xx[k, j] = c_pp + c_nn - c_pn - c_np
            dd[j, k] = dd[k, j] = c_pp + c_pn + c_np + c_nn
            xd[j, k] = c_pp + c_pn - c_np - c_nn
            xd[k, j] = c_pp + c_np - c_pn - c_nn
    return xx, xd, dd


# ---------------------------------------------------------------- numpy twins


def _parse_labels_np(buf, n_rows, colmap, out):
    text = buf.tobytes()
    lines = text.split(b"\n")
    n_cols = colmap.shape[0]
    for r in range(n_rows):
        line = lines[r]
        if line.endswith(b"\r"):
            line = line[:-1]
        toks = line.split(b",")
        arr = np.array(toks)
        vals = np.full(len(toks), 2, dtype=np.int8)
        vals[arr == b"1"] = 1
        vals[arr == b"0"] = 0
        vals[arr == b"-1"] = -1
        bad = np.flatnonzero(vals[:n_cols] == 2)
        if bad.size:
            return PARSE_BAD_TOKEN, r, int(bad[0])
        if len(toks) > n_cols:
            return PARSE_TOO_MANY, r, n_cols
        if len(toks) < n_cols:
            return PARSE_TOO_FEW, r, len(toks)
        out[r, colmap] = vals
    return PARSE_OK, -1, -1


def _parse_labels_np_fast(buf, n_rows, colmap, out):
    # Vectorized over the byte buffer; the line-wise scan only locates errors.
    n_cols = colmap.shape[0]
    b = buf
    cr = np.flatnonzero(b == _CR)
    if cr.size:
        if cr[-1] + 1 >= b.size or not (b[cr + 1] == _NEWLINE).all():
            return _parse_labels_np(buf, n_rows, colmap, out)
        b = np.delete(b, cr)
    sep = np.flatnonzero((b == _COMMA) | (b == _NEWLINE))
    if n_cols and sep.size == n_rows * n_cols and b[-1] == _NEWLINE:
        ends = sep.reshape(n_rows, n_cols)
        if (b[ends[:, -1]] == _NEWLINE).all() and not (b[ends[:, :-1]] == _NEWLINE).any():
            starts = np.empty_like(sep)
            starts[0] = 0
            starts[1:] = sep[:-1] + 1
            length = sep - starts
            first = b[starts]
            digit = (length == 1) & ((first == _ZERO) | (first == _ONE))
            minus = (length == 2) & (first == _MINUS) & (b[sep - 1] == _ONE)
            if (digit | minus).all():
                vals = np.where(minus, -1, first.astype(np.int8) - _ZERO).astype(np.int8)
                out[:, colmap] = vals.reshape(n_rows, n_cols)
                return PARSE_OK, -1, -1
    return _parse_labels_np(buf, n_rows, colmap, out)


def _group_counts_np(labels, codes):
    a = labels.shape[1]
    out = np.zeros((a, 3, 4), dtype=np.int64)
    codes = codes.astype(np.intp)
    for j in range(a):
        key = (labels[:, j].astype(np.intp) + 1) * 4 + codes
        out[j] = np.bincount(key, minlength=12).reshape(3, 4)
    return out


def _subset_counts_np(codes, idx):
    return np.bincount(codes[idx], minlength=4).astype(np.int64)


def _cooccurrence_np(labels, chunk=1 << 16):
    a = labels.shape[1]
    xx = np.zeros((a, a), dtype=np.int64)
    xd = np.zeros((a, a), dtype=np.int64)
    dd = np.zeros((a, a), dtype=np.int64)
    for s in range(0, labels.shape[0], chunk):
        x = labels[s : s + chunk].astype(np.float64)
        d = (x != 0).astype(np.float64)
        # float64 sums of at most 2**16 unit terms are exact
        xx += (x.T @ x).astype(np.int64)
        xd += (x.T @ d).astype(np.int64)
        dd += (d.T @ d).astype(np.int64)
    return xx, xd, dd


_IMPLS = {
    "numpy": {
        "parse_labels": _parse_labels_np_fast,
        "group_counts": _group_counts_np,
        "subset_counts": _subset_counts_np,
        "cooccurrence": _cooccurrence_np,
    },
}
if HAVE_NUMBA:
    _IMPLS["numba"] = {
        "parse_labels": _parse_labels_nb,
        "group_counts": _group_counts_nb,
        "subset_counts": _subset_counts_nb,
        "cooccurrence": _cooccurrence_nb,
    }


def _initial_backend() -> str:
    want = os.environ.get("DFAUDIT_BACKEND", "").strip().lower()
    if want in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if want not in ("numba", "numpy"):
        raise ValueError(f"DFAUDIT_BACKEND must be 'numba' or 'numpy', got {want!r}")
    if want == "numba" and not HAVE_NUMBA:
        logging.getLogger(__name__).warning("numba not installed; using the numpy backend")
        return "numpy"
    return want


_backend = _initial_backend()


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> str:
    """Switch backend; returns the previous one."""
    global _backend
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} unavailable (have {sorted(_IMPLS)})")
    prev, _backend = _backend, name
    return prev


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def parse_labels(buf: np.ndarray, n_rows: int, colmap: np.ndarray, out: np.ndarray) -> tuple[int, int, int]:
    """Parse ``n_rows`` newline-terminated label lines into ``out[:, colmap]``.

    Returns ``(status, row, column)``; row/column locate the first error.
    """
    status, r, c = _IMPLS[_backend]["parse_labels"](buf, n_rows, colmap, out)
    return int(status), int(r), int(c)


def group_counts(labels: np.ndarray, codes: np.ndarray) -> np.ndarray:
    """Counts ``[attribute, label + 1, outcome code]`` over all rows."""
    return _IMPLS[_backend]["group_counts"](labels, codes)


def subset_counts(codes: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Outcome-code histogram (length 4) of the rows in ``idx``."""
    return _IMPLS[_backend]["subset_counts"](codes, idx)


def cooccurrence(labels: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pairwise sums ``(X'X, X'D, D'D)`` where ``D`` marks defined cells."""
    return _IMPLS[_backend]["cooccurrence"](labels)
