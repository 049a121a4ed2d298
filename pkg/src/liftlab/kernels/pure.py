"""Reference kernels in plain numpy.

Same contracts as the compiled versions in ``_fast``; the two must stay
interchangeable, including tie-breaking (the discrepancy scan enumerates
column subsets in the same Gray-code order and keeps the first maximiser).
"""

from __future__ import annotations

import math

import numpy as np


def pack_keys(rows: np.ndarray, coords: np.ndarray, alphabet: int) -> np.ndarray:
    """Mixed-radix code of each row restricted to ``coords``.

    Coordinates are taken in the order given; the first coordinate is the
    most significant digit, so ascending ``coords`` gives codes whose
    numeric order is the lexicographic order of the projected tuples.
    """
    m = rows.shape[0]
    keys = np.zeros(m, dtype=np.int64)
    for c in coords:
        keys *= alphabet
        keys += rows[:, c]
    return keys


def group_weights(keys: np.ndarray, weights: np.ndarray):
    """Distinct keys (sorted) and the total weight landing on each."""
    if len(keys) == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    uniq, inv = np.unique(keys, return_inverse=True)
    sums = np.bincount(inv, weights=weights.astype(np.float64))
    return uniq, np.rint(sums).astype(np.int64)


def group_max_weight(keys: np.ndarray, weights: np.ndarray) -> int:
    if len(keys) == 0:
        return 0
    _, sums = group_weights(keys, weights)
    return int(sums.max())


def gn_codes(table: np.ndarray, x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Bit code of the gadget applied blockwise: bit i holds g(x[i], row[i])."""
    m, n = rows.shape
    codes = np.zeros(m, dtype=np.int64)
    for i in range(n):
        codes |= table[x[i]].astype(np.int64)[rows[:, i]] << i
    return codes


def disc_scan(sign: np.ndarray, wx: np.ndarray, wy: np.ndarray):
    """Best rectangle of the weighted sign matrix.

    Maximises |sum over A x B of sign[u,v]*wx[u]*wy[v]| over all row sets A
    and column sets B.  Column subsets are enumerated incrementally in
    Gray-code order; for a fixed column set the best row set is read off the
    signs of the per-row partial sums.  Returns (best, row_mask, col_mask)
    with the first strictly-improving maximiser kept.
    """
    lx, ly = sign.shape
    cols = [(sign[:, j].astype(np.int64) * int(wy[j])) for j in range(ly)]
    wx64 = wx.astype(np.int64)
    rs = np.zeros(lx, dtype=np.int64)
    best = 0
    best_rows = 0
    best_cols = 0
    colmask = 0
    for i in range(1, 1 << ly):
        j = (i & -i).bit_length() - 1
        if colmask & (1 << j):
            rs -= cols[j]
        else:
            rs += cols[j]
        colmask ^= 1 << j
        pos = int(np.where(rs > 0, rs, 0) @ wx64)
        neg = -int(np.where(rs < 0, rs, 0) @ wx64)
        if pos > best:
            best = pos
            best_cols = colmask
            best_rows = _mask_of(rs > 0)
        if neg > best:
            best = neg
            best_cols = colmask
            best_rows = _mask_of(rs < 0)
    return best, best_rows, best_cols


def _mask_of(flags: np.ndarray) -> int:
    mask = 0
    for u in np.nonzero(flags)[0]:
        mask |= 1 << int(u)
    return mask


def heavy_scan(
    rows: np.ndarray,
    weights: np.ndarray,
    sel: np.ndarray,
    universe: np.ndarray,
    alphabet: int,
    thr_log: np.ndarray,
    tol: float,
):
    """Heavy-value scan over all non-empty J inside ``universe``.

    A row is marked when for some J its projected value y_J has conditional
    probability (within the selected rows) with log2 strictly above
    thr_log[|J|] + tol.  Also returns, per J (indexed by the submask of
    ``universe``), the total selected weight sitting on heavy values.
    """
    k = len(universe)
    m = rows.shape[0]
    marks = np.zeros(m, dtype=bool)
    mass = np.zeros(1 << k, dtype=np.int64)
    idx = np.nonzero(sel)[0]
    if len(idx) == 0:
        return marks, mass
    w_sel = weights[idx]
    total = float(w_sel.sum())
    log_total = math.log2(total)
    for jmask in range(1, 1 << k):
        coords = universe[[t for t in range(k) if jmask >> t & 1]]
        keys = pack_keys(rows[idx], coords, alphabet)
        uniq, inv = np.unique(keys, return_inverse=True)
        sums = np.rint(np.bincount(inv, weights=w_sel.astype(np.float64))).astype(np.int64)
        thr = thr_log[len(coords)] + tol
        heavy = (np.log2(sums.astype(np.float64)) - log_total) > thr
        row_heavy = heavy[inv]
        marks[idx[row_heavy]] = True
        mass[jmask] = int(w_sel[row_heavy].sum())
    return marks, mass
