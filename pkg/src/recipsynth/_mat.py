"""Dense matrices that are either exact (object arrays of Fraction) or float."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from .polymat import frac_inv, frac_rank, frac_solve, rat

RANK_RTOL = 1e-10


def is_exact(m: np.ndarray) -> bool:
    return m.dtype == object


def as_matrix(x, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Coerce nested lists to an exact object array when every entry is rational."""
    if isinstance(x, np.ndarray) and x.dtype != object:
        arr = np.array(x, dtype=float)
    else:
        raw = np.array(x, dtype=object) if not isinstance(x, np.ndarray) else x
        if raw.size == 0:
            arr = np.zeros(raw.shape if raw.ndim == 2 else (rows or 0, cols or 0), dtype=object)
        else:
            flat = list(raw.ravel())
            if all(isinstance(v, (int, Fraction, str, np.integer)) and not isinstance(v, bool) for v in flat):
                arr = np.array([rat(v) for v in flat], dtype=object).reshape(raw.shape)
            else:
                arr = np.array([float(v) for v in flat], dtype=float).reshape(raw.shape)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if rows in (None, 1) else arr.reshape(-1, 1)
    if rows is not None and cols is not None and arr.shape != (rows, cols):
        if arr.size == 0 and rows * cols == 0:
            arr = np.zeros((rows, cols), dtype=arr.dtype)
        else:
            raise ValueError(f"expected shape {(rows, cols)}, got {arr.shape}")
    return arr


def to_float(m: np.ndarray) -> np.ndarray:
    return np.array(m, dtype=float) if m.size else np.zeros(m.shape)


def zeros(r: int, c: int, exact: bool = True) -> np.ndarray:
    if exact:
        out = np.empty((r, c), dtype=object)
        out[...] = Fraction(0)
        return out
    return np.zeros((r, c))


def eye(n: int, exact: bool = True) -> np.ndarray:
    out = zeros(n, n, exact)
    for i in range(n):
        out[i, i] = Fraction(1) if exact else 1.0
    return out


def unify(*ms: np.ndarray) -> list[np.ndarray]:
    """Promote to float if any argument is float."""
    if all(is_exact(m) for m in ms):
        return list(ms)
    return [to_float(m) if is_exact(m) else m for m in ms]


def inv(m: np.ndarray) -> np.ndarray:
    if m.shape[0] == 0:
        return m.copy()
    if is_exact(m):
        return np.array(frac_inv(m.tolist()), dtype=object).reshape(m.shape)
    return np.linalg.inv(m)


def solve(a: np.ndarray, b: np.ndarray) -> np.ndarray | None:
    """Exact solve (None if inconsistent) or float least squares."""
    if is_exact(a) and is_exact(b):
        if a.shape[1] == 0:
            return zeros(0, b.shape[1]) if not any(v != 0 for v in b.ravel()) else None
        x = frac_solve(a.tolist(), b.tolist())
        return None if x is None else np.array(x, dtype=object).reshape(a.shape[1], b.shape[1])
    a, b = to_float(a), to_float(b)
    return np.linalg.lstsq(a, b, rcond=None)[0]


def rank(m: np.ndarray) -> int:
    if m.size == 0:
        return 0
    if is_exact(m):
        return frac_rank(m.tolist())
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > RANK_RTOL * max(1.0, s[0])))


def orth_range(m: np.ndarray, ref: float) -> np.ndarray:
    """Orthonormal basis of range(m) by pivoted QR with threshold RANK_RTOL * ref."""
    if m.size == 0:
        return np.zeros((m.shape[0], 0))
    q, r, _ = sla.qr(m, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    k = int(np.sum(diag > RANK_RTOL * max(ref, 1.0)))
    return q[:, :k]


def fmt(m: np.ndarray) -> list:
    """JSON form: exact entries as "num/den", floats as floats."""
    if is_exact(m):
        return [[f"{v.numerator}/{v.denominator}" for v in row] for row in m]
    return [[float(v) for v in row] for row in m]
