"""Exact polynomial and polynomial-matrix algebra over the rationals.

Coefficients are :class:`fractions.Fraction`. A :class:`Poly` stores its
coefficients in ascending degree and a :class:`PolyMat` stores its entries
row-major. Both are immutable. Everything here is exact; floating point is
only produced on request through :meth:`PolyMat.to_numpy`.

The degree of the zero polynomial is ``-inf``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "NEG_INF",
    "Poly",
    "PolyMat",
    "ColumnProperForm",
    "SmithForm",
    "PolyMatError",
    "rat",
    "rat_str",
    "poly_gcd",
    "poly_mat_mul",
    "is_unimodular",
    "normalrank",
    "det",
    "adjugate",
    "inverse_unimodular",
    "column_proper_form",
    "row_proper_form",
    "upper_echelon",
    "hermite_form",
    "smith_form",
    "right_syzygy_basis",
    "left_kernel_basis",
    "same_left_row_space",
    "limit_at_infinity",
    "frac_rref",
    "frac_rank",
    "frac_nullspace",
    "frac_solve",
    "frac_inv",
    "frac_matmul",
]

NEG_INF = -math.inf


class PolyMatError(ValueError):
    """Raised on dimension errors or violated preconditions."""


def rat(x) -> Fraction:
    """Coerce ints, Fractions, floats or ``"num/den"`` strings to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("bool is not a coefficient")
    if isinstance(x, (int, str)):
        return Fraction(x.strip() if isinstance(x, str) else x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, np.integer):
        return Fraction(int(x))
    if isinstance(x, np.floating):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as a rational")


def rat_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


# ---------------------------------------------------------------- scalars


class Poly:
    """Univariate polynomial in the indeterminate xi with rational coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Iterable = (0,)):
        cs = [rat(c) for c in coeffs]
        while len(cs) > 1 and cs[-1] == 0:
            cs.pop()
        if not cs:
            cs = [Fraction(0)]
        object.__setattr__(self, "coeffs", tuple(cs))

    def __setattr__(self, *_):
        raise AttributeError("Poly is immutable")

    @classmethod
    def const(cls, c) -> "Poly":
        return cls((c,))

    @classmethod
    def xi(cls, k: int = 1) -> "Poly":
        return cls([0] * k + [1])

    @classmethod
    def coerce(cls, x) -> "Poly":
        return x if isinstance(x, Poly) else cls.const(x)

    @classmethod
    def from_roots(cls, roots) -> "Poly":
        p = cls.const(1)
        for r in roots:
            p = p * cls((-rat(r), 1))
        return p

    # structure
    @property
    def deg(self):
        if self.is_zero():
            return NEG_INF
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def is_const(self) -> bool:
        return len(self.coeffs) == 1

    @property
    def lc(self) -> Fraction:
        return self.coeffs[-1]

    def coeff(self, k: int) -> Fraction:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else Fraction(0)

    def monic(self) -> "Poly":
        if self.is_zero():
            return self
        return self * (1 / self.lc)

    # arithmetic
    def __add__(self, other):
        other = Poly.coerce(other)
        n = max(len(self.coeffs), len(other.coeffs))
        return Poly(self.coeff(k) + other.coeff(k) for k in range(n))

    __radd__ = __add__

    def __neg__(self):
        return Poly(-c for c in self.coeffs)

    def __sub__(self, other):
        return self + (-Poly.coerce(other))

    def __rsub__(self, other):
        return Poly.coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            c = rat(other)
            return Poly(c * a for a in self.coeffs)
        if self.is_zero() or other.is_zero():
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __divmod__(self, other):
        other = Poly.coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dq = len(rem) - len(other.coeffs)
        if dq < 0 or self.is_zero():
            return Poly(), self
        quo = [Fraction(0)] * (dq + 1)
        inv = 1 / other.lc
        m = len(other.coeffs) - 1
        for k in range(dq, -1, -1):
            c = rem[k + m] * inv
            quo[k] = c
            if c:
                for j, b in enumerate(other.coeffs):
                    rem[k + j] -= c * b
        return Poly(quo), Poly(rem[:m] or [0])

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def exact_div(self, other) -> "Poly":
        q, r = divmod(self, other)
        if not r.is_zero():
            raise PolyMatError("inexact polynomial division")
        return q

    def shift(self, k: int) -> "Poly":
        """Multiply by xi**k."""
        if self.is_zero() or k == 0:
            return self
        return Poly([0] * k + list(self.coeffs))

    def reflect(self) -> "Poly":
        """p(-xi)."""
        return Poly(c if k % 2 == 0 else -c for k, c in enumerate(self.coeffs))

    def derivative(self) -> "Poly":
        return Poly(k * c for k, c in enumerate(self.coeffs) if k) if len(self.coeffs) > 1 else Poly()

    def __call__(self, x):
        exact = isinstance(x, (int, Fraction)) and not isinstance(x, bool)
        acc = Fraction(0) if exact else 0.0 * x
        for c in reversed(self.coeffs):
            acc = acc * x + (c if exact else float(c))
        return acc

    def __eq__(self, other):
        if isinstance(other, Poly):
            return self.coeffs == other.coeffs
        try:
            return self.coeffs == (rat(other),)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Poly({self})"

    def __str__(self):
        if self.is_zero():
            return "0"
        terms = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mag = abs(c)
            cs = "" if (mag == 1 and k) else str(mag)
            var = "" if k == 0 else ("xi" if k == 1 else f"xi^{k}")
            body = cs + ("*" if cs and var else "") + var
            terms.append(("-" if c < 0 else "+", body))
        s = ("-" if terms[0][0] == "-" else "") + terms[0][1]
        for sign, body in terms[1:]:
            s += f" {sign} {body}"
        return s

    def to_json(self) -> list[str]:
        return [rat_str(c) for c in self.coeffs]

    @classmethod
    def from_json(cls, data) -> "Poly":
        if isinstance(data, (int, str, float)):
            return cls.const(data)
        if not isinstance(data, list):
            raise PolyMatError("polynomial must be a list of coefficients")
        return cls(data)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic gcd (zero if both are zero)."""
    while not b.is_zero():
        a, b = b, a % b
    return a.monic()


# ---------------------------------------------------------------- rational matrices

FracMat = list  # list[list[Fraction]]


def frac_matmul(a: FracMat, b: FracMat) -> FracMat:
    if not a:
        return []
    inner = len(b)
    cols = len(b[0]) if b else 0
    return [[sum((a[i][k] * b[k][j] for k in range(inner)), Fraction(0)) for j in range(cols)] for i in range(len(a))]


def frac_rref(m: FracMat, ncols: int | None = None):
    """Reduced row echelon form. Returns ``(R, pivot_columns)``."""
    a = [[rat(x) for x in row] for row in m]
    rows = len(a)
    cols = ncols if ncols is not None else (len(a[0]) if a else 0)
    piv = []
    r = 0
    for c in range(cols):
        p = next((i for i in range(r, rows) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        inv = 1 / a[r][c]
        a[r] = [x * inv for x in a[r]]
        for i in range(rows):
            if i != r and a[i][c] != 0:
                f = a[i][c]
                a[i] = [x - f * y for x, y in zip(a[i], a[r])]
        piv.append(c)
        r += 1
        if r == rows:
            break
    return a, piv


def frac_rank(m: FracMat) -> int:
    return len(frac_rref(m)[1]) if m and m[0] else 0


def frac_nullspace(m: FracMat, ncols: int | None = None) -> list[list[Fraction]]:
    """Basis of the right kernel, one vector per free column (free entry = 1)."""
    cols = ncols if ncols is not None else (len(m[0]) if m else 0)
    if not m:
        return [[Fraction(int(i == j)) for i in range(cols)] for j in range(cols)]
    r, piv = frac_rref(m, cols)
    free = [c for c in range(cols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * cols
        v[f] = Fraction(1)
        for i, p in enumerate(piv):
            v[p] = -r[i][f]
        basis.append(v)
    return basis


def frac_solve(a: FracMat, b: FracMat):
    """One solution X of A X = B (free variables zero), or None when inconsistent."""
    n = len(a[0]) if a else 0
    k = len(b[0]) if b else 0
    aug = [list(ra) + list(rb) for ra, rb in zip(a, b)]
    r, piv = frac_rref(aug, n + k)
    if any(p >= n for p in piv):
        return None
    x = [[Fraction(0)] * k for _ in range(n)]
    for i, p in enumerate(piv):
        x[p] = r[i][n:]
    return x


def frac_inv(a: FracMat) -> FracMat:
    n = len(a)
    ident = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    r, piv = frac_rref([list(row) + ident[i] for i, row in enumerate(a)], n)
    if piv != list(range(n)):
        raise PolyMatError("singular rational matrix")
    return [row[n:] for row in r]


# ---------------------------------------------------------------- polynomial matrices


class PolyMat:
    """Immutable matrix of :class:`Poly` entries."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries: Sequence[Sequence] = (), rows: int | None = None, cols: int | None = None):
        ents = tuple(tuple(Poly.coerce(e) if not isinstance(e, (list, tuple)) else Poly(e) for e in row) for row in entries)
        r = len(ents) if rows is None else rows
        if cols is None:
            cols = len(ents[0]) if ents else 0
        if r == 0:
            ents = ()
        if len(ents) != r or any(len(row) != cols for row in ents):
            raise PolyMatError("ragged or mis-sized polynomial matrix")
        object.__setattr__(self, "rows", r)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", ents)

    def __setattr__(self, *_):
        raise AttributeError("PolyMat is immutable")

    # constructors
    @classmethod
    def zeros(cls, r: int, c: int) -> "PolyMat":
        return cls([[Poly()] * c for _ in range(r)], r, c)

    @classmethod
    def identity(cls, n: int) -> "PolyMat":
        return cls([[Poly.const(int(i == j)) for j in range(n)] for i in range(n)], n, n)

    @classmethod
    def const(cls, m, rows: int | None = None, cols: int | None = None) -> "PolyMat":
        m = [list(r) for r in m]
        return cls([[Poly.const(rat(x)) for x in row] for row in m], rows, cols)

    @classmethod
    def scalar(cls, p) -> "PolyMat":
        return cls([[Poly.coerce(p)]])

    @classmethod
    def block(cls, blocks: Sequence[Sequence["PolyMat"]]) -> "PolyMat":
        rows = []
        for brow in blocks:
            h = {b.rows for b in brow}
            if len(h) != 1:
                raise PolyMatError("block row heights differ")
            (height,) = h
            for i in range(height):
                rows.append([e for b in brow for e in b.entries[i]] if height else [])
        width = sum(b.cols for b in blocks[0]) if blocks else 0
        return cls(rows, len(rows), width)

    @classmethod
    def hstack(cls, *ms: "PolyMat") -> "PolyMat":
        return cls.block([list(ms)])

    @classmethod
    def vstack(cls, *ms: "PolyMat") -> "PolyMat":
        cols = {m.cols for m in ms}
        if len(cols) != 1:
            raise PolyMatError("vstack width mismatch")
        rows = [row for m in ms for row in m.entries]
        return cls(rows, len(rows), cols.pop())

    @classmethod
    def diag(cls, *ms: "PolyMat") -> "PolyMat":
        total = sum(m.cols for m in ms)
        rows = []
        off = 0
        for m in ms:
            for row in m.entries:
                rows.append([Poly()] * off + list(row) + [Poly()] * (total - off - m.cols))
            off += m.cols
        return cls(rows, len(rows), total)

    # access
    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @property
    def shape(self):
        return (self.rows, self.cols)

    def sub(self, rows: Sequence[int] | slice, cols: Sequence[int] | slice) -> "PolyMat":
        ri = range(self.rows)[rows] if isinstance(rows, slice) else rows
        ci = range(self.cols)[cols] if isinstance(cols, slice) else cols
        return PolyMat([[self.entries[i][j] for j in ci] for i in ri], len(ri), len(ci))

    def col(self, j: int) -> "PolyMat":
        return self.sub(range(self.rows), [j])

    def row(self, i: int) -> "PolyMat":
        return self.sub([i], range(self.cols))

    @property
    def T(self) -> "PolyMat":
        return PolyMat([[self.entries[i][j] for i in range(self.rows)] for j in range(self.cols)], self.cols, self.rows)

    def map(self, f) -> "PolyMat":
        return PolyMat([[f(e) for e in row] for row in self.entries], self.rows, self.cols)

    def reflect(self) -> "PolyMat":
        return self.map(Poly.reflect)

    def is_zero(self) -> bool:
        return all(e.is_zero() for row in self.entries for e in row)

    def is_square(self) -> bool:
        return self.rows == self.cols

    def is_const(self) -> bool:
        return all(e.is_const() for row in self.entries for e in row)

    @property
    def degree(self):
        return max((e.deg for row in self.entries for e in row), default=NEG_INF)

    def col_degrees(self) -> list:
        return [max((self.entries[i][j].deg for i in range(self.rows)), default=NEG_INF) for j in range(self.cols)]

    def row_degrees(self) -> list:
        return [max((e.deg for e in row), default=NEG_INF) for row in self.entries]

    def coeff(self, k: int) -> FracMat:
        return [[e.coeff(k) for e in row] for row in self.entries]

    def at(self, x) -> list:
        return [[e(x) for e in row] for row in self.entries]

    def to_numpy(self, x) -> np.ndarray:
        dt = complex if isinstance(x, complex) else float
        out = np.zeros((self.rows, self.cols), dtype=dt)
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                out[i, j] = e(dt(x))
        return out

    def const_value(self) -> FracMat:
        if not self.is_const():
            raise PolyMatError("matrix is not constant")
        return self.coeff(0)

    # arithmetic
    def _check_same(self, other):
        if self.shape != other.shape:
            raise PolyMatError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "PolyMat") -> "PolyMat":
        self._check_same(other)
        return PolyMat([[a + b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)], self.rows, self.cols)

    def __sub__(self, other: "PolyMat") -> "PolyMat":
        self._check_same(other)
        return PolyMat([[a - b for a, b in zip(r1, r2)] for r1, r2 in zip(self.entries, other.entries)], self.rows, self.cols)

    def __neg__(self) -> "PolyMat":
        return self.map(Poly.__neg__)

    def __matmul__(self, other: "PolyMat") -> "PolyMat":
        return poly_mat_mul(self, other)

    def __mul__(self, s) -> "PolyMat":
        if isinstance(s, PolyMat):
            return poly_mat_mul(self, s)
        s = Poly.coerce(s)
        return self.map(lambda e: e * s)

    __rmul__ = __mul__

    def __eq__(self, other):
        return isinstance(other, PolyMat) and self.shape == other.shape and self.entries == other.entries

    def __hash__(self):
        return hash((self.rows, self.cols, self.entries))

    def __repr__(self):
        body = "; ".join(", ".join(str(e) for e in row) for row in self.entries)
        return f"PolyMat[{self.rows}x{self.cols}]({body})"

    def to_json(self) -> dict:
        return {"rows": self.rows, "cols": self.cols, "entries": [[e.to_json() for e in row] for row in self.entries]}

    @classmethod
    def from_json(cls, data) -> "PolyMat":
        if not isinstance(data, dict) or "entries" not in data:
            raise PolyMatError("PolyMat JSON needs rows, cols and entries")
        rows = int(data.get("rows", len(data["entries"])))
        ents = data["entries"]
        cols = int(data.get("cols", len(ents[0]) if ents else 0))
        return cls([[Poly.from_json(e) for e in row] for row in ents], rows, cols)


def poly_mat_mul(a: PolyMat, b: PolyMat) -> PolyMat:
    """Exact product ``a @ b``."""
    if a.cols != b.rows:
        raise PolyMatError(f"cannot multiply {a.shape} by {b.shape}")
    bt = b.T.entries
    out = []
    for row in a.entries:
        new = []
        for bcol in bt:
            acc = Poly()
            for x, y in zip(row, bcol):
                if not x.is_zero() and not y.is_zero():
                    acc = acc + x * y
            new.append(acc)
        out.append(new)
    return PolyMat(out, a.rows, b.cols)


# ---------------------------------------------------------------- elimination


def _fraction_free_echelon(m: PolyMat):
    """Bareiss elimination. Returns (rank, det_if_square)."""
    a = [list(row) for row in m.entries]
    rows, cols = m.rows, m.cols
    prev = Poly.const(1)
    sign = 1
    r = 0
    for c in range(cols):
        if r == rows:
            break
        p = next((i for i in range(r, rows) if not a[i][c].is_zero()), None)
        if p is None:
            continue
        if p != r:
            a[r], a[p] = a[p], a[r]
            sign = -sign
        piv = a[r][c]
        for i in range(r + 1, rows):
            f = a[i][c]
            for j in range(c + 1, cols):
                a[i][j] = (piv * a[i][j] - f * a[r][j]).exact_div(prev)
            a[i][c] = Poly()
        prev = piv
        r += 1
    d = None
    if rows == cols:
        d = Poly() if r < rows else (a[rows - 1][cols - 1] * sign if rows else Poly.const(1))
    return r, d


def normalrank(g: PolyMat) -> int:
    """Rank over the field of rational functions."""
    if g.rows == 0 or g.cols == 0:
        return 0
    return _fraction_free_echelon(g)[0]


def det(m: PolyMat) -> Poly:
    if not m.is_square():
        raise PolyMatError("determinant of a non-square matrix")
    if m.rows == 0:
        return Poly.const(1)
    return _fraction_free_echelon(m)[1]


def adjugate(m: PolyMat) -> PolyMat:
    if not m.is_square():
        raise PolyMatError("adjugate of a non-square matrix")
    n = m.rows
    if n == 0:
        return m
    if n == 1:
        return PolyMat.identity(1)
    out = [[Poly()] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = m.sub([k for k in range(n) if k != i], [k for k in range(n) if k != j])
            c = det(minor)
            out[j][i] = c if (i + j) % 2 == 0 else -c
    return PolyMat(out, n, n)


def is_unimodular(v: PolyMat) -> bool:
    if not v.is_square():
        raise PolyMatError("unimodularity needs a square matrix")
    d = det(v)
    return d.is_const() and not d.is_zero()


def inverse_unimodular(v: PolyMat) -> PolyMat:
    d = det(v)
    if not (d.is_const() and not d.is_zero()):
        raise PolyMatError("matrix is not unimodular")
    return adjugate(v) * (1 / d.coeffs[0])


def limit_at_infinity(num: PolyMat, den: Poly, shift: int = 0) -> FracMat:
    """Exact value of ``lim xi**(-shift) * num(xi) / den(xi)`` as xi tends to infinity.

    Raises :class:`PolyMatError` if some entry diverges.
    """
    if den.is_zero():
        raise PolyMatError("zero denominator")
    top = den.deg + shift
    out = []
    for row in num.entries:
        new = []
        for e in row:
            if e.deg > top:
                raise PolyMatError("rational matrix is not proper at infinity")
            new.append(e.lc / den.lc if e.deg == top else Fraction(0))
        out.append(new)
    return out


# ---------------------------------------------------------------- column proper form


@dataclass(frozen=True)
class ColumnProperForm:
    W: PolyMat
    U: PolyMat
    colDegrees: list
    leadingCoeff: FracMat
    Uinv: PolyMat | None = None


def _leading_coeff(w: PolyMat, degs) -> FracMat:
    return [[w.entries[i][j].coeff(degs[j]) if degs[j] != NEG_INF else Fraction(0) for j in range(w.cols)] for i in range(w.rows)]


def column_proper_form(m: PolyMat) -> ColumnProperForm:
    """Wolovich reduction to a column proper matrix ``W = m @ U``.

    At each step the reducing kernel vector of the leading coefficient matrix
    is chosen so that the column being lowered is the rightmost one possible.
    """
    k = m.cols
    if normalrank(m) != k:
        raise PolyMatError("column_proper_form needs full column normal rank")
    w = [list(row) for row in m.entries]
    u = [list(row) for row in PolyMat.identity(k).entries]
    uinv = [list(row) for row in PolyMat.identity(k).entries]
    rows = m.rows
    while True:
        wm = PolyMat(w, rows, k)
        degs = wm.col_degrees()
        lead = _leading_coeff(wm, degs)
        if frac_rank(lead) == k:
            return ColumnProperForm(wm, PolyMat(u, k, k), degs, lead, PolyMat(uinv, k, k))
        chosen = None
        for j in range(k - 1, -1, -1):
            others = [i for i in range(k) if i != j and degs[i] <= degs[j]]
            a = [[lead[r][i] for i in others] for r in range(rows)]
            b = [[-lead[r][j]] for r in range(rows)]
            sol = frac_solve(a, b) if others else (None if any(x[0] for x in b) else [])
            if sol is not None:
                chosen = (j, others, [s[0] for s in sol])
                break
        j, others, alpha = chosen
        for i, a_i in zip(others, alpha):
            if a_i == 0:
                continue
            shift = degs[j] - degs[i]
            for r in range(rows):
                w[r][j] = w[r][j] + w[r][i].shift(shift) * a_i
            for r in range(k):
                u[r][j] = u[r][j] + u[r][i].shift(shift) * a_i
            # inverse of the column operation acts on rows
            uinv[i] = [x - y.shift(shift) * a_i for x, y in zip(uinv[i], uinv[j])]


def row_proper_form(m: PolyMat):
    """Row proper ``W = U @ m`` via the transpose.

    Returns ``(W, U, Uinv, rowDegrees, leading)``.
    """
    cpf = column_proper_form(m.T)
    lead = [list(r) for r in zip(*cpf.leadingCoeff)] if cpf.leadingCoeff else []
    return cpf.W.T, cpf.U.T, cpf.Uinv.T, cpf.colDegrees, lead


# ---------------------------------------------------------------- echelon and Hermite forms


def _swap(a, i, j):
    a[i], a[j] = a[j], a[i]


def _row_axpy(a, dst, src, q: Poly):
    """row_dst -= q * row_src."""
    a[dst] = [x - q * y for x, y in zip(a[dst], a[src])]


def _col_axpy(a, dst, src, q: Poly):
    """col_dst += q * col_src."""
    for row in a:
        row[dst] = row[dst] + q * row[src]


def upper_echelon(m: PolyMat, with_inverse: bool = False):
    """Row reduction ``W @ m = E`` with W unimodular and E in Hermite form.

    Pivot rule: in the leftmost column that still has a nonzero entry at or
    below the current row, take the entry of lowest degree (ties go to the
    smallest row index). Pivots are made monic and the entries above each
    pivot are reduced modulo it, so E is canonical for the row module.
    With ``with_inverse`` the inverse of W is returned as a third value.
    """
    rows, cols = m.rows, m.cols
    e = [list(row) for row in m.entries]
    w = [list(row) for row in PolyMat.identity(rows).entries]
    wi = [list(row) for row in PolyMat.identity(rows).entries]

    def swap(i, j):
        _swap(e, i, j)
        _swap(w, i, j)
        for row in wi:
            row[i], row[j] = row[j], row[i]

    def axpy(dst, src, q):
        _row_axpy(e, dst, src, q)
        _row_axpy(w, dst, src, q)
        _col_axpy(wi, src, dst, q)

    r = 0
    for c in range(cols):
        if r == rows:
            break
        pivoted = False
        while True:
            cand = [i for i in range(r, rows) if not e[i][c].is_zero()]
            if not cand:
                break
            p = min(cand, key=lambda i: (e[i][c].deg, i))
            if p != r:
                swap(r, p)
            pivoted = True
            clean = True
            for i in range(r + 1, rows):
                if e[i][c].is_zero():
                    continue
                q, rem = divmod(e[i][c], e[r][c])
                axpy(i, r, q)
                if not rem.is_zero():
                    clean = False
            if clean:
                break
        if not pivoted:
            continue
        lead = e[r][c].lc
        e[r] = [x * (1 / lead) for x in e[r]]
        w[r] = [x * (1 / lead) for x in w[r]]
        for row in wi:
            row[r] = row[r] * lead
        for i in range(r):
            q = e[i][c] // e[r][c]
            if not q.is_zero():
                axpy(i, r, q)
        r += 1
    if with_inverse:
        return PolyMat(w, rows, rows), PolyMat(e, rows, cols), PolyMat(wi, rows, rows)
    return PolyMat(w, rows, rows), PolyMat(e, rows, cols)


def hermite_form(m: PolyMat) -> PolyMat:
    """Canonical row-Hermite form with zero rows removed."""
    _, e = upper_echelon(m)
    keep = [row for row in e.entries if any(not x.is_zero() for x in row)]
    return PolyMat(keep, len(keep), m.cols)


def same_left_row_space(r1: PolyMat, r2: PolyMat) -> bool:
    """True iff each matrix is a left polynomial multiple of the other."""
    if r1.cols != r2.cols:
        raise PolyMatError("row spaces live in different ambient modules")
    return hermite_form(r1) == hermite_form(r2)


# ---------------------------------------------------------------- Smith form and kernels


@dataclass(frozen=True)
class SmithForm:
    U: PolyMat
    S: PolyMat
    V: PolyMat
    invariants: list
    rank: int


def smith_form(m: PolyMat) -> SmithForm:
    """``U @ m @ V = S`` with S diagonal, monic invariant factors, U and V unimodular."""
    rows, cols = m.rows, m.cols
    a = [list(row) for row in m.entries]
    u = [list(row) for row in PolyMat.identity(rows).entries]
    v = [list(row) for row in PolyMat.identity(cols).entries]

    def col_swap(x, i, j):
        for row in x:
            row[i], row[j] = row[j], row[i]

    def col_axpy(x, dst, src, q):
        for row in x:
            row[dst] = row[dst] - q * row[src]

    rank = 0
    for k in range(min(rows, cols)):
        while True:
            nz = [(a[i][j].deg, i, j) for i in range(k, rows) for j in range(k, cols) if not a[i][j].is_zero()]
            if not nz:
                break
            _, pi, pj = min(nz)
            _swap(a, k, pi)
            _swap(u, k, pi)
            col_swap(a, k, pj)
            col_swap(v, k, pj)
            piv = a[k][k]
            clean = True
            for i in range(k + 1, rows):
                if a[i][k].is_zero():
                    continue
                q, rem = divmod(a[i][k], piv)
                _row_axpy(a, i, k, q)
                _row_axpy(u, i, k, q)
                clean &= rem.is_zero()
            for j in range(k + 1, cols):
                if a[k][j].is_zero():
                    continue
                q, rem = divmod(a[k][j], piv)
                col_axpy(a, j, k, q)
                col_axpy(v, j, k, q)
                clean &= rem.is_zero()
            if not clean:
                continue
            bad = next(((i, j) for i in range(k + 1, rows) for j in range(k + 1, cols) if not (a[i][j] % piv).is_zero()), None)
            if bad is None:
                break
            i = bad[0]
            a[k] = [x + y for x, y in zip(a[k], a[i])]
            u[k] = [x + y for x, y in zip(u[k], u[i])]
        if a[k][k].is_zero():
            break
        inv = 1 / a[k][k].lc
        a[k] = [x * inv for x in a[k]]
        u[k] = [x * inv for x in u[k]]
        rank += 1
    inv_factors = [a[i][i] for i in range(rank)]
    return SmithForm(PolyMat(u, rows, rows), PolyMat(a, rows, cols), PolyMat(v, cols, cols), inv_factors, rank)


def _normalize_columns(z: PolyMat) -> PolyMat:
    """Scale each column so its first entry of top degree has leading coefficient 1."""
    degs = z.col_degrees()
    cols = []
    for j in range(z.cols):
        lead = next(z.entries[i][j].lc for i in range(z.rows) if z.entries[i][j].deg == degs[j])
        cols.append(1 / lead)
    return PolyMat([[e * cols[j] for j, e in enumerate(row)] for row in z.entries], z.rows, z.cols)


def right_syzygy_basis(m: PolyMat) -> PolyMat:
    """Minimal-degree basis of ``{z : m z = 0}``, full column rank at every complex point."""
    sf = smith_form(m)
    z = sf.V.sub(range(m.cols), range(sf.rank, m.cols))
    if z.cols == 0:
        return z
    z = column_proper_form(z).W
    return _normalize_columns(z)


def left_kernel_basis(m: PolyMat) -> PolyMat:
    """Rows spanning ``{p : p m = 0}``."""
    return right_syzygy_basis(m.T).T
