"""Behaviors ``P(d/dt) i = Q(d/dt) v`` and their algebraic predicates.

Reciprocity is decided exactly from ``P Q^T = Q P^T``. Passivity is the
positive-real pair property; its first condition can only be sampled here,
so the report leaves it inconclusive unless the constructive realization
pipeline later succeeds on the same data.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polymat import (
    Poly,
    PolyMat,
    PolyMatError,
    adjugate,
    column_proper_form,
    det,
    frac_rref,
    left_kernel_basis,
    limit_at_infinity,
    normalrank,
    right_syzygy_basis,
    smith_form,
)

__all__ = [
    "Behavior",
    "ImageRep",
    "PermutationSplit",
    "ConditionVerdict",
    "PRPairReport",
    "ReciprocityError",
    "DEFAULT_GRID",
    "check_reciprocity",
    "check_reciprocity_image",
    "is_controllable",
    "image_representation",
    "partition_to_proper_symmetric",
    "check_positive_real_pair",
    "is_strictly_hurwitz",
    "transfer_limit",
    "is_proper",
    "perm_matrix",
]


class ReciprocityError(ValueError):
    pass


@dataclass(frozen=True)
class Behavior:
    n: int
    P: PolyMat
    Q: PolyMat

    def __post_init__(self):
        if self.P.shape != (self.n, self.n) or self.Q.shape != (self.n, self.n):
            raise PolyMatError("P and Q must both be n x n")
        if normalrank(self.kernel_rep()) != self.n:
            raise PolyMatError("[P -Q] must have normal rank n")

    @classmethod
    def of(cls, P: PolyMat, Q: PolyMat) -> "Behavior":
        return cls(P.rows, P, Q)

    def kernel_rep(self) -> PolyMat:
        """The kernel representation ``[P -Q]`` acting on ``col(i, v)``."""
        return PolyMat.hstack(self.P, -self.Q)

    def to_json(self) -> dict:
        return {"n": self.n, "P": self.P.to_json(), "Q": self.Q.to_json()}

    @classmethod
    def from_json(cls, data) -> "Behavior":
        if not isinstance(data, dict) or not {"P", "Q"} <= set(data):
            raise PolyMatError("behavior JSON needs P and Q")
        P = PolyMat.from_json(data["P"])
        Q = PolyMat.from_json(data["Q"])
        return cls(int(data.get("n", P.rows)), P, Q)


@dataclass(frozen=True)
class ImageRep:
    M: PolyMat
    N: PolyMat


def perm_matrix(rows: Sequence[int], n: int) -> PolyMat:
    """0/1 matrix whose k-th row is the unit vector ``e_{rows[k]}``."""
    return PolyMat.const([[int(j == r) for j in range(n)] for r in rows], len(rows), n)


@dataclass(frozen=True)
class PermutationSplit:
    T1: PolyMat
    T2: PolyMat
    Phat: PolyMat
    Qhat: PolyMat
    r: int

    @property
    def T(self) -> PolyMat:
        return PolyMat.vstack(self.T1, self.T2)


# ---------------------------------------------------------------- reciprocity


def check_reciprocity(b: Behavior) -> bool:
    return (b.P @ b.Q.T - b.Q @ b.P.T).is_zero()


def check_reciprocity_image(m: ImageRep) -> bool:
    return (m.M.T @ m.N - m.N.T @ m.M).is_zero()


def is_controllable(b: Behavior) -> bool:
    sf = smith_form(b.kernel_rep())
    return sf.rank == b.n and all(s.is_const() for s in sf.invariants)


def image_representation(b: Behavior) -> ImageRep:
    z = right_syzygy_basis(b.kernel_rep())
    n = b.n
    return ImageRep(z.sub(range(n), range(z.cols)), z.sub(range(n, 2 * n), range(z.cols)))


def transfer_limit(Q: PolyMat, P: PolyMat, shift: int = 0):
    """Exact ``lim xi**(-shift) Q^{-1} P`` at infinity (PolyMatError if it diverges)."""
    d = det(Q)
    if d.is_zero():
        raise PolyMatError("Q is singular")
    return limit_at_infinity(adjugate(Q) @ P, d, shift)


def is_proper(Q: PolyMat, P: PolyMat) -> bool:
    try:
        transfer_limit(Q, P)
    except PolyMatError:
        return False
    return True


def _first_independent(vectors: list[list[Fraction]]) -> list[int]:
    """Indices of the lexicographically first maximal independent subset of ``vectors``."""
    if not vectors:
        return []
    cols = [list(v) for v in zip(*vectors)]  # vectors become columns
    _, piv = frac_rref(cols, len(vectors))
    return piv


def partition_to_proper_symmetric(b: Behavior) -> PermutationSplit:
    """Swap a subset of currents and voltages so that ``Qhat^{-1} Phat`` is proper and symmetric."""
    if not check_reciprocity(b):
        raise ReciprocityError("behavior is not reciprocal")
    n = b.n
    img = image_representation(b)
    cpf = column_proper_form(PolyMat.vstack(img.M, img.N))
    w1 = cpf.leadingCoeff[:n]
    col_sel = _first_independent([[w1[i][j] for i in range(n)] for j in range(n)])
    r = len(col_sel)
    row_sel = _first_independent([[w1[i][j] for j in col_sel] for i in range(n)])
    rest = [i for i in range(n) if i not in row_sel]
    T1 = perm_matrix(row_sel, n)
    T2 = perm_matrix(rest, n)
    Phat = PolyMat.hstack(b.P @ T1.T, b.Q @ T2.T)
    Qhat = PolyMat.hstack(b.Q @ T1.T, -(b.P @ T2.T))
    if det(Qhat).is_zero() or not is_proper(Qhat, Phat):
        raise AssertionError("internal: permuted split is not proper")
    return PermutationSplit(T1, T2, Phat, Qhat, r)


# ---------------------------------------------------------------- passivity diagnostics


_ANGLES = (0.0, math.pi / 12, math.pi / 6, math.pi / 4, math.pi / 3, 5 * math.pi / 12, -math.pi / 6, -math.pi / 3)


def sample_grid(count: int) -> tuple:
    """First ``count`` points of the fixed right half-plane sampling grid.

    Magnitudes run 1, 0.1, 10, 0.01, 100, ...; each magnitude visits every
    angle before the next one starts, so the grid is always led by 1.
    """
    if count < 1:
        raise ValueError("grid needs at least one point")
    out = []
    k = 0
    while len(out) < count:
        mag = 1.0 if k == 0 else 10.0 ** (-((k + 1) // 2) if k % 2 else k // 2)
        out.extend(mag * cmath.exp(1j * a) for a in _ANGLES)
        k += 1
    return tuple(out[:count])


def _default_grid() -> tuple:
    return sample_grid(3 * len(_ANGLES))


DEFAULT_GRID = _default_grid()


@dataclass
class ConditionVerdict:
    verdict: str  # "pass", "fail" or "inconclusive"
    witness: object = None
    detail: str = ""

    def to_json(self) -> dict:
        w = self.witness
        if isinstance(w, complex):
            w = [w.real, w.imag]
        elif isinstance(w, list):
            w = [[x.real, x.imag] if isinstance(x, complex) else x for x in w]
        return {"verdict": self.verdict, "witness": w, "detail": self.detail}


@dataclass
class PRPairReport:
    condA: ConditionVerdict
    condB: ConditionVerdict
    condC: ConditionVerdict
    overall: str
    samples: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "condA": self.condA.to_json(),
            "condB": self.condB.to_json(),
            "condC": self.condC.to_json(),
            "overall": self.overall,
        }


def is_strictly_hurwitz(p: Poly) -> bool:
    """True iff every root of p has negative real part (Routh array, exact)."""
    if p.is_zero():
        return False
    n = p.deg
    if n == 0:
        return True
    a = list(reversed(p.coeffs))
    if a[0] < 0:
        a = [-x for x in a]
    width = n // 2 + 1
    r0 = a[0::2] + [Fraction(0)] * (width - len(a[0::2]))
    r1 = a[1::2] + [Fraction(0)] * (width - len(a[1::2]))
    first = [r0[0], r1[0]]
    prev, cur = r0, r1
    for _ in range(n - 1):
        if cur[0] <= 0:
            return False
        nxt = [(cur[0] * prev[j + 1] - prev[0] * cur[j + 1]) / cur[0] for j in range(width - 1)] + [Fraction(0)]
        prev, cur = cur, nxt
        first.append(cur[0])
    return all(x > 0 for x in first)


def _hermitian_form(b: Behavior, lam: complex) -> np.ndarray:
    p = b.P.to_numpy(lam)
    q = b.Q.to_numpy(lam)
    pc = b.P.to_numpy(lam.conjugate())
    qc = b.Q.to_numpy(lam.conjugate())
    h = p @ qc.T + q @ pc.T
    return (h + h.conj().T) / 2


def check_positive_real_pair(b: Behavior, grid: Sequence[complex] | None = None, tol: float = 1e-9, confirm: bool = True) -> PRPairReport:
    """Sample condition (a), decide (b) and (c) exactly.

    With ``confirm`` the constructive passive realization is attempted when
    every check passes; its success upgrades the overall verdict to pass.
    """
    grid = DEFAULT_GRID if grid is None else tuple(grid)
    samples = []
    worst = None
    for lam in grid:
        if lam.real <= 0:
            raise ValueError("grid points must lie in the open right half-plane")
        ev = float(np.linalg.eigvalsh(_hermitian_form(b, complex(lam)))[0]) if b.n else 0.0
        samples.append((complex(lam), ev))
        if worst is None or ev < worst[1]:
            worst = (complex(lam), ev)
    bad = [s for s in samples if s[1] < -tol]
    if bad:
        first = bad[0]
        cond_a = ConditionVerdict("fail", first[0], f"min eigenvalue {first[1]:.6g}")
    else:
        cond_a = ConditionVerdict("inconclusive", worst[0] if worst else None, "sampled only")

    sf = smith_form(b.kernel_rep())
    prod = Poly.const(1)
    for s in sf.invariants:
        prod = prod * s
    if sf.rank < b.n:
        cond_b = ConditionVerdict("fail", None, "rank deficient")
    elif is_strictly_hurwitz(prod):
        cond_b = ConditionVerdict("pass")
    else:
        roots = np.roots([float(c) for c in reversed(prod.coeffs)])
        offending = [complex(z) for z in roots if z.real >= -1e-9]
        cond_b = ConditionVerdict("fail", offending[0] if offending else None, f"rank loss at a root of {prod}")

    phi = b.P @ b.Q.T.reflect() + b.Q @ b.P.T.reflect()
    kern = left_kernel_basis(phi)
    if kern.rows == 0:
        cond_c = ConditionVerdict("pass")
    else:
        g = kern @ b.kernel_rep()
        sg = smith_form(g)
        if sg.rank == kern.rows and all(s.is_const() for s in sg.invariants):
            cond_c = ConditionVerdict("pass")
        else:
            cond_c = ConditionVerdict("fail", None, "kernel of the para-Hermitian form meets the behavior")

    verdicts = (cond_a.verdict, cond_b.verdict, cond_c.verdict)
    if "fail" in verdicts:
        overall = "fail"
    else:
        overall = "inconclusive"
        if confirm and check_reciprocity(b):
            from .synth import confirm_passive  # deferred: synth builds on this module

            if confirm_passive(b):
                overall = "pass"
                cond_a = ConditionVerdict("pass", cond_a.witness, "confirmed by passive realization")
    return PRPairReport(cond_a, cond_b, cond_c, overall, samples)
