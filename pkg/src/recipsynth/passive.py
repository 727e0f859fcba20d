"""Passivity certificates and the reduction pipeline.

``ppst_pipeline`` peels a passive reciprocal behavior down to one with a
positive definite feedthrough (transformer extractions and inductor
removals), builds a signature-symmetric realization with a storage
function there, and lifts both back up the reduction trace.
``passive_sigsym_realize`` then rotates that into a realization that is
passive with identity storage and signature-symmetric at the same time.

Matrices stay exact (object arrays of Fraction) while the data allow it.
Riccati solutions computed in floating point are rounded back to rationals
when the rounded value satisfies the equation exactly.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import _mat as mx
from .behavior import transfer_limit
from .polymat import (
    Poly,
    PolyMat,
    PolyMatError,
    det,
    frac_nullspace,
    frac_rank,
    frac_rref,
    poly_gcd,
    normalrank,
    right_syzygy_basis,
    upper_echelon,
)
from .realize import StateSpace, staircase_observer
from .sigsym import SignatureCert, SymmetrizedRealization, augment, sigsym_residuals

__all__ = [
    "PassivityError",
    "RiccatiData",
    "ObservableWitness",
    "DetectableWitness",
    "ReductionStep",
    "PassiveCert",
    "PPSTResult",
    "PassiveRealization",
    "EPS_SCHEDULE",
    "riccati_residual",
    "omega_matrix",
    "available_energy_gramian",
    "find_K_observable",
    "find_K_detectable",
    "detectable_witness",
    "observable_witness",
    "gprl2_step",
    "lrz_step",
    "back_substitute",
    "ppst_pipeline",
    "passive_sigsym_realize",
]

log = logging.getLogger(__name__)

PSD_TOL = 1e-8
ARE_TOL = 1e-10
IMAG_TOL = 1e-6
RAT_DENOM = 10_000
EPS_SCHEDULE = tuple(Fraction(1, 2**j) for j in range(2, 21))


class PassivityError(ValueError):
    """A stage of the passive construction failed; ``stage`` names it."""

    def __init__(self, message: str, stage: str = "", witness=None):
        super().__init__(message)
        self.stage = stage
        self.witness = witness


# ---------------------------------------------------------------- small helpers


def _f(m) -> np.ndarray:
    return mx.to_float(m)


def _sym_min_eig(m) -> float:
    m = _f(m)
    if m.size == 0:
        return float("inf")
    return float(np.linalg.eigvalsh((m + m.T) / 2)[0])


def _max_re(m) -> float:
    if m.size == 0:
        return float("-inf")
    if mx.is_exact(m):
        # roots of the squarefree characteristic polynomial are simple, so they
        # stay accurate where a defective eigenvalue would smear by sqrt(eps)
        n = m.shape[0]
        xi = PolyMat([[Poly.xi() if i == j else Poly() for j in range(n)] for i in range(n)], n, n)
        p = det(xi - PolyMat.const(m.tolist(), n, n))
        sq = p.exact_div(poly_gcd(p, p.derivative()))
        roots = np.roots([float(c) for c in reversed(sq.coeffs)])
        return float(np.max(roots.real)) if roots.size else float("-inf")
    return float(np.max(np.linalg.eigvals(_f(m)).real))


def _scale(*ms) -> float:
    return max([1.0] + [float(np.max(np.abs(_f(m)), initial=0.0)) for m in ms])


def _blkdiag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    exact = mx.is_exact(a) and mx.is_exact(b)
    a, b = mx.unify(a, b)
    out = mx.zeros(a.shape[0] + b.shape[0], a.shape[1] + b.shape[1], exact)
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def _pm(m: np.ndarray) -> PolyMat:
    return PolyMat.const(m.tolist(), m.shape[0], m.shape[1])


def _const_of(pm: PolyMat) -> np.ndarray:
    return np.array(pm.const_value(), dtype=object).reshape(pm.shape) if pm.rows * pm.cols else mx.zeros(*pm.shape)


def _sylvester(a: np.ndarray, b: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve ``a X + X b = q`` (exact Kronecker solve for rational data)."""
    m, n = a.shape[0], b.shape[0]
    if m * n == 0:
        return mx.zeros(m, n, mx.is_exact(a) and mx.is_exact(b) and mx.is_exact(q))
    if mx.is_exact(a) and mx.is_exact(b) and mx.is_exact(q):
        kron = np.kron(mx.eye(n), a) + np.kron(b.T, mx.eye(m))
        if mx.rank(kron) < m * n:
            raise PassivityError("Sylvester equation is singular", "sylvester")
        x = mx.solve(kron, q.T.reshape(-1, 1))
        return x[:, 0].reshape(n, m).T.copy()
    return sla.solve_sylvester(_f(a), _f(b), _f(q))


def _rationalize(x: np.ndarray, ok: Callable[[np.ndarray], bool]) -> np.ndarray:
    """Nearby rational matrix if ``ok`` accepts it exactly, else ``x`` unchanged."""
    if x.size == 0 or mx.is_exact(x):
        return x
    cand = np.array([Fraction(float(v)).limit_denominator(RAT_DENOM) for v in x.ravel()], dtype=object).reshape(x.shape)
    if np.max(np.abs(_f(cand) - x)) > 1e-6 * _scale(x):
        return x
    return cand if ok(cand) else x


# ---------------------------------------------------------------- Riccati data


@dataclass(frozen=True)
class RiccatiData:
    K: np.ndarray
    Upsilon: np.ndarray
    AUps: np.ndarray


def _rinv(ss: StateSpace) -> np.ndarray:
    r = ss.D + ss.D.T
    if mx.rank(r) < ss.n:
        raise PassivityError("D + D^T is singular", "riccati")
    return mx.inv(r)


def _lift(ss: StateSpace, K: np.ndarray) -> tuple[StateSpace, np.ndarray]:
    K = mx.as_matrix(K, ss.d, ss.d) if not isinstance(K, np.ndarray) else K
    if mx.is_exact(K) and ss.exact:
        return ss, K
    return ss.to_float(), _f(K)


def riccati_residual(ss: StateSpace, K) -> RiccatiData:
    ss, K = _lift(ss, K)
    A, B, C = ss.A, ss.B, ss.C
    ri = _rinv(ss)
    ups = -K @ A.T - A @ K - (K @ C.T - B) @ ri @ (C @ K - B.T)
    aups = A.T - C.T @ ri @ (B.T - C @ K)
    return RiccatiData(K, ups, aups)


def omega_matrix(ss: StateSpace, X) -> np.ndarray:
    """``[[-X A - A^T X, C^T - X B], [C - B^T X, D + D^T]]``."""
    ss, X = _lift(ss, X)
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    return np.block([[-X @ A - A.T @ X, C.T - X @ B], [C - B.T @ X, D + D.T]])


def _omega_are(ss: StateSpace, X: np.ndarray) -> np.ndarray:
    ss, X = _lift(ss, X)
    A, B, C = ss.A, ss.B, ss.C
    return -A.T @ X - X @ A - (C.T - X @ B) @ _rinv(ss) @ (C - B.T @ X)


def _closed_loop(ss: StateSpace, X: np.ndarray) -> np.ndarray:
    ss, X = _lift(ss, X)
    return ss.A - ss.B @ _rinv(ss) @ (ss.C - ss.B.T @ X)


def _dual(ss: StateSpace) -> StateSpace:
    return StateSpace(ss.A.T.copy(), -ss.C.T, -ss.B.T, ss.D.T.copy())


def _rows(m: np.ndarray) -> list[list[Fraction]]:
    return [list(r) for r in m]


def _span(vectors: list[list[Fraction]]) -> list[list[Fraction]]:
    if not vectors:
        return []
    r, piv = frac_rref(vectors, len(vectors[0]))
    return r[: len(piv)]


def _axis_factor(H: np.ndarray) -> Poly | None:
    """Squarefree polynomial whose roots are the repeated eigenvalues of ``H``.

    For a Hamiltonian matrix of a passive system these are exactly the
    imaginary-axis eigenvalues; repeated eigenvalues off the axis are refused.
    """
    n = H.shape[0]
    xi = PolyMat.const(mx.eye(n).tolist(), n, n) * Poly.xi()
    chi = det(xi - PolyMat.const(H.tolist(), n, n))
    g = poly_gcd(chi, chi.derivative())
    if g.deg is None or g.deg < 1:
        return None
    rho = g.exact_div(poly_gcd(g, g.derivative()))
    roots = np.roots([float(c) for c in reversed(rho.coeffs)])
    on_axis = np.abs(roots.real) <= 1e-7 * np.maximum(1.0, np.abs(roots))
    if not np.any(on_axis):
        return None
    if not np.all(on_axis):
        raise PassivityError("Hamiltonian has repeated eigenvalues both on and off the imaginary axis", "available_energy")
    return rho


def _mat_poly(p: Poly, H: np.ndarray) -> np.ndarray:
    out = mx.zeros(*H.shape)
    for c in reversed(p.coeffs):
        out = out @ H + c * mx.eye(H.shape[0])
    return out


def _semisimple_half(Hx: np.ndarray, N: np.ndarray, d: int) -> np.ndarray:
    """Limit of the stable subspace for ``A - delta I`` as ``delta -> 0+``.

    On a semisimple axis eigenspace the shift moves eigenvalues by
    ``-delta mu`` with ``mu`` the eigenvalues of ``diag(I, -I)`` compressed to
    that eigenspace; the stable half is spanned by the ``mu > 0`` directions.
    """
    m = 2 * d
    V = _f(np.array(frac_nullspace(_rows(N), m), dtype=object)).T
    W = _f(np.array(frac_nullspace(_rows(N.T), m), dtype=object)).T
    G = np.diag([1.0] * d + [-1.0] * d)
    Mc = np.linalg.solve(W.T @ V, W.T @ G @ V)
    mu, E = np.linalg.eig(Mc)
    pick = mu.real > 1e-9 * max(1.0, float(np.max(np.abs(mu))))
    if 2 * int(np.sum(pick)) != V.shape[1] or np.max(np.abs(mu.imag), initial=0.0) > 1e-9:
        raise PassivityError("imaginary-axis eigenspace has no stable limit", "available_energy")
    vecs = V @ E[:, pick]
    basis = np.hstack([vecs.real, vecs.imag])
    u, _, _ = np.linalg.svd(basis)
    return u[:, : int(np.sum(pick))]


def _exact_axis_split(Hx: np.ndarray, d: int) -> np.ndarray:
    """Half Jordan chains at the axis eigenvalues plus the numeric stable subspace elsewhere."""
    m = 2 * d
    rho = _axis_factor(Hx)
    if rho is None:
        raise PassivityError("no stabilizing Riccati solution", "available_energy")
    N = _mat_poly(rho, Hx)
    pw = [mx.eye(m)]
    for _ in range(2 * m):
        pw.append(pw[-1] @ N)
    gen = frac_nullspace(_rows(pw[m]), m)  # generalized eigenspace of the axis eigenvalues
    half: list[list[Fraction]] = []
    for j in range(1, m + 1):
        for v in frac_nullspace(_rows(pw[min(2 * j, 2 * m)]), m):
            half.append(list(pw[j] @ np.array(v, dtype=object)))
    half = _span([h for h in half if any(h)])
    parts = []
    if 2 * len(half) == len(gen):
        if half:
            parts.append(np.linalg.qr(_f(np.array(half, dtype=object)).T)[0])
    elif len(frac_nullspace(_rows(N), m)) == len(gen):
        parts.append(_semisimple_half(Hx, N, d))
    else:
        raise PassivityError("imaginary-axis Jordan chains have odd length", "available_energy")
    rest = _span(_rows(pw[m].T))  # complementary invariant subspace: range of N^m
    if rest:
        q = np.linalg.qr(_f(np.array(rest, dtype=object)).T)[0]
        h1 = q.T @ _f(Hx) @ q
        _, Z, sdim = sla.schur(h1, output="real", sort=lambda x, y: x < 0)
        if 2 * sdim != q.shape[1]:
            raise PassivityError("could not separate the stable invariant subspace", "available_energy")
        parts.append(q @ Z[:, :sdim])
    return np.hstack(parts)


def _lagrangian_basis(H: np.ndarray, d: int, Hx: np.ndarray | None = None) -> np.ndarray:
    """Real ``2d x d`` basis of the stable invariant subspace of ``H`` extended across the axis.

    With exact data ``Hx`` the presence of imaginary-axis eigenvalues is
    decided exactly and those are handled by :func:`_exact_axis_split`.
    A clean spectrum is split at the midpoint of the d-th and (d+1)-th real
    parts. Float data near the axis falls back to clustering within
    ``IMAG_TOL``: a cluster of multiplicity ``2k`` at ``mu`` contributes
    ``ker (H - mu)^k``.
    """
    scale = _scale(H)
    re = np.sort(np.linalg.eigvals(H).real)
    exact_axis = Hx is not None and _axis_factor(Hx) is not None
    clean = re[d] - re[d - 1] > 2 * IMAG_TOL * scale if Hx is None else not exact_axis
    if clean:
        thr = (re[d - 1] + re[d]) / 2
        _, Z, sdim = sla.schur(H, output="real", sort=lambda x, y: x < thr)
        if sdim != d:
            raise PassivityError("could not separate the stable invariant subspace", "available_energy")
        return Z[:, :d]
    log.info("Hamiltonian has eigenvalues on the imaginary axis; using half Jordan chains")
    if Hx is not None:
        return _exact_axis_split(Hx, d)
    tol = IMAG_TOL * scale
    _, Zs, ns = sla.schur(H, output="real", sort=lambda x, y: x < -tol)
    _, Zi, ni = sla.schur(H, output="real", sort=lambda x, y: abs(x) <= tol)
    if 2 * ns + ni != 2 * d or ni % 2:
        raise PassivityError("no stabilizing Riccati solution", "available_energy", witness=float(re[d]))
    Zi = Zi[:, :ni]
    Hc = Zi.T @ H @ Zi
    ev = np.linalg.eigvals(Hc)
    pending = sorted(ev, key=lambda z: (-z.imag, z.real))
    vecs = []
    while pending:
        z0 = pending[0]
        group = [z for z in pending if abs(z.imag - z0.imag) <= max(tol, 1e-4 * scale)]
        pending = [z for z in pending if abs(z.imag - z0.imag) > max(tol, 1e-4 * scale)]
        if len(group) % 2:
            raise PassivityError("odd imaginary-axis multiplicity", "available_energy", witness=complex(z0))
        k = len(group) // 2
        mu = 1j * float(np.mean([z.imag for z in group]))
        N = np.linalg.matrix_power(Hc - mu * np.eye(ni), k)
        vh = np.linalg.svd(N)[2]
        kern = vh[-k:].conj().T
        vecs.append(kern)
    if not vecs:
        return Zs[:, :ns]
    half = np.hstack(vecs)
    basis = np.hstack([half.real, half.imag])
    u, sv, _ = np.linalg.svd(basis)
    real_half = u[:, : ni // 2]
    return np.hstack([Zs[:, :ns], Zi @ real_half])


def available_energy_gramian(ss: StateSpace) -> np.ndarray:
    """Available storage ``x^T X x`` of a passive system with ``D + D^T > 0``.

    ``X`` solves ``-A^T X - X A - (C^T - X B)(D + D^T)^{-1}(C - B^T X) = 0``
    with ``A - B (D + D^T)^{-1}(C - B^T X)`` in the closed left half-plane.
    """
    d = ss.d
    if d == 0:
        return mx.zeros(0, 0, ss.exact)
    _rinv(ss)
    f = ss.to_float()
    ri = np.linalg.inv(f.D + f.D.T)
    at = f.A - f.B @ ri @ f.C
    H = np.block([[at, f.B @ ri @ f.B.T], [-f.C.T @ ri @ f.C, -at.T]])
    Hx = None
    if ss.exact:
        rx = mx.inv(ss.D + ss.D.T)
        ax = ss.A - ss.B @ rx @ ss.C
        Hx = np.block([[ax, ss.B @ rx @ ss.B.T], [-ss.C.T @ rx @ ss.C, -ax.T]])
    Z = _lagrangian_basis(H, d, Hx)
    u1, u2 = Z[:d, :], Z[d:, :]
    if np.linalg.cond(u1) > 1e12:
        raise PassivityError("Riccati solution does not exist", "available_energy")
    X = np.linalg.solve(u1.T, u2.T).T
    X = (X + X.T) / 2
    if np.max(np.abs(_omega_are(f, X))) > 1e-7 * _scale(X, f.A, f.B, f.C):
        raise PassivityError("Riccati residual too large", "available_energy")
    if ss.exact:
        X = _rationalize(X, lambda c: np.array_equal(c, c.T) and not np.any(_omega_are(ss, c)))
    return X


# ---------------------------------------------------------------- storage witnesses


@dataclass(frozen=True)
class ObservableWitness:
    K1: np.ndarray
    Kminus: np.ndarray
    eps: Fraction
    K: np.ndarray


@dataclass(frozen=True)
class DetectableWitness:
    S: np.ndarray  # x = S z puts the system in observer staircase form
    k: int
    observable: ObservableWitness | None
    K12: np.ndarray
    nabla: np.ndarray
    K: np.ndarray


def _k_ok(ss: StateSpace, K: np.ndarray) -> bool:
    if ss.d == 0:
        return True
    data = riccati_residual(ss, K)
    s = _scale(K, ss.A, ss.B, ss.C)
    return (
        _sym_min_eig(K) > 0
        and _sym_min_eig(data.Upsilon) > -PSD_TOL * s
        and _max_re(data.AUps) < PSD_TOL * s
    )


def observable_witness(ss: StateSpace) -> ObservableWitness:
    d = ss.d
    if d == 0:
        z = mx.zeros(0, 0, ss.exact)
        return ObservableWitness(z, z, EPS_SCHEDULE[0], z)
    blocks, v = [ss.C], ss.C
    for _ in range(d - 1):
        v = v @ ss.A
        blocks.append(v)
    if mx.rank(np.vstack(blocks)) < d:
        raise PassivityError("(C, A) is not observable", "find_K_observable")
    X = available_energy_gramian(ss)
    if _sym_min_eig(X) <= 0:
        raise PassivityError("available storage is not positive definite", "find_K_observable")
    K1 = mx.inv(X)
    Km = available_energy_gramian(_dual(ss))
    K1, Km = mx.unify(K1, Km)
    exact = mx.is_exact(K1)
    for eps in EPS_SCHEDULE:
        e = eps if exact else float(eps)
        K = (1 - e) * Km + e * K1
        if _k_ok(ss, K):
            return ObservableWitness(K1, Km, eps, K)
    raise PassivityError("no blend of the extremal storages certifies passivity", "find_K_observable")


def find_K_observable(ss: StateSpace) -> np.ndarray:
    return observable_witness(ss).K


def _observer_split(ss: StateSpace) -> tuple[np.ndarray, int, StateSpace]:
    """Basis ``S`` (``x = S z``) for the observer staircase and the observable dimension."""
    d = ss.d
    blocks, v = [ss.C], ss.C
    for _ in range(d - 1):
        v = v @ ss.A
        blocks.append(v)
    k = mx.rank(np.vstack(blocks)) if d else 0
    zero = lambda m: not np.any(_f(m)) if m.size else True  # noqa: E731
    if zero(ss.C[:, k:]) and zero(ss.A[:k, k:]):
        sub = np.vstack([b[:, :k] for b in blocks]) if d else blocks[0]
        if mx.rank(sub) == k:
            return mx.eye(d, ss.exact), k, ss
    out, S, k = staircase_observer(ss)
    return S, k, out


def detectable_witness(ss: StateSpace) -> DetectableWitness:
    d = ss.d
    if d == 0:
        z = mx.zeros(0, 0, ss.exact)
        return DetectableWitness(z, 0, None, z, z, z)
    S, k, st = _observer_split(ss)
    m = d - k
    a11, a21, a22 = st.A[:k, :k], st.A[k:, :k], st.A[k:, k:]
    b1, b2 = st.B[:k, :], st.B[k:, :]
    c1 = st.C[:, :k]
    if m and _max_re(a22) >= -ARE_TOL:
        raise PassivityError("(C, A) is not detectable", "find_K_detectable", witness=_max_re(a22))
    sub = StateSpace(a11, b1, c1, st.D)
    ow = observable_witness(sub)
    K11 = ow.K
    exact = mx.is_exact(K11) and st.exact
    if not exact:
        st, K11 = st.to_float(), _f(K11)
        a11, a21, a22, b1, b2, c1 = (_f(x) for x in (a11, a21, a22, b1, b2, c1))
        S = _f(S)
    ri = _rinv(st)
    aups = a11.T - c1.T @ ri @ (b1.T - c1 @ K11)
    rhs = -a21 @ K11 - b2 @ ri @ (b1.T - c1 @ K11)
    K12t = _sylvester(a22, aups, rhs)
    K11i = mx.inv(K11)
    ups11 = riccati_residual(StateSpace(a11, b1, c1, st.D), K11).Upsilon
    g = b2 - K12t @ K11i @ b1
    N = K12t @ K11i @ ups11 @ K11i @ K12t.T + g @ ri @ g.T
    nabla = _sylvester(a22, a22.T, -N)
    if m and _sym_min_eig(nabla) <= PSD_TOL * _scale(nabla):
        # Psi(nabla + L) = I with a22 L + L a22^T = -I
        nabla = nabla + _sylvester(a22, a22.T, -mx.eye(m, exact))
    M = np.block([[K11, K12t.T], [K12t, K12t @ K11i @ K12t.T + nabla]])
    K = S @ M @ S.T
    if not _k_ok_pd(ss, K):
        raise PassivityError("assembled storage fails the Riccati inequality", "find_K_detectable")
    return DetectableWitness(S, k, ow, K12t.T.copy(), nabla, K)


def _k_ok_pd(ss: StateSpace, K: np.ndarray) -> bool:
    data = riccati_residual(ss, K)
    s = _scale(K, ss.A, ss.B, ss.C)
    return _sym_min_eig(K) > 0 and _sym_min_eig(data.Upsilon) > -PSD_TOL * s


def find_K_detectable(ss: StateSpace) -> np.ndarray:
    return detectable_witness(ss).K


# ---------------------------------------------------------------- reduction steps


@dataclass(frozen=True)
class ReductionStep:
    kind: str  # "gprl2" or "lrz"
    dims: tuple[int, int, int]  # (n_k, r_k, m_k)
    T: np.ndarray | None = None
    W: PolyMat | None = None
    K: np.ndarray | None = None

    def to_json(self) -> dict:
        out = {"kind": self.kind, "dims": list(self.dims)}
        if self.T is not None:
            out["T"] = mx.fmt(self.T)
        if self.W is not None:
            out["W"] = self.W.to_json()
        if self.K is not None:
            out["K"] = mx.fmt(self.K)
        return out

    @classmethod
    def from_json(cls, data) -> "ReductionStep":
        T = mx.as_matrix(data["T"]) if data.get("T") is not None else None
        W = PolyMat.from_json(data["W"]) if data.get("W") is not None else None
        K = mx.as_matrix(data["K"]) if data.get("K") is not None else None
        return cls(data["kind"], tuple(data["dims"]), T, W, K)


def _limit(Q: PolyMat, P: PolyMat, shift: int = 0) -> np.ndarray:
    try:
        lim = transfer_limit(Q, P, shift)
    except PolyMatError as exc:
        raise PassivityError(str(exc), "limit") from exc
    return np.array(lim, dtype=object).reshape(Q.rows, P.cols) if Q.rows else mx.zeros(0, 0)


def _extend(basis: list[list[Fraction]], n: int) -> list[list[Fraction]]:
    """Lexicographically first unit vectors completing ``basis`` to a basis of Q^n."""
    out = []
    for j in range(n):
        e = [Fraction(int(i == j)) for i in range(n)]
        if frac_rank(basis + out + [e]) == len(basis) + len(out) + 1:
            out.append(e)
    return out


def _primitive_row(row: list[Poly]) -> list[Poly]:
    """Scale to integer coefficients with content 1 and a negative leading first entry."""
    from math import gcd, lcm

    coeffs = [c for p in row for c in p.coeffs if c != 0]
    if not coeffs:
        return row
    den = lcm(*[c.denominator for c in coeffs])
    num = gcd(*[int(c * den) for c in coeffs])
    s = Fraction(den, num)
    first = next(p for p in row if not p.is_zero())
    if first.lc * s > 0:
        s = -s
    return [p * s for p in row]


def _check_symmetric_proper(P: PolyMat, Q: PolyMat, stage: str) -> np.ndarray:
    if det(Q).is_zero():
        raise PassivityError("Q is singular", stage)
    if not (P @ Q.T - Q @ P.T).is_zero():
        raise PassivityError("Q^{-1} P is not symmetric", stage)
    return _limit(Q, P)


def gprl2_step(Pk1: PolyMat, Qk1: PolyMat) -> tuple[ReductionStep, PolyMat, PolyMat]:
    """Split off the constant kernel of ``P`` and the kernel of the high-frequency limit.

    Returns the step and ``(P_k, Q_k)`` with ``lim Q_k^{-1} P_k = diag(Delta, 0)``,
    ``Delta`` positive definite and ``P_k`` nonsingular.
    """
    n = Pk1.rows
    lim = _check_symmetric_proper(Pk1, Qk1, "gprl2")
    ker_p = right_syzygy_basis(Pk1) if normalrank(Pk1) < n else PolyMat.zeros(n, 0)
    if ker_p.cols and ker_p.degree > 0:
        raise PassivityError("kernel of P is not constant", "gprl2")
    t2 = [list(ker_p.col(j).const_value()[i][0] for i in range(n)) for j in range(ker_p.cols)]
    ker_d = frac_nullspace(lim.tolist(), n)
    t1b: list[list[Fraction]] = []
    for v in ker_d:
        if frac_rank(t2 + t1b + [v]) == len(t2) + len(t1b) + 1:
            t1b.append(v)
    t1a = _extend(t2 + t1b, n)
    cols = t1a + t1b + t2
    T = np.array([[cols[j][i] for j in range(n)] for i in range(n)], dtype=object).reshape(n, n)
    nk = n - len(t2)
    rk = len(t1a)
    Tp = _pm(T)
    Tinv_t = _pm(mx.inv(T).T.copy())
    pt = Pk1 @ Tp
    qt = Qk1 @ Tinv_t
    if len(t2):
        m1 = qt.sub(range(n), range(nk))
        w, e = upper_echelon(m1)
        rows = [list(w.entries[i]) for i in range(n)]
        for i in range(nk, n):
            rows[i] = _primitive_row(rows[i])
        W = PolyMat(rows, n, n)
    else:
        W = PolyMat.identity(n)
    wp = W @ pt
    wq = W @ qt
    if not wp.sub(range(n), range(nk, n)).is_zero() or not wp.sub(range(nk, n), range(n)).is_zero():
        raise PassivityError("P does not split", "gprl2")
    if not wq.sub(range(nk, n), range(nk)).is_zero():
        raise AssertionError("internal: echelon did not clear the lower block")
    Pk = wp.sub(range(nk), range(nk))
    Qk = wq.sub(range(nk), range(nk))
    return ReductionStep("gprl2", (nk, rk, n - nk), T=T, W=W), Pk, Qk


def lrz_step(Pk1: PolyMat, Qk1: PolyMat) -> tuple[ReductionStep, PolyMat, PolyMat]:
    """Remove the inductive part at infinity: ``P_k = Q - P diag(0, K xi)``, ``Q_k = P``."""
    n = Pk1.rows
    lim = _check_symmetric_proper(Pk1, Qk1, "lrz")
    r = frac_rank(lim.tolist()) if n else 0
    m = n - r
    if m == 0:
        raise PassivityError("nothing to remove: the limit is nonsingular", "lrz")
    if det(Pk1).is_zero():
        raise PassivityError("P is singular", "lrz")
    if any(lim[i, j] != 0 for i in range(n) for j in range(n) if i >= r or j >= r):
        raise PassivityError("limit is not in block form diag(Delta, 0)", "lrz")
    L = _limit(Pk1, Qk1, 1)
    if any(L[i, j] != 0 for i in range(n) for j in range(n) if i < r or j < r):
        raise PassivityError("limit of P^{-1} Q / xi is not in block form diag(0, K)", "lrz")
    K = L[r:, r:].copy()
    if not np.array_equal(K, K.T) or _sym_min_eig(K) <= 0:
        raise PassivityError("K is not positive definite", "lrz", witness=_f(K))
    xi = Poly.xi(1)
    kx = PolyMat([[Poly() if i < r or j < r else Poly.const(L[i, j]) * xi for j in range(n)] for i in range(n)], n, n)
    Pk = Qk1 - Pk1 @ kx
    Qk = Pk1
    if det(Qk).deg >= det(Qk1).deg:
        raise AssertionError("internal: determinant degree did not drop")
    return ReductionStep("lrz", (n, r, m), K=K), Pk, Qk


# ---------------------------------------------------------------- back-substitution


def back_substitute(step: ReductionStep, ssk: StateSpace, Xk: np.ndarray, Sk: np.ndarray):
    """Lift ``(A_k, B_k, C_k, D_k, X_k, S_k)`` one level up the trace."""
    if step.kind == "gprl2":
        T = step.T
        n = T.shape[0]
        nk = step.dims[0]
        if ssk.n != nk:
            raise ValueError("dimension mismatch with step record")
        ex = ssk.exact and mx.is_exact(T)
        T_, A, B, C, D = (x if ex else _f(x) for x in (T, ssk.A, ssk.B, ssk.C, ssk.D))
        Ti = mx.inv(T_)
        d = ssk.d
        Bp = np.hstack([B, mx.zeros(d, n - nk, ex)])
        Cp = np.vstack([C, mx.zeros(n - nk, d, ex)])
        Dp = _blkdiag(D, mx.zeros(n - nk, n - nk, ex))
        return StateSpace(A, Bp @ Ti, Ti.T @ Cp, Ti.T @ Dp @ Ti), Xk, Sk
    if step.kind == "lrz":
        n, r, m = step.dims
        if ssk.n != n:
            raise ValueError("dimension mismatch with step record")
        K = step.K
        ex = ssk.exact and mx.is_exact(K)
        A, B, C, D, K = (x if ex else _f(x) for x in (ssk.A, ssk.B, ssk.C, ssk.D, K))
        b1, b2 = B[:, :r], B[:, r:]
        c1, c2 = C[:r, :], C[r:, :]
        d11, d12, d21, d22 = D[:r, :r], D[:r, r:], D[r:, :r], D[r:, r:]
        E = mx.inv(d11)
        Ki = mx.inv(K)
        d = ssk.d
        A1 = np.block([
            [A - b1 @ E @ c1, (b2 - b1 @ E @ d12) @ Ki],
            [d21 @ E @ c1 - c2, (d21 @ E @ d12 - d22) @ Ki],
        ])
        B1 = np.block([[b1 @ E, mx.zeros(d, m, ex)], [-d21 @ E, mx.eye(m, ex)]])
        C1 = np.block([[-E @ c1, -E @ d12 @ Ki], [mx.zeros(m, d, ex), Ki]])
        D1 = _blkdiag(E, mx.zeros(m, m, ex))
        X1 = _blkdiag(Xk, Ki if mx.is_exact(Xk) else _f(Ki))
        S1 = _blkdiag(-Sk, Ki if mx.is_exact(Sk) else _f(Ki))
        return StateSpace(A1, B1, C1, D1), X1, S1
    raise ValueError(f"unknown step kind {step.kind!r}")


# ---------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class PassiveCert:
    X: np.ndarray

    def min_eig(self, ss: StateSpace) -> float:
        return _sym_min_eig(omega_matrix(ss, self.X))


@dataclass
class PPSTResult:
    ss: StateSpace
    X: np.ndarray
    S: np.ndarray
    trace: list[ReductionStep]
    base: DetectableWitness | None = None
    base_ss: StateSpace | None = None
    levels: list[tuple[PolyMat, PolyMat]] = field(default_factory=list)

    def __iter__(self):
        return iter((self.ss, self.X, self.S, self.trace))


def _next_kind(P: PolyMat, Q: PolyMat) -> str | None:
    n = P.rows
    if n == 0:
        return None
    lim = _check_symmetric_proper(P, Q, "pipeline")
    r = frac_rank(lim.tolist())
    if r == n:
        return None
    blocked = all(lim[i, j] == 0 for i in range(n) for j in range(n) if i >= r or j >= r)
    if det(P).is_zero() or not blocked:
        return "gprl2"
    return "lrz"


def ppst_pipeline(phat: PolyMat, qhat: PolyMat, observer: Callable[[str], None] | None = None) -> PPSTResult:
    note = observer or (lambda msg: None)
    P, Q = phat, qhat
    trace: list[ReductionStep] = []
    levels = [(P, Q)]
    while True:
        kind = _next_kind(P, Q)
        if kind is None:
            break
        step, P, Q = (gprl2_step if kind == "gprl2" else lrz_step)(P, Q)
        trace.append(step)
        levels.append((P, Q))
        note(f"{kind}: n={step.dims[0]} r={step.dims[1]} m={step.dims[2]}")
        if len(trace) > 4 * (phat.rows + det(qhat).deg + 2):
            raise AssertionError("internal: reduction did not terminate")
    n = P.rows
    if n == 0:
        ss = StateSpace(mx.zeros(0, 0), mx.zeros(0, 0), mx.zeros(0, 0), mx.zeros(0, 0))
        X = S = mx.zeros(0, 0)
        wit = None
    else:
        aug = augment(P, Q)
        ss = aug.ss
        S = aug.S
        note(f"base: d={ss.d}")
        wit = detectable_witness(ss)
        X = mx.inv(wit.K)
    base_ss = ss
    for step in reversed(trace):
        ss, X, S = back_substitute(step, ss, X, S)
    return PPSTResult(ss, X, S, trace, wit, base_ss, levels)


# ---------------------------------------------------------------- final transformation


@dataclass(frozen=True)
class PassiveRealization:
    realization: SymmetrizedRealization
    R: np.ndarray
    V: np.ndarray
    W: np.ndarray
    G: np.ndarray
    pipeline: PPSTResult
    psd_min_eig: float

    @property
    def ss(self) -> StateSpace:
        return self.realization.ss

    @property
    def Sigma(self) -> np.ndarray:
        return self.realization.cert.Sigma


def passive_sigsym_realize(phat: PolyMat, qhat: PolyMat, observer=None) -> PassiveRealization:
    res = ppst_pipeline(phat, qhat, observer)
    f = res.ss.to_float()
    d = f.d
    if d == 0:
        ss = StateSpace(np.zeros((0, 0)), np.zeros((0, f.n)), np.zeros((f.n, 0)), f.D)
        z = np.zeros((0, 0))
        ymin = _sym_min_eig(f.D + f.D.T)
        return PassiveRealization(SymmetrizedRealization(ss, SignatureCert(z)), z, z, z, z, res, ymin)
    X, S = _f(res.X), _f(res.S)
    X = (X + X.T) / 2
    try:
        R = np.linalg.cholesky(X).T  # X = R^T R, R upper triangular
    except np.linalg.LinAlgError as exc:
        raise PassivityError("storage matrix is not positive definite", "cholesky") from exc
    Ri = np.linalg.inv(R)
    M = Ri.T @ S @ Ri
    lam, V = np.linalg.eigh((M + M.T) / 2)
    if np.min(np.abs(lam)) <= 1e-12 * max(1.0, np.max(np.abs(lam))):
        raise PassivityError("symmetrizer is singular", "signature")
    order = sorted(range(d), key=lambda j: (lam[j] > 0, -lam[j]))
    lam, V = lam[order], V[:, order]
    for j in range(d):
        # sign convention: last entry that is not negligible is positive
        i = max(np.flatnonzero(np.abs(V[:, j]) > 1e-9))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    w = np.abs(lam)
    G = Ri @ V @ np.diag(w ** -0.5)
    Gi = np.diag(w ** 0.5) @ V.T @ R
    ss = StateSpace(Gi @ f.A @ G, Gi @ f.B, f.C @ G, f.D)
    Sigma = np.diag(np.sign(lam))
    Y = np.block([[-ss.A, -ss.B], [ss.C, ss.D]])
    ymin = _sym_min_eig(Y + Y.T)
    scale = _scale(Y)
    if ymin < -PSD_TOL * scale:
        raise PassivityError(f"passivity certificate fails (min eigenvalue {ymin:.3g})", "final")
    if max(sigsym_residuals(ss, Sigma)) > PSD_TOL * scale:
        raise PassivityError("signature symmetry fails", "final")
    return PassiveRealization(SymmetrizedRealization(ss, SignatureCert(Sigma)), R, V, np.diag(w), G, res, ymin)
