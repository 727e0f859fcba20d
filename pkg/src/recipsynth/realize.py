"""State-space realizations of ``Phat(d/dt) u = Qhat(d/dt) y``.

A realization comes with a polynomial certificate

    [Y Z; U V] [-D I -C; -B 0 xi I - A] = [-Phat Qhat 0; -E -F G]

where the left factor is unimodular and G is nonsingular. Eliminating the
state from such a system gives back exactly the behavior of (Phat, Qhat),
not merely its transfer function.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg as sla

from . import _mat as mx
from .polymat import (
    Poly,
    PolyMat,
    PolyMatError,
    det,
    frac_inv,
    is_unimodular,
    row_proper_form,
    upper_echelon,
)

__all__ = [
    "StateSpace",
    "RealizationCertificate",
    "RealizationError",
    "realize",
    "verify_certificate",
    "equivalent_realizations",
    "eliminate",
    "state_kernel_rep",
    "staircase_controller",
    "staircase_observer",
    "observable_reduction",
    "transfer_equal",
]

TOL_EQ = 1e-9


class RealizationError(ValueError):
    pass


@dataclass(frozen=True)
class StateSpace:
    """``dx/dt = A x + B u``, ``y = C x + D u``.

    Matrices are exact (object arrays of Fraction) or float arrays.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        n = np.shape(self.D)[0] if np.ndim(self.D) == 2 else 1
        d = np.shape(self.A)[0] if np.ndim(self.A) == 2 else 0
        A = mx.as_matrix(self.A, d, d)
        B = mx.as_matrix(self.B, d, n)
        C = mx.as_matrix(self.C, n, d)
        D = mx.as_matrix(self.D, n, n)
        A, B, C, D = mx.unify(A, B, C, D)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.D.shape[0]

    @property
    def exact(self) -> bool:
        return mx.is_exact(self.A)

    def to_float(self) -> "StateSpace":
        return StateSpace(mx.to_float(self.A), mx.to_float(self.B), mx.to_float(self.C), mx.to_float(self.D))

    def transform(self, T: np.ndarray, Tinv: np.ndarray | None = None) -> "StateSpace":
        """Change of state basis ``x = T z``."""
        Tinv = mx.inv(T) if Tinv is None else Tinv
        return StateSpace(Tinv @ self.A @ T, Tinv @ self.B, self.C @ T, self.D)

    def transfer_at(self, s: complex) -> np.ndarray:
        A, B, C, D = (mx.to_float(m) for m in (self.A, self.B, self.C, self.D))
        if self.d == 0:
            return D.astype(complex)
        return D + C @ np.linalg.solve(s * np.eye(self.d) - A, B)

    def markov(self, count: int) -> list[np.ndarray]:
        out = []
        v = self.B
        for _ in range(count):
            out.append(self.C @ v)
            v = self.A @ v
        return out

    def to_json(self) -> dict:
        return {"A": mx.fmt(self.A), "B": mx.fmt(self.B), "C": mx.fmt(self.C), "D": mx.fmt(self.D)}

    @classmethod
    def from_json(cls, data) -> "StateSpace":
        if not isinstance(data, dict) or not {"A", "B", "C", "D"} <= set(data):
            raise ValueError("state-space JSON needs A, B, C and D")
        D = data["D"]
        n = len(D)
        A = data["A"]
        d = len(A)
        B = data["B"] if d else np.zeros((0, n), dtype=object)
        C = data["C"] if d else np.zeros((n, 0), dtype=object)
        return cls(np.array(A, dtype=object).reshape(d, d), np.array(B, dtype=object).reshape(d, n),
                   np.array(C, dtype=object).reshape(n, d), np.array(D, dtype=object).reshape(n, n))


@dataclass(frozen=True)
class RealizationCertificate:
    Y: PolyMat
    Z: PolyMat
    U: PolyMat
    V: PolyMat
    E: PolyMat
    F: PolyMat
    G: PolyMat


# ---------------------------------------------------------------- realization


def _polymat_of(m: np.ndarray) -> PolyMat:
    return PolyMat.const(m.tolist(), m.shape[0], m.shape[1])


def state_kernel_rep(ss: StateSpace) -> PolyMat:
    """``[-D I -C; -B 0 xi I - A]`` acting on ``col(u, y, x)`` (exact systems only)."""
    if not ss.exact:
        raise RealizationError("an exact polynomial representation needs rational matrices")
    n, d = ss.n, ss.d
    xi_a = PolyMat([[Poly((-ss.A[i, j], int(i == j))) for j in range(d)] for i in range(d)], d, d)
    top = PolyMat.hstack(-_polymat_of(ss.D), PolyMat.identity(n), -_polymat_of(ss.C))
    bot = PolyMat.hstack(-_polymat_of(ss.B), PolyMat.zeros(d, n), xi_a)
    return PolyMat.vstack(top, bot)


def realize(phat: PolyMat, qhat: PolyMat) -> tuple[StateSpace, RealizationCertificate]:
    """Observer-form realization of ``Qhat^{-1} Phat`` keeping every uncontrollable mode."""
    n = qhat.rows
    if not qhat.is_square() or phat.shape != qhat.shape:
        raise RealizationError("Phat and Qhat must be square and of equal size")
    if det(qhat).is_zero():
        raise RealizationError("Qhat is singular")
    qbar, u, uinv, k, q_hr = row_proper_form(qhat)
    pbar = u @ phat
    if any(pd > kd for pd, kd in zip(pbar.row_degrees(), k)):
        raise RealizationError("Qhat^{-1} Phat is not proper")
    p_hr = [[pbar.entries[i][j].coeff(k[i]) for j in range(n)] for i in range(n)]
    qinv = frac_inv(q_hr)
    D = [[sum((qinv[i][r] * p_hr[r][j] for r in range(n)), Fraction(0)) for j in range(n)] for i in range(n)]
    pst = pbar - qbar @ PolyMat.const(D, n, n)

    # controller form of the right fraction pst^T (qbar^T)^{-1}, then transpose
    idx = []
    for j in range(n):
        idx.extend((j, i) for i in range(k[j]))
    d = len(idx)
    start = {}
    for pos, (j, i) in enumerate(idx):
        start.setdefault(j, pos)
    dlc = mx.zeros(n, d)
    nlc = mx.zeros(n, d)
    for pos, (j, i) in enumerate(idx):
        for r in range(n):
            dlc[r, pos] = qbar.entries[j][r].coeff(i)
            nlc[r, pos] = pst.entries[j][r].coeff(i)
    dhc_inv = np.array(frac_inv([list(r) for r in zip(*q_hr)]), dtype=object).reshape(n, n) if n else mx.zeros(0, 0)
    a0 = mx.zeros(d, d)
    b0 = mx.zeros(d, n)
    for pos, (j, i) in enumerate(idx):
        if i < k[j] - 1:
            a0[pos, pos + 1] = Fraction(1)
        else:
            b0[pos, j] = Fraction(1)
    ac = a0 - b0 @ dhc_inv @ dlc
    bc = b0 @ dhc_inv
    ss = StateSpace(ac.T.copy(), nlc.T.copy(), bc.T.copy(), np.array(D, dtype=object).reshape(n, n))

    psi_t = PolyMat([[Poly.xi(idx[c][1]) if idx[c][0] == r else Poly() for c in range(d)] for r in range(n)], n, d)
    z = uinv @ psi_t
    top = PolyMat.hstack(qhat, z)
    w, e, winv = upper_echelon(top.T, with_inverse=True)
    if e != PolyMat.vstack(PolyMat.identity(n), PolyMat.zeros(d, n)):
        raise AssertionError("internal: [Qhat Z] is not left prime")
    full = winv.T
    lower = full.sub(range(n, n + d), range(n + d))
    ucert = lower.sub(range(d), range(n))
    vcert = lower.sub(range(d), range(n, n + d))
    rep = state_kernel_rep(ss)
    prod = lower @ rep
    cert = RealizationCertificate(
        Y=qhat,
        Z=z,
        U=ucert,
        V=vcert,
        E=-prod.sub(range(d), range(n)),
        F=-prod.sub(range(d), range(n, 2 * n)),
        G=prod.sub(range(d), range(2 * n, 2 * n + d)),
    )
    return ss, cert


def verify_certificate(ss: StateSpace, cert: RealizationCertificate, phat: PolyMat, qhat: PolyMat) -> bool:
    n, d = ss.n, ss.d
    try:
        left = PolyMat.block([[cert.Y, cert.Z], [cert.U, cert.V]])
        target = PolyMat.block(
            [[-phat, qhat, PolyMat.zeros(n, d)], [-cert.E, -cert.F, cert.G]]
        )
    except PolyMatError:
        return False
    if left.shape != (n + d, n + d) or cert.G.shape != (d, d):
        return False
    if not is_unimodular(left) or det(cert.G).is_zero():
        return False
    if ss.exact:
        return left @ state_kernel_rep(ss) == target
    # floating check at a few sample points
    for s in (0.3 + 0.7j, -1.1 + 0.2j, 2.0, 0.5j):
        lhs = left.to_numpy(s)
        A, B, C, D = (mx.to_float(m) for m in (ss.A, ss.B, ss.C, ss.D))
        rep = np.block([[-D, np.eye(n), -C], [-B, np.zeros((d, n)), s * np.eye(d) - A]])
        if np.max(np.abs(lhs @ rep - target.to_numpy(s)), initial=0.0) > TOL_EQ * max(1.0, np.max(np.abs(rep))):
            return False
    return True


# ---------------------------------------------------------------- equivalence


def transfer_equal(s1: StateSpace, s2: StateSpace, rtol: float = 1e-8) -> bool:
    if s1.n != s2.n:
        return False
    if s1.exact and s2.exact:
        if not np.array_equal(s1.D, s2.D):
            return False
        count = s1.d + s2.d
        return all(np.array_equal(a, b) for a, b in zip(s1.markov(count), s2.markov(count)))
    f1, f2 = s1.to_float(), s2.to_float()
    if not np.allclose(f1.D, f2.D, rtol=rtol, atol=rtol):
        return False
    radius = 1.0
    for s in (f1, f2):
        if s.d:
            radius = max(radius, 1.5 * float(np.max(np.abs(np.linalg.eigvals(s.A)))) + 1.0)
    count = 2 * max(f1.d, f2.d) + 1
    for k in range(count):
        s = radius * np.exp(1j * np.pi * (k + 0.5) / count)
        h1, h2 = f1.transfer_at(s), f2.transfer_at(s)
        if np.max(np.abs(h1 - h2)) > rtol * max(1.0, np.max(np.abs(h1))):
            return False
    return True


def _obs_stack(ss: StateSpace, count: int) -> np.ndarray:
    blocks = []
    v = ss.C
    for _ in range(count):
        blocks.append(v)
        v = v @ ss.A
    if not blocks:
        return mx.zeros(0, ss.d, ss.exact)
    return np.vstack(blocks)


def _intertwines(src: StateSpace, dst: StateSpace) -> bool:
    """Is there T with ``src.C src.A^i T = dst.C dst.A^i`` for i = 0..src.d?"""
    count = src.d + 1
    o1 = _obs_stack(src, count)
    o2 = _obs_stack(dst, count)
    if src.exact and dst.exact:
        return mx.solve(o1, o2) is not None
    o1, o2 = mx.to_float(o1), mx.to_float(o2)
    if o1.shape[1] == 0:
        return float(np.max(np.abs(o2), initial=0.0)) < TOL_EQ
    t = np.linalg.lstsq(o1, o2, rcond=None)[0]
    res = float(np.max(np.abs(o1 @ t - o2), initial=0.0))
    return res < TOL_EQ * max(1.0, float(np.max(np.abs(o2), initial=0.0)))


def equivalent_realizations(s1: StateSpace, s2: StateSpace) -> bool:
    """Do the two systems have the same external behavior?"""
    if s1.n != s2.n or not transfer_equal(s1, s2):
        return False
    if s1.exact != s2.exact:
        s1, s2 = s1.to_float(), s2.to_float()
    return _intertwines(s1, s2) and _intertwines(s2, s1)


# ---------------------------------------------------------------- elimination


def eliminate(rhat: PolyMat, n1: int) -> PolyMat:
    """Kernel representation of the projection onto the first ``n1`` variables.

    Rows of ``rhat`` are combined unimodularly until the columns of the
    eliminated variables are compressed to a full row rank block; the rows
    that no longer involve those variables form the result.
    """
    if not 0 <= n1 <= rhat.cols:
        raise PolyMatError("n1 out of range")
    w2 = rhat.sub(range(rhat.rows), range(n1, rhat.cols))
    w, e = upper_echelon(w2)
    full = w @ rhat
    keep = [i for i in range(rhat.rows) if all(x.is_zero() for x in e.entries[i])]
    return full.sub(keep, range(n1))


# ---------------------------------------------------------------- staircase forms


def _exact_controllable_basis(A: np.ndarray, B: np.ndarray) -> tuple[list[np.ndarray], list[int]]:
    """Krylov vectors ``A^j b_i`` kept when independent, scanned input by input per power."""
    d = A.shape[0]
    basis: list[np.ndarray] = []
    chain_of: list[int] = []
    frontier = [(i, B[:, i]) for i in range(B.shape[1])]
    while frontier and len(basis) < d:
        nxt = []
        for i, v in frontier:
            cand = basis + [v]
            if mx.rank(np.column_stack(cand)) == len(cand):
                basis.append(v)
                chain_of.append(i)
                nxt.append((i, A @ v))
        frontier = nxt
    return basis, chain_of


def _complement(basis: np.ndarray, d: int) -> np.ndarray:
    cols = [basis[:, j] for j in range(basis.shape[1])]
    extra = []
    for j in range(d):
        e = mx.zeros(d, 1)[:, 0]
        e[j] = Fraction(1)
        cand = cols + extra + [e]
        if mx.rank(np.column_stack(cand)) == len(cand):
            extra.append(e)
    return np.column_stack(extra) if extra else mx.zeros(d, 0)


def _exact_controller(ss: StateSpace) -> tuple[StateSpace, np.ndarray, int]:
    d = ss.d
    vecs, chains = _exact_controllable_basis(ss.A, ss.B)
    k = len(vecs)
    if k and set(chains) == {chains[0]}:
        # single chain: controller companion basis t_k = b, t_{j} = A t_{j+1} + a_j b
        b = vecs[0]
        krylov = np.column_stack(vecs)
        coef = mx.solve(krylov, (ss.A @ vecs[-1]).reshape(d, 1))[:, 0]  # A^k b = sum c_i A^i b
        a = [-c for c in coef]
        cols = [None] * k
        cols[k - 1] = b
        for j in range(k - 2, -1, -1):
            cols[j] = ss.A @ cols[j + 1] + a[j + 1] * b
        ctrl = np.column_stack(cols)
    elif k:
        ctrl = np.column_stack(vecs)
    else:
        ctrl = mx.zeros(d, 0)
    comp = _complement(ctrl, d)
    T = np.hstack([ctrl, comp]) if d else mx.zeros(0, 0)
    out = ss.transform(T)
    m = d - k
    if k and m:
        a11, a12, a22 = out.A[:k, :k], out.A[:k, k:], out.A[k:, k:]
        # decouple with A11 X - X A22 = -A12 when the spectra are disjoint
        kron = np.kron(mx.eye(m), a11) - np.kron(a22.T, mx.eye(k))
        rhs = (-a12).T.reshape(-1, 1)  # column-major vec
        sol = mx.solve(kron, rhs) if mx.rank(kron) == k * m else None
        if sol is not None:
            X = sol[:, 0].reshape(m, k).T
            S = mx.eye(d)
            S[:k, k:] = X
            T = T @ S
            out = ss.transform(T)
    if m:
        # scale each uncontrollable direction so its first nonzero output gain is 1
        S = mx.eye(d)
        for j in range(k, d):
            col = out.C[:, j]
            nz = next((v for v in col if v != 0), None)
            if nz is not None:
                S[j, j] = 1 / nz
        T = T @ S
        out = ss.transform(T)
    return out, T, k


def _float_controller(ss: StateSpace) -> tuple[StateSpace, np.ndarray, int]:
    A, B = mx.to_float(ss.A), mx.to_float(ss.B)
    d = A.shape[0]
    ref = max(np.linalg.norm(A), np.linalg.norm(B), 1.0)
    V = np.zeros((d, 0))
    W = B
    while V.shape[1] < d:
        W = W - V @ (V.T @ W)
        new = mx.orth_range(W, ref)
        if new.shape[1] == 0:
            break
        new = new - V @ (V.T @ new)
        new, _ = np.linalg.qr(new)
        V = np.hstack([V, new])
        W = A @ new
    k = V.shape[1]
    comp = sla.null_space(V.T) if k < d else np.zeros((d, 0))
    T = np.hstack([V, comp])
    return ss.to_float().transform(T, T.T), T, k


def staircase_controller(ss: StateSpace) -> tuple[StateSpace, np.ndarray, int]:
    """Controller staircase ``A = [[A11, A12], [0, A22]]``, ``B = col(B1, 0)``.

    Returns the transformed system, the basis T (``new = T^{-1} old T``) and
    the controllable dimension. Float systems get an orthogonal basis from
    pivoted QR. Exact systems get an exact basis: a companion basis for a
    single-input chain, the uncontrollable block decoupled by a Sylvester
    solve when possible and scaled to unit output gain.
    """
    if ss.d == 0:
        return ss, mx.zeros(0, 0, ss.exact), 0
    return _exact_controller(ss) if ss.exact else _float_controller(ss)


def _dual(ss: StateSpace) -> StateSpace:
    return StateSpace(ss.A.T.copy(), ss.C.T.copy(), ss.B.T.copy(), ss.D.T.copy())


def staircase_observer(ss: StateSpace) -> tuple[StateSpace, np.ndarray, int]:
    """Observer staircase ``A = [[A11, 0], [A21, A22]]``, ``C = [C1 0]``; dual of the controller form."""
    if ss.d == 0:
        return ss, mx.zeros(0, 0, ss.exact), 0
    dual, T, k = staircase_controller(_dual(ss))
    S = mx.inv(T).T.copy() if ss.exact else T
    return ss.transform(S) if ss.exact else ss.to_float().transform(S, S.T), S, k


def observable_reduction(ss: StateSpace) -> StateSpace:
    """Drop the unobservable part; the external behavior is unchanged."""
    obs, _, k = staircase_observer(ss)
    return StateSpace(obs.A[:k, :k], obs.B[:k, :], obs.C[:, :k], obs.D)
