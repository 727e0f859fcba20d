"""Signature-symmetric realizations.

A realization is signature-symmetric when ``A Sigma = Sigma A^T`` and
``Sigma C^T = B`` for a diagonal ``Sigma`` of signs. For a controllable and
observable core the symmetrizing matrix is unique; an uncontrollable part is
handled by appending a mirrored copy of it that is invisible at the output.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _mat as mx
from .polymat import PolyMat
from .realize import RealizationError, StateSpace, observable_reduction, realize, staircase_controller

__all__ = [
    "SignatureCert",
    "SymmetrizedRealization",
    "AugmentedSystem",
    "SymmetrizerError",
    "symmetrizer",
    "signature_factor",
    "augment",
    "sigsym_realize",
    "sigsym_residuals",
]

SYM_TOL = 1e-9
EIG_FLOOR = 1e-10


class SymmetrizerError(RealizationError):
    pass


@dataclass(frozen=True)
class SignatureCert:
    Sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.Sigma, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or not np.array_equal(np.abs(s), np.eye(s.shape[0])):
            raise ValueError("Sigma must be a diagonal matrix of signs")
        object.__setattr__(self, "Sigma", s)

    @property
    def signs(self) -> list[int]:
        return [int(v) for v in np.diag(self.Sigma)]


@dataclass(frozen=True)
class SymmetrizedRealization:
    ss: StateSpace
    cert: SignatureCert

    def to_json(self) -> dict:
        out = self.ss.to_json()
        out["Sigma"] = self.cert.signs
        return out


@dataclass(frozen=True)
class AugmentedSystem:
    """Staircase realization with its mirrored uncontrollable block and symmetrizer ``S``."""

    ss: StateSpace
    S: np.ndarray
    P: np.ndarray
    staircase: StateSpace
    k: int


def _ctrb(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    blocks, v = [], B
    for _ in range(A.shape[0]):
        blocks.append(v)
        v = A @ v
    return np.hstack(blocks)


def _obsv(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    blocks, v = [], C
    for _ in range(A.shape[0]):
        blocks.append(v)
        v = v @ A
    return np.vstack(blocks)


def _maxabs(m: np.ndarray) -> float:
    return float(np.max(np.abs(mx.to_float(m)), initial=0.0))


def symmetrizer(ss: StateSpace) -> np.ndarray:
    """The unique symmetric ``P`` with ``P A = A^T P`` and ``P B = C^T`` on a minimal system."""
    d = ss.d
    if d == 0:
        return mx.zeros(0, 0, ss.exact)
    vc = _ctrb(ss.A, ss.B)
    vo = _obsv(ss.A, ss.C)
    if mx.rank(vc) < d:
        raise SymmetrizerError("(A, B) is not controllable")
    if mx.rank(vo) < d:
        raise SymmetrizerError("(C, A) is not observable")
    P = vo.T @ vc.T @ mx.inv(vc @ vc.T)
    scale = max(1.0, _maxabs(P))
    if ss.exact:
        ok = np.array_equal(P, P.T) and np.array_equal(P @ vc, vo.T)
    else:
        ok = _maxabs(P - P.T) < SYM_TOL * scale and _maxabs(P @ vc - vo.T) < SYM_TOL * scale * max(1.0, _maxabs(vo))
    if not ok:
        raise SymmetrizerError("transfer function is not symmetric")
    return P


def signature_factor(P: np.ndarray) -> tuple[np.ndarray, SignatureCert]:
    """``P = T^T Sigma T`` from the eigendecomposition of ``P``.

    Eigenpairs are ordered by the position of each eigenvector's dominant
    entry (positive eigenvalues first on ties), and each eigenvector is
    signed so that entry is positive; a diagonal ``P`` gives a diagonal ``T``.
    """
    P = mx.to_float(P)
    n = P.shape[0]
    if n == 0:
        return np.zeros((0, 0)), SignatureCert(np.zeros((0, 0)))
    if np.max(np.abs(P - P.T)) > SYM_TOL * max(1.0, np.max(np.abs(P))):
        raise SymmetrizerError("P is not symmetric")
    lam, E = np.linalg.eigh((P + P.T) / 2)
    if np.min(np.abs(lam)) <= EIG_FLOOR * max(1.0, np.max(np.abs(lam))):
        raise SymmetrizerError("P is numerically singular")
    lead = [int(np.argmax(np.abs(E[:, j]) + 1e-12 * np.arange(n)[::-1])) for j in range(n)]
    order = sorted(range(n), key=lambda j: (lead[j], -lam[j], j))
    lam, E = lam[order], E[:, order]
    for j in range(n):
        if E[lead[order[j]], j] < 0:
            E[:, j] = -E[:, j]
    T = np.diag(np.sqrt(np.abs(lam))) @ E.T
    return T, SignatureCert(np.diag(np.sign(lam)))


def augment(phat: PolyMat, qhat: PolyMat) -> AugmentedSystem:
    """Observable staircase realization plus a mirrored uncontrollable block.

    The result ``(A, B, C, D)`` has the block form
    ``A = [[A11, A12, 0], [0, A22, 0], [A12^T P, 0, A22^T]]``,
    ``B = col(B1, 0, C2^T)``, ``C = [C1 C2 0]`` and satisfies
    ``S A = A^T S``, ``S B = C^T`` with ``S = diag(P, [[0, I], [I, 0]])``.
    """
    ss, _ = realize(phat, qhat)
    if ss.exact and not np.array_equal(ss.D, ss.D.T):
        raise SymmetrizerError("transfer function is not symmetric")
    st, _, k = staircase_controller(observable_reduction(ss))
    exact = st.exact
    d, n = st.d, st.n
    m = d - k
    a11, a12, a22 = st.A[:k, :k], st.A[:k, k:], st.A[k:, k:]
    b1 = st.B[:k, :]
    c1, c2 = st.C[:, :k], st.C[:, k:]
    P = symmetrizer(StateSpace(a11, b1, c1, st.D))
    z = lambda r, c: mx.zeros(r, c, exact)  # noqa: E731
    A = np.block([[a11, a12, z(k, m)], [z(m, k), a22, z(m, m)], [a12.T @ P, z(m, m), a22.T]]) if d else z(0, 0)
    B = np.vstack([b1, z(m, n), c2.T]) if d else z(0, n)
    C = np.hstack([c1, c2, z(n, m)]) if d else z(n, 0)
    swap = np.block([[z(m, m), mx.eye(m, exact)], [mx.eye(m, exact), z(m, m)]]) if m else z(0, 0)
    S = np.block([[P, z(k, 2 * m)], [z(2 * m, k), swap]]) if d else z(0, 0)
    return AugmentedSystem(StateSpace(A, B, C, st.D), S, P, st, k)


def sigsym_residuals(ss: StateSpace, Sigma: np.ndarray) -> tuple[float, float, float]:
    """``(|A Sigma - Sigma A^T|, |Sigma C^T - B|, |D - D^T|)`` in the max norm."""
    f = ss.to_float()
    S = np.asarray(Sigma, dtype=float)
    return (
        _maxabs(f.A @ S - S @ f.A.T),
        _maxabs(S @ f.C.T - f.B),
        _maxabs(f.D - f.D.T),
    )


def sigsym_realize(phat: PolyMat, qhat: PolyMat) -> SymmetrizedRealization:
    aug = augment(phat, qhat)
    k, d = aug.k, aug.ss.d
    m = (d - k) // 2
    R, sig = signature_factor(aug.P)
    h = 1 / math.sqrt(2)
    T = np.zeros((d, d))
    T[:k, :k] = R
    if m:
        I = np.eye(m)
        T[k:, k:] = np.block([[h * I, -h * I], [h * I, h * I]])
    Sigma = np.zeros((d, d))
    Sigma[:k, :k] = sig.Sigma
    Sigma[k:k + m, k:k + m] = -np.eye(m)
    Sigma[k + m:, k + m:] = np.eye(m)
    f = aug.ss.to_float()
    Tinv = np.linalg.inv(T) if d else T
    out = StateSpace(T @ f.A @ Tinv, T @ f.B, f.C @ Tinv, f.D)
    res = sigsym_residuals(out, Sigma)
    scale = max(1.0, _maxabs(out.A), _maxabs(out.B))
    if max(res) >= SYM_TOL * scale:
        raise SymmetrizerError(f"signature symmetry residual {max(res):.3g}")
    return SymmetrizedRealization(out, SignatureCert(Sigma))
