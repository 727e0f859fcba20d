"""RLCT network synthesis and verification.

The driving-point convention throughout: port ``k`` has terminals
``(plus, minus)``, ``v_k = e(plus) - e(minus)`` and ``i_k`` is the current
entering the network at ``plus``. A behavior ``P i = Q v`` therefore has
impedance ``Q^{-1} P`` when ``Q`` is invertible.

Transformer convention: a transformer with turns matrix ``N`` (one row per
secondary port, one column per primary port) imposes
``v_sec = N v_pri`` and ``i_pri = -N^T i_sec``, port currents counted into
the plus terminal. It is lossless and reciprocal.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Sequence

import numpy as np
import scipy.linalg as sla

from . import _mat as mx
from .behavior import Behavior, check_positive_real_pair, check_reciprocity, transfer_limit
from .passive import PassiveRealization, PassivityError, _extend, passive_sigsym_realize
from .polymat import (
    Poly,
    PolyMat,
    PolyMatError,
    det,
    frac_inv,
    frac_rank,
    hermite_form,
    inverse_unimodular,
    is_unimodular,
    normalrank,
    right_syzygy_basis,
    same_left_row_space,
    smith_form,
    upper_echelon,
)
from .realize import eliminate
from .sigsym import SymmetrizedRealization, sigsym_residuals

__all__ = [
    "Element",
    "Netlist",
    "NetlistError",
    "SynthesisError",
    "SingularSplit",
    "Extraction",
    "SynthesisResult",
    "reduce_singular_q",
    "split_improper",
    "extraction_matrices",
    "reactance_extract",
    "assemble_network",
    "synthesize",
    "confirm_passive",
    "netlist_behavior",
    "verify_netlist",
    "verification_report",
    "LAMBDA0",
]

LAMBDA0 = 1
PSD_TOL = 1e-8
VERIFY_TOL = 1e-7
CHOP = 1e-12
KINDS = ("R", "L", "C", "T", "S", "O")
# fixed sample points for the floating verification; no randomness anywhere
SAMPLES = (0.7 + 0.3j, 1.9 - 1.1j, 0.2 + 2.3j, -0.6 + 0.8j, 3.1 + 0.4j, -1.7 - 0.9j, 1.2 + 0.45j)


class NetlistError(ValueError):
    pass


class SynthesisError(ValueError):
    def __init__(self, message: str, stage: str = "", witness=None):
        super().__init__(message)
        self.stage = stage
        self.witness = witness


# ---------------------------------------------------------------- netlist model


def _num(x):
    """Keep rationals exact, everything else becomes a float."""
    if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
        return Fraction(x)
    return float(x)


def _dec(x) -> float:
    return float(f"{float(x):.15g}") + 0.0  # + 0.0 folds -0.0 into 0.0


@dataclass
class Element:
    kind: str
    name: str
    nodes: tuple = ()
    value: Any = None
    turns: np.ndarray | None = None
    primary: tuple = ()
    secondary: tuple = ()

    def to_json(self) -> dict:
        if self.kind == "T":
            return {
                "kind": "T",
                "name": self.name,
                "turns": [[_dec(x) for x in row] for row in self.turns],
                "primary": [list(p) for p in self.primary],
                "secondary": [list(p) for p in self.secondary],
            }
        out = {"kind": self.kind, "name": self.name, "nodes": list(self.nodes)}
        if self.kind in "RLC":
            out["value"] = _dec(self.value)
        return out


class Netlist:
    """Ports given by terminal pairs plus two-terminal elements and multiport transformers."""

    def __init__(self, terminals: Sequence[Sequence[str]] = (), elements: Sequence[Element] = ()):
        self.terminals = [tuple(t) for t in terminals]
        self.elements: list[Element] = []
        self._counts = {k: 0 for k in KINDS}
        self._fresh = 0
        for e in elements:
            self._append(e)

    @classmethod
    def with_ports(cls, n: int) -> "Netlist":
        return cls([(f"P{k + 1}+", f"P{k + 1}-") for k in range(n)])

    @property
    def ports(self) -> int:
        return len(self.terminals)

    @property
    def nodes(self) -> list[str]:
        seen: dict[str, None] = {}
        for pair in self.terminals:
            seen.update(dict.fromkeys(pair))
        for e in self.elements:
            for pair in self._pairs(e):
                seen.update(dict.fromkeys(pair))
        return list(seen)

    @staticmethod
    def _pairs(e: Element) -> list[tuple]:
        return list(e.primary) + list(e.secondary) if e.kind == "T" else [e.nodes]

    def census(self) -> dict[str, int]:
        out = {k: 0 for k in KINDS}
        for e in self.elements:
            out[e.kind] += 1
        return out

    def fresh(self, stem: str = "n") -> str:
        self._fresh += 1
        return f"{stem}{self._fresh}"

    def _append(self, e: Element) -> Element:
        if e.kind not in KINDS:
            raise NetlistError(f"unknown element kind {e.kind!r}")
        if e.kind in "RLC":
            v = e.value
            if not (isinstance(v, (Fraction, int, float)) and math.isfinite(float(v)) and v > 0):
                raise NetlistError(f"{e.kind} value must be a positive number")
        if e.kind == "T":
            t = np.asarray(e.turns, dtype=object)
            if t.shape != (len(e.secondary), len(e.primary)):
                raise NetlistError("turns matrix must be (#secondary x #primary)")
            if not all(math.isfinite(float(x)) for x in t.flat):
                raise NetlistError("turns matrix must be finite")
            e.turns = t
        for pair in self._pairs(e):
            if len(pair) != 2 or pair[0] == pair[1]:
                raise NetlistError(f"{e.kind} needs two distinct terminals per port")
        self._counts[e.kind] += 1
        if not e.name:
            e.name = f"{e.kind}{self._counts[e.kind]}"
        self.elements.append(e)
        return e

    def add(self, kind: str, a: str, b: str, value=None) -> Element:
        v = None if value is None else _num(value)
        return self._append(Element(kind, "", (a, b), v))

    def add_transformer(self, turns, primary: Sequence, secondary: Sequence) -> Element:
        t = np.array([[_num(x) for x in row] for row in np.asarray(turns, dtype=object)], dtype=object)
        t = t.reshape(len(secondary), len(primary))
        return self._append(Element("T", "", (), None, t, tuple(map(tuple, primary)), tuple(map(tuple, secondary))))

    def embed(self, sub: "Netlist", ports: Sequence[Sequence[str]], stem: str = "x") -> None:
        """Copy ``sub`` in, wiring its port terminals to ``ports``; other nodes are renamed."""
        if len(ports) != sub.ports:
            raise NetlistError("port count mismatch while embedding")
        rename: dict[str, str] = {}
        for (a, b), (p, q) in zip(sub.terminals, ports):
            for old, new in ((a, p), (b, q)):
                if rename.setdefault(old, new) != new:
                    raise NetlistError("sub-netlist shares a terminal between ports")
        for node in sub.nodes:
            if node not in rename:
                rename[node] = self.fresh(stem)
        for e in sub.elements:
            if e.kind == "T":
                self.add_transformer(e.turns, [tuple(rename[x] for x in p) for p in e.primary],
                                     [tuple(rename[x] for x in p) for p in e.secondary])
            else:
                self.add(e.kind, rename[e.nodes[0]], rename[e.nodes[1]], e.value)

    def is_rational(self) -> bool:
        for e in self.elements:
            vals = list(e.turns.flat) if e.kind == "T" else ([e.value] if e.kind in "RLC" else [])
            if not all(isinstance(v, Fraction) for v in vals):
                return False
        return True

    # ------------------------------------------------------------ serialization

    def to_json(self) -> dict:
        return {
            "ports": self.ports,
            "terminals": [list(t) for t in self.terminals],
            "nodes": self.nodes,
            "elements": [e.to_json() for e in self.elements],
        }

    @classmethod
    def from_json(cls, data) -> "Netlist":
        try:
            n = int(data["ports"])
            terminals = data.get("terminals") or [[f"P{k + 1}+", f"P{k + 1}-"] for k in range(n)]
            if len(terminals) != n:
                raise NetlistError("terminals must list one pair per port")
            net = cls(terminals)
            for raw in data["elements"]:
                kind = raw["kind"]
                if kind == "T":
                    e = net.add_transformer([[float(x) for x in row] for row in raw["turns"]],
                                            raw["primary"], raw["secondary"])
                else:
                    a, b = raw["nodes"]
                    e = net.add(kind, a, b, float(raw["value"]) if kind in "RLC" else None)
                if raw.get("name"):
                    e.name = str(raw["name"])
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, NetlistError):
                raise
            raise NetlistError(f"malformed netlist: {exc}") from exc
        return net

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def to_text(self) -> str:
        lines = [f"* {self.ports}-port RLCT netlist"]
        for k, (a, b) in enumerate(self.terminals):
            lines.append(f"* port {k + 1}: {a} {b}")
        for e in self.elements:
            if e.kind == "T":
                pri = " ".join(f"({a},{b})" for a, b in e.primary)
                sec = " ".join(f"({a},{b})" for a, b in e.secondary)
                rows = "; ".join(" ".join(f"{_dec(x):.15g}" for x in row) for row in e.turns)
                lines.append(f"{e.name} pri {pri} sec {sec} turns [{rows}]")
            elif e.kind in "RLC":
                lines.append(f"{e.name} {e.nodes[0]} {e.nodes[1]} {_dec(e.value):.15g}")
            else:
                lines.append(f"{e.name} {e.nodes[0]} {e.nodes[1]}")
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- network equations


def _components(nl: Netlist) -> dict[str, str]:
    """Union-find over every terminal pair; returns node -> representative."""
    parent: dict[str, str] = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = list(nl.terminals)
    for e in nl.elements:
        if e.kind != "O":
            pairs += Netlist._pairs(e)
    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    for node in nl.nodes:
        find(node)
    return {x: find(x) for x in parent}


def _check_connected(nl: Netlist) -> None:
    """Every galvanic component must reach a port, possibly through transformer coupling."""
    comp = _components(nl)
    groups = {comp[x] for x in comp}
    linked = {comp[a] for pair in nl.terminals for a in pair}
    changed = True
    while changed:
        changed = False
        for e in nl.elements:
            if e.kind == "T":
                touched = {comp[a] for pair in Netlist._pairs(e) for a in pair}
                if touched & linked and not touched <= linked:
                    linked |= touched
                    changed = True
    if groups - linked:
        raise NetlistError("disconnected netlist: some elements are not coupled to any port")


def _equations(nl: Netlist):
    """Nodal equations as rows ``{var: (c0, c1)}`` meaning ``sum (c0 + c1 xi) var``.

    Variables: port currents, port voltages, then latent node potentials and
    the currents of inductors, shorts and transformer secondaries. One node
    per galvanic component is grounded and its KCL row dropped.
    """
    _check_connected(nl)
    n = nl.ports
    comp = _components(nl)
    ground = {c for c in comp.values()}
    nodes = [x for x in nl.nodes if x not in ground]
    var = {("i", k): k for k in range(n)}
    var.update({("v", k): n + k for k in range(n)})
    for x in nodes:
        var[("e", x)] = len(var)
    for idx, e in enumerate(nl.elements):
        if e.kind in "LS":
            var[("j", idx)] = len(var)
        elif e.kind == "T":
            for s in range(len(e.secondary)):
                var[("j", idx, s)] = len(var)

    def add(row, key, c0=0, c1=0):
        if key[0] == "e" and key[1] in ground:
            return
        j = var[key]
        a, b = row.get(j, (0, 0))
        row[j] = (a + c0, b + c1)

    kcl = {x: {} for x in nodes}

    def leave(node, key, c0=0, c1=0):
        if node in kcl:
            add(kcl[node], key, c0, c1)

    rows = []
    for k, (p, m) in enumerate(nl.terminals):
        row = {}
        add(row, ("v", k), 1)
        add(row, ("e", p), -1)
        add(row, ("e", m), 1)
        rows.append(row)
        leave(p, ("i", k), -1)
        leave(m, ("i", k), 1)
    for idx, e in enumerate(nl.elements):
        if e.kind in "RC":
            a, b = e.nodes
            g = (1 / e.value, 0) if e.kind == "R" else (0, e.value)
            for node, sgn in ((a, 1), (b, -1)):
                leave(node, ("e", a), sgn * g[0], sgn * g[1])
                leave(node, ("e", b), -sgn * g[0], -sgn * g[1])
        elif e.kind in "LS":
            a, b = e.nodes
            leave(a, ("j", idx), 1)
            leave(b, ("j", idx), -1)
            row = {}
            add(row, ("e", a), 1)
            add(row, ("e", b), -1)
            if e.kind == "L":
                add(row, ("j", idx), 0, -e.value)
            rows.append(row)
        elif e.kind == "T":
            N = e.turns
            for s, (a, b) in enumerate(e.secondary):
                leave(a, ("j", idx, s), 1)
                leave(b, ("j", idx, s), -1)
                row = {}
                add(row, ("e", a), 1)
                add(row, ("e", b), -1)
                for p, (c, d) in enumerate(e.primary):
                    if N[s, p] != 0:
                        add(row, ("e", c), -N[s, p])
                        add(row, ("e", d), N[s, p])
                rows.append(row)
            for p, (c, d) in enumerate(e.primary):
                for s in range(len(e.secondary)):
                    if N[s, p] != 0:
                        leave(c, ("j", idx, s), -N[s, p])
                        leave(d, ("j", idx, s), N[s, p])
    rows += [kcl[x] for x in nodes]
    return len(var), rows


def _exact_system(nl: Netlist) -> PolyMat:
    nvar, rows = _equations(nl)
    ent = [[Poly() for _ in range(nvar)] for _ in rows]
    for r, row in enumerate(rows):
        for j, (c0, c1) in row.items():
            ent[r][j] = Poly([Fraction(c0), Fraction(c1)])
    return PolyMat(ent, len(rows), nvar)


def _float_system(nl: Netlist) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients ``(R0, R1)`` of the nodal equations ``R0 + R1 xi``."""
    nvar, rows = _equations(nl)
    r0 = np.zeros((len(rows), nvar))
    r1 = np.zeros((len(rows), nvar))
    for r, row in enumerate(rows):
        for j, (c0, c1) in row.items():
            r0[r, j] = float(c0)
            r1[r, j] = float(c1)
    return r0, r1


def netlist_behavior(nl: Netlist) -> Behavior:
    """Exact driving-point behavior of a netlist with rational element values."""
    if not nl.is_rational():
        raise NetlistError("exact elimination needs rational element values")
    n = nl.ports
    rep = hermite_form(eliminate(_exact_system(nl), 2 * n))
    if rep.rows != n:
        raise NetlistError(f"driving-point behavior has {rep.rows} independent laws, expected {n}")
    return Behavior(n, rep.sub(range(n), range(n)), -rep.sub(range(n), range(n, 2 * n)))


def _null(m: np.ndarray, tol: float) -> np.ndarray:
    if m.shape[0] == 0:
        return np.eye(m.shape[1], dtype=complex)
    try:
        _, sv, vh = np.linalg.svd(m)
    except np.linalg.LinAlgError:
        _, sv, vh = sla.svd(m, lapack_driver="gesvd")
    ref = max(1.0, sv[0]) if sv.size else 1.0
    rank = int(np.sum(sv > tol * ref))
    return vh[rank:].conj().T


def _exponential_space(system, k: int, s: complex, chain: int, tol: float) -> np.ndarray:
    """Port amplitudes ``w`` with ``w e^{st}`` in the projected behavior.

    Latent variables may need polynomial-exponential trajectories
    ``sum_j l_j t^j/j! e^{st}``; the block Toeplitz system below allows
    chains of the given length.
    """
    r0, r1 = system
    rs = r0 + s * r1
    rw, rl, r1l = rs[:, :k], rs[:, k:], r1[:, k:]
    m, nl = rl.shape
    big = np.zeros(((chain + 1) * m, k + (chain + 1) * nl), dtype=complex)
    big[:m, :k] = rw
    for j in range(chain + 1):
        big[j * m:(j + 1) * m, k + j * nl:k + (j + 1) * nl] = rl
        if j < chain:
            big[j * m:(j + 1) * m, k + (j + 1) * nl:k + (j + 2) * nl] = r1l
    left = _null(big[:, k:].conj().T, tol).conj().T
    return _null(left @ big[:, :k], tol)


def _subspace_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Distance of the orthonormal basis ``b`` from span ``a``; inf on a dimension mismatch."""
    if a.shape[1] != b.shape[1]:
        return math.inf
    if a.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(b - a @ (a.conj().T @ b), 2))


def _uncontrollable_modes(b: Behavior) -> list[complex]:
    sf = smith_form(b.kernel_rep())
    prod = Poly.const(1)
    for s in sf.invariants:
        prod = prod * s
    if prod.deg is None or prod.deg < 1:
        return []
    return [complex(z) for z in np.roots([float(c) for c in reversed(prod.coeffs)])]


def verification_report(nl: Netlist, b: Behavior, tol: float = VERIFY_TOL) -> dict:
    """Compare the driving-point behavior of ``nl`` with ``b``.

    Rational netlists are eliminated exactly and compared by row space.
    Otherwise the spaces of exponential solutions ``w e^{st}`` are compared
    at fixed sample points and at the uncontrollable modes of ``b``; the
    reported gap is the largest subspace distance seen.
    """
    if nl.ports != b.n:
        return {"method": "ports", "verified": False, "gap": math.inf, "tolerance": tol}
    if nl.is_rational():
        rep = eliminate(_exact_system(nl), 2 * b.n)
        ok = same_left_row_space(rep, b.kernel_rep())
        return {"method": "exact", "verified": ok, "gap": 0.0 if ok else math.inf, "tolerance": tol}
    system = _float_system(nl)
    reactive = sum(1 for e in nl.elements if e.kind in "LC")
    gap = 0.0
    for s in list(SAMPLES) + _uncontrollable_modes(b):
        want = _null(b.kernel_rep().to_numpy(s).astype(complex), 1e-9)
        got = _exponential_space(system, 2 * b.n, s, reactive + 1, 1e-9)
        gap = max(gap, _subspace_gap(got, want))
        if gap >= tol:
            break
    return {"method": "sampled", "verified": gap < tol, "gap": gap, "tolerance": tol}


def verify_netlist(nl: Netlist, b: Behavior, tol: float = VERIFY_TOL) -> bool:
    """Does the driving-point behavior of ``nl`` equal ``b``?"""
    return verification_report(nl, b, tol)["verified"]


# ---------------------------------------------------------------- synthesis steps


@dataclass(frozen=True)
class SingularSplit:
    """``[P -Q] = Yhat [diag(P11, I)  -diag(Q11, 0)] diag(T, T^{-T})``."""

    T: np.ndarray
    Yhat: PolyMat
    P11: PolyMat
    Q11: PolyMat

    @property
    def r(self) -> int:
        return self.P11.rows

    @property
    def T1(self) -> np.ndarray:
        return self.T[: self.r]

    @property
    def T2(self) -> np.ndarray:
        return self.T[self.r:]

    def check(self, b: Behavior) -> bool:
        n, r = b.n, self.r
        T = PolyMat.const(self.T.tolist(), n, n)
        Tit = PolyMat.const(frac_inv(self.T.tolist()), n, n).T
        Ph = PolyMat.diag(self.P11, PolyMat.identity(n - r))
        Qh = PolyMat.diag(self.Q11, PolyMat.zeros(n - r, n - r))
        return self.Yhat @ Ph @ T == b.P and self.Yhat @ Qh @ Tit == b.Q


def reduce_singular_q(b: Behavior) -> SingularSplit:
    """Transform away the constant kernel of ``Q``.

    The kernel is read off at ``xi = 1`` and must annihilate ``Q``
    identically. Each kernel vector is scaled so its last nonzero entry is 1.
    """
    n, P, Q = b.n, b.P, b.Q
    r = normalrank(Q) if n else 0
    if r == n:
        eye = np.array([[Fraction(int(i == j)) for j in range(n)] for i in range(n)], dtype=object).reshape(n, n)
        return SingularSplit(eye, PolyMat.identity(n), P, Q)
    W = right_syzygy_basis(Q)
    kern = []
    for j in range(W.cols):
        col = [W.entries[i][j](LAMBDA0) for i in range(n)]
        last = next(c for c in reversed(col) if c != 0)
        kern.append([c / last for c in col])
    W0 = PolyMat.const(kern, n - r, n).T
    if frac_rank(kern) != n - r or not (Q @ W0).is_zero():
        raise SynthesisError("kernel of Q is not constant", "reduce_singular_q", LAMBDA0)
    rows = _extend(kern, n) + kern
    T = np.array(rows, dtype=object).reshape(n, n)
    Tm = PolyMat.const(rows, n, n)
    Tinv = PolyMat.const(frac_inv(rows), n, n)
    Y, E, Yinv = upper_echelon(Q @ Tm.sub(range(r), range(n)).T, with_inverse=True)
    Qh = Y @ Q @ Tm.T
    Ph = Y @ P @ Tinv
    top, bot = range(r), range(r, n)
    if not Qh.sub(bot, range(n)).is_zero() or not Qh.sub(top, bot).is_zero():
        raise SynthesisError("Q does not compress to its nonsingular block", "reduce_singular_q")
    if not Ph.sub(bot, top).is_zero():
        raise SynthesisError("P does not decouple from the kernel of Q", "reduce_singular_q")
    p22 = Ph.sub(bot, bot)
    if not is_unimodular(p22):
        raise SynthesisError("P restricted to the kernel of Q is not unimodular", "reduce_singular_q")
    Yhat = Yinv @ PolyMat.block([[PolyMat.identity(r), Ph.sub(top, bot)], [PolyMat.zeros(n - r, r), p22]])
    split = SingularSplit(T, Yhat, Ph.sub(top, top), Qh.sub(top, top))
    if not split.check(b):
        raise SynthesisError("singular split does not reproduce the behavior", "reduce_singular_q")
    return split


def _psd(K: np.ndarray, stage: str) -> None:
    if K.size and not np.array_equal(K, K.T):
        raise SynthesisError("limit is not symmetric", stage)
    if K.size and np.linalg.eigvalsh(mx.to_float(K))[0] < -1e-12:
        raise SynthesisError("limit is not positive semidefinite", stage, mx.to_float(K))


def split_improper(P11: PolyMat, Q11: PolyMat):
    """``K = lim Q11^{-1} P11 / xi`` and the proper remainder ``(P11 - Q11 K xi, Q11)``."""
    r = P11.rows
    if r == 0:
        return mx.zeros(0, 0), P11, Q11
    try:
        K = np.array(transfer_limit(Q11, P11, 1), dtype=object).reshape(r, r)
    except PolyMatError as exc:
        raise SynthesisError(f"impedance grows faster than xi: {exc}", "split_improper") from exc
    _psd(K, "split_improper")
    Pt = P11 - Q11 @ (PolyMat.const(K.tolist(), r, r) * Poly.xi())
    try:
        transfer_limit(Q11, Pt)
    except PolyMatError as exc:
        raise SynthesisError("remainder is not proper", "split_improper") from exc
    return K, Pt, Q11


# ---------------------------------------------------------------- reactance extraction


def _psd_factor(M: np.ndarray, scale: float) -> np.ndarray:
    """``M = F F^T`` via column-space compression then Cholesky.

    Columns are selected greedily in index order while they enlarge the
    span; ``F = M[:, sel] L^{-T}`` with ``L L^T = M[sel, sel]``.
    """
    M = (M + M.T) / 2
    m = M.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    if np.linalg.eigvalsh(M)[0] < -PSD_TOL * scale:
        raise SynthesisError("reactance matrix is not positive semidefinite", "reactance_extract",
                             float(np.linalg.eigvalsh(M)[0]))
    sel: list[int] = []
    for j in range(m):
        cand = M[:, sel + [j]]
        if np.linalg.matrix_rank(cand, tol=PSD_TOL * scale) == len(sel) + 1:
            sel.append(j)
    if not sel:
        return np.zeros((m, 0))
    L = np.linalg.cholesky(M[np.ix_(sel, sel)])
    return np.linalg.solve(L, M[:, sel].T).T


@dataclass(frozen=True)
class Extraction:
    """Data of the reactance extraction: ``M = [[M11, -M21^T], [M21, M22]]``."""

    M: np.ndarray
    Sigma: np.ndarray
    perm: list[int]
    n: int
    a: int
    b: int
    F11: np.ndarray
    F22: np.ndarray
    M21: np.ndarray


def extraction_matrices(sr: SymmetrizedRealization | PassiveRealization) -> Extraction:
    if isinstance(sr, PassiveRealization):
        sr = sr.realization
    f = sr.ss.to_float()
    signs = sr.cert.signs
    perm = [j for j, s in enumerate(signs) if s < 0] + [j for j, s in enumerate(signs) if s > 0]
    a = sum(1 for s in signs if s < 0)
    A = f.A[np.ix_(perm, perm)]
    B, C, D = f.B[perm, :], f.C[:, perm], f.D
    n, d = f.n, f.d
    M = np.block([[D, C], [-B, -A]]) if d else D.copy()
    Sigma = np.diag([1.0] * (n + a) + [-1.0] * (d - a))
    scale = max(1.0, float(np.max(np.abs(M), initial=0.0)))
    M = _chop(M, scale)
    sm = Sigma @ M
    if np.max(np.abs(sm - sm.T), initial=0.0) > PSD_TOL * scale:
        raise SynthesisError("Sigma M is not symmetric", "reactance_extract")
    h = n + a
    M11, M22 = M[:h, :h], M[h:, h:]
    M21 = (M[h:, :h] - M[:h, h:].T) / 2
    F11, F22 = _chop(_psd_factor(M11, scale), scale), _chop(_psd_factor(M22, scale), scale)
    return Extraction(M, Sigma, perm, n, a, d - a, F11, F22, M21)


def _chop(M: np.ndarray, scale: float) -> np.ndarray:
    """Zero out rounding noise so it does not turn into huge conductances or stray couplings."""
    out = np.array(M, dtype=float)
    out[np.abs(out) < CHOP * scale] = 0.0
    return out


def _is_diagonal(M: np.ndarray) -> bool:
    return M.size == 0 or not np.any(M - np.diag(np.diag(M)))


def _impedance_bank(net: Netlist, ports: list[tuple], M: np.ndarray, F: np.ndarray, kind: str) -> None:
    """Realize ``v = M i`` (times xi for inductors) across ``ports``."""
    if _is_diagonal(M):
        for (p, q), val in zip(ports, np.diag(M)):
            if val > 0:
                net.add(kind, p, q, val)
            else:
                net.add("S", p, q)
        return
    prim = []
    for _ in range(F.shape[1]):
        x, y = net.fresh(), net.fresh()
        net.add(kind, x, y, 1)
        prim.append((x, y))
    net.add_transformer(F, prim, ports)


def _admittance_bank(net: Netlist, ports: list[tuple], M: np.ndarray, F: np.ndarray) -> None:
    """Realize ``i = M v`` across ``ports`` with resistors."""
    if _is_diagonal(M):
        for (p, q), val in zip(ports, np.diag(M)):
            if val > 0:
                net.add("R", p, q, 1 / val)
        return
    sec = []
    for _ in range(F.shape[1]):
        x, y = net.fresh(), net.fresh()
        net.add("R", x, y, 1)
        sec.append((x, y))
    net.add_transformer(F.T, ports, sec)


def reactance_extract(sr: SymmetrizedRealization | PassiveRealization) -> Netlist:
    """Resistor-transformer multiport for ``M`` terminated on unit inductors and capacitors.

    States with signature -1 become inductor currents, the others capacitor
    voltages. Group one (ports and inductors) is current driven: its
    voltage is the series sum of the ``M11`` impedance bank and the ``M21``
    transformer. Group two (capacitors) is voltage driven and sees the
    ``M22`` conductance bank in parallel with the same transformer.
    """
    ex = extraction_matrices(sr)
    net = _resistive_multiport(ex)
    n = ex.n
    g1, g2 = net.terminals[: n + ex.a], net.terminals[n + ex.a:]
    for p, q in g1[n:]:
        net.add("L", p, q, 1)
    for p, q in g2:
        net.add("C", p, q, 1)
    net.terminals = net.terminals[:n]
    return net


def _resistive_multiport(ex: Extraction) -> Netlist:
    """Resistor-transformer network with hybrid matrix ``M``; ports are group one then group two."""
    n, a, b = ex.n, ex.a, ex.b
    net = Netlist.with_ports(n)
    g1 = list(net.terminals) + [(net.fresh("l"), net.fresh("l")) for _ in range(a)]
    g2 = [(net.fresh("c"), net.fresh("c")) for _ in range(b)]
    net.terminals = g1 + g2
    h = n + a
    M11, M22 = ex.M[:h, :h], ex.M[h:, h:]
    has11 = bool(np.any(M11))
    has21 = bool(np.any(ex.M21))
    bank_ports, tr_ports = [], []
    for p, q in g1:
        if has11 and has21:
            mid = net.fresh("m")
            bank_ports.append((p, mid))
            tr_ports.append((mid, q))
        else:
            bank_ports.append((p, q))
            tr_ports.append((p, q))
    if has11:
        _impedance_bank(net, bank_ports, M11, ex.F11, "R")
    elif not has21:
        for p, q in g1:
            net.add("S", p, q)
    if has21:
        net.add_transformer(-ex.M21.T, g2, tr_ports)
    if np.any(M22):
        _admittance_bank(net, g2, M22, ex.F22)
    return net


def assemble_network(b: Behavior, split: SingularSplit, K, core: Netlist) -> Netlist:
    """Transformer ``T``, then per retained port the ``K`` inductor bank in series with the core.

    Ports along the kernel of ``Q`` are left open on the transformer side.
    """
    n, r = b.n, split.r
    if split.T.shape != (n, n) or core.ports != r:
        raise NetlistError("dimension mismatch in network assembly")
    K = np.zeros((r, r)) if K is None or np.size(K) == 0 else np.asarray(K)
    identity = all(split.T[i, j] == (i == j) for i in range(n) for j in range(n))
    if identity and r == n and not np.any(K != 0):
        net = Netlist.with_ports(n)
        net.embed(core, net.terminals, "x")
        return net
    net = Netlist.with_ports(n)
    if identity:
        inner = list(net.terminals)
    else:
        inner = [(net.fresh("t"), net.fresh("t")) for _ in range(n)]
        net.add_transformer(split.T.T, inner, net.terminals)
    core_ports = []
    if np.any(K != 0):
        Kf = mx.to_float(K) if mx.is_exact(K) else K
        mids = [net.fresh("k") for _ in range(r)]
        bank = [(p, m) for (p, _), m in zip(inner[:r], mids)]
        if _is_diagonal(Kf):
            for (p, m), val in zip(bank, np.diag(K)):
                net.add("L", p, m, val) if val != 0 else net.add("S", p, m)
        else:
            scale = max(1.0, float(np.max(np.abs(Kf))))
            _impedance_bank(net, bank, Kf, _psd_factor(Kf, scale), "L")
        core_ports = [(m, q) for m, (_, q) in zip(mids, inner[:r])]
    else:
        core_ports = inner[:r]
    net.embed(core, core_ports, "x")
    return net


# ---------------------------------------------------------------- full pipeline


@dataclass
class SynthesisResult:
    netlist: Netlist | None
    report: dict = field(default_factory=dict)
    split: SingularSplit | None = None
    K: np.ndarray | None = None
    realization: PassiveRealization | None = None

    @property
    def success(self) -> bool:
        return bool(self.report.get("success"))

    def __iter__(self) -> Iterator:
        return iter((self.netlist, self.report))


def _fail(diagnosis: str, stage: str, detail: str, witness=None) -> SynthesisResult:
    if isinstance(witness, complex):
        witness = [witness.real, witness.imag]
    elif isinstance(witness, np.ndarray):
        witness = witness.tolist()
    elif witness is not None and not isinstance(witness, (int, float, str, list)):
        witness = str(witness)
    return SynthesisResult(None, {"success": False, "diagnosis": diagnosis, "stage": stage,
                                  "detail": detail, "witness": witness})


def _core(b: Behavior, observer=None):
    split = reduce_singular_q(b)
    K, Pt, Qt = split_improper(split.P11, split.Q11)
    pr = passive_sigsym_realize(Pt, Qt, observer) if split.r else None
    return split, K, pr


def confirm_passive(b: Behavior) -> bool:
    """True when the constructive passive realization goes through."""
    if not check_reciprocity(b):
        return False
    try:
        _core(b)
    except (PassivityError, SynthesisError, PolyMatError, ValueError):
        return False
    return True


def synthesize(b: Behavior, grid=None, observer=None) -> SynthesisResult:
    if not check_reciprocity(b):
        return _fail("not reciprocal", "reciprocity", "P Q^T differs from Q P^T")
    pr_report = check_positive_real_pair(b, grid=grid, confirm=False)
    for name, cond in (("a", pr_report.condA), ("b", pr_report.condB), ("c", pr_report.condC)):
        if cond.verdict == "fail":
            return _fail("not passive", f"positive-real condition ({name})", cond.detail, cond.witness)
    try:
        split, K, pr = _core(b, observer)
        if pr is None:
            core = Netlist()
        else:
            core = reactance_extract(pr)
        net = assemble_network(b, split, K, core)
    except (PassivityError, SynthesisError) as exc:
        return _fail("not passive", exc.stage or "pipeline", str(exc), exc.witness)
    report = {"success": True, "diagnosis": None, "ports": b.n, "r": split.r,
              "census": net.census(), "K": mx.fmt(K) if np.size(K) else []}
    if pr is not None:
        res = sigsym_residuals(pr.ss, pr.Sigma)
        report.update({
            "states": pr.ss.d,
            "Sigma": pr.realization.cert.signs,
            "sigsymResidual": max(res, default=0.0),
            "passiveMinEig": pr.psd_min_eig,
            "trace": [s.kind for s in pr.pipeline.trace],
        })
    return SynthesisResult(net, report, split, K, pr)
