"""Acceptance criteria, one PASS/FAIL line each.

Run ``pytest -v -s tests/test_acceptance.py`` to see the lines; tolerances
are pinned in TOLERANCES below and echoed in every line.
"""
import os
import subprocess
import sys
import time
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import GOLDEN, X, bott_duffin, example2, fr, gyrator, pm
from golden_payloads import PAYLOADS, render
from netgen import random_behavior
from recipsynth import _mat as mx
from recipsynth.behavior import Behavior, check_positive_real_pair, check_reciprocity, check_reciprocity_image, image_representation
from recipsynth.passive import (
    back_substitute,
    detectable_witness,
    lrz_step,
    omega_matrix,
    passive_sigsym_realize,
    ppst_pipeline,
    riccati_residual,
)
from recipsynth.polymat import PolyMat, det, is_unimodular, same_left_row_space
from recipsynth.realize import StateSpace, equivalent_realizations, realize, staircase_controller, transfer_equal
from recipsynth.sigsym import augment, sigsym_residuals
from recipsynth.synth import reduce_singular_q, split_improper, synthesize, verify_netlist

TOLERANCES = {
    "float_rel": 1e-9,    # criterion 1 floating comparisons
    "runtime_1": 1.0,     # seconds, criteria 1 and 2
    "residual": 1e-8,     # criterion 3 signature-symmetry residuals
    "psd": -1e-8,         # criterion 3 lower bound on certificate eigenvalues
    "runtime_3": 60.0,    # seconds, criterion 3
}
SEED = 20240601
RANDOM_CASES = 50

h = F(1, 2)


def line(criterion: str, ok: bool, detail: str) -> None:
    sys.__stdout__.write(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}\n")
    sys.__stdout__.flush()


def _rel(a, b) -> float:
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _kr(P: PolyMat, Q: PolyMat) -> PolyMat:
    return PolyMat.hstack(P, -Q)


# ---------------------------------------------------------------- criterion 1


REF_K1 = fr([[1, -1, -1], [-1, 5, 5], [-1, 5, 9]]) / 4
REF_KMINUS = fr([[2, -1, 0], [-1, 5, 0], [0, 0, 0]]) / 9
REF_K = fr([[11, -7, -3], [-7, 35, 15], [-3, 15, 27]]) / 48
REF_K12T = fr([[7, -11, -9]]) / 18
REF_NABLA = F(1, 2)
REF_KHAT = np.array([
    [F(11, 48), F(-7, 48), F(-1, 16), F(7, 18)],
    [F(-7, 48), F(35, 48), F(5, 16), F(-11, 18)],
    [F(-1, 16), F(5, 16), F(9, 16), F(-1, 2)],
    [F(7, 18), F(-11, 18), F(-1, 2), F(16, 9)],
], dtype=object)
REF_SHAT = fr([[-3, -3, 0, 0], [-3, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])


def _psi(nabla: F, aug_ss: StateSpace, K11: np.ndarray, K12t: np.ndarray) -> F:
    """Independent evaluation of the Lyapunov-type map for the scalar unobservable block."""
    A, B, C, D = aug_ss.A, aug_ss.B, aug_ss.C, aug_ss.D
    a11, a22, b1, b2, c1 = A[:3, :3], A[3, 3], B[:3], B[3:], C[:, :3]
    ri = F(1) / (2 * D[0, 0])
    ups = -K11 @ a11.T - a11 @ K11 - (K11 @ c1.T - b1) @ (c1 @ K11 - b1.T) * ri
    Ki = mx.inv(K11)
    g = b2 - K12t @ Ki @ b1
    return -2 * a22 * nabla - (K12t @ Ki @ ups @ Ki @ K12t.T)[0, 0] - (g @ g.T)[0, 0] * ri


def test_criterion_1_bott_duffin():
    b = bott_duffin()
    t0 = time.perf_counter()
    ss, _ = realize(b.P, b.Q)
    st, _, k = staircase_controller(ss)
    aug = augment(b.P, b.Q)
    w = detectable_witness(aug.ss)
    pr = passive_sigsym_realize(b.P, b.Q)
    elapsed = time.perf_counter() - t0
    ow = w.observable

    checks = {
        "staircase A~/B~/C~/D": (np.array_equal(st.A, fr([[0, 1, 0], [-4, -1, 0], [0, 0, -1]]))
                                 and np.array_equal(st.B, fr([[0], [1], [0]]))
                                 and np.array_equal(st.C, fr([[-3, 0, 1]]))
                                 and np.array_equal(st.D, fr([[1]])) and k == 2),
        "K1": np.array_equal(ow.K1, REF_K1),
        "K-": np.array_equal(ow.Kminus, REF_KMINUS),
        "K = (3K- + K1)/4": (ow.eps == F(1, 4) and np.array_equal(ow.K, REF_K)
                             and np.array_equal((3 * REF_KMINUS + REF_K1) / 4, REF_K)),
        "K12^T": np.array_equal(w.K12.T, REF_K12T),
        "K^": np.array_equal(w.K, REF_KHAT),
        "S^": np.array_equal(aug.S, REF_SHAT),
    }
    Sigma = np.diag([-1.0, -1.0, 1.0, 1.0])
    q = 4 / 617 ** 0.25
    r = np.sqrt(617)
    Bf = np.array([[1.0], [q], [-1.0], [q]])
    checks["Sigma_i"] = np.array_equal(pr.Sigma, Sigma)
    checks["B"] = _rel(pr.ss.B, Bf) < TOLERANCES["float_rel"]
    checks["C = B^T Sigma_i"] = _rel(pr.ss.C, Bf.T @ Sigma) < TOLERANCES["float_rel"]
    checks["W eigenvalues"] = _rel(sorted(np.diag(pr.W)), sorted([1, 1, (r + 13) / 32, (r - 13) / 32])) < TOLERANCES["float_rel"]
    checks["runtime"] = elapsed < TOLERANCES["runtime_1"]
    for name, ok in checks.items():
        line("1", bool(ok), f"{name} (exact rational equality)" if name[0] in "sKS" else
             f"{name} (rel tol {TOLERANCES['float_rel']:g})" if name != "runtime" else
             f"runtime {elapsed:.3f} s < {TOLERANCES['runtime_1']:g} s")
    assert all(checks.values()), [n for n, ok in checks.items() if not ok]


def test_criterion_1_nabla_reference_value():
    """The reference nabla = 1/2 conflicts with the reference K^; the computed value is 7/9."""
    b = bott_duffin()
    aug = augment(b.P, b.Q)
    w = detectable_witness(aug.ss)
    K11, K12t = REF_K, REF_K12T
    base = (K12t @ mx.inv(K11) @ K12t.T)[0, 0]
    implied = REF_KHAT[3, 3] - base
    psi_half, psi_ours = _psi(REF_NABLA, aug.ss, K11, K12t), _psi(w.nabla[0, 0], aug.ss, K11, K12t)
    ok = w.nabla[0, 0] == REF_NABLA
    line("1", ok, f"nabla = 1/2 expected; computed {w.nabla[0, 0]}. Reference K^ corner 16/9 = "
                  f"{base} + nabla forces nabla = {implied}; Psi(1/2) = {psi_half} < 0 violates the "
                  f"inequality, Psi({w.nabla[0, 0]}) = {psi_ours}. Kept {w.nabla[0, 0]} (see decisions ledger)")
    # the analysis itself must hold even though the reference value is rejected
    assert implied == w.nabla[0, 0] == F(7, 9)
    assert psi_half < 0 and psi_ours == 0
    if not ok:
        pytest.xfail("reference nabla = 1/2 is inconsistent with the reference K^ and with Psi >= 0")


# ---------------------------------------------------------------- criterion 2


REF_T = fr([[1, 0, 0], [0, 1, 0], [-1, -1, 1]])
REF_YHAT = pm([[0, 0, -1], [-X * X - 1, -h * X - h, 0], [1 - X, -h, 0]])
REF_P1 = pm([[h * X * X + X + h, h], [-X**3 - X * X - X - 1, -X - 1]])
REF_Q1 = pm([[h * X * X + F(3, 2) * X + F(3, 2), -1], [-X**3 - 2 * X * X - 2 * X - 1, 0]])
REF_P2 = pm([[h * X * X + F(3, 2) * X + F(3, 2), -1 - h * X], [-X**3 - 2 * X * X - 2 * X - 1, X * X + X]])
REF_P3 = pm([[h * X * X + X + h, h * X * X + X + h], [-X**3 - X * X - X - 1, -X**3 - X * X - X - 1]])
REF_THAT = fr([[1, 1], [0, -1]])
REF_W = pm([[1 - X, -h], [-2 * X * X - 2, -1 - X]])


def test_criterion_2_example2():
    b = example2()
    t0 = time.perf_counter()
    split = reduce_singular_q(b)
    K, Pt, Qt = split_improper(split.P11, split.Q11)
    res = ppst_pipeline(Pt, Qt)
    elapsed = time.perf_counter() - t0
    n = b.n
    Tp = PolyMat.const(REF_T.tolist(), n, n)
    Tpit = PolyMat.const(mx.inv(REF_T).T.tolist(), n, n)
    ref_identity = (REF_YHAT @ PolyMat.diag(REF_P1, PolyMat.identity(1)) @ Tp == b.P
                        and REF_YHAT @ PolyMat.diag(REF_Q1, PolyMat.zeros(1, 1)) @ Tpit == b.Q)
    steps = res.trace
    (P2, Q2), (P3, Q3), (P4, Q4) = res.levels[1:4]
    That = PolyMat.const(REF_THAT.tolist(), 2, 2)
    Thit = PolyMat.const(mx.inv(REF_THAT).T.tolist(), 2, 2)
    P3p, Q3p = REF_P3, REF_P2
    ref_w = (REF_W @ P3p @ That == pm([[X + 1, 0], [0, 0]])
                 and REF_W @ Q3p @ Thit == pm([[X + 1, 1], [0, -2]]))
    checks = {
        "T1, T2 (exact)": np.array_equal(split.T, REF_T),
        "Y^ unimodular, factorization exact (reference Y^ differs by normalization)":
            is_unimodular(split.Yhat) and split.check(b) and ref_identity,
        "P1, Q1 (same_left_row_space)": same_left_row_space(_kr(split.P11, split.Q11), _kr(REF_P1, REF_Q1)),
        "trace lrz, lrz, gprl2": [s.kind for s in steps] == ["lrz", "lrz", "gprl2"],
        "K = 1 at both lrz steps (exact)": all(np.array_equal(s.K, fr([[1]])) for s in steps[:2]),
        "P2 (same_left_row_space)": same_left_row_space(_kr(P2, Q2), _kr(REF_P2, REF_P1)),
        "P3 (same_left_row_space)": same_left_row_space(_kr(P3, Q3), _kr(REF_P3, REF_P2)),
        "T^ (exact)": np.array_equal(steps[2].T, REF_THAT),
        "W unimodular; reference W reproduces diag(P4, 0) and [[Q4, 1], [0, -2]]":
            is_unimodular(steps[2].W) and is_unimodular(REF_W) and ref_w,
        "P4 = Q4 = xi + 1 (exact)": P4 == Q4 == pm([[X + 1]]),
        "runtime": elapsed < TOLERANCES["runtime_1"],
    }
    for name, ok in checks.items():
        line("2", bool(ok), name if name != "runtime" else f"runtime {elapsed:.3f} s < {TOLERANCES['runtime_1']:g} s")
    assert all(checks.values()), [n for n, ok in checks.items() if not ok]


# ---------------------------------------------------------------- criterion 3


def test_criterion_3_random_certificates():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    failures, worst_res, worst_eig = [], 0.0, np.inf
    for case in range(RANDOM_CASES):
        _, b = random_behavior(rng, max_ports=4, max_elements=8)
        res = synthesize(b)
        if not res.success or not verify_netlist(res.netlist, b):
            failures.append(case)
            continue
        if res.realization is not None:
            pr = res.realization
            worst_res = max(worst_res, max(sigsym_residuals(pr.ss, pr.Sigma), default=0.0))
            worst_eig = min(worst_eig, pr.psd_min_eig)
    elapsed = time.perf_counter() - t0
    ok = (not failures and worst_res < TOLERANCES["residual"] and worst_eig >= TOLERANCES["psd"]
          and elapsed < TOLERANCES["runtime_3"])
    line("3", ok, f"{RANDOM_CASES - len(failures)}/{RANDOM_CASES} synthesized and verified (seed {SEED}); "
                  f"max residual {worst_res:.2e} < {TOLERANCES['residual']:g}; min eig {worst_eig:.2e} >= "
                  f"{TOLERANCES['psd']:g}; {elapsed:.1f} s < {TOLERANCES['runtime_3']:g} s")
    assert ok, failures


# ---------------------------------------------------------------- criterion 4


def test_criterion_4_negatives():
    gy = synthesize(gyrator()).report
    nr_rep = check_positive_real_pair(Behavior(1, pm([[-1]]), pm([[1]])))
    nr = synthesize(Behavior(1, pm([[-1]]), pm([[1]]))).report
    s1 = StateSpace(fr([[-1]]), fr([[0]]), fr([[1]]), fr([[1]]))
    s2 = StateSpace(fr([[0]]), fr([[0]]), fr([[1]]), fr([[1]]))
    checks = {
        "gyrator: diagnosis 'not reciprocal'": gy["diagnosis"] == "not reciprocal" and not check_reciprocity(gyrator()),
        "P = -1, Q = 1: 'not passive' at condition (a), witness lambda = 1":
            nr["diagnosis"] == "not passive" and nr["stage"] == "positive-real condition (a)"
            and nr_rep.condA.verdict == "fail" and nr_rep.condA.witness == 1,
        "(-1,0,1,1) vs (0,0,1,1): same transfer, declared inequivalent":
            transfer_equal(s1, s2) and not equivalent_realizations(s1, s2),
    }
    for name, ok in checks.items():
        line("4", bool(ok), name)
    assert all(checks.values())


# ---------------------------------------------------------------- criterion 5


def _walk_levels(res) -> bool:
    """Every back-substituted level realizes its (P_k, Q_k) and keeps both certificates."""
    if not res.trace:
        return True
    ss = res.base_ss
    if res.base is None:  # reduction ended at an empty level
        Xs = S = mx.zeros(0, 0)
    else:
        Xs, S = mx.inv(res.base.K), augment(*res.levels[-1]).S
    for k in range(len(res.trace) - 1, -1, -1):
        ss, Xs, S = back_substitute(res.trace[k], ss, Xs, S)
        P, Q = res.levels[k]
        f = ss.to_float()
        if f.d == 0:
            continue
        for s in (0.7 + 0.3j, 1.9 - 1.1j, 2.5):
            want = np.linalg.solve(Q.to_numpy(s), P.to_numpy(s))
            if np.max(np.abs(f.transfer_at(s) - want)) > 1e-8 * max(1.0, np.max(np.abs(want), initial=0.0)):
                return False
        om = mx.to_float(omega_matrix(ss, Xs)) if mx.is_exact(Xs) and ss.exact else omega_matrix(ss, Xs)
        if np.min(np.linalg.eigvalsh((om + om.T) / 2)) < -1e-8 * max(1.0, np.max(np.abs(om))):
            return False
        Sf = mx.to_float(S) if mx.is_exact(S) else S
        if np.max(np.abs(Sf @ f.A - f.A.T @ Sf), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(f.A))):
            return False
    return True


def test_criterion_5_properties():
    from test_behavior import random_small_behavior

    recip = all(check_reciprocity(b) == check_reciprocity_image(image_representation(b))
                for b in map(random_small_behavior, range(100)))
    line("5", recip, "check_reciprocity <=> check_reciprocity_image on 100 random behaviors")

    rng = np.random.default_rng(SEED + 1)
    lrz_cases, lrz_ok, walked, walk_ok = 0, True, 0, True
    while lrz_cases < 50:
        _, b = random_behavior(rng, max_ports=4, max_elements=8)
        split = reduce_singular_q(b)
        if not split.r:
            continue
        _, Pt, Qt = split_improper(split.P11, split.Q11)
        res = ppst_pipeline(Pt, Qt)
        for step, (P0, Q0), (P1, Q1) in zip(res.trace, res.levels, res.levels[1:]):
            if step.kind == "lrz" and lrz_cases < 50:
                lrz_cases += 1
                lrz_ok &= det(Q1).deg < det(Q0).deg
        if res.trace:
            walked += 1
            walk_ok &= _walk_levels(res)
    line("5", lrz_ok, f"lrz_step strictly decreases deg det Q on {lrz_cases} random instances")
    line("5", walk_ok, f"back_substitute keeps behavior and certificates at every level of {walked} random traces")

    b = bott_duffin()
    ss, _ = realize(b.P, b.Q)
    st, _, _ = staircase_controller(ss)
    sub = StateSpace(st.A, st.B, st.C, st.D)
    eig = [float(np.min(np.linalg.eigvalsh(mx.to_float(riccati_residual(sub, K).Upsilon))))
           for K in (REF_K1, REF_KMINUS)]
    ups_ok = min(eig) >= -1e-12
    line("5", ups_ok, f"Upsilon(K1), Upsilon(K-) PSD on the golden system (min eig {min(eig):.2e})")
    assert recip and lrz_ok and walk_ok and ups_ok


# ---------------------------------------------------------------- criterion 6


def test_criterion_6_golden_bytes():
    here = os.path.dirname(os.path.abspath(__file__))
    code = ("import sys; sys.path.insert(0, %r); from golden_payloads import PAYLOADS, render; "
            "sys.stdout.write(''.join(render(n) for n in sorted(PAYLOADS)))" % here)
    env = dict(os.environ, PYTHONHASHSEED="12345")
    fresh = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, env=env, check=True).stdout
    stored = ""
    for name in sorted(PAYLOADS):
        with open(os.path.join(GOLDEN, name), newline="") as fh:
            stored += fh.read()
    in_proc = "".join(render(n) for n in sorted(PAYLOADS))
    ok = stored == in_proc == fresh
    line("6", ok, f"golden JSON byte equality for {', '.join(sorted(PAYLOADS))} (in-process and fresh interpreter)")
    assert ok
