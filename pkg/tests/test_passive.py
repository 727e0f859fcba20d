from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import X, bott_duffin, example2, fr, pm
from netgen import random_behavior
from recipsynth import _mat as mx
from recipsynth.passive import (
    EPS_SCHEDULE,
    PassivityError,
    available_energy_gramian,
    back_substitute,
    detectable_witness,
    find_K_detectable,
    find_K_observable,
    gprl2_step,
    lrz_step,
    observable_witness,
    omega_matrix,
    passive_sigsym_realize,
    ppst_pipeline,
    riccati_residual,
)
from recipsynth.polymat import det
from recipsynth.realize import StateSpace
from recipsynth.sigsym import augment, sigsym_residuals
from recipsynth.synth import reduce_singular_q, split_improper

TOL = 1e-8


def _min_eig(m) -> float:
    m = mx.to_float(m) if mx.is_exact(m) else np.asarray(m, dtype=float)
    return float(np.min(np.linalg.eigvalsh((m + m.T) / 2))) if m.size else 0.0


def _scalar(a, b, c, d) -> StateSpace:
    return StateSpace(fr([[a]]), fr([[b]]), fr([[c]]), fr([[d]]))


def _example2_stage():
    split = reduce_singular_q(example2())
    _, Pt, Qt = split_improper(split.P11, split.Q11)
    return Pt, Qt


# ---------------------------------------------------------------- Riccati data


def test_riccati_residual_formula():
    ss = _scalar(-1, 1, 1, 1)
    data = riccati_residual(ss, fr([[2]]))
    # -2kA - (kC - B)^2 / 2 with k = 2
    assert data.Upsilon[0, 0] == 4 - F(1, 2)
    assert data.AUps[0, 0] == -1 - F(1, 2) * (1 - 2)


def test_omega_matrix_shape_and_symmetry():
    b = bott_duffin()
    ss = augment(b.P, b.Q).ss
    om = omega_matrix(ss, mx.eye(4))
    assert om.shape == (5, 5)
    assert np.array_equal(om, om.T)


def test_scalar_available_storage():
    K = available_energy_gramian(_scalar(-1, 1, 1, 1))
    assert abs(float(K[0, 0]) - (3 - 2 * np.sqrt(2))) < 1e-12


def test_available_storage_of_static_gain_is_zero():
    K = available_energy_gramian(_scalar(0, 0, 0, 1))
    assert float(K[0, 0]) == 0


def test_available_storage_needs_invertible_feedthrough():
    with pytest.raises(PassivityError):
        available_energy_gramian(_scalar(-1, 1, 1, 0))


# ---------------------------------------------------------------- observable witness


def test_observable_witness_scalar():
    ss = _scalar(-1, 1, 1, 1)
    w = observable_witness(ss)
    assert abs(float(w.K1[0, 0]) - (3 + 2 * np.sqrt(2))) < 1e-9
    assert abs(float(w.Kminus[0, 0]) - (3 - 2 * np.sqrt(2))) < 1e-9
    assert w.eps == EPS_SCHEDULE[0] == F(1, 4)


def _assert_storage_bounds(ss, w):
    for K in (w.K1, w.Kminus):
        data = riccati_residual(ss, K)
        assert _min_eig(data.Upsilon) >= -TOL
    Am = riccati_residual(ss, w.Kminus).AUps
    assert np.max(np.linalg.eigvals(mx.to_float(Am)).real) <= TOL
    data = riccati_residual(ss, w.K)
    assert _min_eig(w.K) > 0 and _min_eig(data.Upsilon) >= -TOL


def test_observable_witness_bott_duffin_block():
    b = bott_duffin()
    ss = augment(b.P, b.Q).ss
    sub = StateSpace(ss.A[:3, :3], ss.B[:3], ss.C[:, :3], ss.D)
    w = observable_witness(sub)
    assert w.eps == F(1, 4)
    assert np.array_equal(w.K1, fr([[F(1, 4), F(-1, 4), F(-1, 4)], [F(-1, 4), F(5, 4), F(5, 4)],
                                    [F(-1, 4), F(5, 4), F(9, 4)]]))
    assert np.array_equal(w.Kminus, fr([[F(2, 9), F(-1, 9), 0], [F(-1, 9), F(5, 9), 0], [0, 0, 0]]))
    assert np.array_equal(find_K_observable(sub), fr([[11, -7, -3], [-7, 35, 15], [-3, 15, 27]]) / 48)
    _assert_storage_bounds(sub, w)


def test_observable_witness_rejects_unobservable():
    ss = StateSpace(fr([[-1, 0], [0, -2]]), fr([[1], [1]]), fr([[1, 0]]), fr([[1]]))
    with pytest.raises(PassivityError, match="not observable"):
        observable_witness(ss)


# ---------------------------------------------------------------- detectable witness


def test_detectable_witness_bott_duffin():
    b = bott_duffin()
    ss = augment(b.P, b.Q).ss
    w = detectable_witness(ss)
    assert w.k == 3
    assert np.array_equal(w.K12, fr([[F(7, 18)], [F(-11, 18)], [F(-1, 2)]]))
    assert w.nabla[0, 0] == F(7, 9)
    assert w.K[3, 3] == F(16, 9)
    data = riccati_residual(ss, w.K)
    assert _min_eig(w.K) > 0
    assert _min_eig(data.Upsilon) >= -TOL


def test_detectable_witness_rejects_undetectable():
    ss = StateSpace(fr([[-1, 0], [0, 1]]), fr([[1], [1]]), fr([[1, 0]]), fr([[1]]))
    with pytest.raises(PassivityError, match="not detectable"):
        find_K_detectable(ss)


# ---------------------------------------------------------------- reduction steps


def test_example2_reduction_chain():
    Pt, Qt = _example2_stage()
    res = ppst_pipeline(Pt, Qt)
    assert [s.kind for s in res.trace] == ["lrz", "lrz", "gprl2"]
    assert [s.dims for s in res.trace] == [(2, 1, 1), (2, 1, 1), (1, 1, 1)]
    assert all(s.K[0, 0] == 1 for s in res.trace[:2])
    Pl, Ql = res.levels[-1]
    assert Pl == Ql == pm([[X + 1]])


def test_lrz_step_example2():
    Pt, Qt = _example2_stage()
    step, P2, Q2 = lrz_step(Pt, Qt)
    assert step.kind == "lrz"
    assert det(Q2).deg < det(Qt).deg
    assert P2 == pm([[1, -1], [0, X + 1]])
    assert Q2 == pm([[0, -X], [X + 1, X * X + 2 * X + 1]])


def test_gprl2_step_example2():
    Pt, Qt = _example2_stage()
    for _ in range(2):
        _, Pt, Qt = lrz_step(Pt, Qt)
    step, P4, Q4 = gprl2_step(Pt, Qt)
    assert np.array_equal(step.T, fr([[1, 1], [0, -1]]))
    assert P4 == Q4 == pm([[X + 1]])


def _check_level(ss, Xs, S):
    om = omega_matrix(ss, Xs)
    scale = max(1.0, float(np.max(np.abs(mx.to_float(om)))))
    assert _min_eig(om) >= -TOL * scale
    A, B, C = (mx.to_float(m) if mx.is_exact(m) else m for m in (ss.A, ss.B, ss.C))
    Sf = mx.to_float(S) if mx.is_exact(S) else S
    assert np.max(np.abs(Sf @ A - A.T @ Sf), initial=0.0) <= TOL * scale
    assert np.max(np.abs(Sf @ B - C.T), initial=0.0) <= TOL * scale


def test_back_substitution_invariants_every_level():
    Pt, Qt = _example2_stage()
    res = ppst_pipeline(Pt, Qt)
    aug = augment(*res.levels[-1])
    ss, Xs, S = aug.ss, mx.inv(res.base.K), aug.S
    _check_level(ss, Xs, S)
    for step in reversed(res.trace):
        ss, Xs, S = back_substitute(step, ss, Xs, S)
        _check_level(ss, Xs, S)
    assert np.array_equal(Xs, res.X)


def _reduction_stages(seed):
    _, b = random_behavior(np.random.default_rng(seed), max_ports=3, max_elements=6)
    split = reduce_singular_q(b)
    if not split.r:
        return None
    _, Pt, Qt = split_improper(split.P11, split.Q11)
    return Pt, Qt


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_lrz_decreases_degree(seed):
    stage = _reduction_stages(seed)
    if stage is None:
        return
    try:
        res = ppst_pipeline(*stage)
    except PassivityError:
        return
    for step, (P0, Q0), (P1, Q1) in zip(res.trace, res.levels, res.levels[1:]):
        if step.kind == "lrz":
            assert det(Q1).deg < det(Q0).deg
        else:
            assert P1.rows < P0.rows or det(Q1).deg <= det(Q0).deg


# ---------------------------------------------------------------- passive realization


def test_passive_realize_bott_duffin():
    b = bott_duffin()
    pr = passive_sigsym_realize(b.P, b.Q)
    assert pr.pipeline.trace == []
    assert np.array_equal(pr.Sigma, np.diag([-1.0, -1.0, 1.0, 1.0]))
    q = 4 / 617 ** 0.25
    assert np.allclose(pr.ss.B.ravel(), [1, q, -1, q], atol=1e-9)
    assert np.allclose(pr.ss.C, pr.ss.B.T @ pr.Sigma, atol=1e-9)
    r = np.sqrt(617)
    assert np.allclose(np.diag(pr.W), [1, (r + 13) / 32, 1, (r - 13) / 32], atol=1e-9)
    assert pr.psd_min_eig >= -TOL
    assert max(sigsym_residuals(pr.ss, pr.Sigma)) < TOL


def test_passive_realize_resistor_is_static():
    pr = passive_sigsym_realize(pm([[1]]), pm([[1]]))
    assert pr.ss.d == 0
    assert pr.ss.D[0, 0] == 1


def test_passive_realize_inductor_like():
    # i = v / (xi + 1): a resistor in series with an inductor, as an admittance
    pr = passive_sigsym_realize(pm([[1]]), pm([[X + 1]]))
    assert pr.ss.d == 1
    Y = np.block([[-pr.ss.A, -pr.ss.B], [pr.ss.C, pr.ss.D]])
    assert _min_eig(Y + Y.T) >= -TOL


def test_passive_realize_example2():
    Pt, Qt = _example2_stage()
    pr = passive_sigsym_realize(Pt, Qt)
    assert pr.psd_min_eig >= -TOL
    assert max(sigsym_residuals(pr.ss, pr.Sigma)) < TOL
    for s in (0.7 + 0.3j, 2.0, 1 - 1.5j):
        want = np.linalg.solve(Qt.to_numpy(s), Pt.to_numpy(s))
        assert np.max(np.abs(pr.ss.transfer_at(s) - want)) < 1e-8


def test_passive_realize_rejects_negative_resistor():
    with pytest.raises(PassivityError):
        passive_sigsym_realize(pm([[-1]]), pm([[X + 1]]))


def test_defective_axis_spectrum_regression():
    # equal extremal storages put a Jordan block of A_Upsilon on the axis; the
    # float eigenvalue smear (about 4e-8) used to reject a valid certificate
    from recipsynth.synth import Netlist, netlist_behavior, synthesize, verify_netlist

    net = Netlist([("n1", "n0"), ("n3", "n4"), ("n3", "n1"), ("n5", "n1")])
    for kind, a, b, v in [("C", "n0", "n2", 1), ("R", "n2", "n3", F(1, 2)), ("R", "n3", "n5", 1),
                          ("R", "n5", "n4", 3), ("R", "n4", "n1", 1), ("L", "n0", "n4", F(1, 2)),
                          ("R", "n1", "n3", 1)]:
        net.add(kind, a, b, v)
    b = netlist_behavior(net)
    res = synthesize(b)
    assert res.success, res.report
    assert verify_netlist(res.netlist, b)
