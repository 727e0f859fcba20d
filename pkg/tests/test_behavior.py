from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import X, bott_duffin, example2, gyrator, pm
from test_polymat import unimodular
from recipsynth.behavior import (
    DEFAULT_GRID,
    Behavior,
    ImageRep,
    check_positive_real_pair,
    check_reciprocity,
    check_reciprocity_image,
    image_representation,
    is_controllable,
    is_strictly_hurwitz,
    partition_to_proper_symmetric,
    sample_grid,
)
from recipsynth.polymat import Poly, PolyMat, PolyMatError, is_unimodular, normalrank, smith_form


def scalar(p, q) -> Behavior:
    return Behavior(1, pm([[p]]), pm([[q]]))


# ---------------------------------------------------------------- construction


def test_rank_condition_enforced():
    with pytest.raises(PolyMatError):
        Behavior(1, pm([[0]]), pm([[0]]))


def test_json_round_trip(bd):
    assert Behavior.from_json(bd.to_json()) == bd


# ---------------------------------------------------------------- reciprocity


def test_reciprocity_examples(bd, ex2):
    assert check_reciprocity(bd)
    assert not check_reciprocity(gyrator())
    assert check_reciprocity(ex2)


def test_reciprocity_image_examples():
    m = pm([[X + 2, 1], [1, X]])
    assert check_reciprocity_image(ImageRep(m, m))
    assert check_reciprocity_image(ImageRep(pm([[X * X + 1]]), pm([[X + 1]])))
    assert not check_reciprocity_image(image_representation(gyrator()))


def random_small_behavior(seed: int) -> Behavior:
    """Seeded draw of a 1- or 2-port behavior; about half are reciprocal by construction."""
    rng = np.random.default_rng(seed)

    def entry():
        return Poly([int(c) for c in rng.integers(-2, 3, size=int(rng.integers(1, 4)))])

    n = int(rng.integers(1, 3))
    while True:
        if rng.random() < 0.5:
            S = PolyMat([[entry() for _ in range(n)] for _ in range(n)], n, n)
            P, Q = S + S.T, PolyMat.identity(n)
        else:
            P = PolyMat([[entry() for _ in range(n)] for _ in range(n)], n, n)
            Q = PolyMat([[entry() for _ in range(n)] for _ in range(n)], n, n)
        if normalrank(PolyMat.hstack(P, -Q)) == n:
            return Behavior(n, P, Q)


def behaviors():
    return st.integers(0, 2**32 - 1).map(random_small_behavior)


@settings(max_examples=100)
@given(behaviors())
def test_reciprocity_image_equivalence(b):
    assert check_reciprocity(b) == check_reciprocity_image(image_representation(b))


@given(behaviors(), unimodular())
def test_reciprocity_invariant_under_unimodular(b, u):
    if b.n != 2:
        return
    assert check_reciprocity(b) == check_reciprocity(Behavior(2, u @ b.P, u @ b.Q))


# ---------------------------------------------------------------- controllability and image


def test_controllability_examples(bd):
    assert is_controllable(scalar(1, 1))
    assert not is_controllable(bd)
    assert is_controllable(scalar(X + 1, X + 2))


def test_image_representation_examples(ex2):
    im = image_representation(scalar(1, 1))
    assert im.M == im.N and im.M.entries[0][0].is_const()
    im = image_representation(scalar(X + 1, X * X + 1))
    c = im.M.entries[0][0].lc
    assert im.M == pm([[(X * X + 1) * c]]) and im.N == pm([[(X + 1) * c]])
    im = image_representation(ex2)
    assert (ex2.P @ im.M - ex2.Q @ im.N).is_zero()
    assert all(s.is_const() for s in smith_form(PolyMat.vstack(im.M, im.N)).invariants)


# ---------------------------------------------------------------- proper symmetric split


def _bounded_at_infinity(Phat, Qhat):
    for s in (1e3, 1e4, 1e6):
        g = np.linalg.solve(Qhat.to_numpy(s), Phat.to_numpy(s))
        assert np.linalg.norm(g) < 1e3


def _check_split(b, sp):
    n = b.n
    T = PolyMat.vstack(sp.T1, sp.T2)
    assert sorted(sum(map(list, T.const_value()), [])).count(1) == n
    assert (sp.Phat @ sp.Qhat.T - sp.Qhat @ sp.Phat.T).is_zero()
    _bounded_at_infinity(sp.Phat, sp.Qhat)


def test_split_trivial_when_already_proper():
    b = scalar(X + 2, X + 1)
    sp = partition_to_proper_symmetric(b)
    assert sp.r == 1 and sp.T2.rows == 0
    assert sp.Phat == b.P and sp.Qhat == b.Q


def test_split_swaps_improper_scalar():
    sp = partition_to_proper_symmetric(scalar(X * X + 1, X + 1))
    assert sp.r == 0 and sp.T1.rows == 0
    assert sp.T2 == pm([[1]])
    assert sp.Phat == pm([[X + 1]])
    assert sp.Qhat == pm([[-(X * X + 1)]])
    _check_split(scalar(X * X + 1, X + 1), sp)


def test_split_example2(ex2):
    sp = partition_to_proper_symmetric(ex2)
    _check_split(ex2, sp)


@given(behaviors())
def test_split_invariants(b):
    if not check_reciprocity(b):
        return
    _check_split(b, partition_to_proper_symmetric(b))


# ---------------------------------------------------------------- positive-real pair


def test_hurwitz():
    assert is_strictly_hurwitz((X + 1) * (X * X + X + 1))
    assert not is_strictly_hurwitz(X * X + 1)
    assert not is_strictly_hurwitz((X - 1) * (X + 2))
    assert is_strictly_hurwitz(Poly.const(3))


def test_grid_defaults():
    assert len(DEFAULT_GRID) == 24
    assert DEFAULT_GRID[0] == 1
    assert all(z.real > 0 for z in DEFAULT_GRID)
    assert sample_grid(24) == DEFAULT_GRID
    with pytest.raises(ValueError):
        sample_grid(0)


def test_pr_resistor():
    assert check_positive_real_pair(scalar(1, 1)).overall == "pass"


def test_pr_negative_resistor():
    rep = check_positive_real_pair(scalar(-1, 1))
    assert rep.overall == "fail"
    assert rep.condA.verdict == "fail"
    assert rep.condA.witness == 1


def test_pr_bott_duffin(bd):
    rep = check_positive_real_pair(bd)
    assert rep.overall == "pass"
    assert rep.condB.verdict == "pass" and rep.condC.verdict == "pass"


def test_pr_unstable_uncontrollable_mode():
    # (xi - 1) i = (xi - 1) v: resistor with an unstable hidden mode
    rep = check_positive_real_pair(scalar(X - 1, X - 1))
    assert rep.condB.verdict == "fail"
    assert abs(rep.condB.witness - 1) < 1e-9


def test_pr_axis_mode_fails_condition_b():
    # xi i = xi v hides a mode at 0
    assert check_positive_real_pair(scalar(X, X)).condB.verdict == "fail"


def test_pr_lossless_with_hidden_stable_mode_fails_condition_c():
    # a capacitor times (xi + 1): Phi vanishes identically and the kernel meets the hidden mode
    rep = check_positive_real_pair(scalar(X + 1, (X + 1) * X))
    assert rep.condB.verdict == "pass"
    assert rep.condC.verdict == "fail"
    assert rep.overall == "fail"


def test_pr_without_confirmation_is_inconclusive(bd):
    rep = check_positive_real_pair(bd, confirm=False)
    assert rep.overall == "inconclusive"
    assert rep.condA.verdict == "inconclusive"


def test_pr_report_json(bd):
    js = check_positive_real_pair(scalar(-1, 1)).to_json()
    assert js["condA"]["witness"] == [1.0, 0.0]
    assert js["overall"] == "fail"
