import os
import sys
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from recipsynth.behavior import Behavior
from recipsynth.polymat import Poly, PolyMat

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow], derandomize=True)
settings.load_profile("ci")

X = Poly.xi()
DATA = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data")
GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def pm(rows) -> PolyMat:
    return PolyMat([[Poly.coerce(e) for e in r] for r in rows])


def fr(rows) -> np.ndarray:
    return np.array([[F(v) for v in r] for r in rows], dtype=object)


def bott_duffin() -> Behavior:
    return Behavior(1, pm([[(X + 1) * (X * X + X + 1)]]), pm([[(X + 1) * (X * X + X + 4)]]))


def example2() -> Behavior:
    P = pm([[1, 1, -1], [0, X, 0], [X + 1, 1, 0]])
    Q = pm([[0, 0, 0], [-1, X * X + 1, X * X], [X + 2, X - 1, 2 * X + 1]])
    return Behavior(3, P, Q)


def gyrator() -> Behavior:
    return Behavior(2, pm([[1, 0], [0, 1]]), pm([[0, 1], [-1, 0]]))


@pytest.fixture
def bd():
    return bott_duffin()


@pytest.fixture
def ex2():
    return example2()
