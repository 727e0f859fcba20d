"""Random small RLCT netlists with rational values, for round-trip tests."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

from recipsynth.synth import Netlist, NetlistError, netlist_behavior

VALUES = (Fraction(1, 2), Fraction(1), Fraction(2), Fraction(3))


def random_netlist(rng: np.random.Generator, max_ports: int = 4, max_elements: int = 8) -> Netlist:
    n = int(rng.choice([1, 1, 2, 2, 3, 4][: 2 + 2 * max_ports - 2]))
    n = min(n, max_ports)
    nodes = [f"n{k}" for k in range(n + int(rng.integers(1, 3)))]
    net = Netlist([tuple(rng.choice(nodes, 2, replace=False)) for _ in range(n)])
    budget = int(rng.integers(n, max_elements + 1))
    # a spanning chain keeps every node attached
    order = list(rng.permutation(nodes))
    chain = list(zip(order, order[1:]))
    if budget > n and rng.random() < 0.25:
        a, b, c, d = (str(v) for v in rng.choice(nodes, 4, replace=len(nodes) < 4))
        if a != b and c != d and {a, b} != {c, d}:
            turns = [[VALUES[int(rng.integers(len(VALUES)))] * int(rng.choice([-1, 1]))]]
            net.add_transformer(turns, [(a, b)], [(c, d)])
            budget -= 1
    for k in range(budget):
        a, b = chain[k] if k < len(chain) else tuple(rng.choice(nodes, 2, replace=False))
        kind = str(rng.choice(["R", "R", "L", "C"]))
        net.add(kind, str(a), str(b), VALUES[int(rng.integers(len(VALUES)))])
    return net


def random_behavior(rng: np.random.Generator, **kw):
    """Draw until the netlist has a well-defined n-port driving-point behavior."""
    while True:
        net = random_netlist(rng, **kw)
        try:
            return net, netlist_behavior(net)
        except NetlistError:
            continue
