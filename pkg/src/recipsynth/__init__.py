"""Reciprocal and passive behaviors: realization and RLCT network synthesis."""
from .behavior import Behavior, check_positive_real_pair, check_reciprocity
from .polymat import Poly, PolyMat
from .realize import StateSpace, realize
from .sigsym import sigsym_realize
from .passive import passive_sigsym_realize, ppst_pipeline
from .synth import Netlist, synthesize, verify_netlist

__all__ = [
    "Behavior",
    "Netlist",
    "Poly",
    "PolyMat",
    "StateSpace",
    "check_positive_real_pair",
    "check_reciprocity",
    "passive_sigsym_realize",
    "ppst_pipeline",
    "realize",
    "sigsym_realize",
    "synthesize",
    "verify_netlist",
]

__version__ = "0.1.0"
