"""Embedding dyadic code trees into R^d under a modulus of continuity."""

from .modulus import ModulusSpec, check_admissibility, classify, critical_sequence
from .index_tree import CantorModel, Code, SardModel
from .constructor import BoxFamily, bounding_growth, build_sard_witness, sard_schedule, schedule
from .verifier import cross_check, verify_embedding, verify_modulus

__version__ = "0.1.0"
