"""Differentially private synthetic data on the unit hypercube.

Two mechanisms release a multiset of points close in W1 to the input:
``pmm`` (noisy counts on a binary hierarchical partition, made consistent
top-down) and ``psmm`` (noisy grid counts projected onto probability
measures).  Exact transport distances for measuring accuracy live in
``metrics``; ``audit`` checks the privacy guarantee exactly on tiny inputs.
"""

from .dlaplace import DiscreteLaplace
from .measures import DiscreteSignedMeasure, empirical
from .partition import BinaryPartition
from .pmm import EmptySynthetic, run_pmm
from .psmm import run_psmm

__all__ = [
    "BinaryPartition",
    "DiscreteLaplace",
    "DiscreteSignedMeasure",
    "EmptySynthetic",
    "empirical",
    "run_pmm",
    "run_psmm",
]
__version__ = "0.1.0"
