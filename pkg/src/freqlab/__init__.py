"""freqlab: boundary frequency functions, nodal sets and harmonic measure.

A 2D numerical laboratory around divergence-form elliptic equations on
Lipschitz-graph domains: Almgren-type frequency profiles with their check
suites, Whitney trees with the halving recursion, nodal measurement and
sign-constant covers, the tree-recursion combinatorics, and the
Cantor-cone harmonic-measure example.
"""

__version__ = "0.1.0"

from . import cantor_lab, combinatorics, frequency, geometry, nodal, solver, whitney

__all__ = [
    "__version__",
    "geometry",
    "solver",
    "frequency",
    "whitney",
    "nodal",
    "combinatorics",
    "cantor_lab",
]
