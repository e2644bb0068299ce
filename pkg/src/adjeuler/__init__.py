"""Discrete adjoints for Burgers' equation and the 2D Euler equations.

Modules
-------
gas        conservative states, fluxes and flux Jacobians
calculus   piecewise functions with jumps and Dirac masses
burgers    1D upwind scheme and its exact discrete adjoint
mesh       triangular meshes with median-dual cells
solver     edge-based Roe/MUSCL solver, explicit and implicit
adjoint    transposed-Jacobian adjoint and boundary-condition checks
"""

import os as _os

# BLAS/OpenMP pools read these once, when numpy loads
_threads = _os.environ.get("ADJ_EULER_THREADS", "")
if _threads.isdigit() and int(_threads) > 0:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .gas import ConservativeState, DomainError, GasModel

__version__ = "0.1.0"

__all__ = ["ConservativeState", "DomainError", "GasModel", "__version__"]
