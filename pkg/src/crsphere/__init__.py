"""crsphere: exact operator algebra and spectral solvers for the critical
CR GJMS operator on the sphere.

The package has four layers: the Heisenberg group model with its exact
left-invariant operator algebra (heisenberg), the bigraded spherical
harmonics and eigentables (harmonics, spectral), the parametrix chain in
exact-diagonal and perturbed-matrix regimes (galerkin, parametrix), and the
zero CR Q-curvature solver (qcurvature).  The cli module wires them into
reproducible command-line runs.
"""

from .errors import (
    CapExceededError,
    ConfigError,
    CrsphereError,
    DimensionMismatchError,
    NumericalError,
    ObstructionError,
)
from .harmonics import HarmonicBasis, dim_hpq, sphere_integral
from .heisenberg import (
    Dilation,
    GroupElement,
    LeftInvariantOp,
    apply_op,
    box_b,
    box_b_bar,
    compose,
    dilate,
    formal_adjoint,
    group_inv,
    group_mul,
    homogeneity_degree,
    model_identity_suite,
    sublaplacian_model,
)
from .parametrix import (
    ParametrixChain,
    build_chain_diagonal,
    build_chain_matrix,
    hatted_gjms,
    partial_inverse,
    smoothing_residual,
    spectrum_diagonal,
    spectrum_matrix,
)
from .poly import Poly
from .qcurvature import (
    ContactPerturbation,
    QData,
    SolveReport,
    qhat,
    solvability_check,
    solve_zero_q,
    total_q,
)
from .scalars import QI, parse_qi
from .spectral import (
    DiagonalOperator,
    SpectralFunction,
    Truncation,
    critical_gjms,
    l_mu,
    order_diagnostic,
    pluriharmonic_proj,
    reeb_t,
    sublaplacian,
    szego,
    szego_bar,
)

__version__ = "0.1.0"
