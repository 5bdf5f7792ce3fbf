"""First- and second-order photon correlations of light scattered by driven
cold two-level atoms at random fixed positions."""

__version__ = "0.1.0"

from .analytic import (
    CollectiveParams,
    abc_coefficients,
    collective_rate,
    g1_timed_dicke,
    g2_eberly,
    g2_timed_dicke,
    timed_dicke_beta,
)
from .cloud import (
    AtomCloud,
    CloudConfig,
    DetectionGeometry,
    gaussian_s_infinity,
    k2_k4_moments,
    kernel_matrix,
    q_factor,
    r_factor_analytic,
    r_factor_numeric,
    sample_cloud,
    structure_factor,
)
from .correlations import (
    CorrelationCurve,
    HMatrixState,
    evolve_f_product,
    evolve_h_single,
    g1_exact,
    g2_classical,
    g2_product,
    g2_single_excitation,
)
from .dynamics import (
    BetaTrajectory,
    CouplingSystem,
    DriveParams,
    assemble_system,
    evolve_beta,
    intensity,
    steady_state,
)
from .ensemble import EnsembleResult, EnsembleSpec, run_ensemble, sweep
