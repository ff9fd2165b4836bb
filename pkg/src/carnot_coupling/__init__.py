"""Couplings and semigroup estimates for hypoelliptic Brownian motion on
the Heisenberg group and the free step-2 Carnot groups."""

from .groups import (
    CarnotElement,
    HeisenbergPoint,
    SkewMatrix,
    carnot_inv,
    carnot_mul,
    carnot_to_heis,
    dilate,
    heis_inv,
    heis_mul,
    heis_to_carnot,
    heis_zeta,
    odot,
    quasinorm_H,
    so3_iso_check,
    zeta,
)
from .legendre import (
    CoefficientStream,
    PathSample,
    alpha,
    carnot_endpoint,
    integral_Q,
    levy_area_series,
    sample_stream,
    sde_oracle,
    synth_path,
    truncation_index,
)
from .gaussian_coupling import CoupledPair, gaussian_tv, maximal_coupling_shifted
from .sylvester import (
    SingularGramError,
    SylvesterSolution,
    solve_tsylvester,
    u_moment_check,
    wishart_inv_trace_mc,
)
from .coupling import (
    BoundReport,
    CouplingOutcome,
    couple_carnot,
    couple_heisenberg,
    failure_probability,
    tv_bound,
)
from .girsanov import (
    ShiftVector,
    bismut_gradient,
    build_shift,
    density_R,
    finite_diff_gradient,
    girsanov_normalization_check,
    gradient_sup_spotcheck,
    inequality_suite,
    semigroup_transfer_check,
)
from .mc import MCEstimate, ComparisonReport, derive_rng, ks_test, run_estimator
from .special_constants import (
    c3,
    carnot_constants,
    constants_table,
    exp_moment_series,
    gaussian_abs_moment,
    heisenberg_constants,
    remark2_constant,
    s_h_inverse_moment,
    s_h_laplace,
)

__version__ = "0.1.0"
