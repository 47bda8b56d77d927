"""Spatial cluster detection for functional data.

Detects spatial clusters of curves with three scan statistics (an ANOVA
ratio, a sup-t pointwise statistic, and a nonparametric sign-based
index), calibrated by random-labelling Monte Carlo, and ships the
simulation harness used to compare their power.
"""

from .errors import (
    DegenerateDataError,
    DuplicateCoordinateError,
    DuplicateIdError,
    GridMismatchError,
    NonFiniteCoordinateError,
    ValidationError,
)
from .fdata import (
    FunctionalDataset,
    GroupSummary,
    group_mean,
    l2_inner,
    l2_norm_sq,
    pooled_variance_at_t,
    read_curves_csv,
    trapezoid_weights,
    write_curves_csv,
)
from .geometry import (
    CandidateCluster,
    SiteGrid,
    build_site_grid,
    enumerate_candidates,
    members_within,
    read_sites_csv,
    resolve_site_indices,
)
from .indices import (
    DFFSS,
    METHODS,
    NPFSS,
    PFSS,
    IndexValue,
    SignMatrix,
    build_sign_matrix,
    dffss_index,
    npfss_index,
    npfss_index_naive,
    pfss_index,
)
from .scan import (
    ScanResult,
    SecondaryCluster,
    detect_mlc,
    monte_carlo,
    permutation_for,
    run_scan,
    scan_grid,
)
from .simulate import (
    DEFAULT_ALPHA_GRIDS,
    DEFAULT_CLUSTER_IDS,
    SimulationConfig,
    StudyMetrics,
    analytic_noise_variance,
    basis_psi,
    default_site_grid,
    detection_metrics,
    generate_dataset,
    run_power_study,
    run_power_study_multi,
    shift_value,
)

__version__ = "0.1.0"
