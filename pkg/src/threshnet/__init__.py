"""Threshold-network breakdown simulator.

Builds grid or custom networks of links with threshold current-voltage laws,
integrates their transient, solves for the steady state and compares it with
the minimum-threshold path.
"""

from .characteristics import (
    IdealThreshold,
    Linear,
    LinkLaws,
    PiecewiseThreshold,
    PolynomialThreshold,
    format_characteristic,
    parse_characteristic,
)
from .errors import (
    ConfigError,
    ConnectivityError,
    DimensionError,
    MultivaluedInverseError,
    RankError,
    SolverError,
    StiffnessError,
    ThreshnetError,
    TopologyError,
    UnsupportedEvaluationError,
)
from .experiment import ExperimentConfig, RunSummary, draw_thresholds, run_pipeline, sweep
from .functionals import dissipated_energy, functional_J, path_cost, threshold_functional
from .network import (
    GROUND,
    Link,
    NetworkGraph,
    attach_grounded_object,
    build_grid,
    build_incidence,
    load_graph,
    save_graph,
)
from .paths import (
    PathResult,
    concentration_report,
    convergence_study,
    enumerate_min_path,
    ideal_distribution,
    lp_cross_check,
    min_threshold_path,
)
from .steady import KKTReport, SolverControls, SteadyStateSolution, solve_linear_oracle, solve_steady, verify_kkt
from .transient import (
    InjectionProfile,
    IntegratorControls,
    TrajectoryRecord,
    TransientState,
    assemble_rhs,
    branch_activity,
    integrate,
    lyapunov_energy,
)

__version__ = "0.1.0"
