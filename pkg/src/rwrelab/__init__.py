"""rwrelab: random walks in random environments with random scenery.

Simulation and exact-verification toolkit for walks on homogeneous spaces:
explicit stationary weights per walk family, canonical rooted-view
observables invariant under the acting group, self-normalized shift-series
estimation, and exact balance / mass-transport identity checks.
"""

__version__ = "0.1.0"

from .environment import EnvConfig, Environment, cluster_explore
from .errors import (ConfigurationError, ConvergenceError,
                     DegenerateWeightsError, InvalidVertexError,
                     ResourceLimitError, RwreError, TrajectoryError)
from .montecarlo import (ExperimentConfig, ShiftSeries, WeightedEstimate,
                         constancy_report, mann_kendall, run_counterexample,
                         run_stationarity, weighted_mean)
from .mtp import TransportFn, builtin_transports, mtp_check, mtp_sides
from .observables import Observable, builtin_catalog, evaluate, event_top_of_cluster
from .space import EndVertex, Mid, Space, make_space, transport_map
from .views import RootedView, canonical_rooted_view
from .walks import (KernelSpec, TransitionDist, alili_A,
                    detailed_balance_check, global_balance_check, kernel, nu,
                    sample_step)

__all__ = [
    "__version__",
    "EnvConfig", "Environment", "cluster_explore",
    "ConfigurationError", "ConvergenceError", "DegenerateWeightsError",
    "InvalidVertexError", "ResourceLimitError", "RwreError", "TrajectoryError",
    "ExperimentConfig", "ShiftSeries", "WeightedEstimate", "constancy_report",
    "mann_kendall", "run_counterexample", "run_stationarity", "weighted_mean",
    "TransportFn", "builtin_transports", "mtp_check", "mtp_sides",
    "Observable", "builtin_catalog", "evaluate", "event_top_of_cluster",
    "EndVertex", "Mid", "Space", "make_space", "transport_map",
    "RootedView", "canonical_rooted_view",
    "KernelSpec", "TransitionDist", "alili_A", "detailed_balance_check",
    "global_balance_check", "kernel", "nu", "sample_step",
]
