"""Attenuated geodesic ray transform on simple conformal discs."""

from .errors import (
    BackendMismatch,
    ConfigError,
    ExitedDomain,
    GeoXrayError,
    NeumannDiverged,
    OutsideDomain,
    SolverDiverged,
    TrapBudgetExceeded,
)
from .geometry import BundlePoint, MetricModel, exit_time, flow, scattering, trace
from .grid import DiscGrid, OneFormField, ScalarField
from .holomorphic import integrating_factor, w_operator
from .inversion import (
    ReconstructionConfig,
    invert_i0_explicit,
    invert_i0_fredholm,
    invert_i0_lsq,
    invert_i0_pairs,
    reconstruct_attenuated,
    verify_holomorphic_solution,
)
from .sphere_bundle import BoundaryField, BundleField, hilbert, holo_project
from .transport import Transport

__version__ = "0.1.0"
