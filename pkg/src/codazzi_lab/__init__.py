"""Numerical laboratory for Codazzi tensors on submanifolds of space forms."""
from .codazzi import (
    CovariantDerivativeField,
    NormalValuedSymTensor,
    codazzi_residual,
    commutator_residual,
    covariant_derivative,
    hessian_codazzi,
    second_covariant_derivative,
)
from .config import ScenarioConfig, emit_config, load_config, parse_config
from .decompose import cluster_eigenvalues, decomposition_report, derdzinski_residual, umbilicity_check
from .errors import CodazziLabError
from .frames import Geometry, compute_geometry
from .fundforms import curvature_data, gauss_riemann, intrinsic_riemann_oracle, normal_curvature, ricci_tensor
from .geometry import CATALOG, ChartDomain, ImmersionSpec, SpaceForm, catalog, evaluate_jet
from .harness import convergence_study, emit_report, run_scenario
from .jets import Jet
from .spectral import (
    eigen_spectrum,
    mean_curvature_vector,
    parallelism_residual,
    scalar_laplacian,
    simons_residual_flat,
    simons_residual_parallel,
    stokes_theorem_integral,
)

__version__ = "0.1.0"
