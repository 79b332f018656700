"""Lagrange-Galerkin finite elements for the diffusive Peterlin model.

P1 velocity/pressure/conformation on structured simplicial meshes of the
unit square/cube, semi-Lagrangian material derivatives, Brezzi-Pitkaranta
pressure stabilization, and a per-step fixed-point coupling loop, with
energy, free-energy and relative-energy diagnostics plus a mesh-hierarchy
convergence study.
"""

from .diagnostics import (DiagnosticsRecord, EOCTable, RelativeEnergyRecord,
                          StateDiagnostics, divergence_norm, energy,
                          energy_inequality_residual, eoc, free_energy,
                          relative_dissipation, relative_energy, spd_monitor)
from .exceptions import (ConfigParseError, ConfigValidationError,
                         DimensionMismatchError, FixedPointDivergedError,
                         LinearSolveFailedError, MeshMismatchError,
                         NonSPDError, SingularMatrixError)
from .mesh import (NodalField, QuadratureRule, StructuredSimplicialMesh,
                   build_mesh, dump_field, integrate, interpolate, load_field,
                   locate, prolongate, simplex_rule)
from .solver import (ConformationStepper, SimulationState, SolverConfig,
                     StepReport, Stepper, equilibrium_state, initial_state,
                     run, solve_linear, step)
from .tensor_ops import (SpectralDecomp, SymTensor, check_log_identities,
                         frobenius_inner, inverse, jacobi_residual,
                         matrix_log, min_eigenvalue, spectral, trace,
                         trace_norm_check)

__version__ = "0.1.0"
