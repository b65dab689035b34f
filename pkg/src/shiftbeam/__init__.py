"""Mixed FEM solver and verification suite for a singularly perturbed
fourth-order two-point problem with a unit shift term on (0,2)."""

from .problem import ProblemSpec, derive_constants, make_example1, make_example2, validate
from .meshes import (Mesh1D, build_stype, build_weak_equidistant,
                     build_weak_stype, build_mesh, mesh_diagnostics,
                     transition_lambda, transition_mu, transition_nu,
                     weak_exponent)
from .fem import (AssembledSystem, DiscreteSpace, PairField, SolverError,
                  assemble, bilinear_eval, eval_field, quadrature,
                  reference_basis, solve)
from .interp import (interpolate, interpolate_field, interpolate_pair,
                     local_interp_error_bound_check, postprocess,
                     postprocess_pair)
from .errors import (ErrorReport, ReferenceSolution, compute_reference,
                     energy_norm, eoc, error_report, l2_norm)
from .asymptotics import (LayerComponent, ReducedSolution,
                          boundary_layer_leading, decomposition_compare,
                          inner_layer_leading, layer_pair_energy,
                          leading_components, solve_reduced, v0_eval)
from .greens import (GreensKernel, GreensParams, StabilityMatrix, assemble_A,
                     char_roots, double_integrals, hermite_basis, kernel_at,
                     kernel_residuals, leading_A_entries, leading_constants,
                     leading_det, moment_integrals, stability_bound_check)

__version__ = "1.0.0"
