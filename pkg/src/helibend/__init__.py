"""helibend: minimal graphs over bent, variably scaled helicoids.

Numerical laboratory for the construction pipeline: scale-function
validation, linearized solvers on strips and globally, the nonlinear
fixed-point iteration, and curvature-blowup diagnostics.
"""

__version__ = "0.1.0"

from .scalefn import (ScaleFunction, make_scale, validate_pinching,
                      build_reparametrization, make_domain_spec, DomainSpec)
from .fields import ScalarField
from .geometry import (closed_form_geometry, numeric_geometry, graph_immersion,
                       htilde, export_obj)
from .op1d import u0_profile, invert_Ltilde
from .striplin import solve_strip
from .globlin import build_decomposition, solve_global, GlobalSolution
from .fixpoint import (construct, build_v0, odd_extend, blowup_table,
                       embeddedness_check, rescaling_check, minimality_median,
                       ConstructionResult, IterationState)
