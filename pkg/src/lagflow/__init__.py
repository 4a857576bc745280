"""Mean curvature flow of discretized compact Lagrangian immersions in
explicit Kahler-Einstein ambient spaces, with a verification harness for
the quantitative estimates that govern its long-time behavior."""

__version__ = "0.1.0"

from .ambient import (AmbientSpace, FlatTorus, FubiniStudyCP2,
                      HyperbolicCylinder, MetricJet, RoundSphere,
                      kahler_einstein_selfcheck, make_ambient,
                      scalar_curvature)
from .backends import active as active_backend
from .deformations import (angle_variation_residual, deform, second_variation)
from .flow import (FlowConfig, FlowTrace, cfl_dt,
                   residual_mean_curvature_evolution, residual_theta, run,
                   step)
from .geometry import (GeometryCache, GridTopology, Immersion,
                       angle_potential, closedness_residual, geometry,
                       holonomy, integrals, lagrangian_defect)
from .monitors import (ClassParams, c0_from_l2_check, class_membership,
                       decay_rate_fit, eigen_bound_check, gronwall_check,
                       noncollapse_estimate, short_time_doubling_check,
                       vector_field_inequality_check)
from .scenarios import (BUILTIN_SCENARIOS, list_scenarios, load_scenario,
                        parse_scenario, run_scenario)
from .spectral import (Spectrum, classify_variation, laplace_apply,
                       lowest_eigenpairs)

__all__ = [
    "__version__", "active_backend",
    # ambient
    "AmbientSpace", "FlatTorus", "RoundSphere", "HyperbolicCylinder",
    "FubiniStudyCP2", "MetricJet", "make_ambient", "scalar_curvature",
    "kahler_einstein_selfcheck",
    # geometry
    "GridTopology", "Immersion", "GeometryCache", "geometry",
    "lagrangian_defect", "closedness_residual", "integrals",
    "angle_potential", "holonomy",
    # spectral
    "Spectrum", "laplace_apply", "lowest_eigenpairs", "classify_variation",
    # flow
    "FlowConfig", "FlowTrace", "cfl_dt", "step", "run", "residual_theta",
    "residual_mean_curvature_evolution",
    # deformations
    "deform", "angle_variation_residual", "second_variation",
    # monitors
    "ClassParams", "noncollapse_estimate", "class_membership",
    "gronwall_check", "decay_rate_fit", "eigen_bound_check",
    "c0_from_l2_check", "vector_field_inequality_check",
    "short_time_doubling_check",
    # scenarios
    "BUILTIN_SCENARIOS", "list_scenarios", "load_scenario", "parse_scenario",
    "run_scenario",
]
