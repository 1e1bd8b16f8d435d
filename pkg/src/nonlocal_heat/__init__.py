"""Solver for a heat equation whose potential sees the solution's time integral.

The unknown couples to itself through the integral over the whole time
interval, so the problem is not a marching evolution: it is solved as a
fixed point of the map that freezes the potential at a trial integral,
evolves the datum linearly, and integrates the trajectory in time.
"""

from .mesh import (
    Field,
    Grid,
    h1_seminorm_sq,
    inner_product,
    norm_lp,
    restrict,
    trapezoid_time_integral,
)
from .laplacian import (
    DirichletLaplacian,
    SolverFailure,
    assemble,
    dirichlet_lambda1,
    dirichlet_lambda1_discrete,
    solve_shifted,
)
from .potential import EvaluationError, Potential, catalog, lipschitz_on, nemytskii
from .evolution import EvolutionConfig, Trajectory, evolve, phi_map
from .fixedpoint import (
    FixedPointReport,
    PicardConfig,
    ProbeReport,
    UniquenessThreshold,
    picard_solve,
    uniqueness_probe,
    uniqueness_threshold,
)
from .verify import (
    EllipticCheck,
    EnergyCheck,
    SolutionBoundsCheck,
    VerificationReport,
    check_elliptic,
    check_energy,
    check_solution_bounds,
    verify_all,
)

__version__ = "0.1.0"

__all__ = [
    "Field",
    "Grid",
    "h1_seminorm_sq",
    "inner_product",
    "norm_lp",
    "restrict",
    "trapezoid_time_integral",
    "DirichletLaplacian",
    "SolverFailure",
    "assemble",
    "dirichlet_lambda1",
    "dirichlet_lambda1_discrete",
    "solve_shifted",
    "EvaluationError",
    "Potential",
    "catalog",
    "lipschitz_on",
    "nemytskii",
    "EvolutionConfig",
    "Trajectory",
    "evolve",
    "phi_map",
    "FixedPointReport",
    "PicardConfig",
    "ProbeReport",
    "UniquenessThreshold",
    "picard_solve",
    "uniqueness_probe",
    "uniqueness_threshold",
    "EllipticCheck",
    "EnergyCheck",
    "SolutionBoundsCheck",
    "VerificationReport",
    "check_elliptic",
    "check_energy",
    "check_solution_bounds",
    "verify_all",
]
