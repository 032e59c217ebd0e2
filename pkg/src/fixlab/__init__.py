"""Fixation probability of a neutral mutant on a line with a random fitness landscape."""

__version__ = "0.1.0"

from fixlab.errors import DomainError, InfeasibleError, SchemaError, StepCapExceeded
from fixlab.environment import (
    FitnessLandscape,
    HopProfile,
    enumerate_conditioned,
    enumerate_landscapes,
    hop_profile,
    sample_landscape,
)
from fixlab.stats import Estimate, FixationEstimate
from fixlab.solver import (
    annealed_exact,
    annealed_mc,
    chain_simulate,
    conditioned_average,
    fixation_probability_exact,
)
from fixlab.lattice import Topology, estimate_fixation, run_dynamics
from fixlab.quadrature import QuadratureSpec
from fixlab.limits import (
    LimitValue,
    better_prediction,
    brownian_mc_g,
    convexity_h,
    g,
    m2,
    m_alpha,
    phi,
    y_first_moment,
    y_second_moment,
)
