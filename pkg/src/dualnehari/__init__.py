"""Bounded and subharmonic solutions of u'' + g(u) = p(t) by the dual Nehari method.

One-signed action minimizers are computed on sub-intervals, the sum of their
values is maximized over the gluing points, and the pieces are concatenated
into a C^1 solution with prescribed zeros.
"""
__version__ = "0.1.0"

from .assembly import (GluedSolution, SubharmonicSolution, assemble, exhaustion_sweep,
                       minimal_period_certificate, necessity_check, solve_subharmonic)
from .errors import *  # noqa: F401,F403
from .functional import GridFunction, action, action_gradient, limit_minimizer
from .oracle import brute_force_partition, fd_phi_derivative, shoot_bvp
from .partition import Partition, PartitionResult, maximize_partition, psi_value
from .problem import (ForcingTerm, ReactionTerm, arctan_reaction, constant_forcing, landesman_lazer_margin,
                      make_reaction, trig_forcing, validate_h1)
from .signed import (SignedMinimizerResult, SolverOptions, certify_spacing_floor, minimize_signed,
                     phi_derivatives)
