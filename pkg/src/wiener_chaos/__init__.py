"""Wiener chaos propagators for linear stochastic parabolic equations of full second order."""
from .errors import DomainError, NumericalError, RegimeError
from .multiindex import MultiIndex, ZERO, count_indices, enumerate_indices
from .cm_basis import (HFunction, TimeInterval, basis_matrix, cosine, cosine_antiderivative,
                       hermite, project, sample_zeta, xi_eval, zeta_from_increments)
from .chaos_space import (ChaosSeries, WeightPair, eh_member, expectation_norm_sq, hnorm_sq,
                          level_contributions, s_evaluate, weighted_norm_sq)
from .parabolic1d import (CoefficientSet, SpatialGrid, Trajectory, apply_operator,
                          semigroup_apply, solve_h, step)
from .propagator import (PropagatorConfig, PropagatorResult, fourier_mode_solve, level_norm_sq,
                         shift_solve, solve_system)

__version__ = "0.1.0"
