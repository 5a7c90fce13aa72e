"""sdwave: a numerical laboratory for finite-time blow-up in the strongly
damped semilinear wave equation u_tt - Lap u - Lap u_t + u_t = f(u) + g.

The package integrates the equation on interval and rectangle grids, records
the energy, unstable-set, and divergence functionals along the run, detects
blow-up, and compares the observed blow-up time against explicit lower and
upper bounds computed from the initial data.
"""

from . import _kernels
from .bounds import (ConstructedData, CriterionReport, GrowthEnvelope,
                     LowerBoundReport, UpperBoundReport,
                     construct_high_energy_data, criterion_high_energy,
                     derive_constants, lower_bound, threshold_factor,
                     upper_bound)
from .errors import (CheckerError, ConfigurationError, DegenerateDataError,
                     EstimationError, NumericalError, OverflowEvent,
                     ParseError, PreconditionError, SamplingError,
                     SdwaveError, UsageError)
from .exprparse import (boundary_compatibility, evaluate, parse, pretty,
                        sample, sample_at_time)
from .functionals import (ConcavityReport, Trace, concavity_check, energy,
                          energy_residual, k_functional, m_functional,
                          nehari, q_functional)
from .integrator import (BlowupDetected, Completed, DtUnderflow, Outcome,
                         Overflow, SolverConfig, State, extrapolate_Tmax,
                         outcome_to_dict, run, step)
from .mesh import (DiscreteDomain, EmbedConstant, Field, build_domain,
                   embed_const, inner_full, inner_grad, inner_l2, lambda1,
                   lambda1_discrete, laplacian, norm_full_sq, norm_grad_sq,
                   norm_l2_sq, zeros)
from .nonlinearity import (CheckReport, Nonlinearity, check_all,
                           check_derivative_growth, check_growth,
                           check_superlinearity, logpower, power)
from .nonlinearity import zero as zero_nonlinearity
from .verification import convergence_study

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
