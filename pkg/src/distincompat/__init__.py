"""Diamond-distance measurement incompatibility toolkit."""
from .assemblage import (Povm, PovmError, SimulationMap, WeightedAssemblage, append, concat,
                         depolarize, parent_povm_simulation, random_povm, random_projective,
                         simulate, split, splitting_map)
from .bell import (BehaviorTable, SteeringAssemblage, behavior_from_state, chsh_values,
                   maximize_avg_chsh, no_signaling_value, nonlocality_distance, steer_from_state,
                   steering_distance)
from .incompat import (DualCertificate, IncompatReport, SolverFailure, closest_jm_subset,
                       diamond_distance, incompatibility, is_jointly_measurable,
                       measure_prepare_distance)
from .mub import (MubFamily, analytic_incompatibility, build_mub, compute_T, mub_dual_certificate,
                  white_noise_robustness)
from .strategies import DeterministicStrategySet, EnumerationCapExceeded
from .structures import (DecompositionReport, GainReport, check_result1, check_subset_bounds,
                         decompose, incompatibility_gain)

__version__ = "0.1.0"
