"""Learning optimal reachability policies in MDPs from simulations."""
from .mdp import CountTable, Mdp, MemorylessDetPolicy, ModelError, validate
from .learner import Learner, LearnerConfig, StageReport, learn, stage_parameters
from .exact import optimal_value, policy_value_exact, min_gap

__version__ = "0.1.0"
