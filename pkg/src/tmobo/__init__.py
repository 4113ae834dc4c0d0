"""Multi-objective Bayesian optimization with Student-t process surrogates.

The acquisition is the hypervolume probability of improvement, evaluated
exactly over a cell decomposition of the non-dominated region.
"""

from .acquisition import HvPoIValue, gaussian_cdf, hvpoi, prob_in_region, student_t_cdf
from .config import AcqBudget, ExperimentConfig, FitSettings, load_config
from .driver import TraceRecord, bo_step, run_experiment, summarize
from .kernel import ConditioningError, KernelParams, gram, gram_cross, rbf
from .pareto import (CellDecomposition, ParetoFront, decompose, dominates, exclusive_hypervolume,
                     extract_front, hypervolume)
from .problems import Problem, dtlz1, latin_hypercube, make_problem
from .surrogate import (Dataset, Family, FitConfig, PredictiveMarginal, SurrogateModel, beta_statistic,
                        fit, neg_log_likelihood, predict)

__version__ = "0.1.0"
