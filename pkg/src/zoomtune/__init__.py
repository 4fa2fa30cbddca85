"""Learning-rate tuning with an adaptive-discretization bandit over [0, 1]."""

from .baselines import GridBanditState, default_grid_size, grid_ucb, random_search
from .experiments import (StudyConfig, StudyReport, compare, regenerate_report,
                          run_study, samples_to_best)
from .objective import (EvalTrace, EvaluationError, LrMap, RewardSpec,
                        TuneEntry, TuneHistory, auc, best_found, best_trace,
                        denormalize, evaluate_external, normalize, reward_of)
from .teacher_student import (NetConfig, divergence_fraction, generate,
                              grad_mse, mse, train_gd)
from .zooming import (ActiveArm, Ball, ZoomingState, activation_step,
                      confidence_radius, is_covered, run, select_arm,
                      uncovered_region, update)

__version__ = "0.1.0"

__all__ = [
    "ActiveArm", "Ball", "EvalTrace", "EvaluationError", "GridBanditState", "LrMap",
    "NetConfig", "RewardSpec", "StudyConfig", "StudyReport", "TuneEntry",
    "TuneHistory", "ZoomingState", "activation_step", "auc", "best_found",
    "best_trace", "compare", "confidence_radius", "default_grid_size",
    "denormalize", "divergence_fraction", "evaluate_external", "generate",
    "grad_mse", "grid_ucb", "is_covered", "mse", "normalize",
    "random_search", "regenerate_report", "reward_of", "run", "run_study",
    "samples_to_best", "select_arm", "train_gd", "uncovered_region", "update",
]
