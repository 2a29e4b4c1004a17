"""Action schema networks: generalised policies for probabilistic planning domains."""

from .errors import ASNetError
from .estimator import ASNetPolicy
from .evaluate import EvalReport, evaluate
from .generators import generate
from .grounder import GroundTask, NetworkSpec, build_network_spec, ground
from .model import ASNet, Adam, Weights, init_weights, load_weights, save_weights
from .ppddl import Domain, Problem, parse_domain, parse_problem
from .teacher import Teacher, lrtdp_solve, value_iteration
from .trainer import TrainConfig, Trainer, train

__all__ = [
    "ASNet", "ASNetError", "ASNetPolicy", "Adam", "Domain", "EvalReport", "GroundTask", "NetworkSpec",
    "Problem", "Teacher", "TrainConfig", "Trainer", "Weights", "build_network_spec",
    "evaluate", "generate", "ground", "init_weights", "load_weights", "lrtdp_solve", "parse_domain",
    "parse_problem", "save_weights", "train", "value_iteration",
]

__version__ = "0.1.0"
