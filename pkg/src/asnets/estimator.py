"""scikit-learn style wrapper: fit on training problems, predict greedy actions.

Samples are problems of one domain (PPDDL text or parsed :class:`Problem`);
``fit`` runs imitation training and ``predict`` returns the greedy action name
at each problem's initial state.  ``score`` is mean evaluation coverage.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .evaluate import evaluate
from .features import ProblemNet
from .grounder import GroundTask, ground
from .ppddl import Domain, Problem, parse_domain, parse_problem
from .ssp import is_terminal
from .trainer import TrainConfig, Trainer


def check_domain(domain) -> Domain:
    if isinstance(domain, Domain):
        return domain
    if isinstance(domain, str):
        return parse_domain(domain)
    raise TypeError(f"domain must be PPDDL text or a Domain, got {type(domain).__name__}")


def check_problems(X, domain: Domain) -> list[GroundTask]:
    """Parse and ground a non-empty sequence of problems."""
    if isinstance(X, (str, Problem)):
        X = [X]
    items = list(X)
    if not items:
        raise ValueError("expected at least one problem")
    tasks = []
    for item in items:
        if isinstance(item, str):
            item = parse_problem(item, domain)
        elif not isinstance(item, Problem):
            raise TypeError(f"problems must be PPDDL text or Problem, got {type(item).__name__}")
        tasks.append(ground(domain, item))
    return tasks


class ASNetPolicy(BaseEstimator):
    def __init__(self, domain=None, n_layers: int = 2, hidden_size: int = 16,
                 heuristic: str = "lmcut", landmarks: bool = True, time_limit: float = 7200.0,
                 max_epochs: int | None = None, seed: int = 0):
        self.domain = domain
        self.n_layers = n_layers
        self.hidden_size = hidden_size
        self.heuristic = heuristic
        self.landmarks = landmarks
        self.time_limit = time_limit
        self.max_epochs = max_epochs
        self.seed = seed

    def fit(self, X, y=None):
        """Train on problems ``X``; ``y`` is ignored (labels come from the teacher)."""
        self.domain_ = check_domain(self.domain)
        tasks = check_problems(X, self.domain_)
        cfg = TrainConfig(time_limit=self.time_limit, max_epochs=self.max_epochs,
                          heuristic=self.heuristic, landmarks=self.landmarks,
                          n_layers=self.n_layers, hidden_size=self.hidden_size, seed=self.seed)
        self.weights_, self.report_ = Trainer(self.domain_, tasks, cfg).train()
        return self

    def predict_proba(self, X) -> list:
        check_is_fitted(self, "weights_")
        out = []
        for task in check_problems(X, self.domain_):
            out.append(ProblemNet(task, self.weights_, self.landmarks).probs(task.init))
        return out

    def predict(self, X) -> list[str | None]:
        """Greedy action name at each initial state (``None`` when terminal)."""
        check_is_fitted(self, "weights_")
        out = []
        for task in check_problems(X, self.domain_):
            if is_terminal(task, task.init):
                out.append(None)
                continue
            out.append(task.action_name(ProblemNet(task, self.weights_, self.landmarks).greedy(task.init)))
        return out

    def score(self, X, y=None, trials: int = 30) -> float:
        """Mean fraction of greedy trials that reach the goal."""
        check_is_fitted(self, "weights_")
        tasks = check_problems(X, self.domain_)
        reports = [evaluate(self.weights_, t, trials, self.seed, self.landmarks) for t in tasks]
        return sum(r.coverage / r.trials for r in reports) / len(reports)
