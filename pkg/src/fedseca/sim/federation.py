"""Round loop of the simulated federation.

Clients receive the global weights, run ``local_steps`` full-batch gradient
descent steps and send the pseudo-gradient ``w_broadcast - w_local``. The
last B clients are Byzantine. The server aggregates and applies
``w <- w - global_lr * aggregate``.
"""

import hashlib
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from fedseca.aggregator import AggregatorConfig, make_aggregator
from fedseca.attacks import Attack, AttackConfig, OmniscientView, label_flip_map
from fedseca.gradvec import NonFiniteGradientError, stack_clients
from fedseca.sim.model import Model
from fedseca.sim.task import ClientDataset, SyntheticTask, partition_dirichlet


def local_train(model: Model, w_broadcast: np.ndarray, data: ClientDataset, local_steps: int,
                lr: float, n_classes: Optional[int] = None) -> np.ndarray:
    """Full-batch gradient descent from the broadcast weights; returns the pseudo-gradient."""
    if local_steps < 1:
        raise ValueError(f"local_steps must be >= 1, got {local_steps}")
    y = data.y
    if data.flipped:
        y = label_flip_map(y, n_classes if n_classes is not None else model.n_classes)
    w = w_broadcast.copy()
    for _ in range(local_steps):
        _, grad = model.loss_and_grad(w, data.x, y)
        w -= lr * grad
    return w_broadcast - w


def macro_f1(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> float:
    """Unweighted mean of per-class F1; a class with no true or predicted samples scores 0."""
    scores = []
    for c in range(n_classes):
        tp = np.sum((y_pred == c) & (y_true == c))
        fp = np.sum((y_pred == c) & (y_true != c))
        fn = np.sum((y_pred != c) & (y_true == c))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom > 0 else 0.0)
    return float(np.mean(scores))


def evaluate(model: Model, w: np.ndarray, x: np.ndarray, y: np.ndarray):
    """Return ``(accuracy, macro_f1)`` on a non-empty test set."""
    if len(y) == 0:
        raise ValueError("empty test set")
    pred = model.predict(w, x)
    return float(np.mean(pred == y)), macro_f1(y, pred, model.n_classes)


@dataclass
class FederationConfig:
    n_clients: int = 10
    n_byzantine: int = 0
    dirichlet_alpha: float = 1.0
    rounds: int = 100
    local_steps: int = 5
    local_lr: float = 0.5
    global_lr: float = 1.0
    attack: AttackConfig = field(default_factory=AttackConfig)
    defense: AggregatorConfig = field(default_factory=lambda: AggregatorConfig("FedAvg"))
    task: SyntheticTask = field(default_factory=SyntheticTask)
    model: str = "mlp"
    hidden: int = 4
    activation: str = "relu"
    init_scale: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n_clients < 1:
            raise ValueError("n_clients must be >= 1")
        if not 0 <= self.n_byzantine < self.n_clients:
            raise ValueError(f"need 0 <= n_byzantine < n_clients, got {self.n_byzantine}")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")


@dataclass
class RoundRecord:
    round: int
    accuracy: float
    macro_f1: float
    agg_norm: float
    agg_digest: str
    rho: Optional[List[float]] = None
    train_ms: float = 0.0
    attack_ms: float = 0.0
    agg_ms: float = 0.0
    eval_ms: float = 0.0


class AggregationError(RuntimeError):
    """A round could not produce a finite aggregate (diverged training, bad craft or defense failure)."""

    def __init__(self, round_idx: int, cause: Exception):
        super().__init__(f"round {round_idx} aborted: {cause}")
        self.round = round_idx
        self.cause = cause


class Federation:
    """Mutable state of one simulated run; rounds must be executed in order."""

    def __init__(self, cfg: FederationConfig):
        self.cfg = cfg
        task = cfg.task
        self.model = Model(cfg.model, task.feature_dim, task.n_classes, cfg.hidden, cfg.activation)
        x_train, y_train = task.train_set()
        self.x_test, self.y_test = task.test_set()
        self.clients = partition_dirichlet(
            x_train, y_train, cfg.n_clients, cfg.dirichlet_alpha, cfg.seed, task.n_classes
        )
        self.n_honest = cfg.n_clients - cfg.n_byzantine
        self.attack = Attack(cfg.attack)
        if self.attack.flips_labels:
            for c in self.clients[self.n_honest :]:
                c.flipped = True
        self.aggregator = make_aggregator(cfg.defense, n_byzantine=cfg.n_byzantine, seed=cfg.seed)
        init_rng = np.random.default_rng([cfg.seed, 11])
        self.weights = self.model.init_weights(init_rng, cfg.init_scale)
        self.attack_rng = np.random.default_rng([cfg.seed, 13])
        self.prev_aggregate = np.zeros(self.model.n_params)
        self.round = 0

    def client_update(self, k: int, w: np.ndarray) -> np.ndarray:
        cfg = self.cfg
        return local_train(self.model, w, self.clients[k], cfg.local_steps, cfg.local_lr,
                           cfg.task.n_classes)

    def run_round(self) -> RoundRecord:
        cfg = self.cfg
        t = self.round + 1
        w = self.weights

        t0 = time.perf_counter()
        try:
            crafted_byz = self.attack.crafts
            trained = self.n_honest if crafted_byz else cfg.n_clients
            updates = [self.client_update(k, w) for k in range(trained)]
            t1 = time.perf_counter()
            if crafted_byz and cfg.n_byzantine > 0:
                view = OmniscientView(
                    honest_grads=np.stack(updates[: self.n_honest]),
                    prev_global_weights=w,
                    prev_aggregate=self.prev_aggregate,
                    round=t,
                    defense=cfg.defense,
                    rng=self.attack_rng,
                )
                updates.extend(self.attack.craft(view, cfg.n_byzantine))
            t2 = time.perf_counter()
            x = stack_clients(updates)
            agg = self.aggregator(x, global_weights=w)
            if not np.all(np.isfinite(agg)):
                raise NonFiniteGradientError("aggregate contains NaN or Inf")
        except Exception as exc:
            raise AggregationError(t, exc) from exc
        t3 = time.perf_counter()

        self.weights = w - cfg.global_lr * agg
        self.prev_aggregate = agg
        acc, f1 = evaluate(self.model, self.weights, self.x_test, self.y_test)
        t4 = time.perf_counter()

        rho = self.aggregator.last_info.get("rho")
        self.round = t
        return RoundRecord(
            round=t,
            accuracy=acc,
            macro_f1=f1,
            agg_norm=float(np.linalg.norm(agg)),
            agg_digest=hashlib.sha256(agg.tobytes()).hexdigest()[:16],
            rho=None if rho is None else [float(r) for r in rho],
            train_ms=1e3 * (t1 - t0),
            attack_ms=1e3 * (t2 - t1),
            agg_ms=1e3 * (t3 - t2),
            eval_ms=1e3 * (t4 - t3),
        )


def run_experiment(cfg: FederationConfig) -> List[RoundRecord]:
    fed = Federation(cfg)
    return [fed.run_round() for _ in range(cfg.rounds)]


def summarize(records: List[RoundRecord], last: int = 5) -> dict:
    """Mean accuracy and macro-F1 over the last ``last`` rounds."""
    if not records:
        raise ValueError("no rounds were run; the summary is undefined")
    tail = records[-last:]
    return {
        "final_accuracy": float(np.mean([r.accuracy for r in tail])),
        "final_f1": float(np.mean([r.macro_f1 for r in tail])),
        "rounds": len(records),
    }
