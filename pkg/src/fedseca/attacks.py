"""Omniscient model-poisoning attacks.

Every craft sees the round's honest pseudo-gradients and returns the B
vectors the Byzantine clients submit. Weight-space attacks are expressed
through the pseudo-gradient map ``g = w_prev - w`` so that the server only
ever receives one kind of vector.

Attack strengths get a fresh ``Uniform(-0.05, 0.05)`` offset per Byzantine
client per round unless jitter is disabled.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from fedseca.gradvec import as_gradvec, stack_clients

ATTACK_KINDS = ("None", "ALIE", "IPM", "Fang", "LabelFlip", "Mimic", "Scaling", "MinMax")

DEFAULT_STRENGTHS = {
    "Fang": {"lambda_f": 0.1},
    "ALIE": {"z_max": 1.0},
    "IPM": {"epsilon": 1.3},
    "Scaling": {"epsilon": 10.0},
    "Mimic": {"warmup_rounds": 10},
    "MinMax": {"n_iter": 50},
}

JITTER_HALF_WIDTH = 0.05


@dataclass
class OmniscientView:
    honest_grads: np.ndarray
    prev_global_weights: Optional[np.ndarray] = None
    prev_aggregate: Optional[np.ndarray] = None
    round: int = 0
    defense: Any = None
    rng: np.random.Generator = field(default_factory=lambda: np.random.default_rng(0))

    def __post_init__(self):
        self.honest_grads = stack_clients(self.honest_grads)
        d = self.honest_grads.shape[1]
        if self.prev_global_weights is None:
            self.prev_global_weights = np.zeros(d)
        if self.prev_aggregate is None:
            self.prev_aggregate = np.zeros(d)

    @property
    def honest_mean(self) -> np.ndarray:
        return self.honest_grads.mean(axis=0)


def _strengths(base: float, n_byz: int, rng: np.random.Generator, jitter: bool) -> np.ndarray:
    if not jitter:
        return np.full(n_byz, base)
    return base + rng.uniform(-JITTER_HALF_WIDTH, JITTER_HALF_WIDTH, size=n_byz)


def fang(view: OmniscientView, n_byz: int, lambda_f: float = 0.1, jitter: bool = True) -> np.ndarray:
    """Push every weight against the honest drift by ``lambda_f``.

    In weight space the Byzantine model is ``w_prev - lambda_f * s`` with
    ``s = sgn(mean honest weights - w_prev)``; the transmitted
    pseudo-gradient is therefore ``lambda_f * s``.
    """
    w_prev = view.prev_global_weights
    honest_weights = w_prev - view.honest_grads
    s = np.sign(honest_weights.mean(axis=0) - w_prev)
    lam = _strengths(lambda_f, n_byz, view.rng, jitter)
    byz_weights = w_prev[None, :] - lam[:, None] * s[None, :]
    return w_prev[None, :] - byz_weights


def alie(view: OmniscientView, n_byz: int, z_max: float = 1.0, jitter: bool = True) -> np.ndarray:
    """Mean minus ``z_max`` population standard deviations, per coordinate."""
    mu = view.honest_mean
    sigma = view.honest_grads.std(axis=0)
    z = _strengths(z_max, n_byz, view.rng, jitter)
    return mu[None, :] - z[:, None] * sigma[None, :]


def ipm(view: OmniscientView, n_byz: int, epsilon: float = 1.3, jitter: bool = True) -> np.ndarray:
    mu = view.honest_mean
    eps = _strengths(epsilon, n_byz, view.rng, jitter)
    return -eps[:, None] * mu[None, :]


def scaling(view: OmniscientView, n_byz: int, epsilon: float = 10.0, jitter: bool = True) -> np.ndarray:
    mu = view.honest_mean
    eps = _strengths(epsilon, n_byz, view.rng, jitter)
    return eps[:, None] * mu[None, :]


def minmax_gamma(honest: np.ndarray, direction: np.ndarray, n_iter: int = 50) -> float:
    """Largest step along ``direction`` from the honest mean that stays within
    the maximum pairwise honest distance of every honest client (bisection)."""
    mu = honest.mean(axis=0)
    k = honest.shape[0]
    max_pair = 0.0
    for i in range(k):
        max_pair = max(max_pair, float(np.max(np.linalg.norm(honest - honest[i], axis=1))))
    if max_pair == 0.0:
        return 0.0

    def feasible(g):
        cand = mu + g * direction
        return float(np.max(np.linalg.norm(honest - cand, axis=1))) <= max_pair

    lo, hi = 0.0, 10.0 * max_pair
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def minmax_direction(honest: np.ndarray) -> np.ndarray:
    """``-sgn(mean)``, or a negative unit vector on the highest-variance
    coordinate when the mean has no nonzero sign."""
    mu = honest.mean(axis=0)
    p = -np.sign(mu)
    if not np.any(p):
        p = np.zeros_like(mu)
        p[int(np.argmax(honest.var(axis=0)))] = -1.0
    return p


def minmax_agr(view: OmniscientView, n_byz: int, n_iter: int = 50) -> np.ndarray:
    honest = view.honest_grads
    p = minmax_direction(honest)
    gamma = minmax_gamma(honest, p, n_iter)
    return np.tile(honest.mean(axis=0) + gamma * p, (n_byz, 1))


@dataclass
class MimicState:
    z: Optional[np.ndarray] = None
    mu: Optional[np.ndarray] = None
    t: int = 0
    warmup_rounds: int = 10
    chosen: Optional[int] = None

    def update(self, honest: np.ndarray, rng: np.random.Generator) -> int:
        """One streaming step of the max-variance direction estimate; returns k*."""
        h, d = honest.shape
        if self.z is None:
            z0 = rng.standard_normal(d)
            self.z = z0 / np.linalg.norm(z0)
            self.mu = np.zeros(d)
        t = self.t
        self.mu = (t / (1 + t)) * self.mu + honest.sum(axis=0) / ((1 + t) * h)
        centered = honest - self.mu
        z_new = (t / (1 + t)) * self.z + (1 / (1 + t)) * (centered.T @ (centered @ self.z))
        nz = np.linalg.norm(z_new)
        if nz > 0:
            self.z = z_new / nz
        self.t += 1
        return int(np.argmax(honest @ self.z))


def mimic(view: OmniscientView, n_byz: int, state: MimicState) -> np.ndarray:
    """Every Byzantine copies one honest client picked along the max-variance direction."""
    honest = view.honest_grads
    if state.chosen is None or state.t < state.warmup_rounds:
        k_star = state.update(honest, view.rng)
        if state.t >= state.warmup_rounds:
            state.chosen = k_star
    else:
        k_star = state.chosen
    return np.tile(honest[k_star], (n_byz, 1))


def label_flip_map(y, n_classes: int):
    """Map class ``y`` to ``(C - 1) - y``; works on ints and integer arrays."""
    arr = np.asarray(y)
    if np.any(arr < 0) or np.any(arr >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes - 1}]")
    out = (n_classes - 1) - arr
    return int(out) if np.ndim(out) == 0 else out


@dataclass
class AttackConfig:
    kind: str = "None"
    params: Dict[str, Any] = field(default_factory=dict)
    jitter: bool = True

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}; expected one of {', '.join(ATTACK_KINDS)}")
        allowed = set(DEFAULT_STRENGTHS.get(self.kind, {}))
        unknown = set(self.params) - allowed
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for attack {self.kind}")
        for name, value in self.params.items():
            if isinstance(value, (int, float)) and name != "epsilon" and value <= 0:
                raise ValueError(f"attack parameter {name} must be positive, got {value}")
        if self.kind == "Scaling" and self.params.get("epsilon", 1.0) == 0:
            raise ValueError("Scaling epsilon must be nonzero")
        if self.kind == "IPM" and self.params.get("epsilon", 1.0) <= 0:
            raise ValueError("IPM epsilon must be positive")


class Attack:
    """Stateful attack driver for one federation run."""

    def __init__(self, cfg: AttackConfig):
        self.cfg = cfg
        p = {**DEFAULT_STRENGTHS.get(cfg.kind, {}), **cfg.params}
        self.params = p
        self.mimic_state = MimicState(warmup_rounds=int(p.get("warmup_rounds", 10)))

    @property
    def kind(self) -> str:
        return self.cfg.kind

    @property
    def flips_labels(self) -> bool:
        return self.cfg.kind == "LabelFlip"

    @property
    def crafts(self) -> bool:
        return self.cfg.kind not in ("None", "LabelFlip")

    def craft(self, view: OmniscientView, n_byz: int) -> np.ndarray:
        kind, p, jit = self.cfg.kind, self.params, self.cfg.jitter
        if n_byz == 0:
            return np.zeros((0, view.honest_grads.shape[1]))
        if kind == "Fang":
            out = fang(view, n_byz, p["lambda_f"], jit)
        elif kind == "ALIE":
            out = alie(view, n_byz, p["z_max"], jit)
        elif kind == "IPM":
            out = ipm(view, n_byz, p["epsilon"], jit)
        elif kind == "Scaling":
            out = scaling(view, n_byz, p["epsilon"], jit)
        elif kind == "MinMax":
            out = minmax_agr(view, n_byz, int(p["n_iter"]))
        elif kind == "Mimic":
            out = mimic(view, n_byz, self.mimic_state)
        else:
            raise ValueError(f"attack {kind!r} does not craft vectors")
        for row in out:
            as_gradvec(row)
        return out
