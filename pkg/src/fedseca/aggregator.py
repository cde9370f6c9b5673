"""Common aggregator interface and the name -> implementation registry."""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional

import numpy as np

from fedseca.gradvec import stack_clients

AGGREGATOR_KINDS = (
    "FedAvg",
    "Krum",
    "MultiKrum",
    "CWMedian",
    "CWTrimmedMean",
    "RFA",
    "HuberLoss",
    "CClip",
    "CCRandBucket",
    "CCSeqBucket",
    "CopodDos",
    "FLDetector",
    "RTiesMerge",
    "FedSECA",
)


class Aggregator:
    """Server-side robust aggregation rule.

    Subclasses implement :meth:`aggregate` on a validated (K, D) matrix.
    Stateful rules keep their cross-round memory on the instance, so one
    instance serves exactly one federation and rounds must be fed in order.
    """

    kind = "base"

    def __init__(self):
        self.last_info: Dict[str, Any] = {}

    def __call__(self, gs, global_weights: Optional[np.ndarray] = None) -> np.ndarray:
        x = stack_clients(gs)
        out = self.aggregate(x, global_weights)
        return np.asarray(out, dtype=np.float64)

    def aggregate(self, x: np.ndarray, global_weights=None) -> np.ndarray:
        raise NotImplementedError

    def reset(self) -> None:
        self.last_info = {}


@dataclass
class AggregatorConfig:
    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in AGGREGATOR_KINDS:
            raise ValueError(
                f"unknown aggregator kind {self.kind!r}; expected one of {', '.join(AGGREGATOR_KINDS)}"
            )


def make_aggregator(cfg, n_byzantine: int = 0, seed: int = 0) -> Aggregator:
    """Instantiate the aggregator described by ``cfg``.

    Args:
        cfg: an :class:`AggregatorConfig` or a kind name.
        n_byzantine: B, used by Krum's neighbour count.
        seed: seed for rules that shuffle (CC-RandBucket).
    """
    from fedseca import baselines, seca

    if isinstance(cfg, str):
        cfg = AggregatorConfig(cfg)
    p = dict(cfg.params)
    kind = cfg.kind
    if kind == "FedSECA":
        return seca.FedSECA(seca.FedSecaConfig(**p))
    if kind == "FedAvg":
        return baselines.FedAvg(**p)
    if kind == "Krum":
        p.setdefault("n_byzantine", n_byzantine)
        return baselines.Krum(**p)
    if kind == "MultiKrum":
        p.setdefault("n_byzantine", n_byzantine)
        p.setdefault("m", 2)
        return baselines.Krum(**p)
    if kind == "CWMedian":
        return baselines.CWMedian(**p)
    if kind == "CWTrimmedMean":
        return baselines.CWTrimmedMean(**p)
    if kind == "RFA":
        return baselines.RFA(**p)
    if kind == "HuberLoss":
        return baselines.HuberLoss(**p)
    if kind == "CClip":
        return baselines.CClip(**p)
    if kind == "CCRandBucket":
        p.setdefault("seed", seed)
        return baselines.CCRandBucket(**p)
    if kind == "CCSeqBucket":
        return baselines.CCSeqBucket(**p)
    if kind == "CopodDos":
        return baselines.CopodDos(**p)
    if kind == "FLDetector":
        return baselines.FLDetector(**p)
    if kind == "RTiesMerge":
        return baselines.RTiesMerge(**p)
    raise ValueError(f"unknown aggregator kind {kind!r}")
