"""Deterministic desk-scale federated learning simulation."""

from fedseca.sim.federation import (
    AggregationError,
    Federation,
    FederationConfig,
    RoundRecord,
    evaluate,
    local_train,
    macro_f1,
    run_experiment,
    summarize,
)
from fedseca.sim.model import Model
from fedseca.sim.task import ClientDataset, SyntheticTask, partition_dirichlet

__all__ = [
    "AggregationError",
    "ClientDataset",
    "Federation",
    "FederationConfig",
    "Model",
    "RoundRecord",
    "SyntheticTask",
    "evaluate",
    "local_train",
    "macro_f1",
    "partition_dirichlet",
    "run_experiment",
    "summarize",
]
