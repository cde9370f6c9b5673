"""Byzantine-robust federated aggregation: FedSECA, baseline defenses, attacks and a simulator."""

from fedseca.aggregator import AGGREGATOR_KINDS, Aggregator, AggregatorConfig, make_aggregator
from fedseca.attacks import ATTACK_KINDS, Attack, AttackConfig, OmniscientView
from fedseca.seca import FedSECA, FedSecaConfig, MomentumState, fedseca_aggregate

__version__ = "0.1.0"
