"""Four attackers multiply their updates by a huge factor. What happens?

Plain averaging takes the blown-up updates at face value and the model
diverges within a few rounds. FedSECA clips every update to the median norm
and clamps each coordinate to its median magnitude before voting, so the
attackers end up with the same weight as everyone else.

    python3 demos/scaling_attack.py
"""

from pathlib import Path

from fedseca import AggregatorConfig, AttackConfig
from fedseca.bench.config import federation_for, load_config
from fedseca.sim import AggregationError, run_experiment

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk_matrix.yaml"


def trace(label, cfg):
    try:
        records = run_experiment(cfg)
    except AggregationError as exc:
        print(f"{label:>10}: {exc}")
        return
    marks = "  ".join(f"r{r.round}:{r.macro_f1:.2f}" for r in records if r.round % 20 == 19)
    print(f"{label:>10}: {marks}")


def main():
    spec = load_config(str(CONFIG))
    print("macro-F1 every 20 rounds, seed 0, 4 of 10 clients scaling their update\n")
    trace("honest", federation_for(spec, 0, defense=AggregatorConfig("FedAvg"), attack=AttackConfig("None"),
                                   n_byzantine=0))
    for kind in ("FedAvg", "CWMedian", "FedSECA"):
        trace(kind, federation_for(spec, 0, defense=AggregatorConfig(kind), attack=AttackConfig("Scaling")))


if __name__ == "__main__":
    main()
