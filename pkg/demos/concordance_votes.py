"""Who agrees with whom? A look at the concordance votes inside one round.

Every client compares the sign pattern of its update with every other
client's. A client collects one vote per peer it mostly agrees with, loses
one per peer it mostly disagrees with, and its weight in the sign election is
the clipped total divided by K. Attackers that flip the honest direction
(IPM) lose almost all their votes.

    python3 demos/concordance_votes.py
"""

from pathlib import Path

import numpy as np

from fedseca import AggregatorConfig, AttackConfig
from fedseca.bench.config import federation_for, load_config
from fedseca.sim import Federation

CONFIG = Path(__file__).resolve().parent.parent / "configs" / "desk_matrix.yaml"


def main():
    spec = load_config(str(CONFIG))
    np.set_printoptions(precision=2, suppress=True)
    for attack in ("None", "IPM", "Fang", "ALIE"):
        cfg = federation_for(spec, 0, defense=AggregatorConfig("FedSECA"), attack=AttackConfig(attack),
                             n_byzantine=0 if attack == "None" else 4)
        fed = Federation(cfg)
        first = fed.run_round()
        print(f"{attack:>5}  rho (honest first, attackers last): {np.asarray(first.rho)}")


if __name__ == "__main__":
    main()
