"""TIES-Merging adapted to Byzantine settings: one unit vote per client."""

import numpy as np

from fedseca.aggregator import Aggregator
from fedseca.gradvec import stack_clients
from fedseca.seca import roca_aggregate, sparsify_rows


def ties_merge_robust(gs, gamma_t: float = 0.9) -> np.ndarray:
    x = stack_clients(gs)
    u = np.sign(np.sign(x).sum(axis=0))
    v = sparsify_rows(x, x, gamma_t)
    return roca_aggregate(v, u)


class RTiesMerge(Aggregator):
    kind = "RTiesMerge"

    def __init__(self, gamma_t: float = 0.9):
        super().__init__()
        self.gamma_t = gamma_t

    def aggregate(self, x, global_weights=None):
        return ties_merge_robust(x, self.gamma_t)
