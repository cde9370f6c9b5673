"""Mean, Krum / Multi-Krum and coordinate-wise order-statistic rules."""

import math

import numpy as np

from fedseca.aggregator import Aggregator
from fedseca.gradvec import median, pairwise_sq_distances, stack_clients


def fedavg(gs) -> np.ndarray:
    return stack_clients(gs).mean(axis=0)


def krum_scores(x: np.ndarray, n_byzantine: int) -> np.ndarray:
    """Sum of squared distances to the K - B - 2 nearest other clients.

    Sums are correctly rounded (``math.fsum``) so equal neighbour sets give
    equal scores and ties resolve by index alone.
    """
    k = x.shape[0]
    n_neighbours = k - n_byzantine - 2
    if n_neighbours < 1:
        raise ValueError(f"Krum needs K >= B + 3, got K={k}, B={n_byzantine}")
    dist = pairwise_sq_distances(x)
    scores = np.empty(k)
    for i in range(k):
        others = np.delete(dist[i], i)
        scores[i] = math.fsum(np.sort(others)[:n_neighbours])
    return scores


def krum(gs, n_byzantine: int, m: int = 1) -> np.ndarray:
    """Krum (``m == 1``) or Multi-Krum (mean of the ``m`` best-scored clients).

    Ties in score go to the lower client index.
    """
    x = stack_clients(gs)
    if m < 1 or m > x.shape[0]:
        raise ValueError(f"m must lie in [1, K], got m={m}")
    scores = krum_scores(x, n_byzantine)
    chosen = np.argsort(scores, kind="stable")[:m]
    if m == 1:
        return x[chosen[0]].copy()
    return x[chosen].mean(axis=0)


def cw_median(gs) -> np.ndarray:
    return median(stack_clients(gs), axis=0)


def cw_trimmed_mean(gs, beta: float = 0.2) -> np.ndarray:
    """Drop ``floor(beta * K)`` values at each end of every coordinate, average the rest."""
    x = stack_clients(gs)
    k = x.shape[0]
    b = int(np.floor(beta * k))
    if beta < 0 or k - 2 * b < 1:
        raise ValueError(f"trimming {b} from each end leaves nothing for K={k}")
    kept = np.sort(x, axis=0)[b : k - b]
    total = kept[0].copy()
    for row in kept[1:]:
        total += row
    return total / kept.shape[0]


class FedAvg(Aggregator):
    kind = "FedAvg"

    def aggregate(self, x, global_weights=None):
        return fedavg(x)


class Krum(Aggregator):
    kind = "Krum"

    def __init__(self, n_byzantine: int = 0, m: int = 1):
        super().__init__()
        self.n_byzantine = n_byzantine
        self.m = m
        if m > 1:
            self.kind = "MultiKrum"

    def aggregate(self, x, global_weights=None):
        return krum(x, self.n_byzantine, self.m)


class CWMedian(Aggregator):
    kind = "CWMedian"

    def aggregate(self, x, global_weights=None):
        return cw_median(x)


class CWTrimmedMean(Aggregator):
    kind = "CWTrimmedMean"

    def __init__(self, beta: float = 0.2):
        super().__init__()
        self.beta = beta

    def aggregate(self, x, global_weights=None):
        return cw_trimmed_mean(x, self.beta)
