"""Centered clipping and its randomized / sequential bucketing variants.

All three keep the previous round's aggregate as the clipping reference
(zero on the first round).
"""

import math
from typing import Optional

import numpy as np

from fedseca.aggregator import Aggregator
from fedseca.gradvec import as_gradvec, stack_clients


def centered_clip(gs, ref, tau: float = 100.0, Q: int = 3) -> np.ndarray:
    """Iteratively move from ``ref`` by the mean of radius-``tau`` clipped offsets."""
    if Q < 1:
        raise ValueError(f"Q must be >= 1, got {Q}")
    x = stack_clients(gs)
    v = as_gradvec(ref).copy()
    for _ in range(Q):
        diff = x - v
        dist = np.linalg.norm(diff, axis=1)
        scale = np.ones_like(dist)
        far = dist > tau
        scale[far] = tau / dist[far]
        v = v + (diff * scale[:, None]).mean(axis=0)
    return v


def bucket_means(x: np.ndarray, order: np.ndarray, S: int) -> np.ndarray:
    """Means of consecutive groups of ``S`` clients taken in ``order``."""
    n_buckets = math.ceil(len(order) / S)
    return np.stack([x[order[i * S : (i + 1) * S]].mean(axis=0) for i in range(n_buckets)])


def cc_rand_bucket(gs, S: int, rng: np.random.Generator, ref, tau: float = 100.0) -> np.ndarray:
    """Shuffle, average in buckets of ``S``, then one centered-clip step."""
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    x = stack_clients(gs)
    order = rng.permutation(x.shape[0])
    return centered_clip(bucket_means(x, order, S), ref, tau, Q=1)


def seq_bucket_groups(scores: np.ndarray, S: int) -> list:
    """Client groups for sequential bucketing.

    Clients sorted by decreasing score are cut into ``S`` consecutive
    stripes of length ``R = ceil(K / S)``; group r collects the r-th member
    of every stripe, so each group spans the whole similarity range.
    """
    k = len(scores)
    order = np.argsort(-scores, kind="stable")
    n_groups = math.ceil(k / S)
    stripes = [order[s * n_groups : min(k, (s + 1) * n_groups)] for s in range(S)]
    groups = []
    for r in range(n_groups):
        members = [int(st[r]) for st in stripes if r < len(st)]
        if members:
            groups.append(members)
    return groups


def cc_seq_bucket(gs, S: int, ref, tau: float = 100.0) -> np.ndarray:
    """Sequential bucketing: each bucket is clipped around the previous bucket's output.

    Clients are ranked by cosine similarity to ``ref``; with an all-zero
    reference every score is 0 and the ranking falls back to client index.
    """
    if S < 1:
        raise ValueError(f"S must be >= 1, got {S}")
    x = stack_clients(gs)
    ref = as_gradvec(ref)
    ref_norm = np.linalg.norm(ref)
    norms = np.linalg.norm(x, axis=1)
    scores = np.zeros(x.shape[0])
    if ref_norm > 0:
        nz = norms > 0
        scores[nz] = (x[nz] @ ref) / (norms[nz] * ref_norm)
    u = ref
    for members in seq_bucket_groups(scores, S):
        u = centered_clip(x[members], u, tau, Q=1)
    return u


class _ReferenceClip(Aggregator):
    def __init__(self):
        super().__init__()
        self.ref: Optional[np.ndarray] = None

    def _ref_for(self, x):
        if self.ref is None or self.ref.shape[0] != x.shape[1]:
            return np.zeros(x.shape[1])
        return self.ref

    def reset(self):
        super().reset()
        self.ref = None


class CClip(_ReferenceClip):
    kind = "CClip"

    def __init__(self, tau: float = 100.0, Q: int = 3):
        super().__init__()
        self.tau = tau
        self.Q = Q

    def aggregate(self, x, global_weights=None):
        self.ref = centered_clip(x, self._ref_for(x), self.tau, self.Q)
        return self.ref


class CCRandBucket(_ReferenceClip):
    kind = "CCRandBucket"

    def __init__(self, S: int = 2, tau: float = 100.0, seed: int = 0):
        super().__init__()
        self.S = S
        self.tau = tau
        self.seed = seed
        self.rng = np.random.default_rng(seed)

    def aggregate(self, x, global_weights=None):
        self.ref = cc_rand_bucket(x, self.S, self.rng, self._ref_for(x), self.tau)
        return self.ref

    def reset(self):
        super().reset()
        self.rng = np.random.default_rng(self.seed)


class CCSeqBucket(_ReferenceClip):
    kind = "CCSeqBucket"

    def __init__(self, S: int = 2, tau: float = 100.0):
        super().__init__()
        self.S = S
        self.tau = tau

    def aggregate(self, x, global_weights=None):
        self.ref = cc_seq_bucket(x, self.S, self._ref_for(x), self.tau)
        return self.ref
