"""FL-Detector: flag clients whose updates are poorly predicted from history.

Each client's update is predicted from its previous update and an L-BFGS
Hessian-vector product built on the server's global history. The windowed
mean prediction error is the suspicion score; a gap statistic decides
whether the scores split into two groups, and if so only the low-suspicion
group is averaged.
"""

from collections import deque
from typing import Deque, Optional, Tuple

import numpy as np

from fedseca.aggregator import Aggregator


def lbfgs_hvp(pairs, v: np.ndarray) -> np.ndarray:
    """Approximate ``H @ v`` from (weight delta, gradient delta) pairs.

    The classic two-loop recursion maps gradient differences to weight
    differences (an inverse-Hessian product). Running it with the roles
    swapped, i.e. treating weight deltas as the "gradient" side, yields a
    Hessian product instead. Pairs with non-positive curvature are skipped.
    """
    usable = [(dg, dw) for dw, dg in pairs if float(dg @ dw) > 1e-12]
    if not usable:
        return np.zeros_like(v)
    q = v.copy()
    alphas = []
    for s, y in reversed(usable):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append((a, rho, s, y))
        q = q - a * y
    s_last, y_last = usable[-1]
    r = (float(s_last @ y_last) / float(y_last @ y_last)) * q
    for a, rho, s, y in reversed(alphas):
        b = rho * float(y @ r)
        r = r + s * (a - b)
    return r


def _within_dispersion(values: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for lab in np.unique(labels):
        grp = values[labels == lab]
        total += float(np.sum((grp - grp.mean()) ** 2))
    return total


def two_means_1d(values: np.ndarray, n_iter: int = 100) -> np.ndarray:
    """2-means on scalars with farthest-point initialisation (min and max)."""
    centers = np.array([values.min(), values.max()], dtype=np.float64)
    labels = np.zeros(values.size, dtype=np.int64)
    for _ in range(n_iter):
        new = (np.abs(values - centers[1]) < np.abs(values - centers[0])).astype(np.int64)
        for c in (0, 1):
            if np.any(new == c):
                centers[c] = values[new == c].mean()
        if np.array_equal(new, labels):
            break
        labels = new
    return labels


def gap_prefers_two(values: np.ndarray, rng: np.random.Generator, n_refs: int = 10) -> bool:
    """Gap statistic choice between one and two clusters of scalar scores."""
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return False
    n = values.size

    def log_w(v, k):
        labels = np.zeros(v.size, dtype=np.int64) if k == 1 else two_means_1d(v)
        return np.log(max(_within_dispersion(v, labels), 1e-300))

    refs = rng.uniform(lo, hi, size=(n_refs, n))
    gaps, sds = [], []
    for k in (1, 2):
        ref_logs = np.array([log_w(r, k) for r in refs])
        gaps.append(ref_logs.mean() - log_w(values, k))
        sds.append(ref_logs.std() * np.sqrt(1.0 + 1.0 / n_refs))
    # smallest k with Gap(k) >= Gap(k+1) - s(k+1)
    return not gaps[0] >= gaps[1] - sds[1]


class FLDetector(Aggregator):
    kind = "FLDetector"

    def __init__(self, window: int = 10, n_refs: int = 10, seed: int = 0):
        super().__init__()
        self.window = window
        self.n_refs = n_refs
        self.seed = seed
        self.reset()

    def reset(self):
        super().reset()
        self.history: Deque[Tuple[np.ndarray, np.ndarray]] = deque(maxlen=self.window)
        self.distances: Deque[np.ndarray] = deque(maxlen=self.window)
        self.prev_client_grads: Optional[np.ndarray] = None
        self.prev_weights: Optional[np.ndarray] = None
        self.prev_aggregate: Optional[np.ndarray] = None
        self.implicit_weights: Optional[np.ndarray] = None
        self.rng = np.random.default_rng(self.seed)

    def suspicion_scores(self) -> Optional[np.ndarray]:
        if len(self.distances) < self.window:
            return None
        return np.mean(np.stack(self.distances), axis=0)

    def aggregate(self, x, global_weights=None):
        k, d = x.shape
        if global_weights is None:
            # without broadcast weights, track w as the running sum of -aggregate
            if self.implicit_weights is None:
                self.implicit_weights = np.zeros(d)
            global_weights = self.implicit_weights
        global_weights = np.asarray(global_weights, dtype=np.float64)

        if self.prev_client_grads is not None and self.prev_client_grads.shape == x.shape:
            predicted = np.stack(
                [self.prev_client_grads[i] + lbfgs_hvp(self.history, x[i]) for i in range(k)]
            )
            self.distances.append(np.linalg.norm(predicted - x, axis=1))
        else:
            self.distances.clear()

        scores = self.suspicion_scores()
        keep = np.arange(k)
        if scores is not None and gap_prefers_two(scores, self.rng, self.n_refs):
            labels = two_means_1d(scores)
            means = [scores[labels == c].mean() for c in (0, 1)]
            keep = np.flatnonzero(labels == int(np.argmin(means)))
        out = x[keep].mean(axis=0)
        self.last_info = {"suspicion": scores, "kept": keep}

        if self.prev_weights is not None and self.prev_aggregate is not None:
            self.history.append((global_weights - self.prev_weights, out - self.prev_aggregate))
        self.prev_weights = global_weights.copy()
        self.prev_aggregate = out.copy()
        self.prev_client_grads = x.copy()
        if self.implicit_weights is not None:
            self.implicit_weights = self.implicit_weights - out
        return out
