"""Synthetic Gaussian-mixture classification task and Dirichlet client splits."""

from dataclasses import dataclass
from typing import List

import numpy as np


@dataclass
class SyntheticTask:
    """Isotropic Gaussian classes with means on orthogonal directions.

    Class means are ``margin`` times orthonormal random directions, so the
    distance between any two means is ``margin * sqrt(2)``; noise has
    standard deviation ``noise`` per feature.
    """

    feature_dim: int = 20
    n_classes: int = 4
    margin: float = 4.0
    noise: float = 1.0
    n_train: int = 2000
    n_test: int = 1000
    seed: int = 0
    majority_share: float = 0.0
    offset: float = 0.0

    def __post_init__(self):
        if self.n_classes >= self.feature_dim:
            raise ValueError("need feature_dim > n_classes: class means and the offset are mutually orthogonal")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")
        if not 0.0 <= self.majority_share < 1.0:
            raise ValueError("majority_share must lie in [0, 1)")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")

    def train_priors(self) -> np.ndarray:
        """Class frequencies of the training pool; uniform unless ``majority_share`` is set."""
        c = self.n_classes
        if self.majority_share == 0.0:
            return np.full(c, 1.0 / c)
        rest = (1.0 - self.majority_share) / (c - 1)
        return np.array([self.majority_share] + [rest] * (c - 1))

    def class_means(self) -> np.ndarray:
        rng = np.random.default_rng([self.seed, 0])
        q, _ = np.linalg.qr(rng.standard_normal((self.feature_dim, self.n_classes + 1)))
        return self.margin * q[:, : self.n_classes].T

    def shift(self) -> np.ndarray:
        """Common offset added to every sample, orthogonal to the class means."""
        rng = np.random.default_rng([self.seed, 0])
        q, _ = np.linalg.qr(rng.standard_normal((self.feature_dim, self.n_classes + 1)))
        return self.offset * q[:, self.n_classes]

    def _sample(self, n: int, stream: int, balanced: bool):
        rng = np.random.default_rng([self.seed, stream])
        if balanced:
            y = np.repeat(np.arange(self.n_classes), int(np.ceil(n / self.n_classes)))[:n]
        else:
            y = rng.choice(self.n_classes, size=n, p=self.train_priors())
        x = self.shift() + self.class_means()[y] + self.noise * rng.standard_normal((n, self.feature_dim))
        return x, y

    def train_set(self):
        return self._sample(self.n_train, 1, balanced=False)

    def test_set(self):
        """Class-balanced pooled test set."""
        return self._sample(self.n_test, 2, balanced=True)


@dataclass
class ClientDataset:
    client_id: int
    x: np.ndarray
    y: np.ndarray
    flipped: bool = False

    def __len__(self):
        return len(self.y)


def partition_dirichlet(x: np.ndarray, y: np.ndarray, n_clients: int, alpha: float, seed: int,
                        n_classes: int = None, max_tries: int = 1000) -> List[ClientDataset]:
    """Split samples across clients with per-class Dirichlet(alpha) proportions.

    Draws are repeated until every client holds at least one sample.
    """
    if n_clients < 1:
        raise ValueError("need at least one client")
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    rng = np.random.default_rng([seed, 7])
    for _ in range(max_tries):
        buckets = [[] for _ in range(n_clients)]
        for c in range(n_classes):
            idx = np.flatnonzero(y == c)
            idx = idx[rng.permutation(idx.size)]
            props = rng.dirichlet(np.full(n_clients, alpha))
            cuts = (np.cumsum(props)[:-1] * idx.size).astype(np.int64)
            for k, part in enumerate(np.split(idx, cuts)):
                buckets[k].extend(part.tolist())
        if all(buckets):
            break
    else:
        raise RuntimeError("could not give every client a sample; too few samples for this split")
    out = []
    for k, b in enumerate(buckets):
        b = np.sort(np.asarray(b, dtype=np.int64))
        out.append(ClientDataset(k, x[b], y[b]))
    return out
