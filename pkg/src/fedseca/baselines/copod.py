"""COPOD outlier scores and the distance-based outlier suppression aggregator."""

import numpy as np

from fedseca.aggregator import Aggregator
from fedseca.gradvec import stack_clients


def _ecdf_inclusive(col: np.ndarray) -> np.ndarray:
    """P(X <= x_i) for every entry, counting ties inclusively."""
    s = np.sort(col)
    return np.searchsorted(s, col, side="right") / col.size


def _skewness(col: np.ndarray) -> float:
    c = col - col.mean()
    m2 = np.mean(c**2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean(c**3) / m2**1.5)


def copod_scores(features) -> np.ndarray:
    """Copula-based outlier score of every row.

    Per column, left and right empirical tail probabilities are computed
    with inclusive counting (so they are never below 1/K). The tail facing
    the column's skew is used: right for positive skew, left for negative,
    and the average of both negative logs when the column is symmetric.
    The score of a row is the sum over columns of ``-ln(tail probability)``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need a (K >= 2, F) feature matrix, got shape {x.shape}")
    scores = np.zeros(x.shape[0])
    for j in range(x.shape[1]):
        col = x[:, j]
        left = -np.log(_ecdf_inclusive(col))
        right = -np.log(_ecdf_inclusive(-col))
        skew = _skewness(col)
        if abs(skew) < 1e-9:
            scores += 0.5 * (left + right)
        elif skew > 0:
            scores += right
        else:
            scores += left
    return scores


def distance_matrices(x: np.ndarray):
    """Pairwise (1 - cosine) and Euclidean distance matrices of the rows."""
    norms = np.linalg.norm(x, axis=1)
    gram = x @ x.T
    denom = np.outer(norms, norms)
    cos = np.zeros_like(gram)
    np.divide(gram, denom, out=cos, where=denom > 0)
    np.fill_diagonal(cos, np.where(norms > 0, 1.0, 0.0))
    m_s = 1.0 - np.clip(cos, -1.0, 1.0)
    k = x.shape[0]
    m_e = np.empty((k, k))
    for i in range(k):
        m_e[i] = np.linalg.norm(x - x[i], axis=1)
    return m_s, m_e


def copod_weights(ws) -> np.ndarray:
    x = stack_clients(ws)
    if x.shape[0] < 2:
        raise ValueError("COPOD-DOS needs at least two clients")
    m_s, m_e = distance_matrices(x)
    r = 0.5 * (copod_scores(m_s) + copod_scores(m_e))
    z = -r - np.max(-r)
    lam = np.exp(z)
    return lam / lam.sum()


def copod_dos(ws) -> np.ndarray:
    """Outlier-suppressing weighted mean with weights ``softmax(-score)``."""
    x = stack_clients(ws)
    return copod_weights(x) @ x


class CopodDos(Aggregator):
    kind = "CopodDos"

    def aggregate(self, x, global_weights=None):
        lam = copod_weights(x)
        self.last_info = {"weights": lam}
        return lam @ x
