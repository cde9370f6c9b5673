"""Flat-vector primitives and pairwise similarity diagnostics.

A client update is a 1-D float64 numpy array of length D. A round of K
updates is handled as a (K, D) array. Every aggregator and attack in the
package goes through :func:`as_gradvec` / :func:`stack_clients` so that
non-finite values are rejected at the boundary.
"""

from dataclasses import dataclass

import numpy as np


class NonFiniteGradientError(ValueError):
    """A client vector contained NaN or Inf."""


def as_gradvec(values) -> np.ndarray:
    """Validate and convert ``values`` to a finite 1-D float64 vector."""
    g = np.asarray(values, dtype=np.float64)
    if g.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {g.shape}")
    if g.size == 0:
        raise ValueError("gradient vector must be non-empty")
    if not np.all(np.isfinite(g)):
        raise NonFiniteGradientError("gradient vector contains NaN or Inf")
    return g


def stack_clients(gs) -> np.ndarray:
    """Stack K client vectors into a validated (K, D) float64 array."""
    if isinstance(gs, np.ndarray) and gs.ndim == 2:
        arr = np.asarray(gs, dtype=np.float64)
    else:
        rows = [np.asarray(g, dtype=np.float64) for g in gs]
        if not rows:
            raise ValueError("need at least one client vector")
        lengths = {r.shape for r in rows}
        if len(lengths) != 1:
            raise ValueError(f"client vectors differ in shape: {sorted(lengths)}")
        arr = np.stack(rows)
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"empty client matrix of shape {arr.shape}")
    if arr.ndim != 2:
        raise ValueError(f"expected (K, D) client matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteGradientError("client vectors contain NaN or Inf")
    return arr


def l2_norm(g) -> float:
    return float(np.sqrt(np.dot(g, g)))


def signum_vec(g) -> np.ndarray:
    # np.sign maps exact zeros to 0; no epsilon band.
    return np.sign(np.asarray(g, dtype=np.float64))


def median(xs, axis=None):
    """Median with the midpoint convention for an even count.

    With ``axis=None`` the input is flattened and a float is returned;
    otherwise the median is taken along ``axis``.
    """
    a = np.asarray(xs, dtype=np.float64)
    if axis is None:
        a = a.ravel()
        axis = 0
    n = a.shape[axis]
    if n == 0:
        raise ValueError("median of an empty sequence")
    half = n // 2
    if n % 2:
        out = np.take(np.partition(a, half, axis=axis), half, axis=axis)
    else:
        part = np.partition(a, (half - 1, half), axis=axis)
        lo = np.take(part, half - 1, axis=axis)
        hi = np.take(part, half, axis=axis)
        out = (lo + hi) / 2.0
    return float(out) if np.ndim(out) == 0 else out


def quantile(xs, q: float, axis=None):
    """Linear-interpolation quantile at rank ``q * (n - 1)``.

    Args:
        xs: values; flattened when ``axis`` is None.
        q: quantile level in [0, 1].
        axis: axis to reduce along (e.g. ``-1`` for one quantile per row).

    Returns:
        A float, or an array with ``axis`` removed.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level must lie in [0, 1], got {q}")
    a = np.asarray(xs, dtype=np.float64)
    if axis is None:
        a = a.ravel()
        axis = 0
    n = a.shape[axis]
    if n == 0:
        raise ValueError("quantile of an empty sequence")
    pos = q * (n - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, n - 1)
    frac = pos - lo
    part = np.partition(a, (lo, hi) if hi != lo else lo, axis=axis)
    v_lo = np.take(part, lo, axis=axis)
    if frac == 0.0:
        out = v_lo
    else:
        v_hi = np.take(part, hi, axis=axis)
        out = v_lo + frac * (v_hi - v_lo)
    return float(out) if np.ndim(out) == 0 else out


def cosine_similarity(a, b) -> float:
    na, nb = l2_norm(a), l2_norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def pearson(a, b) -> float:
    ac = np.asarray(a, dtype=np.float64) - np.mean(a)
    bc = np.asarray(b, dtype=np.float64) - np.mean(b)
    return cosine_similarity(ac, bc)


def kendall_tau_a(a, b) -> float:
    """Kendall tau-a by naive O(n^2) pair counting."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n = a.size
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, k=1)
    sa = np.sign(a[:, None] - a[None, :])[iu]
    sb = np.sign(b[:, None] - b[None, :])[iu]
    return float(np.sum(sa * sb) / (n * (n - 1) / 2))


@dataclass(frozen=True)
class PairwiseMetricReport:
    cosine: float
    pearson: float
    kendall_tau: float
    sign_concordance: float
    l2_a: float
    l2_b: float


def pairwise_metrics(a, b, max_kendall_coords: int = 2000) -> PairwiseMetricReport:
    """Similarity diagnostics between two update vectors.

    Kendall tau is evaluated on an evenly strided subsample of at most
    ``max_kendall_coords`` coordinates since it is quadratic in D.
    """
    from fedseca.seca import sign_concordance

    a = as_gradvec(a)
    b = as_gradvec(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    idx = np.arange(a.size)
    if a.size > max_kendall_coords:
        idx = np.linspace(0, a.size - 1, max_kendall_coords).astype(np.int64)
    return PairwiseMetricReport(
        cosine=cosine_similarity(a, b),
        pearson=pearson(a, b),
        kendall_tau=kendall_tau_a(a[idx], b[idx]),
        sign_concordance=sign_concordance(a, b),
        l2_a=l2_norm(a),
        l2_b=l2_norm(b),
    )


def pairwise_sq_distances(x: np.ndarray) -> np.ndarray:
    """(K, K) matrix of squared Euclidean distances between rows of ``x``."""
    k = x.shape[0]
    out = np.empty((k, k))
    for i in range(k):
        out[i] = ((x - x[i]) ** 2).sum(axis=1)
    return out
