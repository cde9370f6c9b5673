"""FedSECA: concordance-ratio sign election and robust coordinate-wise aggregation.

Pipeline for one round of K client gradients (rows of a (K, D) matrix):

1. sign concordance between every ordered pair of clients, turned into a
   per-client concordance ratio rho_k in [0, 1];
2. per-coordinate sign election weighted by rho (on the raw gradients);
3. clip every client to the median L2 norm, clamp every coordinate to the
   median magnitude of that coordinate, and keep only the top (1 - gamma)
   fraction of coordinates ranked by raw magnitude;
4. average, per coordinate, only the processed values that agree with the
   elected sign;
5. optional server momentum.

Sums over clients are taken in sorted order so that the result does not
depend on the order in which clients are listed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from fedseca.aggregator import Aggregator
from fedseca.gradvec import as_gradvec, median, quantile, stack_clients


def sign_concordance(g1, g2) -> float:
    """Mean of coordinate-wise signum products, in [-1, 1]."""
    a = np.asarray(g1, dtype=np.float64)
    b = np.asarray(g2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean(np.sign(a) * np.sign(b)))


def concordance_votes(gs, stats: Optional[dict] = None) -> np.ndarray:
    """Integer numerators of the concordance ratios.

    Entry k is ``max(0, sum_l sgn(omega(g_k, g_l)))`` over all K clients,
    self included. Every one of the K^2 ordered pairs is evaluated; the
    count is added to ``stats["pair_evaluations"]`` when given.
    """
    x = stack_clients(gs)
    k, d = x.shape
    signs = np.sign(x).astype(np.int8)
    votes = np.zeros(k, dtype=np.int64)
    for i in range(k):
        si = signs[i]
        total = 0
        for j in range(k):
            # omega = agree/D; only its sign matters, D > 0
            agree = int(np.multiply(si, signs[j], dtype=np.int64).sum())
            total += (agree > 0) - (agree < 0)
        votes[i] = max(0, total)
    if stats is not None:
        stats["pair_evaluations"] = stats.get("pair_evaluations", 0) + k * k
    return votes


def concordance_ratios(gs, stats: Optional[dict] = None) -> np.ndarray:
    votes = concordance_votes(gs, stats)
    return votes / len(votes)


def _sorted_sum(values: np.ndarray) -> np.ndarray:
    # column sums independent of row order
    return np.sort(values, axis=0).sum(axis=0)


def elect_signs(gs, rho) -> np.ndarray:
    """Elected sign per coordinate: ``sgn(sum_k rho_k * sgn(g_k^j))``."""
    x = stack_clients(gs)
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (x.shape[0],):
        raise ValueError(f"need one weight per client, got {rho.shape} for K={x.shape[0]}")
    tally = _sorted_sum(rho[:, None] * np.sign(x))
    return np.sign(tally).astype(np.int8)


def clip_to_median_norm(gs) -> np.ndarray:
    """Scale each client by ``min(1, tau / ||g_k||)`` with tau the median norm."""
    x = stack_clients(gs)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    tau = median(norms)
    scale = np.ones_like(norms)
    nz = norms > 0
    scale[nz] = np.minimum(1.0, tau / norms[nz])
    return x * scale[:, None]


def clamp_to_coordinate_median(gs_hat) -> np.ndarray:
    """Clamp ``|g_k^j|`` to the median magnitude of coordinate j."""
    x = stack_clients(gs_hat)
    mags = np.abs(x)
    mu = median(mags, axis=0)
    return np.sign(x) * np.minimum(mu, mags)


@dataclass
class VRSGradient:
    values: np.ndarray
    kept_mask: np.ndarray


def sparsify(g_raw, g_bar, gamma: float) -> VRSGradient:
    """Keep coordinates whose raw magnitude strictly exceeds the gamma-quantile.

    The threshold and the kept set come from ``g_raw``; the surviving values
    are taken from ``g_bar`` (the clipped and clamped gradient).
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    raw = as_gradvec(g_raw)
    bar = as_gradvec(g_bar)
    if raw.shape != bar.shape:
        raise ValueError(f"length mismatch: {raw.size} vs {bar.size}")
    mags = np.abs(raw)
    lam = quantile(mags, gamma)
    mask = mags > lam
    return VRSGradient(values=np.where(mask, bar, 0.0), kept_mask=mask)


def sparsify_rows(x_raw: np.ndarray, x_bar: np.ndarray, gamma: float) -> np.ndarray:
    """Row-wise :func:`sparsify` on (K, D) matrices, returning the values."""
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    mags = np.abs(x_raw)
    lam = quantile(mags, gamma, axis=1)
    return np.where(mags > lam[:, None], x_bar, 0.0)


def roca_aggregate(gs_ddot, s) -> np.ndarray:
    """Mean over clients of the values whose sign matches the elected sign.

    Coordinates where no client qualifies (including every coordinate with an
    elected sign of 0) aggregate to 0.
    """
    if isinstance(gs_ddot, (list, tuple)) and gs_ddot and isinstance(gs_ddot[0], VRSGradient):
        gs_ddot = [v.values for v in gs_ddot]
    x = stack_clients(gs_ddot)
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (x.shape[1],):
        raise ValueError(f"elected signs have shape {s.shape}, expected ({x.shape[1]},)")
    mask = (x * s) > 0
    total = _sorted_sum(np.where(mask, x, 0.0))
    count = mask.sum(axis=0)
    out = np.zeros(x.shape[1])
    np.divide(total, count, out=out, where=count > 0)
    return out


@dataclass
class MomentumState:
    g_prev: Optional[np.ndarray] = None


def apply_momentum(g_tilde, state: MomentumState, beta_ra: float) -> np.ndarray:
    """``beta * previous + (1 - beta) * current``; ``state`` is updated in place."""
    g = as_gradvec(g_tilde)
    prev = state.g_prev if state.g_prev is not None else np.zeros_like(g)
    if prev.shape != g.shape:
        raise ValueError(f"momentum buffer has length {prev.size}, got {g.size}")
    out = beta_ra * prev + (1.0 - beta_ra) * g
    state.g_prev = out
    return out


@dataclass
class FedSecaConfig:
    """FedSECA hyperparameters plus switches used for component ablations.

    Attributes:
        gamma: fraction of coordinates dropped by sparsification.
        beta_ra: server momentum coefficient.
        momentum_enabled: apply server momentum.
        use_concordance: weight sign votes by rho (otherwise every client
            votes with weight 1).
        use_vrs: feed clipped/clamped/sparsified gradients into the
            coordinate-wise mean (otherwise the raw gradients).
        use_clip: median-norm clipping inside the VRS step.
        use_clamp: coordinate-median clamping inside the VRS step.
    """

    gamma: float = 0.9
    beta_ra: float = 0.5
    momentum_enabled: bool = True
    use_concordance: bool = True
    use_vrs: bool = True
    use_clip: bool = True
    use_clamp: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 <= self.beta_ra < 1.0:
            raise ValueError(f"beta_ra must lie in [0, 1), got {self.beta_ra}")


def vrs_gradients(x: np.ndarray, cfg: FedSecaConfig) -> np.ndarray:
    """Clip, clamp and sparsify a (K, D) matrix of raw gradients."""
    out = clip_to_median_norm(x) if cfg.use_clip else x
    out = clamp_to_coordinate_median(out) if cfg.use_clamp else out
    return sparsify_rows(x, out, cfg.gamma)


def fedseca_aggregate(gs, cfg: FedSecaConfig, state: MomentumState, stats: Optional[dict] = None):
    x = stack_clients(gs)
    k = x.shape[0]
    if cfg.use_concordance:
        votes = concordance_votes(x, stats)
        rho = votes / k
        # integer weights elect the same signs as rho = votes / K, without rounding
        s = elect_signs(x, votes.astype(np.float64))
    else:
        rho = np.ones(k)
        s = elect_signs(x, rho)
    if stats is not None:
        stats["rho"] = rho
    x_ddot = vrs_gradients(x, cfg) if cfg.use_vrs else x
    g_tilde = roca_aggregate(x_ddot, s)
    if cfg.momentum_enabled:
        return apply_momentum(g_tilde, state, cfg.beta_ra)
    return g_tilde


class FedSECA(Aggregator):
    kind = "FedSECA"

    def __init__(self, cfg: Optional[FedSecaConfig] = None):
        super().__init__()
        self.cfg = cfg if cfg is not None else FedSecaConfig()
        self.state = MomentumState()

    def aggregate(self, x, global_weights=None):
        stats: dict = {}
        out = fedseca_aggregate(x, self.cfg, self.state, stats)
        self.last_info = stats
        return out

    def reset(self):
        super().reset()
        self.state = MomentumState()
