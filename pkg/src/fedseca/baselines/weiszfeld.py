"""Weiszfeld-type fixed-point aggregators: smoothed geometric median and Huber loss."""

import numpy as np

from fedseca.aggregator import Aggregator
from fedseca.gradvec import stack_clients


def geomedian_objective(x: np.ndarray, v: np.ndarray) -> float:
    return float(np.linalg.norm(x - v, axis=1).sum())


def rfa_geomedian(gs, R: int = 3, eps: float = 1e-8, return_path: bool = False):
    """Smoothed Weiszfeld iterations for the geometric median.

    Starts from the coordinate-wise mean and runs exactly ``R`` steps with
    weights ``(1/K) / max(eps, ||v - w_i||)``.
    """
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    x = stack_clients(gs)
    k = x.shape[0]
    v = x.mean(axis=0)
    path = [v]
    for _ in range(R):
        dist = np.linalg.norm(x - v, axis=1)
        beta = (1.0 / k) / np.maximum(eps, dist)
        v = beta @ x / beta.sum()
        path.append(v)
    return (v, path) if return_path else v


def huber_objective(x: np.ndarray, c: np.ndarray, tau: float) -> float:
    u = np.linalg.norm(x - c, axis=1)
    return float(np.where(u <= tau, 0.5 * u**2, tau * u - 0.5 * tau**2).sum())


def huber_weiszfeld(gs, tau: float = 0.2, max_iter: int = 100, tol: float = 1e-9, return_path: bool = False):
    """Minimise the summed multi-dimensional Huber loss by reweighting.

    Each client gets weight ``min(1, tau / ||c - w_k||)`` (1 when ``c`` sits on
    the client). Stops after ``max_iter`` steps or once a step moves less
    than ``tol``.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = stack_clients(gs)
    c = x.mean(axis=0)
    path = [c]
    for _ in range(max_iter):
        dist = np.linalg.norm(x - c, axis=1)
        w = np.ones_like(dist)
        far = dist > tau
        w[far] = tau / dist[far]
        c_new = w @ x / w.sum()
        step = np.linalg.norm(c_new - c)
        c = c_new
        path.append(c)
        if step < tol:
            break
    return (c, path) if return_path else c


class RFA(Aggregator):
    kind = "RFA"

    def __init__(self, R: int = 3, eps: float = 1e-8):
        super().__init__()
        self.R = R
        self.eps = eps

    def aggregate(self, x, global_weights=None):
        return rfa_geomedian(x, self.R, self.eps)


class HuberLoss(Aggregator):
    kind = "HuberLoss"

    def __init__(self, tau: float = 0.2, max_iter: int = 100):
        super().__init__()
        self.tau = tau
        self.max_iter = max_iter

    def aggregate(self, x, global_weights=None):
        return huber_weiszfeld(x, self.tau, self.max_iter)
