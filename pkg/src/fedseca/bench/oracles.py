"""Brute-force reference checks for the aggregation primitives.

Each suite draws random instances from a fixed seed, computes the answer two
ways and counts agreements. Implementations are injectable so a deliberately
broken variant can be shown to fail its suite.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from fedseca import attacks, gradvec
from fedseca.baselines import copod, simple, weiszfeld

N_INSTANCES = 200


@dataclass
class SuiteResult:
    name: str
    instances: int
    passed: int
    worst_error: float = 0.0
    first_failure: str = ""

    @property
    def ok(self) -> bool:
        return self.instances > 0 and self.passed == self.instances


# --- reference implementations -------------------------------------------------


def krum_oracle(x: np.ndarray, n_byzantine: int, m: int) -> np.ndarray:
    k = x.shape[0]
    n_nb = k - n_byzantine - 2
    scores = []
    for i in range(k):
        d = sorted(float(np.sum((x[i] - x[j]) ** 2)) for j in range(k) if j != i)
        scores.append(math.fsum(d[:n_nb]))
    order = sorted(range(k), key=lambda i: (scores[i], i))
    return np.mean([x[i] for i in order[:m]], axis=0)


def trimmed_mean_oracle(x: np.ndarray, beta: float) -> np.ndarray:
    k = x.shape[0]
    t = int(np.floor(beta * k))
    out = []
    for col in x.T:
        kept = sorted(col.tolist())[t : k - t]
        out.append(sum(kept) / len(kept))
    return np.array(out)


def median_oracle(xs) -> float:
    s = sorted(xs)
    n = len(s)
    return s[n // 2] if n % 2 else (s[n // 2 - 1] + s[n // 2]) / 2


def quantile_oracle(xs, q: float) -> float:
    s = sorted(xs)
    pos = q * (len(s) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


def grid_minimize_2d(objective: Callable[[np.ndarray], np.ndarray], lo: np.ndarray, hi: np.ndarray,
                     step: float = 1e-6, n: int = 41, extra: Optional[np.ndarray] = None) -> np.ndarray:
    """Minimise a convex function of 2-D points by grid search with window halving.

    Each pass evaluates an ``n x n`` grid over the current box, recentres a
    box of half the width on the best point seen so far and repeats until
    the grid spacing is at most ``step``. ``extra`` points (e.g. the kinks of
    a piecewise-smooth objective) are always kept as candidates.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    cands = np.empty((0, 2)) if extra is None else np.asarray(extra, float).reshape(-1, 2)
    best = None
    while True:
        gx = np.linspace(lo[0], hi[0], n)
        gy = np.linspace(lo[1], hi[1], n)
        pts = np.stack(np.meshgrid(gx, gy, indexing="ij"), axis=-1).reshape(-1, 2)
        pts = np.vstack([pts, cands] if best is None else [pts, cands, best[None]])
        best = pts[int(np.argmin(objective(pts)))]
        spacing = (hi - lo) / (n - 1)
        if np.all(spacing <= step):
            return best
        half = (hi - lo) / 4
        lo, hi = best - half, best + half


def _geomedian_objective_many(x: np.ndarray):
    def f(pts):
        return np.linalg.norm(pts[:, None, :] - x[None, :, :], axis=2).sum(axis=1)
    return f


def _huber_objective_many(x: np.ndarray, tau: float):
    def f(pts):
        u = np.linalg.norm(pts[:, None, :] - x[None, :, :], axis=2)
        return np.where(u <= tau, 0.5 * u**2, tau * u - 0.5 * tau**2).sum(axis=1)
    return f


# --- suites --------------------------------------------------------------------


def _suite(name: str, n: int, check: Callable[[np.random.Generator], tuple], seed: int) -> SuiteResult:
    rng = np.random.default_rng([seed, sum(map(ord, name))])
    res = SuiteResult(name, 0, 0)
    for i in range(n):
        ok, err, detail = check(rng)
        res.instances += 1
        res.worst_error = max(res.worst_error, float(err))
        if ok:
            res.passed += 1
        elif not res.first_failure:
            res.first_failure = f"instance {i}: {detail}"
    return res


def _rand_clients(rng, kmax=12, dmax=32, kmin=1):
    k = int(rng.integers(kmin, kmax + 1))
    d = int(rng.integers(1, dmax + 1))
    x = rng.normal(size=(k, d))
    if rng.random() < 0.3:
        # duplicated rows exercise tie-breaking
        x[int(rng.integers(k))] = x[0]
    if rng.random() < 0.2:
        x = np.round(x, 1)
    return x


def suite_krum(impl=simple.krum, n=N_INSTANCES, seed=0) -> SuiteResult:
    def check(rng):
        x = _rand_clients(rng, kmin=3)
        k = x.shape[0]
        b = int(rng.integers(0, k - 2))
        m = int(rng.integers(1, k + 1)) if rng.random() < 0.5 else 1
        got, want = impl(x, b, m), krum_oracle(x, b, m)
        err = float(np.max(np.abs(got - want)))
        return np.array_equal(got, want), err, f"K={k} B={b} m={m} err={err:.3g}"
    return _suite("krum", n, check, seed)


def suite_trimmed_mean(impl=simple.cw_trimmed_mean, n=N_INSTANCES, seed=0) -> SuiteResult:
    def check(rng):
        x = _rand_clients(rng)
        k = x.shape[0]
        beta = float(rng.uniform(0, 0.5))
        if k - 2 * int(np.floor(beta * k)) < 1:
            beta = 0.0
        got, want = impl(x, beta), trimmed_mean_oracle(x, beta)
        err = float(np.max(np.abs(got - want)))
        return np.array_equal(got, want), err, f"K={k} beta={beta:.3f} err={err:.3g}"
    return _suite("cw_trimmed_mean", n, check, seed)


def suite_cw_median(impl=simple.cw_median, n=N_INSTANCES, seed=0) -> SuiteResult:
    def check(rng):
        x = _rand_clients(rng)
        got = impl(x)
        want = np.array([median_oracle(c.tolist()) for c in x.T])
        err = float(np.max(np.abs(got - want)))
        return np.array_equal(got, want), err, f"K={x.shape[0]} err={err:.3g}"
    return _suite("cw_median", n, check, seed)


def suite_median(impl=gradvec.median, n=1000, seed=0) -> SuiteResult:
    def check(rng):
        xs = rng.normal(size=int(rng.integers(1, 40))).tolist()
        got, want = float(impl(xs)), median_oracle(xs)
        return got == want, abs(got - want), f"n={len(xs)} got={got} want={want}"
    return _suite("median", n, check, seed)


def suite_quantile(impl=gradvec.quantile, n=1000, seed=0) -> SuiteResult:
    def check(rng):
        xs = rng.normal(size=int(rng.integers(1, 40))).tolist()
        q = float(rng.choice([0.0, 1.0, 0.5, rng.random()]))
        got, want = float(impl(xs, q)), quantile_oracle(xs, q)
        return got == want, abs(got - want), f"n={len(xs)} q={q} got={got} want={want}"
    return _suite("quantile", n, check, seed)


def suite_geomedian(impl=weiszfeld.rfa_geomedian, n=N_INSTANCES, seed=0, R=5000) -> SuiteResult:
    """Converged smoothed Weiszfeld against a 2-D grid minimiser of the summed distances."""
    def check(rng):
        k = int(rng.integers(3, 9))
        x = rng.uniform(0, 5, size=(k, 2))
        got = impl(x, R=R)
        want = grid_minimize_2d(_geomedian_objective_many(x), x.min(axis=0), x.max(axis=0), extra=x)
        err = float(np.linalg.norm(got - want))
        return err <= 1e-3, err, f"K={k} dist={err:.3g}"
    return _suite("rfa_geomedian", n, check, seed)


def suite_huber(impl=weiszfeld.huber_weiszfeld, n=N_INSTANCES, seed=0) -> SuiteResult:
    def check(rng):
        k = int(rng.integers(3, 9))
        x = rng.uniform(0, 2, size=(k, 2))
        tau = float(rng.uniform(0.1, 1.0))
        got = impl(x, tau=tau, max_iter=5000, tol=1e-12)
        f = _huber_objective_many(x, tau)
        want = grid_minimize_2d(f, x.min(axis=0), x.max(axis=0))
        err = float(np.linalg.norm(got - want))
        return err <= 1e-3, err, f"K={k} tau={tau:.3f} dist={err:.3g}"
    return _suite("huber", n, check, seed)


def minmax_constraint_gap(honest: np.ndarray, direction: np.ndarray, gamma: float) -> float:
    """``max_h ||mu + gamma p - g_h|| - max pairwise honest distance`` (<= 0 when feasible)."""
    mu = honest.mean(axis=0)
    cand = mu + gamma * direction
    bound = max(
        (float(np.linalg.norm(a - b)) for a, b in itertools.combinations(honest, 2)), default=0.0
    )
    return float(np.max(np.linalg.norm(honest - cand, axis=1))) - bound


def suite_minmax(impl=attacks.minmax_gamma, n=N_INSTANCES, seed=0) -> SuiteResult:
    def check(rng):
        h = int(rng.integers(2, 10))
        honest = rng.normal(size=(h, int(rng.integers(1, 20))))
        p = attacks.minmax_direction(honest)
        g = impl(honest, p)
        gap = minmax_constraint_gap(honest, p, g)
        feasible = gap <= 1e-6
        tight = g == 0.0 or minmax_constraint_gap(honest, p, g + 1e-3) > 0
        slack_ok = gap > -1e-6 or g == 0.0
        return feasible and tight and slack_ok, max(gap, 0.0), f"H={h} gamma={g:.6g} gap={gap:.3g}"
    return _suite("minmax_gamma", n, check, seed)


def _ecdf_scores_oracle(feat: np.ndarray) -> np.ndarray:
    k, f = feat.shape
    out = np.zeros(k)
    for j in range(f):
        col = feat[:, j]
        mean = col.mean()
        sd = col.std()
        skew = 0.0 if sd == 0 else float(np.mean(((col - mean) / sd) ** 3))
        for i in range(k):
            left = sum(1 for v in col if v <= col[i]) / k
            right = sum(1 for v in col if v >= col[i]) / k
            if abs(skew) < 1e-9:
                out[i] += 0.5 * (-np.log(left) - np.log(right))
            elif skew > 0:
                out[i] += -np.log(right)
            else:
                out[i] += -np.log(left)
    return out


def suite_ecdf(impl=copod.copod_scores, n=N_INSTANCES, seed=0) -> SuiteResult:
    def check(rng):
        k = int(rng.integers(2, 12))
        feat = rng.normal(size=(k, int(rng.integers(1, 8))))
        if rng.random() < 0.3:
            feat = np.round(feat)
        got, want = impl(feat), _ecdf_scores_oracle(feat)
        err = float(np.max(np.abs(got - want)))
        return err <= 1e-9, err, f"K={k} err={err:.3g}"
    return _suite("copod_ecdf", n, check, seed)


SUITES: Dict[str, Callable[..., SuiteResult]] = {
    "krum": suite_krum,
    "cw_trimmed_mean": suite_trimmed_mean,
    "cw_median": suite_cw_median,
    "median": suite_median,
    "quantile": suite_quantile,
    "rfa_geomedian": suite_geomedian,
    "huber": suite_huber,
    "minmax_gamma": suite_minmax,
    "copod_ecdf": suite_ecdf,
}


def run_all(seed: int = 0, names: Optional[List[str]] = None) -> List[SuiteResult]:
    return [SUITES[name](seed=seed) for name in (names or list(SUITES))]
