"""Independent brute-force validators.

Deliberately algorithmically disjoint from the main solvers: fixed-support
Blahut-Arimoto on Riemann output grids and seeded Monte-Carlo sampling, versus
the Smith-style alternation with adaptive quadrature used by the solver path.
Agreement between the two routes is evidence, not tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .types import ConstraintSpec, DiscreteInput, GaussianMixture

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GridSpec:
    """Fixed symmetric input grid: odd point count so zero is on the grid."""

    count: int
    window: float

    def __post_init__(self):
        if self.count < 3 or self.count % 2 == 0:
            raise ValueError("grid count must be odd and >= 3")
        if self.window <= 0:
            raise ValueError("grid window must be positive")

    def points(self) -> np.ndarray:
        return np.linspace(-self.window, self.window, self.count)


@dataclass(frozen=True)
class BaResult:
    probabilities: tuple[float, ...]
    capacity: float
    gap: float
    gamma: float
    iterations: int


@dataclass(frozen=True)
class McEstimate:
    estimate: float
    standard_error: float


@dataclass(frozen=True)
class MacSumRate:
    value: float
    converged: bool
    iterations: int


class OracleConvergenceError(RuntimeError):
    def __init__(self, message: str, best):
        super().__init__(message)
        self.best = best


def _output_grid(x_lo: float, x_hi: float, noise: GaussianMixture,
                 spacing_frac: float = 0.125, pad_sigmas: float = 10.0) -> np.ndarray:
    sig = noise.sigma()
    lo = x_lo + min(noise.means) - pad_sigmas * sig
    hi = x_hi + max(noise.means) + pad_sigmas * sig
    n = int(math.ceil((hi - lo) / (spacing_frac * sig))) + 1
    return np.linspace(lo, hi, n)


def _cond_log_matrix(xs: np.ndarray, noise: GaussianMixture, y: np.ndarray) -> np.ndarray:
    nw = noise.weights_array()
    nmu = noise.means_array()
    centers = xs[:, None] + nmu[None, :]
    z = -((y[None, None, :] - centers[:, :, None]) ** 2) / (2.0 * noise.variance)
    out = logsumexp(z + np.log(nw)[None, :, None], axis=1)
    return out - 0.5 * (LOG_2PI + math.log(noise.variance))


DENSITY_FLOOR = 1e-300


def _ba_iterate(log_k: np.ndarray, k: np.ndarray, dy: float, costs: np.ndarray,
                gamma: float, tol: float, max_iter: int,
                r0: np.ndarray | None = None) -> tuple[np.ndarray, float, float, int]:
    """Standard BA with optional Lagrangian cost; returns (r, I(r), gap, iters).

    Per-point divergences are D_j = sum_y k_j (log k_j - log p) dy; the first
    term is constant in r, so each iteration is two matrix-vector products.
    """
    m = log_k.shape[0]
    row_const = (k * np.where(k > 0, log_k, 0.0)).sum(axis=1) * dy
    logr = np.log(r0) if r0 is not None else np.full(m, -math.log(m))
    it = 0
    d = None
    for it in range(1, max_iter + 1):
        r = np.exp(logr - logr.max())
        r /= r.sum()
        p = r @ k
        logp = np.log(np.maximum(p, DENSITY_FLOOR))
        d = row_const - (k @ logp) * dy
        score = d - gamma * costs
        gap = float(score.max() - r @ score)
        if gap < tol:
            return r, float(r @ d), gap, it
        logr = logr + score
        logr -= logr.max()
    r = np.exp(logr - logr.max())
    r /= r.sum()
    p = r @ k
    logp = np.log(np.maximum(p, DENSITY_FLOOR))
    d = row_const - (k @ logp) * dy
    score = d - gamma * costs
    return r, float(r @ d), float(score.max() - r @ score), it


def ba_capacity_grid(g: GridSpec, constraint: ConstraintSpec, noise: GaussianMixture,
                     tol: float = 1e-6, max_iter: int = 500_000) -> BaResult:
    """Blahut-Arimoto capacity on the fixed grid under the given constraint.

    Amplitude constraints restrict the support to grid points inside [-A, A]
    (the grid window must cover A). Average-power constraints run a Lagrangian
    inner loop with bisection on the multiplier. The reported capacity is the
    midpoint of the BA sandwich [I(r), I(r) + gap], so its error is gap / 2.
    """
    xs = g.points()
    if constraint.kind in ("amplitude", "both"):
        a = constraint.amplitude_bound
        if g.window < a - 1e-12:
            raise ValueError("grid window must cover the amplitude constraint")
        xs = xs[np.abs(xs) <= a + 1e-12]
    if xs.size == 1:
        return BaResult((1.0,), 0.0, 0.0, 0.0, 0)

    y = _output_grid(xs.min(), xs.max(), noise)
    dy = y[1] - y[0]
    log_k = _cond_log_matrix(xs, noise, y)
    k = np.exp(log_k)
    costs = xs ** 2

    if constraint.kind == "amplitude":
        r, i_val, gap, it = _ba_iterate(log_k, k, dy, costs, 0.0, tol, max_iter)
        if gap >= tol:
            raise OracleConvergenceError(
                f"BA did not reach gap {tol} (achieved {gap:.3e})",
                BaResult(tuple(r), i_val + gap / 2, gap, 0.0, it))
        return BaResult(tuple(r), i_val + gap / 2, gap, 0.0, it)

    p_limit = constraint.power_bound
    if p_limit == 0.0:
        probs = np.zeros_like(xs)
        probs[np.argmin(np.abs(xs))] = 1.0
        return BaResult(tuple(probs), 0.0, 0.0, 0.0, 0)

    # Cold uniform starts throughout: multiplicative updates migrate mass between
    # distant grid points very slowly from a peaked wrong-gamma shape, while the
    # uniform start converges in tens of iterations.
    iters = 0

    def probe(gamma: float):
        """Capped-iteration solve; the moment stabilizes long before the BA gap."""
        nonlocal iters
        out = _ba_iterate(log_k, k, dy, costs, gamma, max(tol, 1e-5), 5_000)
        iters += out[3]
        return float(out[0] @ costs), out

    moment_slack = 1e-8 * max(1.0, p_limit)
    gamma = 1.0 / (2.0 * (p_limit + noise.variance))
    moment, out = probe(gamma)
    lo = hi = gamma
    if moment > p_limit:
        lo = gamma
        for _ in range(60):
            hi = hi * 2
            moment, out = probe(hi)
            if moment <= p_limit:
                break
            lo = hi
    elif p_limit - moment > moment_slack:
        hi = gamma
        for _ in range(60):
            lo = lo / 2
            moment, out = probe(lo)
            if moment > p_limit or lo < 1e-14:
                break
            hi = lo
    if not (moment <= p_limit and p_limit - moment <= moment_slack):
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            moment, out = probe(mid)
            if moment <= p_limit:
                hi = mid
                if p_limit - moment <= moment_slack:
                    break
            else:
                lo = mid
            if hi - lo < 1e-13 * (1.0 + hi):
                break
    gamma = hi
    r, i_val, gap, it = _ba_iterate(log_k, k, dy, costs, gamma, tol, max_iter)
    iters += it
    if gap >= tol:
        raise OracleConvergenceError(
            f"BA (power) did not reach gap {tol} (achieved {gap:.3e})",
            BaResult(tuple(r), i_val + gap / 2, gap, gamma, iters))
    return BaResult(tuple(r), i_val + gap / 2, gap, gamma, iters)


def mc_mutual_information(x: DiscreteInput, noise: GaussianMixture,
                          samples: int, seed: int) -> McEstimate:
    """Seeded plug-in estimator of I(X; X+N) using exact conditional densities.

    Averages the information density log(p(y|x) / p(y)) over sampled (x, y)
    pairs; unbiased, with the reported standard error from the sample spread.
    """
    if samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    rng = np.random.default_rng(seed)
    xs = x.locations_array()
    ps = x.probabilities_array()
    nw = noise.weights_array()
    nmu = noise.means_array()
    sig = noise.sigma()
    log_norm = 0.5 * (LOG_2PI + math.log(noise.variance))

    total = 0.0
    total_sq = 0.0
    done = 0
    batch = 1_000_000
    while done < samples:
        n = min(batch, samples - done)
        xi = rng.choice(len(xs), size=n, p=ps)
        ci = rng.choice(len(nw), size=n, p=nw)
        yv = xs[xi] + nmu[ci] + rng.normal(0.0, sig, size=n)
        z_cond = -((yv[:, None] - xs[xi][:, None] - nmu[None, :]) ** 2) / (2.0 * noise.variance)
        log_cond = logsumexp(z_cond + np.log(nw)[None, :], axis=1) - log_norm
        centers = (xs[:, None] + nmu[None, :]).ravel()
        cw = (ps[:, None] * nw[None, :]).ravel()
        z_out = -((yv[:, None] - centers[None, :]) ** 2) / (2.0 * noise.variance)
        log_out = logsumexp(z_out + np.log(cw)[None, :], axis=1) - log_norm
        vals = log_cond - log_out
        total += float(vals.sum())
        total_sq += float((vals ** 2).sum())
        done += n
    mean = total / samples
    var = max(0.0, total_sq / samples - mean * mean)
    return McEstimate(mean, math.sqrt(var / samples))


def mac_sumrate_grid(g1: GridSpec, g2: GridSpec, sigma2: float, tol: float = 1e-7,
                     restarts: int = 3, seed: int = 0, max_rounds: int = 400,
                     ba_tol: float | None = None) -> MacSumRate:
    """Max sum rate over independent grid inputs by alternating Blahut-Arimoto.

    For fixed r2 the sum rate equals the capacity of the induced channel
    x1 -> W plus a term constant in r1, so each half-step is a plain BA solve
    and the objective is monotone. Best of `restarts` starts is returned.
    """
    if g1.count > 21 or g2.count > 21:
        raise ValueError("sum-rate oracle grids are capped at 21 points")
    if sigma2 <= 0:
        raise ValueError("noise variance must be positive")
    x1 = g1.points()
    x2 = g2.points()
    sig = math.sqrt(sigma2)
    lo = x1.min() + x2.min() - 10.0 * sig
    hi = x1.max() + x2.max() + 10.0 * sig
    n = int(math.ceil((hi - lo) / (0.125 * sig))) + 1
    y = np.linspace(lo, hi, n)
    dy = y[1] - y[0]
    # log phi(y - x1_j - x2_k): (m1, m2, Y)
    base = -((y[None, None, :] - x1[:, None, None] - x2[None, :, None]) ** 2) / (2.0 * sigma2)
    base -= 0.5 * (LOG_2PI + math.log(sigma2))
    h_noise = 0.5 * (LOG_2PI + 1.0 + math.log(sigma2))
    ba_tol = ba_tol if ba_tol is not None else tol / 10.0

    rng = np.random.default_rng(seed)
    best_val = -np.inf
    best_conv = False
    total_iters = 0

    def sum_rate(r1, r2) -> float:
        lw = (np.log(r1)[:, None] + np.log(r2)[None, :]).ravel()
        logp = logsumexp(base.reshape(-1, y.size) + lw[:, None], axis=0)
        p = np.exp(logp)
        h_w = float(-(p * np.where(p > 0, logp, 0.0)).sum() * dy)
        return h_w - h_noise

    for trial in range(restarts):
        if trial == 0:
            r1 = np.full(x1.size, 1.0 / x1.size)
            r2 = np.full(x2.size, 1.0 / x2.size)
        else:
            r1 = rng.dirichlet(np.ones(x1.size))
            r2 = rng.dirichlet(np.ones(x2.size))
        prev = sum_rate(r1, r2)
        converged = False
        for _ in range(max_rounds):
            log_k1 = logsumexp(base + np.log(r2)[None, :, None], axis=1)
            r1, _, _, it1 = _ba_iterate(log_k1, np.exp(log_k1), dy,
                                        np.zeros(x1.size), 0.0, ba_tol, 200_000)
            log_k2 = logsumexp(base + np.log(np.maximum(r1, 1e-300))[:, None, None], axis=0)
            r2, _, _, it2 = _ba_iterate(log_k2, np.exp(log_k2), dy,
                                        np.zeros(x2.size), 0.0, ba_tol, 200_000)
            total_iters += it1 + it2
            cur = sum_rate(r1, r2)
            if cur - prev < tol:
                prev = max(prev, cur)
                converged = True
                break
            prev = cur
        if prev > best_val:
            best_val = prev
            best_conv = converged
    return MacSumRate(float(best_val), best_conv, total_iters)
