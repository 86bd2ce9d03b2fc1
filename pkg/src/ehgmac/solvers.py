"""Capacity-achieving discrete inputs under amplitude and average-power constraints.

The solver alternates three steps on a growing finite support (Smith-style):
probability optimization by Blahut-Arimoto on the fixed support, local ascent
of the support locations, and a dense scan of the marginal information density
that inserts a mass point wherever the optimality slack is violated. The KKT
condition gamma (x^2 - P) + C - i(x; F) >= 0, with equality on the support, is
exactly the stopping rule, and `verify_kkt` re-checks it through the
quadrature path of record.

All solvers accept either a plain GaussianMixture or a noise ensemble (a
weighted family of mixtures whose active member the receiver knows); the
region builders drive the ensemble form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import mi
from ._engine import EnsembleGrid, ba_fixed_support
from .types import ConstraintSpec, DiscreteInput, GaussianMixture

PRUNE_TOL = 1e-11
INSERT_MASS = 1e-3
DEFAULT_SCAN_POINTS = 2001
DEFAULT_SUPPORT_TOL = 1e-4


@dataclass(frozen=True)
class SolverResult:
    """Optimized input with its certificate ingredients."""

    input: DiscreteInput
    capacity: float          # nats
    multiplier: float        # gamma >= 0; zero for a pure amplitude constraint
    kkt_slack: float         # most negative slack seen in the final solver scan
    iterations: int
    window: float            # half-width of the certified constraint window
    note: str = ""

    def __post_init__(self):
        if self.capacity < -1e-12:
            raise ValueError("capacity must be non-negative")
        if self.multiplier < 0:
            raise ValueError("multiplier must be non-negative")


@dataclass(frozen=True)
class KktReport:
    """Slack evaluation of gamma (x^2 - P) + C - i(x; F) over the constraint window."""

    grid_slacks: tuple[tuple[float, float], ...]
    max_support_deviation: float
    passed: bool
    min_grid_slack: float
    support_slacks: tuple[tuple[float, float], ...]
    window: float
    note: str = ""


class SolverBudgetError(RuntimeError):
    """Iteration or window budget exhausted; carries the best result found."""

    def __init__(self, message: str, result: "SolverResult", report: "KktReport | None" = None):
        super().__init__(message)
        self.result = result
        self.report = report


def _ensemble_stats(ensemble) -> tuple[float, float]:
    """(max sigma, effective total variance incl. mean spread) of the ensemble."""
    sig_max = 0.0
    var_eff = 0.0
    for w, m in ensemble:
        sig_max = max(sig_max, m.sigma())
        mw = m.weights_array()
        mm = m.means_array()
        mean = float(mw @ mm)
        var_eff += w * (m.variance + float(mw @ (mm - mean) ** 2))
    return sig_max, var_eff


@dataclass
class _SmithState:
    xs: np.ndarray
    probs: np.ndarray
    scores: np.ndarray
    value: float            # Lagrangian value sum(r * score)
    violation: float        # max scan score - value
    outer: int
    converged: bool


def _refine_locations(grid: EnsembleGrid, xs: np.ndarray, probs: np.ndarray,
                      gamma: float, lo: float, hi: float) -> np.ndarray:
    """Move each support point to the local maximum of its score within its cell."""
    if xs.size == 0:
        return xs
    mats = grid.cond_matrices(xs)
    edges = np.concatenate(([lo], 0.5 * (xs[1:] + xs[:-1]), [hi]))
    new_xs = xs.copy()
    n_cand = 17
    for _ in range(2):
        cands = []
        for j in range(xs.size):
            left, right = edges[j], edges[j + 1]
            cands.append(np.linspace(left, right, n_cand))
        flat = np.concatenate(cands)
        q_mats = grid.cond_matrices(flat)
        s = grid.scores(mats, probs, query_mats=q_mats, gamma=gamma, query_xs=flat)
        for j in range(xs.size):
            seg = s[j * n_cand:(j + 1) * n_cand]
            k = int(np.argmax(seg))
            new_xs[j] = cands[j][k]
            width = (cands[j][-1] - cands[j][0]) / (n_cand - 1)
            edges[j] = max(edges[j], new_xs[j] - width)
            edges[j + 1] = min(edges[j + 1], new_xs[j] + width)
        # second round zooms into the winning cells
    order = np.argsort(new_xs)
    return new_xs[order]


def _merge_and_prune(xs: np.ndarray, probs: np.ndarray, merge_tol: float
                     ) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(xs)
    xs, probs = xs[order], probs[order]
    out_x: list[float] = []
    out_p: list[float] = []
    for x, p in zip(xs, probs):
        if out_x and x - out_x[-1] < merge_tol:
            tot = out_p[-1] + p
            out_x[-1] = (out_x[-1] * out_p[-1] + x * p) / tot
            out_p[-1] = tot
        else:
            out_x.append(float(x))
            out_p.append(float(p))
    xs = np.array(out_x)
    probs = np.array(out_p)
    keep = probs > PRUNE_TOL
    if not np.any(keep):
        keep[np.argmax(probs)] = True
    xs, probs = xs[keep], probs[keep]
    return xs, probs / probs.sum()


def _parabolic_peak(xg: np.ndarray, s: np.ndarray, idx: int) -> float:
    if idx == 0 or idx == xg.size - 1:
        return float(xg[idx])
    x0, x1, x2 = xg[idx - 1], xg[idx], xg[idx + 1]
    y0, y1, y2 = s[idx - 1], s[idx], s[idx + 1]
    denom = (y0 - 2 * y1 + y2)
    if abs(denom) < 1e-300:
        return float(x1)
    shift = 0.5 * (y0 - y2) / denom
    shift = min(1.0, max(-1.0, shift))
    return float(x1 + shift * (x1 - x0))


def _smith_solve(ensemble, half_width: float, gamma: float, tol: float,
                 start: tuple[np.ndarray, np.ndarray] | None = None,
                 scan_points: int = DEFAULT_SCAN_POINTS, max_outer: int = 200,
                 fixed_support: np.ndarray | None = None,
                 ba_max_iter: int = 60000) -> _SmithState:
    """Maximize sum_k w_k I(F; M_k) - gamma E[X^2] over supports in [-A, A]."""
    a = half_width
    grid = EnsembleGrid(ensemble, -a, a)
    ba_tol = tol / 10.0
    merge_tol = 1e-4 * max(a, 1e-9)

    if fixed_support is not None:
        xs = np.sort(np.asarray(fixed_support, dtype=float))
        probs = np.full(xs.size, 1.0 / xs.size)
        probs, scores, value, _ = ba_fixed_support(grid, xs, probs, gamma, ba_tol, ba_max_iter)
        keep = probs > PRUNE_TOL
        xs, probs = xs[keep], probs[keep] / probs[keep].sum()
        probs, scores, value, _ = ba_fixed_support(grid, xs, probs, gamma, ba_tol, ba_max_iter)
        return _SmithState(xs, probs, scores, value, 0.0, 0, True)

    if start is not None:
        xs = np.asarray(start[0], dtype=float).copy()
        probs = np.asarray(start[1], dtype=float).copy()
        xs = np.clip(xs, -a, a)
        xs, probs = _merge_and_prune(xs, probs, merge_tol)
    else:
        xs = np.array([-a, a]) if a > 0 else np.array([0.0])
        probs = np.full(xs.size, 1.0 / xs.size)

    x_scan = np.linspace(-a, a, scan_points)
    state = None
    for outer in range(1, max_outer + 1):
        probs, scores, value, _ = ba_fixed_support(grid, xs, probs, gamma, ba_tol, ba_max_iter)
        xs2, probs2 = _merge_and_prune(xs, probs, merge_tol)
        if xs2.size != xs.size:
            xs, probs = xs2, probs2
            probs, scores, value, _ = ba_fixed_support(grid, xs, probs, gamma, ba_tol, ba_max_iter)
        else:
            xs, probs = xs2, probs2

        moved = _refine_locations(grid, xs, probs, gamma, -a, a)
        if np.max(np.abs(moved - xs)) > 1e-13 * max(a, 1.0):
            xs = moved
            probs, scores, value, _ = ba_fixed_support(grid, xs, probs, gamma, ba_tol, ba_max_iter)

        q_mats = grid.cond_matrices(x_scan)
        sup_mats = grid.cond_matrices(xs)
        s_scan = grid.scores(sup_mats, probs, query_mats=q_mats, gamma=gamma, query_xs=x_scan)
        violation = float(s_scan.max() - value)
        state = _SmithState(xs, probs, scores, value, violation, outer, False)
        if violation <= 0.5 * tol:
            state.converged = True
            return state

        idx = int(np.argmax(s_scan))
        x_star = _parabolic_peak(x_scan, s_scan, idx)
        x_star = min(a, max(-a, x_star))
        dists = np.abs(xs - x_star)
        nearest = int(np.argmin(dists))
        if dists[nearest] < merge_tol:
            # scan peak sits on an existing point: nudge it there instead of inserting
            xs[nearest] = x_star
            xs = np.sort(xs)
        else:
            xs = np.sort(np.append(xs, x_star))
            j = int(np.searchsorted(xs, x_star))
            probs = np.insert(probs * (1.0 - INSERT_MASS), j, INSERT_MASS)
    return state


def _official_capacity(xs: np.ndarray, probs: np.ndarray, ensemble,
                       quad: mi.QuadratureSpec) -> tuple[DiscreteInput, float]:
    dist = DiscreteInput.from_arrays(xs, probs, prune_tol=PRUNE_TOL / 10)
    return dist, mi.ensemble_mutual_information(dist, ensemble, quad)


def capacity_amplitude(a: float, noise, tol: float = 1e-6,
                       quad: mi.QuadratureSpec = mi.DEFAULT_QUAD,
                       scan_points: int = DEFAULT_SCAN_POINTS,
                       max_outer: int = 200,
                       start: tuple[np.ndarray, np.ndarray] | None = None) -> SolverResult:
    """Capacity-achieving discrete input for the peak constraint |X| <= a.

    Certified by the amplitude KKT condition C - i(x; F) >= -tol on [-a, a]
    with equality on the support; with unit noise variance the returned
    support is the plain binary (+-a, 1/2) for small a.
    """
    if a < 0:
        raise ValueError("amplitude must be non-negative")
    ensemble = mi.as_ensemble(noise)
    if a == 0.0:
        return SolverResult(DiscreteInput.delta(0.0), 0.0, 0.0, 0.0, 0, 0.0)
    state = _smith_solve(ensemble, a, 0.0, tol, start=start,
                         scan_points=scan_points, max_outer=max_outer)
    dist, capacity = _official_capacity(state.xs, state.probs, ensemble, quad)
    result = SolverResult(dist, capacity, 0.0, -state.violation, state.outer, a)
    if not state.converged:
        report = verify_kkt(result, ConstraintSpec.amplitude(a), noise,
                            grid=scan_points, tol=tol, quad=quad)
        raise SolverBudgetError(
            f"amplitude solver exhausted {max_outer} outer iterations "
            f"(violation {state.violation:.3e})", result, report)
    return result


def capacity_avg_power(p: float, noise, tol: float = 1e-6,
                       quad: mi.QuadratureSpec = mi.DEFAULT_QUAD,
                       scan_points: int = DEFAULT_SCAN_POINTS,
                       max_outer: int = 200, max_expand: int = 6) -> SolverResult:
    """Capacity-achieving discrete input under the average-power constraint E[X^2] <= p.

    Outer loop adjusts the multiplier gamma by bracketed secant iteration until
    the inner Lagrangian optimum's second moment meets p; the inner problem
    lives on an amplitude window that grows while mass wants to move outside.
    The certificate window is the final inner window.
    """
    if p < 0:
        raise ValueError("power must be non-negative")
    ensemble = mi.as_ensemble(noise)
    if p == 0.0:
        return SolverResult(DiscreteInput.delta(0.0), 0.0, 0.0, 0.0, 0, 0.0)

    sig_max, var_eff = _ensemble_stats(ensemble)
    window = 4.0 * math.sqrt(p) + 3.0 * sig_max
    note = ""
    outer_iters = 0

    def inner(gamma: float, start=None) -> tuple[_SmithState, float]:
        nonlocal window, note, outer_iters
        for _ in range(max_expand + 1):
            state = _smith_solve(ensemble, window, gamma, tol, start=start,
                                 scan_points=scan_points, max_outer=max_outer)
            outer_iters += state.outer
            if not state.converged:
                break
            # look for slack violations beyond the window
            ext = window * 1.3 + 4.0 * sig_max
            x_ext = np.linspace(window, ext, 200)
            x_ext = np.concatenate([-x_ext[::-1], x_ext])
            grid = EnsembleGrid(ensemble, -ext, ext)
            sup_mats = grid.cond_matrices(state.xs)
            s_ext = grid.scores(sup_mats, state.probs, query_mats=grid.cond_matrices(x_ext),
                                gamma=gamma, query_xs=x_ext)
            viol = float(s_ext.max() - state.value)
            if viol <= 0.5 * tol:
                break
            x_star = float(x_ext[int(np.argmax(s_ext))])
            grown = _smith_solve(ensemble, min(ext, abs(x_star) + 2 * sig_max), gamma, tol,
                                 start=(state.xs, state.probs),
                                 scan_points=scan_points, max_outer=max_outer)
            outer_iters += grown.outer
            gained = grown.value - state.value
            widened = grown.xs.max() - state.xs.max() > 1e-6 or \
                state.xs.min() - grown.xs.min() > 1e-6
            if grown.converged and widened and gained > tol / 10:
                window = min(ext, abs(x_star) + 2 * sig_max)
                start = (grown.xs, grown.probs)
                continue
            note = (f"slack trend negative beyond window (max ext violation "
                    f"{viol:.2e} near x={x_star:.3f}; mass below resolution)")
            break
        moment = float(state.probs @ state.xs ** 2)
        return state, moment

    best_feas: tuple[float, _SmithState, float, float] | None = None

    def solve_at(gamma: float, start=None) -> tuple[_SmithState, float]:
        nonlocal best_feas
        state, moment = inner(gamma, start=start)
        if state.converged and moment <= p and (best_feas is None or gamma <= best_feas[0]):
            best_feas = (gamma, state, moment, window)
        return state, moment

    # bracket: lo infeasible (moment > p), hi feasible (moment <= p)
    gamma = 1.0 / (2.0 * (p + var_eff))
    state, moment = solve_at(gamma)
    lo = hi = gamma
    f_lo = f_hi = moment - p
    if moment > p:
        for _ in range(60):
            lo, f_lo = hi, f_hi
            hi *= 2.0
            state, moment = solve_at(hi, start=(state.xs, state.probs))
            f_hi = moment - p
            if f_hi <= 0:
                break
    else:
        for _ in range(60):
            hi, f_hi = lo, f_lo
            lo /= 2.0
            state, moment = solve_at(lo, start=(state.xs, state.probs))
            f_lo = moment - p
            if f_lo > 0 or lo < 1e-14:
                break

    if f_lo > 0 and f_hi <= 0:
        # Illinois (modified regula falsi) on moment(gamma) - p
        side = 0
        for _ in range(60):
            mtol = 0.3 * tol / max(hi, 1e-3)
            if best_feas is not None and p - best_feas[2] <= mtol:
                break
            denom = f_lo - f_hi
            g_new = hi - f_hi * (lo - hi) / denom if abs(denom) > 1e-300 else 0.5 * (lo + hi)
            if not (lo < g_new < hi):
                g_new = 0.5 * (lo + hi)
            state, moment = solve_at(g_new, start=(state.xs, state.probs))
            f_new = moment - p
            if f_new <= 0:
                hi, f_hi = g_new, f_new
                if side == -1:
                    f_lo *= 0.5
                side = -1
            else:
                lo, f_lo = g_new, f_new
                if side == 1:
                    f_hi *= 0.5
                side = 1
            if hi - lo < 1e-14 * (1.0 + hi):
                break

    if best_feas is None:
        dist, capacity = _official_capacity(state.xs, state.probs, ensemble, quad)
        raise SolverBudgetError(
            "average-power solver found no feasible multiplier",
            SolverResult(dist, capacity, hi, -state.violation, outer_iters, window))
    gamma, state, moment, cert_window = best_feas

    dist, capacity = _official_capacity(state.xs, state.probs, ensemble, quad)
    result = SolverResult(dist, capacity, gamma, -state.violation, outer_iters, cert_window, note)
    if not state.converged:
        raise SolverBudgetError(
            f"average-power solver exhausted its budget (violation {state.violation:.3e})",
            result)
    return result


def verify_kkt(result: SolverResult, constraint: ConstraintSpec, noise,
               grid: int = DEFAULT_SCAN_POINTS, tol: float = 1e-6,
               support_tol: float = DEFAULT_SUPPORT_TOL,
               quad: mi.QuadratureSpec = mi.DEFAULT_QUAD) -> KktReport:
    """Evaluate the optimality slack q(x) = gamma (x^2 - P) + C - i(x; F).

    Passes iff the slack is >= -tol on a uniform grid over the constraint
    window (plus all support points) and |q| <= support_tol at every support
    point. Uses the quadrature path of record, independent of the solver's
    internal grids.
    """
    if grid < 101:
        raise ValueError("use at least 101 grid points")
    if constraint.kind == "amplitude":
        window = constraint.amplitude_bound
        gamma, p = 0.0, 0.0
    elif constraint.kind == "average_power":
        window = result.window
        gamma, p = result.multiplier, constraint.power_bound
    else:
        window = constraint.amplitude_bound
        gamma, p = result.multiplier, constraint.power_bound

    support = result.input.locations_array()
    if window <= 0:
        xs = support.copy()
    else:
        xs = np.unique(np.concatenate([np.linspace(-window, window, grid), support]))
    prof = mi.information_density_profile(xs, result.input, noise, quad)
    slack = gamma * (xs ** 2 - p) + result.capacity - prof

    sup_idx = np.searchsorted(xs, support)
    support_slacks = tuple((float(x), float(s)) for x, s in zip(xs[sup_idx], slack[sup_idx]))
    max_dev = float(np.max(np.abs(slack[sup_idx])))
    min_slack = float(slack.min())
    passed = (min_slack >= -tol) and (max_dev <= support_tol)
    note = result.note
    return KktReport(
        grid_slacks=tuple((float(x), float(s)) for x, s in zip(xs, slack)),
        max_support_deviation=max_dev,
        passed=bool(passed),
        min_grid_slack=min_slack,
        support_slacks=support_slacks,
        window=float(window),
        note=note,
    )


def capacity_amplitude_ensemble(a: float, ensemble, tol: float = 1e-6,
                                quad: mi.QuadratureSpec = mi.DEFAULT_QUAD,
                                start: tuple[np.ndarray, np.ndarray] | None = None,
                                fixed_support=None, scan_points: int = DEFAULT_SCAN_POINTS,
                                max_outer: int = 200) -> SolverResult:
    """Ensemble-channel variant used by the region builders.

    The receiver knows the active mixture, so the objective is the weighted
    average of per-member mutual informations; with `fixed_support` the
    locations are frozen (quantized-grid mode) and only probabilities move.
    """
    ensemble = mi.as_ensemble(ensemble)
    if a == 0.0 and fixed_support is None:
        return SolverResult(DiscreteInput.delta(0.0), 0.0, 0.0, 0.0, 0, 0.0)
    state = _smith_solve(ensemble, a, 0.0, tol, start=start, scan_points=scan_points,
                         max_outer=max_outer,
                         fixed_support=None if fixed_support is None
                         else np.asarray(fixed_support, dtype=float))
    dist, capacity = _official_capacity(state.xs, state.probs, ensemble, quad)
    result = SolverResult(dist, capacity, 0.0, -state.violation, state.outer, a)
    if not state.converged and fixed_support is None:
        raise SolverBudgetError(
            f"ensemble amplitude solver exhausted its budget (violation {state.violation:.3e})",
            result)
    return result
