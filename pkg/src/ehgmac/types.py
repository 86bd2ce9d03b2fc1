"""Shared value types: discrete inputs, Gaussian mixtures, harvest processes, rate regions.

Everything here is an immutable value object; operations are pure functions.
Rates are kept in nats throughout, conversion to bits happens only at output
boundaries (see the CLI module).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

PROB_TOL = 1e-12
MEAN_MERGE_TOL = 1e-12


class RatePair(NamedTuple):
    r1: float
    r2: float


@dataclass(frozen=True)
class DiscreteInput:
    """Finitely supported input distribution: (location, probability) pairs.

    Locations are strictly increasing amplitudes; probabilities are strictly
    positive and sum to one.
    """

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) < 1:
            raise ValueError("DiscreteInput needs at least one mass point")
        locs = [p[0] for p in self.points]
        probs = [p[1] for p in self.points]
        if any(p <= 0.0 for p in probs):
            raise ValueError("all probabilities must be strictly positive")
        if abs(sum(probs) - 1.0) > PROB_TOL * max(1, len(probs)):
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("locations must be strictly increasing")

    @classmethod
    def delta(cls, location: float = 0.0) -> "DiscreteInput":
        return cls(((float(location), 1.0),))

    @classmethod
    def binary(cls, amplitude: float, p_plus: float = 0.5) -> "DiscreteInput":
        if amplitude == 0.0:
            return cls.delta(0.0)
        a = float(amplitude)
        return cls(((-a, 1.0 - p_plus), (a, p_plus)))

    @classmethod
    def from_arrays(cls, locations, probabilities, *, prune_tol: float = 0.0,
                    merge_tol: float = MEAN_MERGE_TOL) -> "DiscreteInput":
        """Build from parallel arrays; sorts, merges near-duplicates, prunes tiny mass."""
        xs = np.asarray(locations, dtype=float)
        ps = np.asarray(probabilities, dtype=float)
        if xs.shape != ps.shape or xs.ndim != 1 or xs.size == 0:
            raise ValueError("locations/probabilities must be matching 1-d arrays")
        order = np.argsort(xs)
        xs, ps = xs[order], ps[order]
        merged_x: list[float] = []
        merged_p: list[float] = []
        for x, p in zip(xs, ps):
            if merged_x and x - merged_x[-1] < merge_tol:
                tot = merged_p[-1] + p
                merged_x[-1] = (merged_x[-1] * merged_p[-1] + x * p) / tot
                merged_p[-1] = tot
            else:
                merged_x.append(float(x))
                merged_p.append(float(p))
        xs = np.array(merged_x)
        ps = np.array(merged_p)
        if prune_tol > 0.0:
            keep = ps > prune_tol
            if not np.any(keep):
                keep[np.argmax(ps)] = True
            xs, ps = xs[keep], ps[keep]
        ps = ps / ps.sum()
        return cls(tuple((float(x), float(p)) for x, p in zip(xs, ps)))

    @property
    def locations(self) -> tuple[float, ...]:
        return tuple(p[0] for p in self.points)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(p[1] for p in self.points)

    def locations_array(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    def probabilities_array(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    def max_amplitude(self) -> float:
        return max(abs(p[0]) for p in self.points)

    def check_amplitude(self, amplitude: float, tol: float = 1e-12) -> None:
        if self.max_amplitude() > amplitude + tol:
            raise ValueError(
                f"support exceeds amplitude constraint {amplitude}: "
                f"max |x| = {self.max_amplitude()}")

    def check_power(self, power: float, tol: float = 1e-9) -> None:
        m2 = second_moment(self)
        if m2 > power + tol:
            raise ValueError(f"second moment {m2} exceeds power constraint {power}")


@dataclass(frozen=True)
class GaussianMixture:
    """Weighted Gaussian components with a common variance."""

    components: tuple[tuple[float, float], ...]  # (weight, mean)
    variance: float

    def __post_init__(self):
        if self.variance <= 0.0:
            raise ValueError("variance must be strictly positive")
        if len(self.components) == 0:
            raise ValueError("mixture needs at least one component")
        ws = [c[0] for c in self.components]
        if any(w <= 0.0 or w > 1.0 for w in ws):
            raise ValueError("weights must lie in (0, 1]")
        if abs(sum(ws) - 1.0) > PROB_TOL * max(1, len(ws)):
            raise ValueError(f"weights sum to {sum(ws)!r}, not 1")

    @classmethod
    def gaussian(cls, variance: float, mean: float = 0.0) -> "GaussianMixture":
        return cls(((1.0, float(mean)),), float(variance))

    @classmethod
    def from_arrays(cls, weights, means, variance: float,
                    merge_tol: float = MEAN_MERGE_TOL) -> "GaussianMixture":
        ws = np.asarray(weights, dtype=float)
        ms = np.asarray(means, dtype=float)
        order = np.argsort(ms)
        ws, ms = ws[order], ms[order]
        out_w: list[float] = []
        out_m: list[float] = []
        for w, m in zip(ws, ms):
            if out_m and m - out_m[-1] < merge_tol:
                out_w[-1] += w
            else:
                out_w.append(float(w))
                out_m.append(float(m))
        tot = sum(out_w)
        return cls(tuple((w / tot, m) for w, m in zip(out_w, out_m)), float(variance))

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(c[0] for c in self.components)

    @property
    def means(self) -> tuple[float, ...]:
        return tuple(c[1] for c in self.components)

    def weights_array(self) -> np.ndarray:
        return np.array([c[0] for c in self.components])

    def means_array(self) -> np.ndarray:
        return np.array([c[1] for c in self.components])

    def sigma(self) -> float:
        return math.sqrt(self.variance)

    def mean_span(self) -> tuple[float, float]:
        ms = self.means
        return min(ms), max(ms)

    def pdf(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        w = self.weights_array()
        m = self.means_array()
        z = (y[..., None] - m) ** 2 / (2.0 * self.variance)
        return (w * np.exp(-z)).sum(axis=-1) / math.sqrt(2.0 * math.pi * self.variance)

    def logpdf(self, y) -> np.ndarray:
        from scipy.special import logsumexp

        y = np.asarray(y, dtype=float)
        w = self.weights_array()
        m = self.means_array()
        z = -((y[..., None] - m) ** 2) / (2.0 * self.variance)
        return logsumexp(z + np.log(w), axis=-1) - 0.5 * math.log(2.0 * math.pi * self.variance)

    def weight_entropy(self) -> float:
        w = self.weights_array()
        return float(-(w * np.log(w)).sum())


@dataclass(frozen=True)
class HarvestProcess:
    """I.i.d. finite-alphabet energy arrivals: (energy, probability) pairs."""

    states: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.states) == 0:
            raise ValueError("harvest process needs at least one state")
        es = [s[0] for s in self.states]
        ps = [s[1] for s in self.states]
        if any(e < 0.0 for e in es):
            raise ValueError("energies must be non-negative")
        if len(set(es)) != len(es):
            raise ValueError("energies must be distinct")
        if any(p <= 0.0 or p > 1.0 for p in ps):
            raise ValueError("state probabilities must lie in (0, 1]")
        if abs(sum(ps) - 1.0) > PROB_TOL * max(1, len(ps)):
            raise ValueError(f"state probabilities sum to {sum(ps)!r}, not 1")

    @classmethod
    def deterministic(cls, energy: float) -> "HarvestProcess":
        return cls(((float(energy), 1.0),))

    @classmethod
    def uniform(cls, energies: Sequence[float]) -> "HarvestProcess":
        n = len(energies)
        return cls(tuple((float(e), 1.0 / n) for e in energies))

    @classmethod
    def on_off(cls, energy: float, p_on: float = 0.5) -> "HarvestProcess":
        """Binary {0, energy} process; the zero state forces a silent symbol."""
        return cls(((0.0, 1.0 - p_on), (float(energy), p_on)))

    @property
    def energies(self) -> tuple[float, ...]:
        return tuple(s[0] for s in self.states)

    @property
    def probabilities(self) -> tuple[float, ...]:
        return tuple(s[1] for s in self.states)

    def mean_energy(self) -> float:
        return sum(e * p for e, p in self.states)


@dataclass(frozen=True)
class JointHarvest:
    """Joint law of the two users' energy states: ((y1, y2), probability) entries.

    The paper's examples drive both users from one common process, so the joint
    law is first-class here; independent product and perfectly correlated
    ("common") constructions cover every case used.
    """

    states: tuple[tuple[tuple[float, float], float], ...]

    def __post_init__(self):
        ps = [p for _, p in self.states]
        if len(ps) == 0:
            raise ValueError("joint harvest needs at least one state")
        if any(p <= 0.0 for p in ps):
            raise ValueError("joint probabilities must be positive")
        if abs(sum(ps) - 1.0) > PROB_TOL * max(1, len(ps)):
            raise ValueError(f"joint probabilities sum to {sum(ps)!r}, not 1")
        for (y1, y2), _ in self.states:
            if y1 < 0 or y2 < 0:
                raise ValueError("energies must be non-negative")

    @classmethod
    def product(cls, h1: HarvestProcess, h2: HarvestProcess) -> "JointHarvest":
        states = tuple((((y1, y2), p1 * p2))
                       for y1, p1 in h1.states for y2, p2 in h2.states)
        return cls(states)

    @classmethod
    def common(cls, h: HarvestProcess) -> "JointHarvest":
        return cls(tuple(((y, y), p) for y, p in h.states))

    def marginal(self, user: int) -> HarvestProcess:
        acc: dict[float, float] = {}
        for (y1, y2), p in self.states:
            y = y1 if user == 1 else y2
            acc[y] = acc.get(y, 0.0) + p
        return HarvestProcess(tuple(sorted(acc.items())))

    def user_states(self, user: int) -> tuple[float, ...]:
        return tuple(sorted({(y1 if user == 1 else y2) for (y1, y2), _ in self.states}))


@dataclass(frozen=True)
class ConstraintSpec:
    """Input constraint: amplitude |X| <= A, average power E[X^2] <= P, or both."""

    kind: str
    amplitude_bound: float | None = None
    power_bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("amplitude", "average_power", "both"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind in ("amplitude", "both"):
            if self.amplitude_bound is None or self.amplitude_bound < 0:
                raise ValueError("amplitude bound must be >= 0")
        if self.kind in ("average_power", "both"):
            if self.power_bound is None or self.power_bound < 0:
                raise ValueError("power bound must be >= 0")

    @classmethod
    def amplitude(cls, a: float) -> "ConstraintSpec":
        return cls("amplitude", amplitude_bound=float(a))

    @classmethod
    def average_power(cls, p: float) -> "ConstraintSpec":
        return cls("average_power", power_bound=float(p))

    @classmethod
    def both(cls, a: float, p: float) -> "ConstraintSpec":
        return cls("both", amplitude_bound=float(a), power_bound=float(p))

    def check(self, x: DiscreteInput) -> None:
        if self.kind in ("amplitude", "both"):
            x.check_amplitude(self.amplitude_bound)
        if self.kind in ("average_power", "both"):
            x.check_power(self.power_bound)


@dataclass(frozen=True)
class Pentagon:
    """Rate set {R1 <= c1, R2 <= c2, R1 + R2 <= c12} for one fixed input pair."""

    c1: float
    c2: float
    c12: float

    def validate(self, tol: float = 1e-8) -> None:
        if self.c1 < -tol or self.c2 < -tol:
            raise ValueError("pentagon bounds must be non-negative")
        if self.c12 < max(self.c1, self.c2) - tol:
            raise ValueError("c12 must dominate the single-user bounds")
        if self.c12 > self.c1 + self.c2 + tol:
            raise ValueError("c12 must not exceed c1 + c2")

    def corner_points(self) -> list[RatePair]:
        """The two dominant-face corners plus axis points, clipped to valid rates."""
        c1, c2, c12 = self.c1, self.c2, self.c12
        b = RatePair(min(c1, c12), max(0.0, min(c2, c12 - min(c1, c12))))
        c = RatePair(max(0.0, min(c1, c12 - min(c2, c12))), min(c2, c12))
        return [RatePair(min(c1, c12), 0.0), b, c, RatePair(0.0, min(c2, c12))]


@dataclass(frozen=True)
class RateRegion:
    """Convex, downward-closed rate region: counterclockwise boundary vertices.

    `info` carries solver metadata (convergence flags, achieving inputs) and is
    excluded from equality comparisons.
    """

    vertices: tuple[RatePair, ...]
    info: dict = field(default=None, compare=False, repr=False)

    def max_r1(self) -> float:
        return max(v.r1 for v in self.vertices)

    def max_r2(self) -> float:
        return max(v.r2 for v in self.vertices)

    def max_sum_rate(self) -> float:
        return max(v.r1 + v.r2 for v in self.vertices)

    def max_weighted(self, mu1: float, mu2: float) -> float:
        """Support function of the region in direction (mu1, mu2)."""
        return max(mu1 * v.r1 + mu2 * v.r2 for v in self.vertices)

    def contains(self, point: RatePair, tol: float = 1e-9) -> bool:
        verts = self.vertices
        if len(verts) == 1:
            return point.r1 <= tol and point.r2 <= tol
        px, py = point
        if px < -tol or py < -tol:
            return False
        scale = max(1.0, self.max_r1() + self.max_r2())
        for a, b in zip(verts, verts[1:] + verts[:1]):
            cross = (b.r1 - a.r1) * (py - a.r2) - (b.r2 - a.r2) * (px - a.r1)
            if cross < -tol * scale:
                return False
        return True

    def dominates(self, other: "RateRegion", tol: float = 1e-9) -> bool:
        return all(self.contains(v, tol) for v in other.vertices)


def second_moment(x: DiscreteInput) -> float:
    """E[X^2] of a discrete input."""
    return float(sum(p * loc * loc for loc, p in x.points))


def convolve(x: DiscreteInput, noise: GaussianMixture) -> GaussianMixture:
    """Density of X + N: one component per (mass point, noise component) pair.

    Components whose means coincide within 1e-12 are merged to keep counts
    bounded across repeated convolutions.
    """
    xs = x.locations_array()
    ps = x.probabilities_array()
    nw = noise.weights_array()
    nm = noise.means_array()
    means = (xs[:, None] + nm[None, :]).ravel()
    weights = (ps[:, None] * nw[None, :]).ravel()
    return GaussianMixture.from_arrays(weights, means, noise.variance)


def sum_independent(a: DiscreteInput, b: DiscreteInput) -> DiscreteInput:
    """Distribution of X1 + X2 for independent discrete inputs."""
    xa, pa = a.locations_array(), a.probabilities_array()
    xb, pb = b.locations_array(), b.probabilities_array()
    locs = (xa[:, None] + xb[None, :]).ravel()
    probs = (pa[:, None] * pb[None, :]).ravel()
    return DiscreteInput.from_arrays(locs, probs)


def _hull_ccw(points: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Andrew monotone chain; strict turns only, so collinear points drop out."""
    pts = sorted(set(points))
    if len(pts) <= 1:
        return pts
    scale = max(max(abs(x), abs(y)) for x, y in pts) or 1.0
    eps = 1e-12 * scale * scale

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[tuple[float, float]] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= eps:
            lower.pop()
        lower.append(p)
    upper: list[tuple[float, float]] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= eps:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def convex_hull(points: Iterable[RatePair], info: dict | None = None) -> RateRegion:
    """Downward-closed convex hull of rate points.

    The origin and the axis projections of every point are included, so the
    result is the comprehensive (downward-closed) region boundary. Vertices
    come back counterclockwise starting from the origin.
    """
    raw = [(float(p[0]), float(p[1])) for p in points]
    if any(x < 0 or y < 0 for x, y in raw):
        raise ValueError("rate points must be non-negative")
    aug = [(0.0, 0.0)]
    for x, y in raw:
        aug.extend([(x, y), (x, 0.0), (0.0, y)])
    hull = _hull_ccw(aug)
    if not hull:
        return RateRegion((RatePair(0.0, 0.0),), info=info)
    # rotate so the origin comes first; monotone chain output is already CCW
    start = hull.index(min(hull))
    ordered = hull[start:] + hull[:start]
    return RateRegion(tuple(RatePair(x, y) for x, y in ordered), info=info)
