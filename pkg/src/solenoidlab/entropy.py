"""Entropy diagnostics for grid measures.

All entropies are Shannon entropies of cell masses in base b, the grid
base, so one unit of entropy corresponds to one grid level and
normalized entropies read directly as dimensions.  Summation always runs
over the canonical sorted cell order, which keeps every reported float
bit-stable across reruns and worker counts.

Components: for a level-i cell Q with positive mass, the component of mu
at Q is the restriction mu|Q and the rescaled component is its image
under the b-adic affine map taking Q onto [0, 1)^d.  Scale-m component
entropy means the level-m entropy of the rescaled component, computed
exactly from the subcell table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .gridmeasure import GridMeasure, convolve

__all__ = [
    "entropy",
    "conditional_entropy",
    "EntropyProfile",
    "entropy_profile",
    "ComponentSweep",
    "component_entropy_distribution",
    "PorosityReport",
    "porosity_check",
    "SaturationReport",
    "SaturationScan",
    "saturation_scan",
    "GrowthReport",
    "entropy_growth_experiment",
    "decomposition_gap",
    "mix_measures",
    "binary_entropy",
]


def _plogp(p: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    out[pos] = -p[pos] * np.log(p[pos])
    return out / math.log(base)


def binary_entropy(t: float, base: int) -> float:
    """-t log_b t - (1-t) log_b (1-t)."""
    out = 0.0
    for p in (t, 1.0 - t):
        if p > 0.0:
            out -= p * math.log(p)
    return out / math.log(base)


def entropy(mu: GridMeasure, n: Optional[int] = None) -> float:
    """Level-n entropy of mu in base b.  n defaults to the stored level."""
    if n is None:
        n = mu.level
    coarse = mu.coarsen(n)
    return float(_plogp(coarse.probabilities(), mu.base).sum())


def _group_entropies(
    mu: GridMeasure, parent_level: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-parent-cell weight and internal entropy at the stored level.

    Returns (parent rows, group weights, group entropies), parents sorted
    lexicographically.  Group entropy is base-b entropy of the cell
    masses inside that parent, normalized by the group weight.
    """
    factor = mu.base ** (mu.level - parent_level)
    parent = np.floor_divide(mu.idx, factor)
    if mu.dim == 1:
        order = np.lexsort((mu.idx[:, 0], parent[:, 0]))
    else:
        order = np.lexsort((mu.idx[:, 1], mu.idx[:, 0], parent[:, 1], parent[:, 0]))
    parent = parent[order]
    w = mu.weights[order]
    same = np.all(parent[1:] == parent[:-1], axis=1)
    starts = np.flatnonzero(np.concatenate(([True], ~same)))
    group_w = np.add.reduceat(w, starts)
    rel = w / np.repeat(group_w, np.diff(np.concatenate((starts, [len(w)]))))
    contrib = _plogp(rel, mu.base)
    group_h = np.add.reduceat(contrib, starts)
    return parent[starts], group_w, group_h


def conditional_entropy(mu: GridMeasure, fine: int, coarse: int) -> float:
    """H(mu, level fine | level coarse), fine >= coarse.

    Computed as the entropy difference and cross-checked against the
    component form sum_P (w_P / total) H(mu|P, fine); disagreement beyond
    1e-9 means a bookkeeping bug and raises.
    """
    if fine < coarse:
        raise ValueError(f"fine level {fine} must be >= coarse level {coarse}")
    refined = mu.coarsen(fine)
    by_difference = entropy(refined, fine) - entropy(refined, coarse)
    _, group_w, group_h = _group_entropies(refined, coarse)
    by_components = float((group_w / refined.total * group_h).sum())
    if abs(by_difference - by_components) > 1e-9:
        raise RuntimeError(
            f"conditional entropy cross-check failed: {by_difference} vs {by_components}"
        )
    return by_difference


@dataclass
class EntropyProfile:
    """Entropy by level, with normalized values H/n."""

    levels: list[int]
    entropies: list[float]

    @property
    def normalized(self) -> list[float]:
        return [h / n if n else 0.0 for n, h in zip(self.levels, self.entropies)]

    def slope(self, window: Optional[Sequence[int]] = None) -> float:
        """Least-squares slope of H against n over the window (default: all levels)."""
        if window is None:
            window = self.levels
        pick = [i for i, n in enumerate(self.levels) if n in set(window)]
        if len(pick) < 2:
            raise ValueError("slope needs at least two levels")
        xs = np.array([self.levels[i] for i in pick], dtype=float)
        ys = np.array([self.entropies[i] for i in pick], dtype=float)
        return float(np.polyfit(xs, ys, 1)[0])


def entropy_profile(mu: GridMeasure, levels: Sequence[int]) -> EntropyProfile:
    lv = sorted(set(int(n) for n in levels))
    if not lv:
        raise ValueError("no levels requested")
    if lv[-1] > mu.level:
        raise ValueError(
            f"entropy below resolution: level {lv[-1]} finer than stored {mu.level}"
        )
    return EntropyProfile(lv, [entropy(mu, n) for n in lv])


@dataclass
class ComponentSweep:
    """Scale-m component entropies across a level range, mass-weighted.

    rows hold (level, parent cell, normalized component entropy, mass
    within that level); each level carries weight 1/#levels in the
    aggregate distribution.
    """

    scale: int
    levels: list[int]
    rows: list[tuple[int, tuple, float, float]]

    def mean(self) -> float:
        if not self.rows:
            return 0.0
        per_level = 1.0 / len(self.levels)
        return sum(val * mass * per_level for (_, _, val, mass) in self.rows)

    def fraction_below(self, threshold: float) -> float:
        per_level = 1.0 / len(self.levels)
        return sum(
            mass * per_level
            for (_, _, val, mass) in self.rows
            if val < threshold
        )


def component_entropy_distribution(
    mu: GridMeasure, i_range: Sequence[int], m: int
) -> ComponentSweep:
    """Normalized scale-m entropies (1/m) H of all rescaled components.

    i_range lists the component levels; requires max(i_range) + m within
    the stored resolution.
    """
    levels = sorted(set(int(i) for i in i_range))
    if not levels:
        raise ValueError("empty component level range")
    if m < 1:
        raise ValueError("component scale must be positive")
    if levels[0] < 0:
        raise ValueError("component levels must be nonnegative")
    if levels[-1] + m > mu.level:
        raise ValueError(
            f"entropy below resolution: need level {levels[-1] + m}, stored {mu.level}"
        )
    rows = []
    total = mu.total
    for i in levels:
        fine = mu.coarsen(i + m)
        parents, group_w, group_h = _group_entropies(fine, i)
        for p, w, h in zip(parents, group_w, group_h):
            rows.append((i, tuple(int(v) for v in p), float(h) / m, int(w) / total))
    return ComponentSweep(m, levels, rows)


@dataclass
class PorosityReport:
    threshold: float
    fraction_below: float
    delta: float
    verdict: bool
    scale: int
    level_range: tuple[int, int]


def porosity_check(
    mu: GridMeasure, h: float, delta: float, m: int, n1: int, n2: int
) -> PorosityReport:
    """Entropy-porosity probe: are most components no richer than h + delta?

    Fraction is the component mass (uniform over levels n1 <= i < n2,
    mass-weighted within a level) whose normalized scale-m entropy falls
    below h + delta; the verdict asks for fraction > 1 - delta.
    """
    if not 0 <= n1 < n2:
        raise ValueError(f"need 0 <= n1 < n2, got ({n1}, {n2})")
    sweep = component_entropy_distribution(mu, range(n1, n2), m)
    frac = sweep.fraction_below(h + delta)
    return PorosityReport(h + delta, frac, delta, frac > 1.0 - delta, m, (n1, n2))


@dataclass
class SaturationReport:
    subspace: str
    theta: Optional[float]
    captured: float
    concentrated: bool
    entropy_rate: float
    projected_rate: Optional[float]
    defect: float
    saturated: bool


@dataclass
class SaturationScan:
    eps: float
    scale: int
    zero: SaturationReport
    line: SaturationReport
    full: SaturationReport
    line_table: list[SaturationReport]


def _best_ball_mass(mu: GridMeasure, eps: float) -> float:
    """Largest mass within distance eps of any single point (candidate scan).

    Candidates are the occupied-cell centers of a coarsening at the scale
    of eps; coarse cell centers displace a true optimum by at most one
    cell, which the tests tolerate by construction.
    """
    lvl = 0
    while mu.base ** (-lvl) > eps and lvl < mu.level:
        lvl += 1
    work = mu
    while work.ncells > 50_000 and work.level > lvl:
        work = work.coarsen(work.level - 1)
    coarse = work.coarsen(lvl)
    cand = coarse.centers().reshape(coarse.ncells, -1)
    pts = work.centers().reshape(work.ncells, -1)
    best = 0
    chunk = max(1, 2_000_000 // max(1, work.ncells))
    for lo in range(0, len(cand), chunk):
        d2 = ((cand[lo : lo + chunk, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        inside = (d2 <= eps * eps).astype(np.int64)
        masses = inside @ work.weights
        if len(masses):
            best = max(best, int(masses.max()))
    return best / work.total


def _best_window_mass(values: np.ndarray, weights: np.ndarray, width: float) -> float:
    """Largest weight fraction inside any closed window of the given width."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    csum = np.concatenate(([0], np.cumsum(w)))
    right = np.searchsorted(v, v + width, side="right")
    best = int((csum[right] - csum[np.arange(len(v))]).max())
    return best / csum[-1]


def saturation_scan(
    mu: GridMeasure, eps: float, m: int, theta_grid: Sequence[float]
) -> SaturationScan:
    """Concentration and saturation diagnostics per subspace class.

    For the trivial subspace the concentration reading is the best
    eps-ball mass (near-point-mass probe); its saturation holds
    vacuously.  For a line at angle theta, concentration captures mass
    within eps of a line perpendicular to it, and saturation compares
    the measure's rate against its projection onto that perpendicular.
    For the full plane, saturation asks the rate to nearly reach 2.
    """
    if mu.dim != 2:
        raise ValueError("saturation scan needs a planar measure")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    rate = entropy(mu, m) / m
    centers = mu.centers()
    z = centers[:, 0] + 1j * centers[:, 1]

    ball = _best_ball_mass(mu, eps)
    zero_rep = SaturationReport(
        "zero", None, ball, ball >= 1.0 - eps, rate, rate, 0.0, True
    )

    from .projection import project_measure  # local import to avoid a cycle

    best_line = None
    table = []
    for theta in theta_grid:
        t = np.real(z * np.exp(-2j * np.pi * theta))
        captured = _best_window_mass(t, mu.weights, 2.0 * eps)
        perp = project_measure(mu, theta + 0.25)
        proj_rate = entropy(perp, m) / m
        defect = rate - proj_rate - 1.0
        rep = SaturationReport(
            "line",
            float(theta),
            captured,
            captured >= 1.0 - eps,
            rate,
            proj_rate,
            defect,
            defect >= -eps,
        )
        table.append(rep)
        if best_line is None or rep.captured > best_line.captured:
            best_line = rep

    full_defect = rate - 2.0
    full_rep = SaturationReport(
        "full", None, ball, ball >= 1.0 - eps, rate, 0.0, full_defect, full_defect >= -eps
    )
    return SaturationScan(eps, m, zero_rep, best_line, full_rep, table)


@dataclass
class GrowthReport:
    level: int
    base_rate: float
    convolved_rate: float
    gain: float


def entropy_growth_experiment(
    mu: GridMeasure, fiber: GridMeasure, n: int
) -> GrowthReport:
    """Normalized entropy gained by convolving fiber with mu at level n.

    gain = (1/n) H(mu * fiber) - (1/n) H(fiber).  A point-mass mu only
    translates, so its gain is rebinning noise of size O(1/n); the
    interesting hypothesis class has (1/n) H(mu) bounded away from 0.
    """
    if n < 1:
        raise ValueError("level must be positive")
    if mu.level < n or fiber.level < n:
        raise ValueError("entropy below resolution: convolution level not certified")
    mu_n = mu.coarsen(n)
    fiber_n = fiber.coarsen(n)
    conv = convolve(mu_n, fiber_n)
    base_rate = entropy(fiber_n, n) / n
    conv_rate = entropy(conv, n) / n
    return GrowthReport(n, base_rate, conv_rate, conv_rate - base_rate)


def decomposition_gap(mu: GridMeasure, m: int, n: int) -> float:
    """| (1/n) H(mu, L_n) - E_{0<=i<n} (1/m) H(component at scale m) |.

    The multi-scale decomposition bound says this is O(m/n + log R / n).
    """
    sweep = component_entropy_distribution(mu, range(0, n), m)
    return abs(entropy(mu, n) / n - sweep.mean())


def mix_measures(mu: GridMeasure, nu: GridMeasure, p: int, q: int) -> GridMeasure:
    """Exact convex combination (p/q) mu + (1 - p/q) nu by weight scaling.

    Both measures are rescaled to the common total q * total(mu) * total(nu),
    so the mixture stays integer-exact.
    """
    if not 0 < p < q:
        raise ValueError("mixing ratio must be strictly between 0 and 1")
    if (mu.base, mu.dim, mu.level) != (nu.base, nu.dim, nu.level):
        raise ValueError("mixing requires matching base, dimension, and level")
    from .gridmeasure import GridMeasure as GM, _reduce_rows

    w1 = mu.weights * (p * nu.total)
    w2 = nu.weights * ((q - p) * mu.total)
    idx = np.concatenate((mu.idx, nu.idx))
    w = np.concatenate((w1, w2))
    idx, w = _reduce_rows(idx, w)
    radius = max(mu.box_radius, nu.box_radius)
    return GM(mu.base, mu.dim, mu.level, idx, w, radius)
