"""Line projections, strip conditionals, and dimension conservation.

pi_theta(z) = Re(z e^{-2 pi i theta}) projects the plane onto the line of
angle 2 pi theta.  Two exact facts drive everything here: rotating a
point before projecting equals projecting at a rotated angle
(pi_theta(gamma z) = |gamma| pi_{theta - delta}(z)), and affine branch
images project to affine interval images.  Tests pin both.

The conservation estimator compares a planar entropy rate against the
projected rate plus the strip-conditional rate.  It streams the raw
branch sums instead of going through a binned planar table, because the
planar table at deep levels can be enormous while the three statistics
only need sorted-key passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .entropy import entropy
from .fiber import FiberMeasureSpec, build_fiber_measure, fiber_value_chunks
from .gridmeasure import BOUNDARY_EPS, GridMeasure, _reduce_rows
from .params import SystemParams

__all__ = [
    "project_point",
    "project_measure",
    "SweepResult",
    "projection_entropy_sweep",
    "fiber_conditional_measure",
    "strip_decomposition",
    "ConservationEstimate",
    "conservation_estimate",
    "conservation_estimates",
]


def project_point(z, theta: float):
    """pi_theta(z) = Re(z exp(-2 pi i theta)); works on scalars and arrays."""
    phase = np.exp(-2j * np.pi * theta)
    return np.real(np.asarray(z) * phase) if np.ndim(z) else float((z * phase).real)


def project_measure(mu: GridMeasure, theta: float) -> GridMeasure:
    """1D image of a planar measure under pi_theta, binned at the same level.

    Cell centers stand in for their cells; the displacement is at most
    half a cell diagonal and is accounted for wherever tolerances matter.
    """
    if mu.dim != 2:
        raise ValueError("projection needs a planar measure")
    centers = mu.centers()
    t = centers[:, 0] * math.cos(2 * math.pi * theta) + centers[:, 1] * math.sin(
        2 * math.pi * theta
    )
    scale = float(mu.base**mu.level)
    scaled = t * scale
    idx = np.floor(scaled).astype(np.int64).reshape(-1, 1)
    near = int(np.count_nonzero(np.abs(scaled - np.rint(scaled)) < BOUNDARY_EPS * scale))
    idx, w = _reduce_rows(idx, mu.weights.copy())
    radius = max(1, int(np.ceil((np.abs(idx).max() + 1) / scale)))
    return GridMeasure(
        mu.base, 1, mu.level, idx, w, radius, mu.boundary_ambiguous + near
    )


@dataclass
class SweepResult:
    x_grid: list[float]
    theta_grid: list[float]
    level: int
    matrix: np.ndarray  # normalized entropies, shape (len(x_grid), len(theta_grid))

    @property
    def min_rate(self) -> float:
        return float(self.matrix.min())

    @property
    def max_rate(self) -> float:
        return float(self.matrix.max())

    @property
    def beta_hat(self) -> float:
        return self.min_rate

    def argmin(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(self.matrix.argmin()), self.matrix.shape)
        return self.x_grid[i], self.theta_grid[j]


def projection_entropy_sweep(
    params: SystemParams,
    x_grid: Sequence[float],
    theta_grid: Sequence[float],
    n: int,
    depth: int,
    mode: str = "exhaustive",
    sample_count: int = 0,
    seed: int = 0,
    threads: int = 1,
) -> SweepResult:
    """Matrix of (1/n) H(pi_theta m_x, L_n) over a base-point/angle grid.

    Each fiber measure is built once per base point and projected at
    every angle; the projected-dimension estimate is the grid minimum.
    """
    xs = [float(x) for x in x_grid]
    thetas = [float(t) for t in theta_grid]
    if not xs or not thetas:
        raise ValueError("empty sweep grid")
    matrix = np.zeros((len(xs), len(thetas)))
    for i, x in enumerate(xs):
        spec = FiberMeasureSpec(
            params, x, depth, n, mode=mode, sample_count=sample_count, seed=seed
        )
        mu = build_fiber_measure(spec, threads=threads)
        for j, theta in enumerate(thetas):
            matrix[i, j] = entropy(project_measure(mu, theta), n) / n
    return SweepResult(xs, thetas, n, matrix)


def fiber_conditional_measure(
    mu: GridMeasure, theta: float, c: float, q: int
) -> GridMeasure:
    """Conditional of mu on the strip |pi_theta - c| < b^-q / 2, as a 1D measure.

    The strip is half-open ([c - w/2, c + w/2)), so the strips centered
    at (j + 1/2) b^-q tile the line and their conditionals partition the
    mass exactly.  Coordinates along the strip are pi at theta + 1/4.
    """
    if mu.dim != 2:
        raise ValueError("strip conditional needs a planar measure")
    width = mu.base ** (-q)
    centers = mu.centers()
    t = centers[:, 0] * math.cos(2 * math.pi * theta) + centers[:, 1] * math.sin(
        2 * math.pi * theta
    )
    inside = (t >= c - width / 2) & (t < c + width / 2)
    if not inside.any():
        raise ValueError(f"empty strip at c={c}")
    perp = 2 * math.pi * (theta + 0.25)
    u = centers[inside, 0] * math.cos(perp) + centers[inside, 1] * math.sin(perp)
    scale = float(mu.base**mu.level)
    scaled = u * scale
    idx = np.floor(scaled).astype(np.int64).reshape(-1, 1)
    near = int(np.count_nonzero(np.abs(scaled - np.rint(scaled)) < BOUNDARY_EPS * scale))
    idx, w = _reduce_rows(idx, mu.weights[inside].copy())
    radius = max(1, int(np.ceil((np.abs(idx).max() + 1) / scale)))
    return GridMeasure(
        mu.base, 1, mu.level, idx, w, radius, mu.boundary_ambiguous + near
    )


def strip_decomposition(
    mu: GridMeasure, theta: float, q: int
) -> list[tuple[int, GridMeasure]]:
    """All nonempty level-q strip conditionals, keyed by strip index.

    Strip j covers pi_theta values in [j b^-q, (j+1) b^-q); the masses
    add up to the total exactly.
    """
    if mu.dim != 2:
        raise ValueError("strip decomposition needs a planar measure")
    width = mu.base ** (-q)
    centers = mu.centers()
    t = centers[:, 0] * math.cos(2 * math.pi * theta) + centers[:, 1] * math.sin(
        2 * math.pi * theta
    )
    strips = np.floor(t / width).astype(np.int64)
    out = []
    for j in np.unique(strips):
        c = (int(j) + 0.5) * width
        out.append((int(j), fiber_conditional_measure(mu, theta, c, q)))
    return out


@dataclass
class ConservationEstimate:
    x: float
    theta: float
    level: int
    strip_level: int
    alpha: float
    beta: float
    upsilon: float
    strip_table: list[tuple[int, float, float]]  # (strip index, mass, rate)

    def __post_init__(self):
        slack = 2.0 / self.level
        if self.alpha < 0 or self.beta < 0 or self.upsilon < 0:
            raise ValueError("negative entropy rate")
        if self.beta > 1.0 + slack + 0.5:
            raise ValueError(f"projected rate {self.beta} far above 1")
        if self.alpha > 2.0 + slack + 0.5:
            raise ValueError(f"planar rate {self.alpha} far above 2")

    @property
    def residual(self) -> float:
        return self.alpha - self.beta - self.upsilon

    @property
    def corollary_consistent(self) -> bool:
        """False only if the rate table contradicts 'alpha >= beta + 1 forces alpha >= 2'."""
        return not (self.alpha >= self.beta + 1.0 + 0.1 and self.alpha < 2.0 - 0.1)


# largest dense count-table the streamed estimator will allocate per key
# space; larger certified ranges fall back to the sparse accumulator
_DENSE_CAP = 1 << 23


class _KeyAccumulator:
    """Weighted integer-key table built chunk by chunk.

    Parts are merged whenever the pending row count crosses the flush
    threshold, so memory tracks the number of distinct keys rather than
    the number of chunks.
    """

    def __init__(self, flush_rows: int = 1 << 23):
        self._idx: list[np.ndarray] = []
        self._w: list[np.ndarray] = []
        self._rows = 0
        self._flush = flush_rows

    def add(self, idx: np.ndarray, w: np.ndarray) -> None:
        self._idx.append(idx)
        self._w.append(w)
        self._rows += len(w)
        if self._rows > self._flush:
            self._merge()

    def _merge(self) -> None:
        idx, w = _reduce_rows(np.concatenate(self._idx), np.concatenate(self._w))
        self._idx = [idx]
        self._w = [w]
        self._rows = len(w)

    def result(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._w:
            raise ValueError("empty accumulator")
        self._merge()
        return self._idx[0], self._w[0]


def _sorted_key_entropy(keys: np.ndarray, base: int, chunk: int = 1 << 24) -> float:
    """Base-b entropy of the multiset of keys; sorts the array IN PLACE.

    Run-length accumulation is chunked so the peak memory stays near the
    key array itself even when almost all keys are distinct.
    """
    n = len(keys)
    if n == 0:
        raise ValueError("empty key set")
    keys.sort()
    sum_clogc = 0.0
    carry_len = 0
    for lo in range(0, n, chunk):
        seg = keys[lo : lo + chunk]
        changes = np.flatnonzero(seg[1:] != seg[:-1]) + 1
        if lo > 0 and keys[lo - 1] != seg[0] and carry_len:
            sum_clogc += carry_len * math.log(carry_len)
            carry_len = 0
        if len(changes) == 0:
            carry_len += len(seg)
            continue
        first = int(changes[0])
        runs = np.diff(changes)
        tail = len(seg) - int(changes[-1])
        c0 = carry_len + first
        sum_clogc += c0 * math.log(c0)
        if len(runs):
            runs = runs.astype(np.float64)
            sum_clogc += float(np.sum(runs * np.log(runs)))
        carry_len = tail
    if carry_len:
        sum_clogc += carry_len * math.log(carry_len)
    return (math.log(n) - sum_clogc / n) / math.log(base)


def conservation_estimates(
    params: SystemParams,
    x: float,
    theta: float,
    n: int,
    q_list: Sequence[int],
    depth: int,
    mode: str = "exhaustive",
    sample_count: int = 0,
    seed: int = 0,
) -> dict[int, ConservationEstimate]:
    """Conservation rates at one (x, theta) for every strip level in q_list.

    alpha = (1/n) H(m_x, L_n), beta = (1/n) H(pi_theta m_x, L_n), and
    upsilon(q) the strip-mass-weighted mean of (1/(n-q)) H(conditional,
    L_{n-q}) over level-q strips.  Works directly on the streamed branch
    sums, so deep levels never materialize a planar table, and all q
    values share the single pass.
    """
    qs = sorted(set(int(q) for q in q_list))
    if not qs:
        raise ValueError("empty strip-level list")
    for q in qs:
        if not 0 < q < n:
            raise ValueError(f"need 0 < q < n, got q={q}, n={n}")
    spec = FiberMeasureSpec(
        params, x, depth, n, mode=mode, sample_count=sample_count, seed=seed
    )
    spec.validate()
    b = params.b
    R = params.box_radius()
    edge = R * b**n
    span = 2 * edge
    if span * span > 2**62:
        raise ValueError("level too deep for planar key encoding")

    total = spec.total_words
    planar_keys = np.empty(total, dtype=np.int64)
    cos_t = math.cos(2 * math.pi * theta)
    sin_t = math.sin(2 * math.pi * theta)
    perp = 2 * math.pi * (theta + 0.25)
    cos_p = math.cos(perp)
    sin_p = math.sin(perp)

    line_edge = int(math.ceil(math.sqrt(2) * R))
    beta_edge = line_edge * b**n
    cond_level = {q: n - q for q in qs}
    cond_edge = {q: line_edge * b ** cond_level[q] for q in qs}
    cond_span = {q: 2 * cond_edge[q] for q in qs}
    strip_edge = {q: line_edge * b**q for q in qs}
    grid_size = {q: 2 * strip_edge[q] * cond_span[q] for q in qs}
    # bincount into dense tables when the certified key range is small:
    # counts stay exact int64 and the keys come out sorted for free
    dense = 2 * beta_edge <= _DENSE_CAP and all(
        grid_size[q] <= _DENSE_CAP for q in qs
    )
    if dense:
        beta_counts = np.zeros(2 * beta_edge, dtype=np.int64)
        strip_counts = {q: np.zeros(grid_size[q], dtype=np.int64) for q in qs}
    else:
        beta_acc = _KeyAccumulator()
        strip_acc = {q: _KeyAccumulator() for q in qs}

    pos = 0
    for values in fiber_value_chunks(spec, block_words=1 << 21):
        m = len(values)
        i1 = np.floor(values.real * (b**n)).astype(np.int64)
        i2 = np.floor(values.imag * (b**n)).astype(np.int64)
        planar_keys[pos : pos + m] = (i1 + edge) * span + (i2 + edge)
        pos += m
        t = values.real * cos_t + values.imag * sin_t
        tbin = np.floor(t * (b**n)).astype(np.int64)
        u = values.real * cos_p + values.imag * sin_p
        if dense:
            beta_counts += np.bincount(tbin + beta_edge, minlength=2 * beta_edge)
        else:
            beta_acc.add(
                *_reduce_rows(tbin.reshape(-1, 1), np.ones(m, dtype=np.int64))
            )
        for q in qs:
            strip = np.floor(t * (b**q)).astype(np.int64)
            ubin = np.floor(u * (b ** cond_level[q])).astype(np.int64)
            skey = (strip + strip_edge[q]) * cond_span[q] + (ubin + cond_edge[q])
            if dense:
                strip_counts[q] += np.bincount(skey, minlength=grid_size[q])
            else:
                strip_acc[q].add(
                    *_reduce_rows(skey.reshape(-1, 1), np.ones(m, dtype=np.int64))
                )
    if pos != total:
        raise RuntimeError("stream length mismatch")

    alpha = _sorted_key_entropy(planar_keys, b) / n
    del planar_keys

    if dense:
        bw = beta_counts[beta_counts > 0]
    else:
        _, bw = beta_acc.result()
    p = bw / total
    beta = float(np.sum(-p * np.log(p)) / math.log(b)) / n

    out = {}
    for q in qs:
        if dense:
            skeys = np.flatnonzero(strip_counts[q])
            sw = strip_counts[q][skeys]
        else:
            sidx, sw = strip_acc[q].result()
            skeys = sidx[:, 0]
        strips = np.floor_divide(skeys, cond_span[q]) - strip_edge[q]
        boundaries = np.flatnonzero(
            np.concatenate(([True], strips[1:] != strips[:-1]))
        )
        strip_w = np.add.reduceat(sw, boundaries)
        rel = sw / np.repeat(
            strip_w, np.diff(np.concatenate((boundaries, [len(sw)])))
        )
        contrib = -rel * np.log(rel) / math.log(b)
        strip_h = np.add.reduceat(contrib, boundaries)
        table = [
            (int(strips[i]), int(wt) / total, float(h) / cond_level[q])
            for i, wt, h in zip(boundaries, strip_w, strip_h)
        ]
        upsilon = sum(mass * rate for (_, mass, rate) in table)
        out[q] = ConservationEstimate(x, theta, n, q, alpha, beta, upsilon, table)
    return out


def conservation_estimate(
    params: SystemParams,
    x: float,
    theta: float,
    n: int,
    q: int,
    depth: int,
    mode: str = "exhaustive",
    sample_count: int = 0,
    seed: int = 0,
) -> ConservationEstimate:
    """Single-q convenience wrapper around conservation_estimates."""
    return conservation_estimates(
        params, x, theta, n, [q], depth, mode=mode, sample_count=sample_count, seed=seed
    )[q]
