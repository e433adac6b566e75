"""Integer-weighted measures on b-adic grids.

A GridMeasure assigns positive integer weights to half-open b-adic cells
[k/b^n, (k+1)/b^n) in dimension 1 or 2.  Integer weights are the whole
point: superposition, restriction, coarsening, and b-adic affine images
are exact, so identity checks can demand weight-for-weight equality and
replays with different worker counts must produce identical tables.

Convolution adds cell centers.  The center sum of two level-n cells lands
exactly on a grid corner, and the half-open convention sends a corner to
the cell on its right, so the result index is a1 + a2 + 1 per axis with
no floating arithmetic at all.

Points binned from floating arithmetic closer than 1e-13 to a cell
boundary are counted in a boundary-ambiguity tally carried on the
measure; exact operations propagate the tally without adding to it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

__all__ = [
    "GridMeasure",
    "measure_from_points",
    "measure_from_cells",
    "dump_measure",
    "load_measure",
    "convolve",
    "component_measure",
    "rescale_component",
    "BOUNDARY_EPS",
]

BOUNDARY_EPS = 1e-13


def _lexsort_rows(idx: np.ndarray) -> np.ndarray:
    if idx.shape[1] == 1:
        return np.argsort(idx[:, 0], kind="stable")
    return np.lexsort((idx[:, 1], idx[:, 0]))


def _reduce_rows(idx: np.ndarray, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort rows lexicographically and merge duplicates by exact integer addition."""
    order = _lexsort_rows(idx)
    idx = idx[order]
    w = w[order]
    if len(idx) == 0:
        return idx, w
    same = np.all(idx[1:] == idx[:-1], axis=1)
    starts = np.flatnonzero(np.concatenate(([True], ~same)))
    out_idx = idx[starts]
    sums = np.add.reduceat(w, starts)
    return out_idx, sums


@dataclass
class GridMeasure:
    """dim-d measure with integer weights on level-n b-adic cells.

    idx has shape (m, dim) and is sorted lexicographically; weights are
    positive int64.  box_radius R certifies all cells lie in [-R, R]^dim.
    """

    base: int
    dim: int
    level: int
    idx: np.ndarray
    weights: np.ndarray
    box_radius: int
    boundary_ambiguous: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dim}")
        if self.base < 2:
            raise ValueError(f"base must be >= 2, got {self.base}")
        if self.level < 0:
            raise ValueError(f"level must be nonnegative, got {self.level}")
        if len(self.idx) == 0:
            raise ValueError("empty measure")
        if self.idx.shape != (len(self.weights), self.dim):
            raise ValueError("index/weight shape mismatch")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive integers")
        edge = self.box_radius * self.base**self.level
        if np.any(self.idx < -edge) or np.any(self.idx > edge - 1):
            raise ValueError("cell outside origin box")

    @property
    def total(self) -> int:
        return int(self.weights.sum())

    @property
    def ncells(self) -> int:
        return len(self.weights)

    def cells(self) -> dict:
        """Weight table as a dict; 1D keys are ints, 2D keys are (k1, k2)."""
        if self.dim == 1:
            return {int(k): int(w) for k, w in zip(self.idx[:, 0], self.weights)}
        return {
            (int(k1), int(k2)): int(w)
            for (k1, k2), w in zip(self.idx, self.weights)
        }

    def centers(self) -> np.ndarray:
        """Cell centers; shape (m,) for 1D, (m, 2) for 2D."""
        scale = 1.0 / self.base**self.level
        c = (self.idx + 0.5) * scale
        return c[:, 0] if self.dim == 1 else c

    def probabilities(self) -> np.ndarray:
        return self.weights / self.total

    def max_cell_mass(self) -> float:
        return int(self.weights.max()) / self.total

    def coarsen(self, n: int) -> "GridMeasure":
        """Reduce to level n <= level by exact integer aggregation."""
        if n > self.level:
            raise ValueError(
                f"entropy below resolution: level {n} finer than stored level {self.level}"
            )
        if n == self.level:
            return self
        factor = self.base ** (self.level - n)
        coarse = np.floor_divide(self.idx, factor)
        idx, w = _reduce_rows(coarse, self.weights.copy())
        return GridMeasure(
            self.base, self.dim, n, idx, w, self.box_radius, self.boundary_ambiguous
        )

    def affine_badic(self, power: int, shift: Sequence[int]) -> "GridMeasure":
        """Image under z -> b^power * z + c with c a level-(level-power) corner.

        shift gives the corner index per axis at level (level - power).
        Cells permute, so this is exact and entropy-preserving.
        """
        if not 0 <= power <= self.level:
            raise ValueError(f"power must lie in [0, level], got {power}")
        shift = np.asarray(shift, dtype=np.int64).reshape(1, self.dim)
        new_idx = self.idx + shift
        new_level = self.level - power
        radius = int(
            np.ceil(
                (np.abs(new_idx).max() + 1) / self.base**new_level
            )
        )
        idx, w = _reduce_rows(new_idx, self.weights.copy())
        return GridMeasure(
            self.base,
            self.dim,
            new_level,
            idx,
            w,
            max(1, radius),
            self.boundary_ambiguous,
        )

    def equals(self, other: "GridMeasure") -> bool:
        """Weight-for-weight equality of the cell tables."""
        return (
            self.base == other.base
            and self.dim == other.dim
            and self.level == other.level
            and self.idx.shape == other.idx.shape
            and bool(np.all(self.idx == other.idx))
            and bool(np.all(self.weights == other.weights))
        )


def _bin_coords(coords: np.ndarray, base: int, level: int) -> tuple[np.ndarray, int]:
    """Cell indices of coordinate array at the given level, plus boundary tally."""
    scaled = coords * float(base**level)
    idx = np.floor(scaled).astype(np.int64)
    near = np.abs(scaled - np.rint(scaled)) < BOUNDARY_EPS * base**level
    return idx, int(np.count_nonzero(near))


def measure_from_points(
    points: np.ndarray,
    base: int,
    level: int,
    weights: Optional[np.ndarray] = None,
    box_radius: Optional[int] = None,
) -> GridMeasure:
    """Bin points into a GridMeasure.

    points: 1D real array, 2D real array of shape (m, 2), or complex array
    (treated as the plane with coordinates (re, im)).
    """
    pts = np.asarray(points)
    if np.iscomplexobj(pts):
        pts = np.column_stack((pts.real, pts.imag))
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if len(pts) == 0:
        raise ValueError("empty measure: no points to bin")
    dim = pts.shape[1]
    if weights is None:
        w = np.ones(len(pts), dtype=np.int64)
    else:
        w = np.asarray(weights, dtype=np.int64)
    idx, flagged = _bin_coords(pts, base, level)
    idx, w = _reduce_rows(idx, w)
    if box_radius is None:
        box_radius = max(1, int(np.ceil((np.abs(idx).max() + 1) / base**level)))
    return GridMeasure(base, dim, level, idx, w, box_radius, flagged)


def measure_from_cells(
    base: int, dim: int, level: int, cells: Mapping, box_radius: Optional[int] = None
) -> GridMeasure:
    """Build from an explicit {index: weight} table."""
    if not cells:
        raise ValueError("empty measure")
    if dim == 1:
        idx = np.array([[int(k)] for k in cells], dtype=np.int64)
    else:
        idx = np.array([[int(k[0]), int(k[1])] for k in cells], dtype=np.int64)
    w = np.array([int(v) for v in cells.values()], dtype=np.int64)
    idx, w = _reduce_rows(idx, w)
    if box_radius is None:
        box_radius = max(1, int(np.ceil((np.abs(idx).max() + 1) / base**level)))
    return GridMeasure(base, dim, level, idx, w, box_radius)


# === serialization ===


def dump_measure(mu: GridMeasure) -> str:
    """Text dump: header line then one 'k1 [k2] weight' line per cell, sorted."""
    out = io.StringIO()
    out.write(
        f"GRIDMEASURE v1 dim={mu.dim} level={mu.level} total={mu.total}\n"
    )
    if mu.dim == 1:
        for k, w in zip(mu.idx[:, 0], mu.weights):
            out.write(f"{k} {w}\n")
    else:
        for (k1, k2), w in zip(mu.idx, mu.weights):
            out.write(f"{k1} {k2} {w}\n")
    return out.getvalue()


def load_measure(text: str, base: int) -> GridMeasure:
    """Parse a dump.  Leading '#' comment lines are permitted and skipped.

    The grid base is not part of the format and must be supplied.
    """
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError("empty measure dump")
    header = lines[0].split()
    if header[:2] != ["GRIDMEASURE", "v1"]:
        raise ValueError(f"bad measure header: {lines[0]!r}")
    fields = dict(part.split("=", 1) for part in header[2:])
    dim = int(fields["dim"])
    level = int(fields["level"])
    total = int(fields["total"])
    rows = []
    weights = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != dim + 1:
            raise ValueError(f"bad cell line: {ln!r}")
        rows.append([int(p) for p in parts[:dim]])
        weights.append(int(parts[dim]))
    idx = np.array(rows, dtype=np.int64).reshape(len(rows), dim)
    w = np.array(weights, dtype=np.int64)
    mu = GridMeasure(
        base,
        dim,
        level,
        idx,
        w,
        max(1, int(np.ceil((np.abs(idx).max() + 1) / base**level))),
    )
    if mu.total != total:
        raise ValueError(f"dump total {total} does not match cell sum {mu.total}")
    return mu


# === measure algebra ===


def convolve(mu: GridMeasure, nu: GridMeasure) -> GridMeasure:
    """Convolution by cell-center addition at the common level.

    Exact in index arithmetic: the center sum is a grid corner and the
    half-open convention assigns it to index a1 + a2 + 1 per axis.
    """
    if (mu.base, mu.dim, mu.level) != (nu.base, nu.dim, nu.level):
        raise ValueError("convolution requires matching base, dimension, and level")
    if mu.total * nu.total > 2**62:
        raise ValueError("convolution weight overflow")
    chunk = max(1, 4_000_000 // max(1, nu.ncells))
    pieces_idx = []
    pieces_w = []
    for lo in range(0, mu.ncells, chunk):
        hi = min(mu.ncells, lo + chunk)
        block_idx = (
            mu.idx[lo:hi, None, :] + nu.idx[None, :, :] + 1
        ).reshape(-1, mu.dim)
        block_w = (mu.weights[lo:hi, None] * nu.weights[None, :]).reshape(-1)
        bi, bw = _reduce_rows(block_idx, block_w)
        pieces_idx.append(bi)
        pieces_w.append(bw)
    idx, w = _reduce_rows(np.concatenate(pieces_idx), np.concatenate(pieces_w))
    radius = max(1, int(np.ceil((np.abs(idx).max() + 1) / mu.base**mu.level)))
    return GridMeasure(
        mu.base,
        mu.dim,
        mu.level,
        idx,
        w,
        radius,
        mu.boundary_ambiguous + nu.boundary_ambiguous,
    )


def _component_mask(mu: GridMeasure, parent_level: int, cell: Sequence[int]) -> np.ndarray:
    if not 0 <= parent_level <= mu.level:
        raise ValueError(
            f"component level must lie in [0, {mu.level}], got {parent_level}"
        )
    cell = np.asarray(cell, dtype=np.int64).reshape(-1)
    if cell.shape != (mu.dim,):
        raise ValueError(f"cell index must have {mu.dim} coordinates")
    factor = mu.base ** (mu.level - parent_level)
    parents = np.floor_divide(mu.idx, factor)
    return np.all(parents == cell[None, :], axis=1)


def component_measure(
    mu: GridMeasure, parent_level: int, cell: Sequence[int]
) -> GridMeasure:
    """Restriction of mu to one level-parent_level cell, weights unchanged."""
    mask = _component_mask(mu, parent_level, cell)
    if not mask.any():
        raise ValueError(f"empty component: cell {tuple(cell)} carries no mass")
    return GridMeasure(
        mu.base,
        mu.dim,
        mu.level,
        mu.idx[mask],
        mu.weights[mask].copy(),
        mu.box_radius,
        mu.boundary_ambiguous,
    )


def rescale_component(
    mu: GridMeasure, parent_level: int, cell: Optional[Sequence[int]] = None
) -> GridMeasure:
    """Component pushed forward by z -> b^parent_level z - corner, onto [0, 1)^dim.

    Pure index arithmetic (subtract the parent corner, drop the parent
    levels), so the rescaled table is exact.  With cell=None the measure
    itself must already live in a single parent cell.
    """
    if cell is None:
        factor = mu.base ** (mu.level - parent_level)
        parents = np.floor_divide(mu.idx, factor)
        if np.any(parents != parents[0]):
            raise ValueError("support spans multiple cells at the parent level")
        cell = parents[0]
    mask = _component_mask(mu, parent_level, cell)
    if not mask.any():
        raise ValueError(f"empty component: cell {tuple(cell)} carries no mass")
    cell = np.asarray(cell, dtype=np.int64).reshape(1, mu.dim)
    factor = mu.base ** (mu.level - parent_level)
    new_idx = mu.idx[mask] - cell * factor
    return GridMeasure(
        mu.base,
        mu.dim,
        mu.level - parent_level,
        new_idx,
        mu.weights[mask].copy(),
        1,
        mu.boundary_ambiguous,
    )
