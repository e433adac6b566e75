"""Integer-weight grid measures: exact aggregation, serialization, convolution."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solenoidlab.gridmeasure import (
    BOUNDARY_EPS,
    GridMeasure,
    component_measure,
    convolve,
    dump_measure,
    load_measure,
    measure_from_cells,
    measure_from_points,
    rescale_component,
)
from solenoidlab.rng import SplitMix64


def random_measure(seed, base=2, dim=2, level=4, cells=12, radius=2):
    s = SplitMix64(seed, "measure")
    edge = radius * base**level
    k1 = s.derive("k1").integers(0, cells, 2 * edge) - edge
    w = s.derive("w").integers(0, cells, 50) + 1
    if dim == 1:
        idx = {int(k): int(v) for k, v in zip(k1, w)}
    else:
        k2 = s.derive("k2").integers(0, cells, 2 * edge) - edge
        idx = {(int(a), int(b)): int(v) for a, b, v in zip(k1, k2, w)}
    return measure_from_cells(base, dim, level, idx, box_radius=radius)


def test_binning_hand_example():
    pts = np.array([0.1, 0.1, 0.6, 0.9])
    mu = measure_from_points(pts, 2, 1)
    # level-1 half-open cells: [0,0.5) gets two points, [0.5,1) gets two
    assert mu.cells() == {0: 2, 1: 2}
    assert mu.total == 4


def test_binning_2d_complex_input():
    z = np.array([0.1 + 0.6j, 0.1 + 0.6j, 0.9 + 0.2j])
    mu = measure_from_points(z, 2, 1)
    assert mu.cells() == {(0, 1): 2, (1, 0): 1}


def test_cells_sorted_canonically():
    mu = measure_from_cells(2, 2, 2, {(3, 1): 1, (0, 2): 1, (0, 1): 1, (-1, 3): 2})
    rows = [tuple(r) for r in mu.idx]
    assert rows == sorted(rows)


def test_input_order_irrelevant():
    pts = np.array([0.11, 0.52, 0.77, 0.13, 0.52])
    a = measure_from_points(pts, 3, 2)
    b = measure_from_points(pts[::-1].copy(), 3, 2)
    assert a.equals(b)


def test_negative_coordinates_bin_by_floor():
    mu = measure_from_points(np.array([-0.25]), 2, 2)
    # floor(-0.25 * 4) = -1
    assert mu.cells() == {-1: 1}


def test_boundary_tally():
    # 0.5 sits exactly on a level-1 edge; 0.3 does not
    mu = measure_from_points(np.array([0.5, 0.3]), 2, 1)
    assert mu.boundary_ambiguous == 1
    nearly = 0.5 + BOUNDARY_EPS / 4
    mu2 = measure_from_points(np.array([nearly]), 2, 1)
    assert mu2.boundary_ambiguous == 1


def dict_coarsen(mu, n):
    factor = mu.base ** (mu.level - n)
    out = {}
    for key, w in mu.cells().items():
        if mu.dim == 1:
            ck = key // factor
        else:
            ck = (key[0] // factor, key[1] // factor)
        out[ck] = out.get(ck, 0) + w
    return out


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_coarsen_matches_dict_oracle(seed):
    mu = random_measure(seed, base=3, level=3, cells=20)
    for n in (2, 1, 0):
        assert mu.coarsen(n).cells() == dict_coarsen(mu, n)


def test_coarsen_preserves_total():
    mu = random_measure(5, base=2, level=5, cells=30)
    for n in range(mu.level + 1):
        assert mu.coarsen(n).total == mu.total


def test_coarsen_rejects_refinement():
    mu = random_measure(1)
    with pytest.raises(ValueError, match="finer than stored"):
        mu.coarsen(mu.level + 1)


def test_affine_badic_permutes_cells():
    mu = random_measure(7, base=2, level=4, cells=10)
    moved = mu.affine_badic(1, (8, -8))
    assert moved.level == mu.level - 1
    assert moved.total == mu.total
    assert sorted(moved.weights) == sorted(mu.weights)


def test_affine_badic_identity():
    mu = random_measure(11)
    same = mu.affine_badic(0, (0, 0))
    assert same.equals(mu) or (
        same.level == mu.level and same.cells() == mu.cells()
    )


def test_dump_load_round_trip():
    mu = random_measure(13, base=3, dim=2, level=3, cells=15)
    text = dump_measure(mu)
    back = load_measure(text, 3)
    assert back.equals(mu)
    assert dump_measure(back) == text


def test_dump_header_fields():
    mu = random_measure(17, base=2, dim=1, level=4, cells=6)
    head = dump_measure(mu).splitlines()[0]
    assert head == f"GRIDMEASURE v1 dim=1 level=4 total={mu.total}"


def test_load_skips_comment_lines():
    mu = random_measure(19)
    text = "# provenance line\n# another\n" + dump_measure(mu)
    assert load_measure(text, mu.base).equals(mu)


def dict_convolve(mu, nu):
    out = {}
    # center-sum rebinned at the common level: floor((ka + kb + 1) / b^n ... )
    # computed here from float centers, matching the contract
    scale = mu.base**mu.level
    for ka, wa in mu.cells().items():
        for kb, wb in nu.cells().items():
            ca = (np.asarray(ka) + 0.5) / scale
            cb = (np.asarray(kb) + 0.5) / scale
            c = (ca + cb) * scale
            key = tuple(int(v) for v in np.floor(c).astype(int)) if mu.dim == 2 else int(np.floor(c))
            out[key] = out.get(key, 0) + wa * wb
    return out


@given(st.integers(0, 10**6))
@settings(max_examples=25, deadline=None)
def test_convolve_matches_double_loop(seed):
    mu = random_measure(seed, base=2, level=3, cells=8)
    nu = random_measure(seed + 1, base=2, level=3, cells=7)
    conv = convolve(mu, nu)
    assert conv.cells() == dict_convolve(mu, nu)
    assert conv.total == mu.total * nu.total


def test_convolve_point_mass_translates():
    mu = random_measure(23, base=2, level=4, cells=9)
    # delta at a cell whose center is b^-level * (k + 0.5)
    delta = measure_from_cells(2, 2, 4, {(16, 16): 1})
    conv = convolve(mu, delta)
    shifted = {(k[0] + 17, k[1] + 17): w for k, w in mu.cells().items()}
    assert conv.cells() == shifted


def test_convolve_level_mismatch():
    mu = random_measure(2, level=3)
    nu = random_measure(3, level=4)
    with pytest.raises(ValueError, match="level"):
        convolve(mu, nu)


def test_convolve_row_and_column_give_square():
    row = measure_from_cells(2, 2, 2, {(k, 0): 1 for k in range(4)})
    col = measure_from_cells(2, 2, 2, {(0, k): 1 for k in range(4)})
    sq = convolve(row, col)
    assert sq.ncells == 16
    assert set(sq.weights) == {1}


def test_component_measure_restricts():
    mu = random_measure(29, base=2, level=4, cells=20)
    parent = mu.coarsen(2)
    cell = tuple(int(v) for v in parent.idx[0])
    comp = component_measure(mu, 2, cell)
    assert comp.total == parent.cells()[cell]
    factor = mu.base ** (mu.level - 2)
    for key in comp.cells():
        assert (key[0] // factor, key[1] // factor) == cell


def test_component_measure_empty_cell_error():
    mu = measure_from_cells(2, 2, 3, {(0, 0): 4})
    with pytest.raises(ValueError, match="empty component"):
        component_measure(mu, 1, (3, 3))


def test_rescale_component_entropy_relation():
    mu = random_measure(31, base=2, level=5, cells=25)
    parent = mu.coarsen(2)
    cell = tuple(int(v) for v in parent.idx[np.argmax(parent.weights)])
    comp = component_measure(mu, 2, cell)
    scaled = rescale_component(comp, 2)
    assert scaled.level == mu.level - 2
    assert scaled.total == comp.total
    # support moved into the unit square
    assert np.all(scaled.idx >= 0)
    assert np.all(scaled.idx < mu.base**scaled.level)
    # cells permute one-for-one
    assert sorted(scaled.weights) == sorted(comp.weights)


def test_rescale_component_spanning_error():
    mu = measure_from_cells(2, 2, 3, {(0, 0): 1, (7, 7): 1})
    with pytest.raises(ValueError, match="spans multiple"):
        rescale_component(mu, 1)


def test_point_mass_at_corner_rescales_to_origin():
    mu = measure_from_cells(2, 2, 3, {(4, 4): 3})
    scaled = rescale_component(mu, 2)
    assert scaled.cells() == {(0, 0): 3}


def test_empty_measure_rejected():
    with pytest.raises(ValueError, match="empty"):
        measure_from_points(np.array([]), 2, 1)


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        GridMeasure(
            2,
            1,
            1,
            np.array([[0]], dtype=np.int64),
            np.array([0], dtype=np.int64),
            1,
        )
