import numpy as np
import pytest
from hypothesis import given, strategies as st

from novaq.archive import GridArchive
from oracles import interval_index

unit = st.floats(0, 1, allow_nan=False)
triples = st.tuples(unit, unit, unit)


def test_cell_index_boundaries():
    a = GridArchive()
    assert a.cell_index((0, 0, 0)) == (0, 0, 0)
    assert a.cell_index((1, 1, 1)) == (9, 9, 9)


def test_cell_index_interior():
    assert GridArchive().cell_index((0.35, 0.5, 0.99)) == (3, 5, 9)


def test_out_of_range_is_clamped_and_flagged():
    a = GridArchive()
    a.record((1.2, -0.1, 0.5))
    assert a.out_of_range == 1
    assert a.counts[9, 0, 5] == 1


def test_record_counts():
    a = GridArchive()
    a.record((0, 0, 0))
    assert a.counts[0, 0, 0] == 1 and a.total_recorded == 1
    a.record((0, 0, 0))
    assert a.counts[0, 0, 0] == 2


def test_record_conservation():
    a = GridArchive()
    a.record_many(np.random.default_rng(0).random((1500, 3)))
    assert a.counts.sum() == a.total_recorded == 1500


def test_novelty_score():
    a = GridArchive()
    m = (0.42, 0.13, 0.77)
    assert a.novelty_score(m) == 0
    a.record(m)
    assert a.novelty_score(m) == 0.001
    for _ in range(4):
        a.record(m)
    assert a.novelty_score(m) == 0.005


def test_coverage():
    a = GridArchive()
    assert a.coverage() == (0, 0.0)
    for _ in range(1500):
        a.record((0.5, 0.5, 0.5))
    assert a.coverage() == (1, 0.001)


def test_coverage_rate_634_cells():
    a = GridArchive()
    cells = np.argwhere(np.ones((10, 10, 10)))[:634]
    a.record_many((cells + 0.5) / 10)
    occupied, rate = a.coverage()
    assert occupied == 634 and rate == pytest.approx(0.634)


def test_decimal_boundaries_open_their_bin():
    a = GridArchive()
    assert a.cell_index((0.6, 0.3, 0.7)) == (6, 3, 7)


def test_custom_bounds():
    a = GridArchive(4, bounds=[(0, 2), (-1, 1), (0, 1)])
    assert a.cell_index((1.0, 0.0, 0.25)) == (2, 2, 1)


def test_flat_round_trip():
    a = GridArchive()
    a.record_many(np.random.default_rng(2).random((300, 3)))
    flat = a.to_flat()
    assert len(flat) == 1000
    b = GridArchive.from_flat(flat)
    assert np.array_equal(a.counts, b.counts)
    # row-major (eta_m, eta_p, eta_e)
    a2 = GridArchive()
    a2.record((0.15, 0.25, 0.35))
    assert a2.to_flat().index(1) == 1 * 100 + 2 * 10 + 3


def test_marginals_and_projections():
    a = GridArchive()
    a.record((0.05, 0.05, 0.05))
    a.record((0.05, 0.95, 0.05))
    assert a.marginal_occupancy() == {"magnitude": 1, "phase": 2, "entanglement": 1}
    assert a.projections()["magnitude_phase"].sum() == 2


def test_brute_force_interval_oracle():
    rng = np.random.default_rng(123)
    m = rng.random((100_000, 3))
    m[:50] = rng.integers(0, 11, (50, 3)) / 10
    a = GridArchive()
    idx = a.cell_indices(m)
    expected = [[interval_index(float(v), 0.0, 1.0, 10) for v in row] for row in m]
    assert np.array_equal(idx, np.array(expected))


@given(st.lists(triples, min_size=1, max_size=60))
def test_coverage_monotone_and_novelty_consistent(seq):
    a = GridArchive()
    prev = 0
    for m in seq:
        a.record(m)
        occ = a.coverage()[0]
        assert occ >= prev
        prev = occ
        eta = a.cell_index(m)
        assert a.novelty_score(m) * a.n_cells == a.counts[eta]
