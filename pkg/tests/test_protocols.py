import pytest

from ddq_helper.engine import SimConfig, new_state
from ddq_helper.errors import ConfigError, GeometryError, PlacementError
from ddq_helper.lattice import (DIRECTIONS, CellCoord, CellState, HexGrid, Region, axial_to_xy,
                                hex_distance, parse_fragment, translate)
from ddq_helper.protocols import (INPUT_CHARGED, Intervention, intervention_apply,
                                  interventions_per_scan, make_alternating_lines, make_and_inputs,
                                  make_packet, make_tissue_rings, write_pattern)


def contacts(a, b):
    return sum(1 for c in a for d in DIRECTIONS if translate(c, d) in b)


def test_write_pattern_and_placement_error():
    state = new_state(SimConfig())
    state = write_pattern(state, parse_fragment('13'), CellCoord(3, 3))
    assert state.grid[CellCoord(3, 3)] == CellState.S1
    assert state.grid[CellCoord(4, 3)] == CellState.S3
    assert state.log[-1]['kind'] == 'write'
    with pytest.raises(PlacementError):
        write_pattern(state, parse_fragment('1'), CellCoord(-40, 0))


def test_and_inputs_geometry():
    fragment, geometry = make_and_inputs(1, 1, separation=10)
    assert hex_distance(geometry.a_center, geometry.b_center) == 16
    assert sum(1 for s in fragment.cells.values() if s.charged) == 2 * INPUT_CHARGED
    assert len(fragment.parts) == 2
    assert geometry.a_charge + geometry.b_charge == fragment.charge()

    fragment, geometry = make_and_inputs(1, 0, separation=10)
    assert sum(1 for s in fragment.cells.values() if s.charged) == INPUT_CHARGED
    assert geometry.a_present and not geometry.b_present and geometry.b_charge == 0

    fragment, geometry = make_and_inputs(0, 0)
    assert len(fragment) == 0


def test_and_inputs_separation_range():
    with pytest.raises(GeometryError):
        make_and_inputs(1, 1, separation=5)
    with pytest.raises(GeometryError):
        make_and_inputs(1, 1, separation=15, grid=HexGrid(12, 12))


def test_tissue_rings():
    spec, fragment = make_tissue_rings(286)
    assert spec.n == 286
    assert len(fragment) == spec.s1_count == 149
    assert fragment.charge() == 149
    assert set(spec.inner) | set(spec.outer) <= set(spec.cg.coords)
    assert spec.separation_nm > 0
    with pytest.raises(GeometryError):
        make_tissue_rings(100, s1_count=99)


def test_interventions_per_scan():
    assert [interventions_per_scan(n) for n in (286, 456, 627)] == [5, 8, 11]
    assert interventions_per_scan(400) >= 1


def test_add_s1_and_delete_s2():
    state = new_state(SimConfig(seed=3))
    region = Region.disc(state.grid, CellCoord(5, 10), 2)
    state = intervention_apply(state, Intervention('add_s1', 4, region))
    assert (state.grid.states == CellState.S1).sum() == 4
    assert all(c in region for c in state.grid.coords_where(state.grid.states == CellState.S1))

    grid = state.grid
    grid[CellCoord(1, 1)] = CellState.S2
    grid[CellCoord(2, 1)] = CellState.S3
    state = intervention_apply(state, Intervention('delete_s2'))
    assert not (state.grid.states == CellState.S2).any()
    assert state.grid[CellCoord(2, 1)] == CellState.S3


def test_add_s1_partial_is_logged():
    state = new_state(SimConfig())
    region = Region(state.grid, [CellCoord(3, 3)])
    state = intervention_apply(state, Intervention('add_s1', 3, region))
    entry = state.log[-1]
    assert entry['written'] == 1 and 'warning' in entry


def test_intervention_validation():
    with pytest.raises(ConfigError):
        Intervention('zap')
    with pytest.raises(ConfigError):
        Intervention('add_s1', -1)


def test_mirror_packet_single_contact():
    fragment = make_packet(parse_fragment('13\n31'), mode='mirror')
    head, tail = fragment.parts
    assert len(head) == len(tail) == 4
    assert not head & tail
    assert contacts(head, tail) == 1
    assert fragment.charge() == 12


def test_gradient_packet_tail_behind():
    fragment = make_packet(parse_fragment('11'), mode='gradient', direction=0)
    head, tail = fragment.parts
    assert all(fragment.cells[c] == CellState.S3 for c in tail)
    assert contacts(head, tail) == 1
    head_x = sum(axial_to_xy(*c)[0] for c in head) / len(head)
    tail_x = sum(axial_to_xy(*c)[0] for c in tail) / len(tail)
    assert tail_x < head_x
    with pytest.raises(GeometryError):
        make_packet(parse_fragment('33'), mode='gradient')


def test_alternating_lines():
    fragment = make_alternating_lines(3, 4, (-1, 11))
    assert len(fragment) == 12 and len(fragment.parts) == 3
    assert fragment.charge() == 3 * (2 + 1 + 2 + 1)
    with pytest.raises(GeometryError):
        make_alternating_lines(2, 4, (0, 0), gap=1)
