import numpy as np
import pytest

from ddq_helper.analysis import (DENSITY_THRESHOLD, UC_FACTOR, classification_report,
                                 diffusion_samples, fit_diffusion, fit_flux_profile, flux_field,
                                 flux_model, gate_readout, n3_series, periodicity, saturation_time,
                                 smooth_profile, unit_cell_area, unit_cell_tiling, window_charge)
from ddq_helper.engine import SimConfig, new_state
from ddq_helper.errors import FitError, GeometryError, InsufficientDataError
from ddq_helper.lattice import CellCoord, CellState, HexGrid, Region
from ddq_helper.protocols import make_and_inputs, write_pattern


def test_unit_cell_tiling():
    grid = HexGrid()
    cells = unit_cell_tiling(grid, CellCoord(-6, 13))
    assert len(cells) == 10
    assert [c.z for c in cells] == list(range(10))
    assert cells[3].center == (-3, 13)
    assert len(cells[0].members) == 7
    assert cells[0].area == pytest.approx(3 * np.sqrt(3) / 2 * 0.98 ** 2)
    with pytest.raises(GeometryError):
        unit_cell_tiling(grid, CellCoord(-7, 13))
    with pytest.raises(GeometryError):
        unit_cell_tiling(grid, CellCoord(-6, 13), n=1)


def test_flux_field_overlapping_cells():
    grid = HexGrid()
    cells = unit_cell_tiling(grid, CellCoord(-6, 13))
    grid[CellCoord(-4, 13)] = CellState.S3
    phi = flux_field(grid, cells)
    area = unit_cell_area(grid.spacing)
    expected = np.zeros(10)
    expected[1:4] = 2 / area
    np.testing.assert_allclose(phi, expected)


def test_diffusion_recovers_coefficient():
    uc, dt, D = UC_FACTOR * unit_cell_area(0.98), 40 / 60, 2.0
    z = np.arange(10)
    phi = [np.exp(-(z - 4.5) ** 2 / 2.)]
    for _ in range(6):
        p = phi[-1]
        curvature = np.diff(np.diff(p) / uc)
        nxt = p.copy()
        nxt[1:-1] += D * dt * curvature
        phi.append(nxt)
    fit = fit_diffusion(*diffusion_samples(np.array(phi), uc, dt))
    assert fit.D == pytest.approx(D, rel=1e-9)
    assert fit.r2 == pytest.approx(1.)
    assert abs(fit.intercept) < 1e-9
    assert fit.to_dict()['samples'] == 6 * 8


def test_diffusion_needs_data():
    with pytest.raises(InsufficientDataError):
        diffusion_samples(np.zeros((1, 10)), 1.)
    with pytest.raises(InsufficientDataError):
        fit_diffusion([0., 1.], [0., 1.])
    assert fit_diffusion(np.zeros(5), np.ones(5)).D == 0.


def test_smooth_profile():
    z, smoothed = smooth_profile([0., 4., 0., 4.])
    assert z.tolist() == [1, 2]
    np.testing.assert_allclose(smoothed, [2., 2.])


def test_flux_profile_recovers_parameters():
    z, t = np.meshgrid(np.arange(10.), np.arange(1., 11.))
    phi = flux_model((z, t), 2., 4.5, 4.)
    fit = fit_flux_profile(z, t, phi)
    assert fit.a == pytest.approx(2., rel=1e-5)
    assert fit.z0 == pytest.approx(4.5, rel=1e-5)
    assert fit.b == pytest.approx(4., rel=1e-5)
    assert fit.residual < 1e-6
    with pytest.raises(FitError):
        fit_flux_profile(z, t, np.zeros_like(phi))


def test_saturation_time():
    profiles = np.array([[0., 0.], [1., 1.], [1.01, 1.]])
    assert saturation_time(profiles, [0, 40, 80]) == 80.
    assert saturation_time(profiles[:2], [0, 40]) is None


def test_n3_series_is_cumulative():
    grid = HexGrid(6, 6)
    g1, g2 = grid.copy(), grid.copy()
    g1[CellCoord(1, 1)] = g1[CellCoord(2, 1)] = CellState.S3
    g2.states[:] = g1.states
    g2[CellCoord(3, 1)] = CellState.S3
    series = n3_series([grid, g1, g2], Region.full(grid))
    assert series.tolist() == [2, 3]
    with pytest.raises(InsufficientDataError):
        n3_series([grid], Region.full(grid))


def test_gate_reads_one_when_charge_meets_at_midpoint():
    _, geometry = make_and_inputs(1, 1, separation=10)
    final = HexGrid()
    for c in Region.disc(final, geometry.midpoint, geometry.radius):
        final[c] = CellState.S3
    readout = gate_readout(final, geometry)
    assert readout.bit == 1
    assert readout.midpoint_density > DENSITY_THRESHOLD
    assert readout.retained_a == 0. and readout.retained_b == 0.
    assert not readout.collapsed_a


def test_gate_reads_zero_when_inputs_stay():
    fragment, geometry = make_and_inputs(1, 0, separation=10)
    state = write_pattern(new_state(SimConfig()), fragment)
    readout = gate_readout(state.grid, geometry)
    assert readout.bit == 0
    assert readout.retained_a == pytest.approx(1.)
    assert readout.collapsed_a
    assert readout.retained_b is None

    _, geometry = make_and_inputs(0, 0)
    assert gate_readout(HexGrid(), geometry).bit == 0


def test_periodicity():
    a = HexGrid(5, 5)
    b = a.copy()
    b[CellCoord(1, 1)] = CellState.S1
    region = Region.full(a)
    assert periodicity([a, b] * 3, region) == 2
    assert periodicity([a] * 5, region) == 1
    rng = np.random.default_rng(0)
    distinct = [HexGrid(5, 5, states=rng.integers(0, 4, (5, 5))) for _ in range(6)]
    assert periodicity(distinct, region) is None
    with pytest.raises(InsufficientDataError):
        periodicity([a, b, a], region)


def test_reports_on_empty_grid():
    report = classification_report(HexGrid())
    assert report['domains'] == 1
    assert report['circuits'] == [7]
    grid = HexGrid()
    grid[CellCoord(5, 13)] = CellState.S1
    probe = window_charge(grid, Region.disc(grid, CellCoord(5, 13), 1))
    assert probe['charge'] == 1 and probe['cells'] == 7
