from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.optimize import curve_fit
from scipy.stats import linregress

from ddq_helper.circuits import (DEFAULT_TABLE, segment_domains, voronoi_check,
                                 voronoi_generators, domain_charge)
from ddq_helper.errors import FitError, GeometryError, InsufficientDataError
from ddq_helper.lattice import (CHARGE, SQRT3, CellCoord, CellState, Region, charge_density,
                                excess_charge, hex_disc_kernel, step)


SCAN_MINUTES = 40. / 60.
DENSITY_THRESHOLD = 0.5   # e/nm^2, a logical 1
RETENTION_LIMIT = 0.5
UC_FACTOR = 1.3           # non-overlapped area of two unit cells, in units of A


# --- unit cells and flux ----------------------------------------------------

@dataclass(frozen=True)
class UnitCell:
    center: CellCoord
    members: tuple
    area: float  # nm^2
    z: int


def unit_cell_area(spacing):
    """Hexagon enclosed by a 7-molecule flower"""
    return 3. * SQRT3 / 2. * spacing ** 2


def unit_cell_tiling(grid, start, n=10, direction=0):
    """n overlapping flowers centered on consecutive cells along a straight line"""
    if n < 2:
        raise GeometryError('A unit-cell line needs at least 2 cells, got {}'.format(n))
    area = unit_cell_area(grid.spacing)
    cells = []
    for z in range(n):
        center = step(start, direction, z)
        members = (center,) + tuple(step(center, d) for d in range(6))
        for m in members:
            if not grid.in_bounds(m):
                raise GeometryError('Unit cell Z={} at {} leaves the grid'.format(z, tuple(center)))
        cells.append(UnitCell(center, members, area, z))
    return cells


def flux_field(grid, cells):
    """phi per unit cell, excess electrons per nm^2 of the enclosed hexagon"""
    charge = grid.charge_map()
    return np.array([sum(int(charge[grid.index(m)]) for m in c.members) / c.area
                     for c in cells], dtype=np.float64)


def flux_history(grids, cells):
    """(frames, cells) array of phi"""
    return np.stack([flux_field(g, cells) for g in grids])


# --- diffusion --------------------------------------------------------------

@dataclass
class DiffusionFit:
    D: float
    r2: float
    intercept: float
    curvature: np.ndarray
    rate: np.ndarray

    def to_dict(self):
        return dict(D=self.D, r2=self.r2, intercept=self.intercept, samples=len(self.rate))


def diffusion_samples(phi, uc, dt=SCAN_MINUTES):
    """(curvature, rate) points for every interior cell and frame pair.

    The gradient between neighbouring cells is their phi difference over UC
    and the curvature is the plain difference of the two flanking gradients,
    both taken on the earlier frame; rate is the change of phi over dt (min).
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 2 or phi.shape[0] < 2 or phi.shape[1] < 3:
        raise InsufficientDataError('Need >= 2 frames over >= 3 unit cells, got shape {}'.format(
            phi.shape))
    gradient = np.diff(phi[:-1], axis=1) / uc
    curvature = np.diff(gradient, axis=1)
    rate = (phi[1:, 1:-1] - phi[:-1, 1:-1]) / dt
    return curvature.ravel(), rate.ravel()


def fit_diffusion(curvature, rate):
    curvature = np.asarray(curvature, dtype=np.float64)
    rate = np.asarray(rate, dtype=np.float64)
    if len(rate) < 3:
        raise InsufficientDataError('Diffusion fit needs >= 3 samples, got {}'.format(len(rate)))
    if np.ptp(curvature) == 0:
        return DiffusionFit(0., 0., float(rate.mean()), curvature, rate)
    res = linregress(curvature, rate)
    return DiffusionFit(float(res.slope), float(res.rvalue ** 2), float(res.intercept),
                        curvature, rate)


def diffusion_fit(trajectory, cells):
    phi = flux_history(trajectory.grids, cells)
    return fit_diffusion(*diffusion_samples(phi, UC_FACTOR * cells[0].area))


# --- flux profile -----------------------------------------------------------

@dataclass
class FluxProfileFit:
    a: float
    z0: float
    b: float
    residual: float
    saturation_time: float = None  # seconds

    def to_dict(self):
        return dict(self.__dict__)


def smooth_profile(phi):
    """(1, 2, 1)/4 weighted average at interior Z; returns (z, smoothed)"""
    phi = np.asarray(phi, dtype=np.float64)
    smoothed = np.correlate(phi, np.array([1., 2., 1.]) / 4., mode='valid')
    return np.arange(1, len(phi) - 1), smoothed


def flux_model(x, a, z0, b):
    z, t = x
    return a / np.sqrt(t) * np.exp(-(z - z0) ** 2 / (b * t))


def fit_flux_profile(z, t, phi):
    """Least-squares fit of phi(z, t) = a/sqrt(t) exp(-(z - z0)^2 / (b t)), t in minutes"""
    z, t, phi = (np.asarray(v, dtype=np.float64).ravel() for v in (z, t, phi))
    if len(phi) < 3 or not np.any(phi > 0):
        raise FitError('Flux profile is degenerate (all zero or fewer than 3 points)')
    w = np.clip(phi, 0., None)
    p0 = (float(np.median((phi * np.sqrt(t))[phi > 0])), float((z * w).sum() / w.sum()), 1.)
    try:
        popt, _ = curve_fit(flux_model, (z, t), phi, p0=p0, method='lm', maxfev=20000)
    except RuntimeError as e:
        raise FitError('Flux profile fit did not converge: {}'.format(e))
    residual = float(np.sqrt(np.mean((flux_model((z, t), *popt) - phi) ** 2)))
    a, z0, b = (float(v) for v in popt)
    return FluxProfileFit(a, z0, b, residual)


def saturation_time(profiles, times, tolerance=0.05):
    """First time (s) at which the profile moved by less than tolerance * its peak"""
    for k in range(1, len(profiles)):
        change = np.max(np.abs(profiles[k] - profiles[k - 1]))
        if change < tolerance * np.max(np.abs(profiles[k])):
            return float(times[k])
    return None


def fit_flux_history(phi, times):
    """Flux profile fit of a (frames, cells) phi history sampled at times (s), t = 0 first"""
    phi = np.asarray(phi, dtype=np.float64)
    if len(phi) < 3:
        raise InsufficientDataError('Flux profile fit needs >= 3 snapshots, got {}'.format(
            len(phi)))
    smoothed = np.stack([smooth_profile(p)[1] for p in phi])
    z = smooth_profile(phi[0])[0]
    times = np.asarray(times, dtype=np.float64)
    t_min = times[1:] / 60.
    zz, tt = np.meshgrid(z, t_min)
    fit = fit_flux_profile(zz, tt, smoothed[1:])
    fit.saturation_time = saturation_time(smoothed, times)
    return fit


def flux_profile_fit(trajectory, cells):
    return fit_flux_history(flux_history(trajectory.grids, cells), trajectory.times)


# --- cancer bookkeeping -----------------------------------------------------

def n3_series(grids, cg):
    """Cumulative count of cells inside cg turning S3 between consecutive frames"""
    if len(grids) < 2:
        raise InsufficientDataError('N3 needs >= 2 snapshots, got {}'.format(len(grids)))
    new = [int(((later.states == CellState.S3) & (earlier.states != CellState.S3))[cg.mask].sum())
           for earlier, later in zip(grids[:-1], grids[1:])]
    return np.cumsum(new)


# --- AND gate ---------------------------------------------------------------

@dataclass
class GateReadout:
    bit: int
    midpoint_density: float
    retained_a: float = None
    retained_b: float = None
    collapsed_a: bool = None
    collapsed_b: bool = None

    def to_dict(self):
        return dict(self.__dict__)


def flower_densities(grid):
    """(height, width) charge density of each full radius-1 flower, nan where clipped"""
    kernel = hex_disc_kernel(1)
    charge = ndimage.correlate(grid.to_axial(grid.charge_map()), kernel, mode='constant', cval=0)
    inside = ndimage.correlate(grid.to_axial(np.ones(grid.shape, dtype=np.int64)), kernel,
                               mode='constant', cval=0)
    charge, inside = grid.from_axial(charge), grid.from_axial(inside)
    density = charge / (7 * grid.site_area)
    return np.where(inside == 7, density, np.nan)


def gate_readout(final, geometry):
    """1 iff the midpoint disc holds a new composition and every input moved out"""
    mid = Region.disc(final, geometry.midpoint, geometry.radius)
    density = charge_density(final, mid)
    flowers = flower_densities(final)
    readout = GateReadout(0, float(density))
    moved = True
    for name, center, present, q0 in (('a', geometry.a_center, geometry.a_present, geometry.a_charge),
                                      ('b', geometry.b_center, geometry.b_present, geometry.b_charge)):
        if not present:
            continue
        disc = Region.disc(final, center, geometry.radius)
        retained = excess_charge(final, disc) / q0 if q0 else 0.
        local = flowers[disc.mask]
        collapsed = bool(np.any(local[~np.isnan(local)] > DENSITY_THRESHOLD))
        setattr(readout, 'retained_' + name, float(retained))
        setattr(readout, 'collapsed_' + name, collapsed)
        moved = moved and retained < RETENTION_LIMIT
    any_input = geometry.a_present or geometry.b_present
    readout.bit = int(any_input and density > DENSITY_THRESHOLD and moved)
    return readout


# --- periodicity ------------------------------------------------------------

def periodicity(grids, region):
    """Smallest p whose last two blocks of p frames agree on region, or None"""
    if len(grids) < 4:
        raise InsufficientDataError('Periodicity needs >= 4 snapshots, got {}'.format(len(grids)))
    seq = [g.states[region.mask] for g in grids]
    n = len(seq)
    for p in range(1, n // 2 + 1):
        if all(np.array_equal(seq[k], seq[k + p]) for k in range(n - 2 * p, n - p)):
            return p
    return None


# --- circuit reports --------------------------------------------------------

def classification_report(grid, table=DEFAULT_TABLE):
    circuit_map = segment_domains(grid, table)
    summary = circuit_map.summary()
    for entry, q in zip(summary, domain_charge(circuit_map)):
        entry['charge'] = q
    return dict(domains=len(circuit_map), circuits=sorted({d.circuit.id for d in circuit_map.domains}),
                detail=summary)


def voronoi_report(grid, table=DEFAULT_TABLE):
    circuit_map = segment_domains(grid, table)
    points = voronoi_generators(circuit_map)
    report = voronoi_check(circuit_map, points).to_dict()
    report['domains'] = len(circuit_map)
    report['generators'] = [dict(domain=p.domain, position=list(p.position)) for p in points]
    return report


def window_charge(grid, region):
    """Q and density of a region, for density-classification probes"""
    return dict(charge=excess_charge(grid, region), density=float(charge_density(grid, region)),
                cells=len(region))


def charge_total(grid):
    return int(CHARGE[grid.states].sum())
