from dataclasses import dataclass

import numpy as np

from ddq_helper.engine import log_event, write_cells
from ddq_helper.errors import ConfigError, GeometryError, PlacementError
from ddq_helper.lattice import (DIRECTION_XY, DIRECTIONS, CellCoord, CellState, Fragment, HexGrid,
                                Region, axial_to_xy, hex_distance, offset_to_axial,
                                row_major_key, step, translate)


INPUT_RADIUS = 3
INPUT_CHARGED = 35
INPUT_S3_FRACTION = 0.3
SEPARATION_RANGE = (6, 15)

# reference tissue populations: N -> initial ring S1 and S1 written per scan
TISSUE_S1 = {286: 149, 456: 196, 627: 222}
TISSUE_INTERVENTIONS = {286: 5, 456: 8, 627: 11}
ENCODING_RATE = 1.75e-2  # per minute


# --- writes -----------------------------------------------------------------

def write_pattern(state, fragment, anchor=None):
    """Write the non-'.' cells of fragment at anchor; last write wins"""
    placed_fragment = fragment if anchor is None else fragment.at(anchor)
    placed = placed_fragment.placed()
    for coord in sorted(placed, key=row_major_key):
        if not state.grid.in_bounds(coord):
            raise PlacementError('Fragment cell {} lands outside the {}x{} grid (anchor {})'.format(
                tuple(coord), state.grid.width, state.grid.height,
                tuple(placed_fragment.anchor)))
    state = write_cells(state, placed, placed_fragment.placed_parts())
    log_event(state, 'write', cells=len(placed), charge=placed_fragment.charge(),
              anchor=list(placed_fragment.anchor))
    return state


def hex_disc(center, radius):
    c = CellCoord(*center)
    return [CellCoord(c.q + dq, c.r + dr)
            for dr in range(-radius, radius + 1)
            for dq in range(max(-radius, -dr - radius), min(radius, -dr + radius) + 1)]


def grid_center(grid):
    return CellCoord(*offset_to_axial(grid.width // 2, grid.height // 2))


# --- AND gate ---------------------------------------------------------------

@dataclass
class GateGeometry:
    a_center: CellCoord
    b_center: CellCoord
    midpoint: CellCoord
    separation: int
    a_present: bool
    b_present: bool
    a_charge: int = 0
    b_charge: int = 0
    radius: int = INPUT_RADIUS

    def to_dict(self):
        return dict(a_center=list(self.a_center), b_center=list(self.b_center),
                    midpoint=list(self.midpoint), separation=self.separation,
                    a_present=self.a_present, b_present=self.b_present,
                    a_charge=self.a_charge, b_charge=self.b_charge, radius=self.radius)


def _input_disc(center, rng):
    """Radius-3 disc of 35 charged cells (S1/S3 mix) and 2 S0 holes"""
    cells = hex_disc(center, INPUT_RADIUS)
    holes = set(rng.choice(len(cells), len(cells) - INPUT_CHARGED, replace=False).tolist())
    heavy = rng.random(len(cells)) < INPUT_S3_FRACTION
    return {c: (CellState.S0 if i in holes else CellState.S3 if heavy[i] else CellState.S1)
            for i, c in enumerate(cells)}


def make_and_inputs(a, b, separation=10, seed=0, grid=None):
    """Inputs of the AND gate: a charged disc for every set bit.

    separation counts the free cells between the two discs along the line of
    their centers, which is tilted 30 degrees so that flat disc faces meet.
    Returns (fragment, geometry).
    """
    if not SEPARATION_RANGE[0] <= separation <= SEPARATION_RANGE[1]:
        raise GeometryError('Input separation {} outside [{}, {}] cells'.format(
            separation, *SEPARATION_RANGE))
    grid = grid or HexGrid()
    distance = separation + 2 * INPUT_RADIUS
    offset = CellCoord((distance + 1) // 2, distance // 2)
    mid = grid_center(grid)
    a_center = CellCoord(mid.q - offset.q // 2, mid.r - offset.r // 2)
    b_center = translate(a_center, offset)
    midpoint = CellCoord(a_center.q + offset.q // 2, a_center.r + offset.r // 2)
    for c in hex_disc(a_center, INPUT_RADIUS) + hex_disc(b_center, INPUT_RADIUS):
        if not grid.in_bounds(c):
            raise GeometryError('Gate inputs at separation {} do not fit a {}x{} grid'.format(
                separation, grid.width, grid.height))

    rng = np.random.default_rng(seed)
    a_cells, b_cells = _input_disc(a_center, rng), _input_disc(b_center, rng)
    cells, parts = {}, []
    for present, disc in ((a, a_cells), (b, b_cells)):
        if present:
            cells.update(disc)
            parts.append(frozenset(disc))
    fragment = Fragment(cells, parts=parts)
    geometry = GateGeometry(a_center, b_center, midpoint, separation, bool(a), bool(b),
                            Fragment(a_cells).charge() if a else 0,
                            Fragment(b_cells).charge() if b else 0)
    return fragment, geometry


# --- tissue rings (cancer protocol) -----------------------------------------

@dataclass
class TissueSpec:
    center: CellCoord
    inner_radius: float
    cg: Region
    n_target: int
    s1_count: int
    inner: tuple
    outer: tuple
    spacing: float

    @property
    def n(self):
        return len(self.cg)

    @property
    def separation_nm(self):
        """Radial gap between the inner ring and the inside of the outer ring"""
        c = np.array(axial_to_xy(*self.center))
        inner = max(np.linalg.norm(np.array(axial_to_xy(*p)) - c) for p in self.inner)
        outer = min(np.linalg.norm(np.array(axial_to_xy(*p)) - c) for p in self.outer)
        return float(outer - inner) * self.spacing

    def to_dict(self):
        return dict(center=list(self.center), inner_radius=self.inner_radius, n=self.n,
                    n_target=self.n_target, s1_count=self.s1_count, inner=len(self.inner),
                    outer=len(self.outer), separation_nm=round(self.separation_nm, 4))


def default_ring_s1(n_target):
    return TISSUE_S1.get(n_target, int(round(0.4 * n_target)))


def make_tissue_rings(n_target, s1_count=None, inner_radius=4., grid=None):
    """Two concentric S1 rings bounding the tissue CG of exactly n_target cells.

    CG is the n_target cells nearest the grid center; the inner ring is fixed
    by inner_radius and the outer ring takes CG's outermost cells until the
    rings hold s1_count S1 in total. Returns (spec, fragment).
    """
    grid = grid or HexGrid()
    s1_count = default_ring_s1(n_target) if s1_count is None else int(s1_count)
    if not 0 < n_target <= grid.width * grid.height:
        raise GeometryError('Tissue population {} not reachable on a {}x{} grid'.format(
            n_target, grid.width, grid.height))
    center = grid_center(grid)
    c = grid.position(center) / grid.spacing
    coords = grid.coords()
    dist = {p: float(np.linalg.norm(grid.position(p) / grid.spacing - c)) for p in coords}
    ordered = sorted(coords, key=lambda p: (round(dist[p], 9), row_major_key(p)))
    cg_cells = ordered[:n_target]

    inner = tuple(p for p in ordered if abs(dist[p] - inner_radius) < 0.5)
    cg_set = set(cg_cells)
    if not inner or not set(inner) <= cg_set:
        raise GeometryError('Inner ring of radius {} does not fit inside a CG of {} cells'.format(
            inner_radius, n_target))
    n_outer = s1_count - len(inner)
    outer = tuple(sorted(cg_cells[len(cg_cells) - n_outer:], key=row_major_key)) if n_outer > 0 else ()
    if n_outer <= 0 or min(dist[p] for p in outer) < inner_radius + 1.5:
        raise GeometryError('N={} with {} ring S1 leaves no gap between the rings'.format(
            n_target, s1_count))

    spec = TissueSpec(center, float(inner_radius), Region(grid, cg_cells), n_target, s1_count,
                      tuple(sorted(inner, key=row_major_key)), outer, grid.spacing)
    cells = {p: CellState.S1 for p in inner + outer}
    return spec, Fragment(cells, parts=[frozenset(inner), frozenset(outer)])


def interventions_per_scan(n, rate=ENCODING_RATE, scan_period=40):
    """S1 written per scan; the reference counts win over the rate bookkeeping"""
    if n in TISSUE_INTERVENTIONS:
        return TISSUE_INTERVENTIONS[n]
    return max(1, int(round(rate * n * scan_period / 60.)))


# --- interventions ----------------------------------------------------------

INTERVENTION_KINDS = ('add_s1', 'delete_s2', 'write_fragment')


@dataclass
class Intervention:
    kind: str
    count: int = 0
    region: Region = None
    fragment: Fragment = None
    scan: int = None

    def __post_init__(self):
        if self.kind not in INTERVENTION_KINDS:
            raise ConfigError('Invalid intervention: {}'.format(self.kind))
        if self.count < 0:
            raise ConfigError('Intervention count must be >= 0, got {}'.format(self.count))
        if self.kind == 'write_fragment' and self.fragment is None:
            raise ConfigError('write_fragment needs a fragment')


def intervention_apply(state, iv, rng=None):
    """add_s1 flips k random S0 cells of the region to S1, delete_s2 resets
    every S2 of the region to S0; S3 cells are never touched."""
    rng = state.rng if rng is None else rng
    if iv.kind == 'write_fragment':
        return write_pattern(state, iv.fragment)
    region = iv.region if iv.region is not None else Region.full(state.grid)
    if iv.kind == 'add_s1':
        free = [c for c in region.coords if state.grid[c] == CellState.S0]
        k = min(iv.count, len(free))
        chosen = sorted((free[i] for i in rng.choice(len(free), k, replace=False)),
                        key=row_major_key) if k else []
        state = write_cells(state, {c: CellState.S1 for c in chosen},
                            [frozenset([c]) for c in chosen])
        warning = None
        if k < iv.count:
            warning = 'only {} of {} requested S0 cells available'.format(k, iv.count)
        log_event(state, 'add_s1', warning=warning, requested=iv.count, written=k)
    else:
        s2 = [c for c in region.coords if state.grid[c] == CellState.S2]
        state = write_cells(state, {c: CellState.S0 for c in s2})
        log_event(state, 'delete_s2', deleted=len(s2))
    return state


# --- packets and diffusion seeds --------------------------------------------

def _contacts(a, b):
    return sum(1 for c in a for d in DIRECTIONS if translate(c, d) in b)


def _contact_placement(base, moving, offsets):
    """First offset putting moving next to base with no overlap and exactly one adjacency"""
    base = set(base)
    for off in offsets:
        placed = {translate(c, off) for c in moving}
        if placed & base:
            continue
        if _contacts(placed, base) == 1:
            return off
    return None


def _offsets(reach):
    return [CellCoord(dq, dr) for dr in range(-reach, reach + 1) for dq in range(-reach, reach + 1)
            if 0 < hex_distance((0, 0), (dq, dr)) <= reach]


def make_packet(shape, mode='mirror', direction=0):
    """Directed-propagation packet built around shape.

    gradient: an all-S3 copy of shape placed behind it (against direction)
    with a single contact, so the head is pushed forward.
    mirror: the reflection of shape (x -> -x) placed with a single contact.
    Both return a two-part fragment in shape's frame.
    """
    if len(shape) == 0:
        raise GeometryError('Packet shape is empty')
    head = dict(shape.cells)
    reach = 2 * len(head) + 2
    if mode == 'gradient':
        if all(s == CellState.S3 for s in head.values()):
            raise GeometryError('Head is already all S3; no denser tail exists')
        back = -DIRECTION_XY[direction]

        def deviation(off):
            v = np.array(axial_to_xy(*off))
            return round(float(np.arccos(np.clip(v @ back / np.linalg.norm(v), -1., 1.))), 6)

        offsets = sorted((o for o in _offsets(reach)
                          if np.array(axial_to_xy(*o)) @ back > 0),
                         key=lambda o: (deviation(o), hex_distance((0, 0), o), row_major_key(o)))
        extra = {c: CellState.S3 for c in head}
    elif mode == 'mirror':
        extra = {CellCoord(-c.q - c.r, c.r): s for c, s in head.items()}
        # prefer a copy on the same rows so the pair separates along them
        offsets = sorted(_offsets(reach),
                         key=lambda o: (abs(o.r), hex_distance((0, 0), o), row_major_key(o)))
    else:
        raise ConfigError('Invalid packet mode: {}'.format(mode))
    off = _contact_placement(head, extra, offsets)
    if off is None:
        raise GeometryError('No single-contact placement for the {} copy of a {}-cell shape'.format(
            mode, len(head)))
    tail = {translate(c, off): s for c, s in extra.items()}
    cells = dict(head)
    cells.update(tail)
    return Fragment(cells, shape.anchor, parts=[frozenset(head), frozenset(tail)])


def make_alternating_lines(n_lines, length, start, gap=2, direction=0):
    """Straight lines of alternating S3/S1, each its own group; lines are
    stacked every `gap` rows below start."""
    if n_lines < 1 or length < 1 or gap < 2:
        raise GeometryError('Need n_lines >= 1, length >= 1, gap >= 2; got {}, {}, {}'.format(
            n_lines, length, gap))
    start = CellCoord(*start)
    cells, parts = {}, []
    for i in range(n_lines):
        origin = CellCoord(start.q - (i * gap) // 2, start.r + i * gap)
        line = [step(origin, direction, k) for k in range(length)]
        for k, c in enumerate(line):
            cells[c] = CellState.S3 if k % 2 == 0 else CellState.S1
        parts.append(frozenset(line))
    return Fragment(cells, parts=parts)

