import math
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from ddq_helper.errors import (ConfigError, CoordinateError, DegenerateRegionError,
                               PatternParseError)


SQRT3 = math.sqrt(3.)
SPACING_RANGE = (0.93, 1.03)


class CellState(IntEnum):
    S0 = 0
    S1 = 1
    S2 = 2
    S3 = 3

    @property
    def charge(self):
        return int(CHARGE[self])

    @property
    def charged(self):
        return bool(CHARGED[self])


# excess electrons per state, indexed by CellState value
CHARGE = np.array([0, 1, 0, 2], dtype=np.int64)
CHARGED = np.array([False, True, False, True])


class CellCoord(NamedTuple):
    q: int
    r: int


# Fixed enumeration order E, NE, NW, W, SW, SE; every tie-break in the package uses it
DIRECTIONS = (CellCoord(1, 0), CellCoord(1, -1), CellCoord(0, -1),
              CellCoord(-1, 0), CellCoord(-1, 1), CellCoord(0, 1))
DIRECTION_NAMES = ('E', 'NE', 'NW', 'W', 'SW', 'SE')


def step(coord, direction, n=1):
    d = DIRECTIONS[direction]
    return CellCoord(coord[0] + n * d.q, coord[1] + n * d.r)


def translate(coord, by):
    return CellCoord(coord[0] + by[0], coord[1] + by[1])


def hex_distance(a, b):
    dq = a[0] - b[0]
    dr = a[1] - b[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def axial_to_xy(q, r):
    """Cartesian position in lattice units (multiply by spacing for nm).
    Works on scalars and numpy arrays."""
    return q + r / 2., SQRT3 / 2. * r


# unit steps in lattice units, same order as DIRECTIONS
DIRECTION_XY = np.array([axial_to_xy(d.q, d.r) for d in DIRECTIONS])


def offset_to_axial(col, row):
    # even-r layout: even rows are shoved right by half a cell
    return col - (row + (row & 1)) // 2, row


def axial_to_offset(q, r):
    return q + (r + (r & 1)) // 2, r


def row_major_key(coord):
    return (coord[1], coord[0])


class HexGrid(object):
    """Bounded hexagonal lattice of 4-state cells.

    States are stored row-major in a (height, width) uint8 array using the
    even-r offset layout; addressing is axial (q, r).
    """

    def __init__(self, width=24, height=27, spacing=0.98, states=None):
        if not SPACING_RANGE[0] - 1e-9 <= spacing <= SPACING_RANGE[1] + 1e-9:
            raise ConfigError('Lattice spacing {} nm outside [{}, {}]'.format(
                spacing, *SPACING_RANGE))
        if width < 1 or height < 1:
            raise ConfigError('Invalid grid size: {}x{}'.format(width, height))
        self.width = int(width)
        self.height = int(height)
        self.spacing = float(spacing)
        if states is None:
            self.states = np.zeros((self.height, self.width), dtype=np.uint8)
        else:
            states = np.asarray(states, dtype=np.uint8)
            assert states.shape == (self.height, self.width), states.shape
            assert states.max(initial=0) <= 3
            self.states = states.copy()
        self._xy = None

    @property
    def site_area(self):
        return SQRT3 / 2. * self.spacing ** 2

    @property
    def shape(self):
        return self.states.shape

    def in_bounds(self, coord):
        col, row = axial_to_offset(coord[0], coord[1])
        return 0 <= row < self.height and 0 <= col < self.width

    def index(self, coord):
        if not self.in_bounds(coord):
            raise CoordinateError('Coordinate {} outside {}x{} grid'.format(
                tuple(coord), self.width, self.height))
        col, row = axial_to_offset(coord[0], coord[1])
        return row, col

    def coord_at(self, row, col):
        return CellCoord(*offset_to_axial(int(col), int(row)))

    def __getitem__(self, coord):
        return CellState(int(self.states[self.index(coord)]))

    def __setitem__(self, coord, state):
        self.states[self.index(coord)] = int(state)

    def coords(self):
        """All cells in (r, q) order."""
        return [self.coord_at(row, col)
                for row in range(self.height) for col in range(self.width)]

    def coords_where(self, mask):
        rows, cols = np.nonzero(mask)
        return [self.coord_at(row, col) for row, col in zip(rows, cols)]

    def xy(self):
        """(height, width, 2) array of cell positions in nm"""
        if self._xy is None:
            rows, cols = np.mgrid[0:self.height, 0:self.width]
            q, r = offset_to_axial(cols, rows)
            x, y = axial_to_xy(q, r)
            self._xy = np.stack((x, y), axis=-1) * self.spacing
        return self._xy

    def position(self, coord):
        return self.xy()[self.index(coord)]

    def charged_mask(self):
        return CHARGED[self.states]

    def charge_map(self):
        return CHARGE[self.states]

    def copy(self):
        return HexGrid(self.width, self.height, self.spacing, self.states)

    def same_shape(self, other):
        return (self.width, self.height) == (other.width, other.height)

    def __eq__(self, other):
        if not isinstance(other, HexGrid):
            return NotImplemented
        return (self.same_shape(other) and self.spacing == other.spacing
                and np.array_equal(self.states, other.states))

    def __repr__(self):
        return 'HexGrid({}x{}, spacing={:.3f}nm, Q={})'.format(
            self.width, self.height, self.spacing, int(self.charge_map().sum()))

    # Axial embedding: rows are r, columns are q shifted so the grid fits in a
    # rectangle. Hex 6-adjacency becomes a fixed 3x3 structure there, which is
    # what scipy.ndimage needs.

    @property
    def axial_shift(self):
        return self.height // 2

    @property
    def axial_shape(self):
        return self.height, self.width + self.axial_shift

    def _axial_index(self):
        rows, cols = np.mgrid[0:self.height, 0:self.width]
        q, _ = offset_to_axial(cols, rows)
        return rows, q + self.axial_shift

    def to_axial(self, arr, fill=0):
        arr = np.asarray(arr)
        out = np.full(self.axial_shape + arr.shape[2:], fill, dtype=arr.dtype)
        rows, qcols = self._axial_index()
        out[rows, qcols] = arr
        return out

    def from_axial(self, arr):
        rows, qcols = self._axial_index()
        return np.asarray(arr)[rows, qcols]


# 6-adjacency on the axial embedding, [dr + 1, dq + 1]
HEX_STRUCTURE = np.array([[0, 1, 1],
                          [1, 1, 1],
                          [1, 1, 0]], dtype=bool)


def hex_disc_kernel(radius):
    size = 2 * radius + 1
    kernel = np.zeros((size, size), dtype=np.int64)
    for dr in range(-radius, radius + 1):
        for dq in range(-radius, radius + 1):
            if max(abs(dq), abs(dr), abs(dq + dr)) <= radius:
                kernel[dr + radius, dq + radius] = 1
    return kernel


class Region(object):
    """A set of in-bounds cells of one grid, with its physical area."""

    def __init__(self, grid, coords):
        coords = {CellCoord(int(c[0]), int(c[1])) for c in coords}
        mask = np.zeros(grid.shape, dtype=bool)
        for c in coords:
            mask[grid.index(c)] = True
        self.coords = tuple(sorted(coords, key=row_major_key))
        self.mask = mask
        self.site_area = grid.site_area
        self._members = frozenset(coords)

    @classmethod
    def full(cls, grid):
        return cls(grid, grid.coords())

    @classmethod
    def from_mask(cls, grid, mask):
        mask = np.array(mask, dtype=bool)
        assert mask.shape == grid.shape, mask.shape
        rows, cols = np.nonzero(mask)
        q, r = offset_to_axial(cols, rows)
        region = cls.__new__(cls)
        region.coords = tuple(CellCoord(int(a), int(b)) for a, b in zip(q, r))
        region.mask = mask
        region.site_area = grid.site_area
        region._members = frozenset(region.coords)
        return region

    @classmethod
    def disc(cls, grid, center, radius):
        """Hex disc around center, clipped to the grid"""
        if not grid.in_bounds(center):
            raise CoordinateError('Disc center {} outside grid'.format(tuple(center)))
        cells = []
        for dq in range(-radius, radius + 1):
            for dr in range(max(-radius, -dq - radius), min(radius, -dq + radius) + 1):
                c = CellCoord(center[0] + dq, center[1] + dr)
                if grid.in_bounds(c):
                    cells.append(c)
        return cls(grid, cells)

    @property
    def area_nm2(self):
        return len(self.coords) * self.site_area

    def __len__(self):
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __contains__(self, coord):
        return CellCoord(*coord) in self._members

    def union(self, other, grid):
        return Region(grid, set(self.coords) | set(other.coords))

    def __repr__(self):
        return 'Region({} cells, {:.2f} nm^2)'.format(len(self), self.area_nm2)


def neighbors(coord, degree, grid):
    if not 2 <= degree <= 6:
        raise ConfigError('Neighborhood degree must be in [2, 6], got {}'.format(degree))
    grid.index(coord)
    out = []
    for d in range(6):
        n = step(coord, d)
        if grid.in_bounds(n):
            out.append(n)
            if len(out) == degree:
                break
    return out


def excess_charge(grid, region):
    return int(CHARGE[grid.states[region.mask]].sum())


def charge_density(grid, region):
    """Excess electrons per nm^2 over the region"""
    if len(region) == 0:
        raise DegenerateRegionError('Charge density of an empty region')
    return excess_charge(grid, region) / region.area_nm2


def histogram(grid, region):
    """Counts of S0..S3 inside region, indexed by state value"""
    return np.bincount(grid.states[region.mask], minlength=4)[:4]


# --- pattern text codec -----------------------------------------------------

SKIP_CHAR = '.'


def _pattern_rows(text, allow_skip):
    if text.endswith('\n'):
        text = text[:-1]
    if text == '':
        raise PatternParseError('Empty pattern', 0, 0)
    allowed = '0123' + (SKIP_CHAR if allow_skip else '')
    rows = text.split('\n')
    for i, line in enumerate(rows):
        if len(line) != len(rows[0]):
            raise PatternParseError('Ragged row of length {} (expected {})'.format(
                len(line), len(rows[0])), i, min(len(line), len(rows[0])))
        for j, ch in enumerate(line):
            if ch not in allowed:
                raise PatternParseError('Illegal character {!r}'.format(ch), i, j)
    return rows


def parse_grid(text, spacing=0.98):
    rows = _pattern_rows(text, allow_skip=False)
    states = np.array([[int(ch) for ch in line] for line in rows], dtype=np.uint8)
    return HexGrid(states.shape[1], states.shape[0], spacing, states)


def serialize_grid(grid):
    return '\n'.join(''.join(str(v) for v in row) for row in grid.states)


class Fragment(object):
    """A partial write: local axial offsets mapped to states, placed at an anchor.

    `parts` splits the cells into groups that must not be merged when written
    (e.g. a packet and its mirror image).
    """

    def __init__(self, cells=None, anchor=CellCoord(0, 0), parts=None, shape=None):
        self.cells = {CellCoord(*c): CellState(s) for c, s in (cells or {}).items()}
        self.anchor = CellCoord(*anchor)
        if parts is None:
            parts = (frozenset(self.cells),) if self.cells else ()
        self.parts = tuple(frozenset(CellCoord(*c) for c in p) for p in parts)
        self.shape = shape

    def __len__(self):
        return len(self.cells)

    def placed(self):
        return {translate(c, self.anchor): s for c, s in self.cells.items()}

    def placed_parts(self):
        return [frozenset(translate(c, self.anchor) for c in p) for p in self.parts]

    def at(self, anchor):
        return Fragment(self.cells, anchor, self.parts, self.shape)

    def merged(self, other):
        """Union with other (other wins on overlap); both in this fragment's frame"""
        shift = CellCoord(other.anchor.q - self.anchor.q, other.anchor.r - self.anchor.r)
        cells = dict(self.cells)
        moved = {translate(c, shift): s for c, s in other.cells.items()}
        cells.update(moved)
        parts = [p - set(moved) for p in self.parts]
        parts += [frozenset(translate(c, shift) for c in p) for p in other.parts]
        return Fragment(cells, self.anchor, [p for p in parts if p])

    def charge(self):
        return int(sum(CHARGE[s] for s in self.cells.values()))

    def to_text(self):
        if self.shape is not None:
            n_rows, n_cols = self.shape
            row0, col0 = 0, 0
        else:
            if not self.cells:
                return SKIP_CHAR
            offsets = [axial_to_offset(c.q, c.r) for c in self.cells]
            row0 = min(r for _, r in offsets)
            row0 -= row0 & 1  # keep row parity so the shape is preserved
            col0 = min(col for col, r in offsets)
            n_rows = max(r for _, r in offsets) - row0 + 1
            n_cols = max(col for col, _ in offsets) - col0 + 1
        lines = []
        for i in range(n_rows):
            line = []
            for j in range(n_cols):
                q, r = offset_to_axial(col0 + j, row0 + i)
                s = self.cells.get(CellCoord(q, r))
                line.append(SKIP_CHAR if s is None else str(int(s)))
            lines.append(''.join(line))
        return '\n'.join(lines)

    def __repr__(self):
        return 'Fragment({} cells, anchor={})'.format(len(self), tuple(self.anchor))


def parse_fragment(text, anchor=CellCoord(0, 0)):
    rows = _pattern_rows(text, allow_skip=True)
    cells = {}
    for i, line in enumerate(rows):
        for j, ch in enumerate(line):
            if ch != SKIP_CHAR:
                cells[CellCoord(*offset_to_axial(j, i))] = CellState(int(ch))
    return Fragment(cells, anchor, shape=(len(rows), len(rows[0])))


def serialize_fragment(fragment):
    return fragment.to_text()
