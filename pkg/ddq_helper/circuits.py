from dataclasses import dataclass, field, fields

import numpy as np
from scipy import ndimage
from scipy.spatial import cKDTree

from ddq_helper.errors import ConfigError
from ddq_helper.lattice import (DIRECTIONS, HEX_STRUCTURE, Region, hex_disc_kernel,
                                row_major_key)


CIRCUIT_IDS = tuple(range(1, 9))
RULE_IDS = (1, 2, 3, 4, 5, 6)

# Rule 3 dominates in circuits 1, 5 and 7; Rule 1 leads everywhere else
RULE3_FIRST = (3, 1, 2, 4, 5, 6)
RULE1_FIRST = (1, 2, 3, 4, 5, 6)

DEFAULT_DEGREES = {1: 6, 2: 4, 3: 3, 4: 5, 5: 6, 6: 3, 7: 6, 8: 2}
DEFAULT_PRIORITIES = {c: (RULE3_FIRST if c in (1, 5, 7) else RULE1_FIRST) for c in CIRCUIT_IDS}

EPS = 1e-12


@dataclass(frozen=True)
class CircuitType:
    id: int
    neighborhood_degree: int
    dominant_rules: tuple


@dataclass
class CircuitTable:
    """Thresholds, neighborhood degrees and rule priorities of the 8 circuits.

    Only the four primary thresholds come from measurements; the secondary
    bands (types 3, 4, 6, 8), the degrees and the priorities of the types
    other than 1/5/7 are defaults.
    """
    s3_primary: float = 0.30    # S3 fraction above -> 5
    s1_primary: float = 0.50    # S1 fraction above -> 1
    s2_primary: float = 0.60    # S2 fraction at least -> 2
    s0_primary: float = 0.60    # S0 fraction at least -> 7
    s1_secondary: float = 0.30  # S1 in (s1_secondary, s1_primary] -> 4
    s2_secondary: float = 0.40  # S2 in [s2_secondary, s2_primary) -> 3
    s3_secondary: float = 0.15  # S3 in (s3_secondary, s3_primary] -> 6
    precedence: tuple = (3, 1, 2, 0)
    window_radius: int = 2
    degrees: dict = field(default_factory=lambda: dict(DEFAULT_DEGREES))
    priorities: dict = field(default_factory=lambda: dict(DEFAULT_PRIORITIES))

    def __post_init__(self):
        self.degrees = {int(k): int(v) for k, v in self.degrees.items()}
        self.priorities = {int(k): tuple(int(r) for r in v) for k, v in self.priorities.items()}
        for cid in CIRCUIT_IDS:
            if cid not in self.degrees or cid not in self.priorities:
                raise ConfigError('Circuit table is missing type {}'.format(cid))
            if not 2 <= self.degrees[cid] <= 6:
                raise ConfigError('Circuit {} degree {} outside [2, 6]'.format(
                    cid, self.degrees[cid]))
            if sorted(self.priorities[cid]) != list(RULE_IDS):
                raise ConfigError('Circuit {} priorities must order rules 1-6, got {}'.format(
                    cid, self.priorities[cid]))
        if sorted(self.precedence) != [0, 1, 2, 3]:
            raise ConfigError('Invalid threshold precedence: {}'.format(self.precedence))
        self.precedence = tuple(self.precedence)

    def circuit(self, cid):
        if cid not in self.degrees:
            raise ConfigError('Unknown circuit type: {}'.format(cid))
        return CircuitType(cid, self.degrees[cid], self.priorities[cid])

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError('Unknown circuit table keys: {}'.format(sorted(unknown)))
        degrees = dict(DEFAULT_DEGREES)
        degrees.update(d.pop('degrees', {}) or {})
        priorities = dict(DEFAULT_PRIORITIES)
        priorities.update(d.pop('priorities', {}) or {})
        return cls(degrees=degrees, priorities=priorities, **d)

    def to_dict(self):
        return dict(s3_primary=self.s3_primary, s1_primary=self.s1_primary,
                    s2_primary=self.s2_primary, s0_primary=self.s0_primary,
                    s1_secondary=self.s1_secondary, s2_secondary=self.s2_secondary,
                    s3_secondary=self.s3_secondary, precedence=list(self.precedence),
                    window_radius=self.window_radius,
                    degrees={k: v for k, v in sorted(self.degrees.items())},
                    priorities={k: list(v) for k, v in sorted(self.priorities.items())})


DEFAULT_TABLE = CircuitTable()


def _classify_fractions(frac, table):
    """frac: (..., 4) array of state fractions -> circuit ids"""
    f0, f1, f2, f3 = (frac[..., i] for i in range(4))
    primary = {
        3: (f3 > table.s3_primary + EPS, 5),
        1: (f1 > table.s1_primary + EPS, 1),
        2: (f2 >= table.s2_primary - EPS, 2),
        0: (f0 >= table.s0_primary - EPS, 7),
    }
    conds = [primary[s][0] for s in table.precedence]
    choices = [primary[s][1] for s in table.precedence]
    conds += [
        (f1 > table.s1_secondary + EPS) & (f1 <= table.s1_primary + EPS),
        (f2 >= table.s2_secondary - EPS) & (f2 < table.s2_primary - EPS),
        (f3 > table.s3_secondary + EPS) & (f3 <= table.s3_primary + EPS),
    ]
    choices += [4, 3, 6]
    return np.select(conds, choices, default=8)


def classify_window(hist, window_area_nm2=None, table=DEFAULT_TABLE):
    """Circuit type of a local window from its S0..S3 counts"""
    counts = np.asarray(hist, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ConfigError('Cannot classify an empty window')
    if window_area_nm2 is not None and window_area_nm2 <= 0:
        raise ConfigError('Window area must be positive, got {}'.format(window_area_nm2))
    return int(_classify_fractions(counts / total, table))


def rule_priority(circuit, table=DEFAULT_TABLE):
    cid = circuit.id if isinstance(circuit, CircuitType) else int(circuit)
    return table.circuit(cid).dominant_rules


@dataclass
class Domain:
    index: int
    circuit: CircuitType
    region: Region

    @property
    def area_nm2(self):
        return self.region.area_nm2

    def __len__(self):
        return len(self.region)


class CircuitMap(object):
    """Per-cell circuit ids and the connected domains, largest first"""

    def __init__(self, grid, circuit_ids, domain_ids, domains):
        self.grid = grid
        self.circuit_ids = circuit_ids
        self.domain_ids = domain_ids
        self.domains = domains

    def domain_of(self, coord):
        return self.domains[self.domain_ids[self.grid.index(coord)]]

    def circuit_of(self, coord):
        return self.domain_of(coord).circuit

    def __len__(self):
        return len(self.domains)

    def summary(self):
        return [dict(index=d.index, circuit=d.circuit.id, cells=len(d),
                     area_nm2=round(d.area_nm2, 4)) for d in self.domains]


def build_circuit_map(grid, labels, circuit_ids, table=DEFAULT_TABLE):
    """Split each label class into 6-connected components and order them.

    labels and circuit_ids are (height, width) arrays; cells sharing a label
    and connected under hex adjacency form one domain.
    """
    inside = grid.to_axial(np.ones(grid.shape, dtype=bool), fill=False)
    axial_labels = grid.to_axial(labels)
    components = []
    for value in np.unique(labels):
        comp, n = ndimage.label((axial_labels == value) & inside, structure=HEX_STRUCTURE)
        comp = grid.from_axial(comp)
        components.extend(comp == k for k in range(1, n + 1))
    # flat index order is row-major order
    components.sort(key=lambda m: (-m.sum(), np.flatnonzero(m)[0]))

    domain_ids = np.full(grid.shape, -1, dtype=np.int64)
    domains = []
    for i, mask in enumerate(components):
        region = Region.from_mask(grid, mask)
        domain_ids[mask] = i
        cid = int(circuit_ids[grid.index(region.coords[0])])
        domains.append(Domain(i, table.circuit(cid), region))
    assert (domain_ids >= 0).all()
    return CircuitMap(grid, np.asarray(circuit_ids), domain_ids, domains)


def window_histograms(grid, radius=2):
    """(height, width, 4) state counts over the hex disc of each cell, clipped to the grid"""
    kernel = hex_disc_kernel(radius)
    counts = []
    for s in range(4):
        onehot = grid.to_axial((grid.states == s).astype(np.int64))
        counts.append(grid.from_axial(ndimage.correlate(onehot, kernel, mode='constant', cval=0)))
    return np.stack(counts, axis=-1)


def segment_domains(grid, table=DEFAULT_TABLE):
    hist = window_histograms(grid, table.window_radius)
    frac = hist / hist.sum(axis=-1, keepdims=True)
    circuit_ids = _classify_fractions(frac, table).astype(np.int64)
    return build_circuit_map(grid, circuit_ids, circuit_ids, table)


# --- Voronoi ----------------------------------------------------------------

@dataclass(frozen=True)
class VoronoiPoint:
    position: tuple  # (x, y) in nm
    domain: int


@dataclass
class VoronoiReport:
    applicable: bool
    max_asymmetry: float = float('nan')
    mean_asymmetry: float = float('nan')
    boundary_cells: int = 0
    edge_max_asymmetry: float = float('nan')
    edge_mean_asymmetry: float = float('nan')
    boundary_pairs: int = 0
    ideal_agreement: float = float('nan')

    def to_dict(self):
        return dict(self.__dict__)


def voronoi_generators(circuit_map):
    grid = circuit_map.grid
    xy = grid.xy()
    charge = grid.charge_map()
    points = []
    for d in circuit_map.domains:
        pos = xy[d.region.mask]
        w = charge[d.region.mask].astype(np.float64)
        if w.sum() > 0:
            centroid = (pos * w[:, None]).sum(axis=0) / w.sum()
        else:
            centroid = pos.mean(axis=0)
        points.append(VoronoiPoint((float(centroid[0]), float(centroid[1])), d.index))
    return points


def partition_by_generators(grid, positions, circuit_id=7, table=DEFAULT_TABLE):
    """Ideal lattice Voronoi partition: every cell joins its nearest generator"""
    positions = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    _, nearest = cKDTree(positions).query(grid.xy().reshape(-1, 2))
    labels = nearest.reshape(grid.shape)
    return build_circuit_map(grid, labels, np.full(grid.shape, circuit_id), table)


def _boundary_pairs(circuit_map):
    grid = circuit_map.grid
    ids = circuit_map.domain_ids
    pairs = []
    for coord in grid.coords():
        a = ids[grid.index(coord)]
        for d in (0, 4, 5):  # E, SW, SE; their opposites cover the other three
            n = (coord.q + DIRECTIONS[d].q, coord.r + DIRECTIONS[d].r)
            if grid.in_bounds(n):
                b = ids[grid.index(n)]
                if a != b:
                    pairs.append((coord, n, a, b))
    return pairs


def voronoi_check(circuit_map, points):
    """Asymmetry of domain boundaries with respect to the generators, in lattice units.

    max/mean: at every cell bordering another domain, the gap between its
    nearest and second-nearest generator. An ideal lattice partition keeps it
    at or below 2. The edge figures measure the same gap at the midpoints of
    neighbouring cell pairs in different domains, where the ideal bound is 1.
    """
    if len(circuit_map.domains) < 2:
        return VoronoiReport(applicable=False)
    grid = circuit_map.grid
    gen = {p.domain: np.asarray(p.position, dtype=np.float64) for p in points}
    pairs = _boundary_pairs(circuit_map)
    edge_asym = []
    boundary_cells = set()
    for a_coord, b_coord, a, b in pairs:
        m = (grid.position(a_coord) + grid.position(b_coord)) / 2.
        da = np.linalg.norm(m - gen[a])
        db = np.linalg.norm(m - gen[b])
        edge_asym.append(abs(da - db) / grid.spacing)
        boundary_cells.update((a_coord, b_coord))

    tree = cKDTree(np.array([gen[k] for k in sorted(gen)]))
    cells = sorted(boundary_cells, key=row_major_key)
    dists, _ = tree.query(np.array([grid.position(c) for c in cells]), k=2)
    cell_asym = (dists[:, 1] - dists[:, 0]) / grid.spacing

    # share of cells already in the domain of their nearest generator
    _, nearest = tree.query(grid.xy().reshape(-1, 2))
    observed = np.array(sorted(gen))[nearest].reshape(grid.shape)
    agreement = float((observed == circuit_map.domain_ids).mean())

    return VoronoiReport(applicable=True,
                         max_asymmetry=float(cell_asym.max()),
                         mean_asymmetry=float(cell_asym.mean()),
                         boundary_cells=len(cells),
                         edge_max_asymmetry=float(max(edge_asym)),
                         edge_mean_asymmetry=float(np.mean(edge_asym)),
                         boundary_pairs=len(pairs),
                         ideal_agreement=agreement)


def domain_charge(circuit_map):
    """Excess charge per domain, in domain order"""
    charge = circuit_map.grid.charge_map()
    return [int(charge[d.region.mask].sum()) for d in circuit_map.domains]
