from collections import Counter
from dataclasses import dataclass, field, fields, replace

import numpy as np

from ddq_helper.circuits import CircuitTable, segment_domains
from ddq_helper.errors import ConfigError, ScheduleError
from ddq_helper.lattice import SPACING_RANGE, CellState, HexGrid, row_major_key, step
from ddq_helper.rules import (ChargeField, GroupMove, Mobility, as_transition, build_groups,
                              collide_rule3, connected_components, converge_intents,
                              disperse_intents, group_move, hex_decay_rule4, is_straight_chain,
                              resolve_labels, rigid_intents, symmetrize_rule6)
from ddq_helper.utils import ScanMeter, ScanProgress, state_counts


SCAN_PERIOD = 40  # seconds between two STM scans


@dataclass
class SimConfig:
    seed: int = 0
    spacing: float = 0.98
    micro_steps: int = 10
    scan_period: int = SCAN_PERIOD
    p_s1: float = 0.25
    p_s3: float = 0.50
    mobility_slope: float = 4.0
    radius: int = 15
    clearance: float = 0.5
    symmetry_cap: int = 19
    circuits: CircuitTable = field(default_factory=CircuitTable)

    def __post_init__(self):
        if isinstance(self.circuits, dict):
            self.circuits = CircuitTable.from_dict(self.circuits)
        if not SPACING_RANGE[0] - 1e-9 <= self.spacing <= SPACING_RANGE[1] + 1e-9:
            raise ConfigError('spacing {} nm outside [{}, {}]'.format(self.spacing, *SPACING_RANGE))
        if self.micro_steps < 1:
            raise ConfigError('micro_steps must be >= 1, got {}'.format(self.micro_steps))
        if self.scan_period != SCAN_PERIOD:
            raise ConfigError('scan_period is fixed at {} s'.format(SCAN_PERIOD))
        if self.radius < 1 or self.clearance < 0 or self.symmetry_cap < 1:
            raise ConfigError('Invalid interaction settings: radius={}, clearance={}, '
                              'symmetry_cap={}'.format(self.radius, self.clearance,
                                                       self.symmetry_cap))
        Mobility(self.p_s1, self.p_s3, self.mobility_slope)

    @property
    def mobility(self):
        return Mobility(self.p_s1, self.p_s3, self.mobility_slope)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError('Unknown engine keys: {}'.format(sorted(unknown)))
        return cls(**d)

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d['circuits'] = self.circuits.to_dict()
        return d


@dataclass
class SimState:
    """Everything the engine needs to continue a run.

    labels holds persistent group identities (0 on uncharged cells); the rng
    is advanced in place by every step that draws. fragments are the
    single-cell labels left by broken chains.
    """
    grid: HexGrid
    rng: np.random.Generator
    evolution_enabled: bool = False
    elapsed: int = 0
    steps: int = 0
    labels: np.ndarray = None
    dissolved: frozenset = frozenset()
    next_label: int = 1
    velocity: dict = field(default_factory=dict)
    fragments: frozenset = frozenset()
    pending_decay: frozenset = frozenset()
    rule_counts: Counter = field(default_factory=Counter)
    log: list = field(default_factory=list)

    def __post_init__(self):
        if self.labels is None:
            label_map = resolve_labels(self.grid, np.zeros(self.grid.shape, dtype=np.int64))
            self.labels = label_map.labels
            self.next_label = label_map.next_label


@dataclass
class Snapshot:
    grid: HexGrid
    time: int


@dataclass
class Trajectory:
    frames: list
    events: list
    config: SimConfig
    state: SimState = None

    def __len__(self):
        return len(self.frames)

    @property
    def times(self):
        return [f.time for f in self.frames]

    @property
    def grids(self):
        return [f.grid for f in self.frames]

    @property
    def final(self):
        return self.frames[-1].grid

    def counts(self):
        """(frames, 4) array of S0..S3 counts"""
        return np.stack([state_counts(f.grid) for f in self.frames])


@dataclass
class ScheduledEvent:
    time: int
    kind: str
    apply: object  # callable SimState -> SimState
    details: dict = field(default_factory=dict)


def new_state(config, grid=None, width=24, height=27, evolution_enabled=False):
    if grid is None:
        grid = HexGrid(width, height, config.spacing)
    elif abs(grid.spacing - config.spacing) > 1e-12:
        raise ConfigError('Grid spacing {} differs from engine spacing {}'.format(
            grid.spacing, config.spacing))
    return SimState(grid.copy(), np.random.default_rng(config.seed), evolution_enabled)


def log_event(state, kind, warning=None, **details):
    entry = dict(time=state.elapsed, kind=kind, **details)
    if warning is not None:
        entry['warning'] = warning
        print('Warning: t={}s {}: {}'.format(state.elapsed, kind, warning))
    state.log.append(entry)
    return entry


def write_cells(state, cells, parts=None):
    """Overwrite cells ({coord: CellState}); every part's charged cells get
    fresh group labels per connected run."""
    grid = state.grid.copy()
    labels = state.labels.copy()
    for coord, s in cells.items():
        idx = grid.index(coord)
        grid.states[idx] = int(s)
        labels[idx] = 0
    next_label = state.next_label
    for part in (parts if parts is not None else [set(cells)]):
        written = np.zeros(grid.shape, dtype=bool)
        for coord in part:
            if coord in cells and CellState(cells[coord]).charged:
                written[grid.index(coord)] = True
        for piece in connected_components(grid, written):
            labels[piece] = next_label
            next_label += 1
    label_map = resolve_labels(grid, labels, state.dissolved, next_label, state.fragments)
    present = set(np.unique(label_map.labels).tolist())
    return replace(state, grid=grid, labels=label_map.labels, dissolved=label_map.dissolved,
                   next_label=label_map.next_label,
                   velocity={k: v for k, v in state.velocity.items() if k in present},
                   fragments=state.fragments & present)


def erase_all(state):
    """Reset every molecule to S0; the evolution flag is kept"""
    grid = state.grid.copy()
    grid.states[:] = 0
    state = replace(state, grid=grid, labels=np.zeros(grid.shape, dtype=np.int64),
                    dissolved=frozenset(), velocity={}, fragments=frozenset(),
                    pending_decay=frozenset())
    log_event(state, 'erase_all')
    return state


def trigger(state):
    """Enable spontaneous evolution; the grid is untouched"""
    state = replace(state, evolution_enabled=True)
    log_event(state, 'trigger')
    return state


def propose(state, config, circuit_map, groups):
    """Rule proposals for one micro-step, in stage order 6, 5, 1/2/4a, 3, 4b.

    Returns (proposals, pending_decay, breaking); breaking holds the labels of
    straight chains that found no rigid move and fall apart after this step.
    """
    grid = state.grid
    charge_field = ChargeField(grid)
    proposals = []

    for g in groups:
        if 2 <= len(g) <= config.symmetry_cap:
            t = symmetrize_rule6(grid, g)
            if t is not None:
                proposals.append(t)

    individual, coasting, cohesive, scattered = [], [], [], []
    for g in groups:
        if g.label in state.fragments:
            scattered.extend(g.members)
        elif g.contacts:
            # single-point contact: repulsion competes with individual attraction
            individual.extend(g.members)
        elif g.label in state.velocity:
            coasting.append(g)
        elif g.cohesive:
            cohesive.append(g)
        else:
            individual.extend(g.members)

    moves, loose, unaimed = rigid_intents(grid, cohesive, state.rng, config.mobility,
                                          config.radius, config.clearance, charge_field)
    proposals += moves
    for g in loose:
        individual.extend(g.members)
    breaking = {g.label for g in loose + unaimed if is_straight_chain(g)}

    proposals += converge_intents(grid, circuit_map, state.rng, config.mobility, individual,
                                  config.radius, config.clearance, charge_field)
    proposals += disperse_intents(grid, scattered, state.rng, config.mobility)

    proposals += collide_rule3(grid, [g for g in groups if g.label not in state.fragments])
    for g in coasting:
        d = state.velocity[g.label]
        move = group_move(grid, g, d, rule=3)
        if move is None and not all(grid.in_bounds(step(c, d)) for c in g.members):
            # reflect off the grid edge
            move = group_move(grid, g, (d + 3) % 6, rule=3)
        if move is not None:
            proposals.append(move)

    decay, pending = hex_decay_rule4(grid, state.pending_decay)
    proposals += decay
    return proposals, pending, breaking


def resolve_conflicts(proposals, circuit_map):
    """Greedy acceptance in (domain rank, rule rank in that domain, source) order;
    a proposal is dropped if it touches a cell already claimed."""
    ranked = []
    for order, p in enumerate(proposals):
        t = as_transition(p)
        domain = circuit_map.domain_of(t.source)
        rank = domain.circuit.dominant_rules.index(t.rule)
        ranked.append(((domain.index, rank, row_major_key(t.source), order), p, t))
    ranked.sort(key=lambda x: x[0])
    claimed, winners = set(), []
    for _, p, t in ranked:
        if claimed.intersection(t.coords):
            continue
        claimed.update(t.coords)
        winners.append(p)
    return winners


def commit(grid, labels, transitions):
    new_grid = grid.copy()
    new_labels = labels.copy()
    for t in transitions:
        for coord, before, after in t.cells:
            idx = grid.index(coord)
            assert grid.states[idx] == before, 'stale transition at {}'.format(coord)
            new_grid.states[idx] = int(after)
            if not CellState(after).charged:
                new_labels[idx] = 0
        for src, dst in t.label_moves:
            new_labels[grid.index(dst)] = labels[grid.index(src)]
    return new_grid, new_labels


def break_chains(labels, breaking, next_label):
    """Give every cell of the breaking labels its own fresh label, in row-major order"""
    labels = labels.copy()
    fragments = set()
    for lab in sorted(breaking):
        for idx in zip(*np.nonzero(labels == lab)):
            labels[idx] = next_label
            fragments.add(next_label)
            next_label += 1
    return labels, fragments, next_label


def micro_step(state, config):
    if not state.evolution_enabled:
        return state
    grid = state.grid
    circuit_map = segment_domains(grid, config.circuits)
    label_map = resolve_labels(grid, state.labels, state.dissolved, state.next_label,
                               state.fragments)
    groups = build_groups(grid, label_map)
    present = {g.label for g in groups}
    state = replace(state, labels=label_map.labels, dissolved=label_map.dissolved,
                    next_label=label_map.next_label,
                    velocity={k: v for k, v in state.velocity.items() if k in present},
                    fragments=state.fragments & present)

    proposals, pending, breaking = propose(state, config, circuit_map, groups)
    winners = resolve_conflicts(proposals, circuit_map)
    transitions = [as_transition(w) for w in winners]
    new_grid, new_labels = commit(grid, state.labels, transitions)

    won = {id(w) for w in winners}
    lost_decay = {as_transition(p).source for p in proposals
                  if id(p) not in won and as_transition(p).rule == 4}
    # only multi-cell groups keep coasting after a push
    velocity = {w.label: w.direction for w in winners
                if isinstance(w, GroupMove) and w.rule == 3 and len(w.transition.label_moves) > 1}
    rule_counts = state.rule_counts + Counter(t.rule for t in transitions)

    # a straight chain loses its coupling once it has moved as one
    chains = {g.label for g in groups if is_straight_chain(g) and g.label not in state.fragments}
    breaking |= chains & {w.label for w in winners if isinstance(w, GroupMove) and w.rule == 5}
    new_labels, broken, next_label = break_chains(new_labels, breaking, state.next_label)
    fragments = state.fragments | broken

    label_map = resolve_labels(new_grid, new_labels, state.dissolved, next_label, fragments)
    present = set(np.unique(label_map.labels).tolist())
    return replace(state, grid=new_grid, labels=label_map.labels,
                   dissolved=label_map.dissolved, next_label=label_map.next_label,
                   velocity={k: v for k, v in velocity.items() if k in present},
                   fragments=frozenset(fragments & present),
                   pending_decay=frozenset(pending | lost_decay),
                   steps=state.steps + 1, rule_counts=rule_counts)


def scan(state, config):
    """S micro-steps followed by a read-only snapshot, 40 s later"""
    for _ in range(config.micro_steps):
        state = micro_step(state, config)
    state = replace(state, elapsed=state.elapsed + config.scan_period)
    return state, Snapshot(state.grid.copy(), state.elapsed)


def check_schedule(schedule, scans, scan_period=SCAN_PERIOD):
    last = 0
    for i, ev in enumerate(schedule):
        where = 'Schedule entry {} ({} at t={}s)'.format(i, ev.kind, ev.time)
        if ev.time % scan_period != 0:
            raise ScheduleError('{}: time is not a multiple of {} s'.format(where, scan_period))
        if ev.time < last:
            raise ScheduleError('{}: events must be sorted by time'.format(where))
        if not 0 <= ev.time <= scans * scan_period:
            raise ScheduleError('{}: outside the {} scans of the run'.format(where, scans))
        last = ev.time


def run(schedule, config, scans, state=None, progress=False):
    """Apply the t=0 events, record the initial frame, then alternate scans and
    the events due at each scan boundary."""
    if scans < 0:
        raise ScheduleError('Number of scans must be >= 0, got {}'.format(scans))
    check_schedule(schedule, scans, config.scan_period)
    if state is None:
        state = new_state(config)
    events = list(schedule)

    def apply_due(state, t):
        while events and events[0].time == t:
            state = events.pop(0).apply(state)
        return state

    state = apply_due(state, 0)
    frames = [Snapshot(state.grid.copy(), state.elapsed)]

    charge = ScanMeter('Q', ':4d')
    charged = ScanMeter('Charged', ':4d')
    progress_meter = ScanProgress(scans, [charge, charged])
    for k in range(1, scans + 1):
        state, snapshot = scan(state, config)
        frames.append(snapshot)
        if progress:
            charge.update(int(snapshot.grid.charge_map().sum()))
            charged.update(int(snapshot.grid.charged_mask().sum()))
            progress_meter.display(k, snapshot.time)
        state = apply_due(state, k * config.scan_period)
    return Trajectory(frames, list(state.log), config, state)
