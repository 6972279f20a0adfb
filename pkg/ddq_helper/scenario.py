"""Scenario files: YAML in, a validated run description out.

A scenario names the engine config, the grid, an optional initial pattern, a
timed event schedule and the analyses to run on the resulting trajectory.
Everything random is derived from the mandatory seed.
"""
import os
from dataclasses import dataclass, field
from functools import partial

import yaml

from ddq_helper.engine import SCAN_PERIOD, ScheduledEvent, SimConfig, erase_all, trigger
from ddq_helper.errors import ScenarioError, ValidationError
from ddq_helper.lattice import CellCoord, HexGrid, Region, parse_fragment, parse_grid
from ddq_helper.protocols import (Intervention, intervention_apply, interventions_per_scan,
                                  make_alternating_lines, make_and_inputs, make_packet,
                                  make_tissue_rings, write_pattern)


VERBS = ('write', 'erase_all', 'trigger', 'add_s1', 'delete_s2', 'and_inputs', 'tissue_rings',
         'packet', 'alternating_lines')
ANALYSES = ('diffusion', 'flux_profile', 'cancer', 'gate', 'voronoi', 'classify', 'periodicity')
TOP_LEVEL = ('name', 'seed', 'grid', 'engine', 'initial', 'schedule', 'analyses')


@dataclass
class Scenario:
    name: str
    seed: int
    config: SimConfig
    width: int
    height: int
    scans: int
    events: list
    analyses: list
    initial: HexGrid = None
    context: dict = field(default_factory=dict)  # gate geometry, tissue spec, ...
    raw: dict = field(default_factory=dict)

    def template(self):
        return HexGrid(self.width, self.height, self.config.spacing)


def _require(d, key, where):
    if not isinstance(d, dict) or key not in d:
        raise ScenarioError('{}: missing required key {!r}'.format(where, key))
    return d[key]


def _coord(value, where):
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ScenarioError('{}: expected a [q, r] pair, got {!r}'.format(where, value))
    return CellCoord(int(value[0]), int(value[1]))


def _read_text(spec, base_dir, where):
    if 'pattern' in spec:
        return str(spec['pattern'])
    if 'path' in spec:
        path = os.path.join(base_dir, spec['path'])
        if not os.path.exists(path):
            raise ScenarioError('{}: pattern file {} not found'.format(where, path))
        with open(path) as f:
            return f.read()
    raise ScenarioError('{}: needs either pattern or path'.format(where))


def resolve_region(spec, template, context, where):
    """'all' -> None (the whole grid), 'cg' -> tissue region, {disc: {center, radius}}"""
    if spec is None or spec == 'all':
        return None
    if spec == 'cg':
        if 'tissue' not in context:
            raise ScenarioError('{}: region cg used before any tissue_rings event'.format(where))
        return context['tissue'].cg
    if isinstance(spec, dict) and 'disc' in spec:
        disc = spec['disc']
        center = _coord(_require(disc, 'center', where), where)
        return Region.disc(template, center, int(_require(disc, 'radius', where)))
    raise ScenarioError('{}: unknown region {!r}'.format(where, spec))


def _build_action(verb, args, scenario, base_dir, where):
    """(callable state -> state, details) for one event verb"""
    template = scenario.template()
    context = scenario.context
    args = args or {}

    if verb == 'write':
        fragment = parse_fragment(_read_text(args, base_dir, where))
        anchor = _coord(args.get('anchor', [0, 0]), where)
        return partial(write_pattern, fragment=fragment, anchor=anchor), dict(anchor=list(anchor))

    if verb == 'erase_all':
        return erase_all, {}

    if verb == 'trigger':
        return trigger, {}

    if verb in ('add_s1', 'delete_s2'):
        region = resolve_region(args.get('region', 'all'), template, context, where)
        count = args.get('count', 0)
        if count == 'auto':
            if 'tissue' not in context:
                raise ScenarioError('{}: count auto needs a tissue_rings event'.format(where))
            count = interventions_per_scan(context['tissue'].n_target)
        iv = Intervention(verb, int(count), region)
        return partial(intervention_apply, iv=iv), dict(count=iv.count)

    if verb == 'and_inputs':
        fragment, geometry = make_and_inputs(int(_require(args, 'a', where)),
                                             int(_require(args, 'b', where)),
                                             int(args.get('separation', 10)),
                                             int(args.get('seed', scenario.seed)), template)
        context['gate'] = geometry
        return partial(write_pattern, fragment=fragment), geometry.to_dict()

    if verb == 'tissue_rings':
        spec, fragment = make_tissue_rings(int(_require(args, 'n', where)), args.get('s1_count'),
                                           float(args.get('inner_radius', 4.)), template)
        context['tissue'] = spec
        return partial(write_pattern, fragment=fragment), spec.to_dict()

    if verb == 'packet':
        shape = parse_fragment(_read_text(args, base_dir, where))
        fragment = make_packet(shape, args.get('mode', 'mirror'), int(args.get('direction', 0)))
        anchor = _coord(args.get('anchor', [0, 0]), where)
        return partial(write_pattern, fragment=fragment, anchor=anchor), dict(
            mode=args.get('mode', 'mirror'), anchor=list(anchor))

    if verb == 'alternating_lines':
        fragment = make_alternating_lines(int(_require(args, 'n_lines', where)),
                                          int(_require(args, 'length', where)),
                                          _coord(_require(args, 'start', where), where),
                                          int(args.get('gap', 2)), int(args.get('direction', 0)))
        return partial(write_pattern, fragment=fragment), dict(lines=int(args['n_lines']))

    raise ScenarioError('{}: unknown event verb {!r}'.format(where, verb))


def build_events(entries, scenario, base_dir='.'):
    """Expand the schedule entries (with repeats) into time-ordered ScheduledEvents"""
    horizon = scenario.scans * SCAN_PERIOD
    events = []
    for i, entry in enumerate(entries or []):
        where = 'Schedule entry {}'.format(i)
        if not isinstance(entry, dict):
            raise ScenarioError('{}: expected a mapping, got {!r}'.format(where, entry))
        verbs = [k for k in entry if k in VERBS]
        extra = set(entry) - set(VERBS) - {'time', 'repeat'}
        if len(verbs) != 1 or extra:
            raise ScenarioError('{}: needs exactly one verb of {} (got keys {})'.format(
                where, VERBS, sorted(entry)))
        verb = verbs[0]
        time = int(_require(entry, 'time', where))
        where = '{} ({} at t={}s)'.format(where, verb, time)
        if time % SCAN_PERIOD != 0:
            raise ScenarioError('{}: time is not a multiple of {} s'.format(where, SCAN_PERIOD))
        try:
            action, details = _build_action(verb, entry[verb], scenario, base_dir, where)
        except ScenarioError:
            raise
        except ValidationError as e:
            raise ScenarioError('{}: {}'.format(where, e)) from e
        repeat = entry.get('repeat')
        if repeat is not None and (int(repeat) <= 0 or int(repeat) % SCAN_PERIOD != 0):
            raise ScenarioError('{}: repeat must be a positive multiple of {} s'.format(
                where, SCAN_PERIOD))
        times = [time] if repeat is None else list(range(time, horizon + 1, int(repeat)))
        for t in times:
            events.append((t, i, ScheduledEvent(t, verb, action, dict(details))))
    events.sort(key=lambda e: (e[0], e[1]))
    return [e[2] for e in events]


def _analysis_list(raw):
    analyses = []
    for i, a in enumerate(raw or []):
        if isinstance(a, str):
            a = dict(kind=a)
        if not isinstance(a, dict) or a.get('kind') not in ANALYSES:
            raise ScenarioError('Analysis entry {}: kind must be one of {}, got {!r}'.format(
                i, ANALYSES, a))
        analyses.append(dict(a))
    return analyses


def scenario_from_dict(raw, base_dir='.'):
    if not isinstance(raw, dict):
        raise ScenarioError('Scenario must be a mapping, got {}'.format(type(raw).__name__))
    unknown = set(raw) - set(TOP_LEVEL)
    if unknown:
        raise ScenarioError('Unknown scenario keys: {}'.format(sorted(unknown)))
    if 'seed' not in raw or not isinstance(raw['seed'], int):
        raise ScenarioError('Scenario needs an integer seed')
    engine = dict(raw.get('engine') or {})
    engine['seed'] = raw['seed']
    config = SimConfig.from_dict(engine)
    grid = raw.get('grid') or {}
    schedule = _require(raw, 'schedule', 'Scenario')
    scans = int(_require(schedule, 'scans', 'schedule'))
    if scans < 0:
        raise ScenarioError('schedule: scans must be >= 0, got {}'.format(scans))

    initial = None
    if raw.get('initial'):
        initial = parse_grid(_read_text(raw['initial'], base_dir, 'initial'), config.spacing)
        width, height = initial.width, initial.height
    else:
        width, height = int(grid.get('width', 24)), int(grid.get('height', 27))
    if grid and initial is not None and (grid.get('width', width), grid.get('height', height)) != (
            width, height):
        raise ScenarioError('initial pattern is {}x{} but grid says {}x{}'.format(
            width, height, grid.get('width'), grid.get('height')))

    scenario = Scenario(raw.get('name', 'scenario'), raw['seed'], config, width, height, scans,
                        [], _analysis_list(raw.get('analyses')), initial, raw=raw)
    scenario.events = build_events(schedule.get('events'), scenario, base_dir)
    return scenario


def load_scenario(path):
    if not os.path.exists(path):
        raise ScenarioError('Scenario file {} not found'.format(path))
    with open(path) as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ScenarioError('{}: not valid YAML: {}'.format(path, e))
    return scenario_from_dict(raw, os.path.dirname(os.path.abspath(path)))
