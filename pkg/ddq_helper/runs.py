"""Run directories: everything a scenario run leaves on disk, and replay.

<out>/scenario.yaml      scenario echo, patterns inlined, full engine config
<out>/snapshots/scan_NNN.txt
<out>/counts.csv          scan, time, S0..S3 (one row per snapshot)
<out>/events.json         protocol event log
<out>/report.json         analysis results
<out>/frames/, plots/     optional
"""
import copy
import json
import os
import os.path as osp
import shutil
import tempfile
from dataclasses import dataclass, field

import numpy as np
import yaml

import ddq_helper
from ddq_helper.analysis import (classification_report, diffusion_fit, flux_history,
                                 flux_profile_fit, gate_readout, n3_series, periodicity,
                                 unit_cell_tiling, voronoi_report)
from ddq_helper.engine import Snapshot, Trajectory, new_state, run
from ddq_helper.errors import AnalysisError, ScenarioError
from ddq_helper.kinetics import effective_normal_cells, fit_u2, kinetics_fit, population_regime
from ddq_helper.lattice import Region, parse_grid, serialize_grid
from ddq_helper.scenario import load_scenario, resolve_region, scenario_from_dict
from ddq_helper import visualize


SNAPSHOT_DIR = 'snapshots'
ECHO = 'scenario.yaml'


def snapshot_name(k):
    return osp.join(SNAPSHOT_DIR, 'scan_{:03d}.txt'.format(k))


def _jsonable(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError('{} is not JSON serializable'.format(type(o).__name__))


def _inline_patterns(node, base_dir):
    """Replace every {path: file} pattern reference with {pattern: text}"""
    if isinstance(node, list):
        return [_inline_patterns(n, base_dir) for n in node]
    if not isinstance(node, dict):
        return node
    out = {k: _inline_patterns(v, base_dir) for k, v in node.items()}
    if 'path' in out and 'pattern' not in out:
        with open(osp.join(base_dir, out.pop('path'))) as f:
            out['pattern'] = f.read()
    return out


def scenario_echo(scenario, base_dir='.'):
    raw = _inline_patterns(copy.deepcopy(scenario.raw), base_dir)
    engine = scenario.config.to_dict()
    engine.pop('seed')
    raw['engine'] = engine
    raw['version'] = ddq_helper.__version__
    return raw


def simulate(scenario, progress=False):
    state = new_state(scenario.config, scenario.initial, scenario.width, scenario.height)
    return run(scenario.events, scenario.config, scenario.scans, state, progress)


# --- analyses ----------------------------------------------------------------

def _line_cells(spec, trajectory):
    line = spec.get('line')
    if not line or 'start' not in line:
        raise ScenarioError('Analysis {}: needs line {{start: [q, r], n, direction}}'.format(
            spec['kind']))
    return unit_cell_tiling(trajectory.final, tuple(line['start']), int(line.get('n', 10)),
                            int(line.get('direction', 0)))


def encoded_s1(events):
    return sum(e.get('written', 0) for e in events if e['kind'] == 'add_s1')


def run_analysis(spec, trajectory, scenario):
    kind = spec['kind']
    frame = trajectory.grids[int(spec.get('frame', -1))]
    if kind == 'diffusion':
        return diffusion_fit(trajectory, _line_cells(spec, trajectory)).to_dict()
    if kind == 'flux_profile':
        return flux_profile_fit(trajectory, _line_cells(spec, trajectory)).to_dict()
    if kind == 'gate':
        if 'gate' not in scenario.context:
            raise ScenarioError('Analysis gate: scenario has no and_inputs event')
        return gate_readout(trajectory.final, scenario.context['gate']).to_dict()
    if kind == 'voronoi':
        return voronoi_report(frame, scenario.config.circuits)
    if kind == 'classify':
        return classification_report(frame, scenario.config.circuits)
    if kind == 'periodicity':
        region = resolve_region(spec.get('region', 'all'), scenario.template(), scenario.context,
                                'Analysis periodicity')
        if region is None:
            region = Region.full(scenario.template())
        window = int(spec.get('window', len(trajectory)))
        return dict(period=periodicity(trajectory.grids[-window:], region))
    if kind == 'cancer':
        if 'tissue' not in scenario.context:
            raise ScenarioError('Analysis cancer: scenario has no tissue_rings event')
        tissue = scenario.context['tissue']
        n3 = n3_series(trajectory.grids, tissue.cg)
        times = np.asarray(trajectory.times[1:], dtype=np.float64)
        x0_0 = effective_normal_cells(tissue.s1_count, encoded_s1(trajectory.events))
        fit = kinetics_fit(n3, times)
        return dict(n=tissue.n, regime=population_regime(tissue.n), n3=n3.tolist(),
                    times=times.tolist(), x0_0=x0_0, u2=fit_u2(n3, times, x0_0), **fit.to_dict())
    raise ScenarioError('Unknown analysis {!r}'.format(kind))


def run_analyses(trajectory, scenario, kinds=None):
    """{kind: result}; an AnalysisError is re-raised naming the analysis"""
    results = {}
    for spec in scenario.analyses:
        if kinds is not None and spec['kind'] not in kinds:
            continue
        try:
            results[spec.get('name', spec['kind'])] = run_analysis(spec, trajectory, scenario)
        except AnalysisError as e:
            raise type(e)('Analysis {}: {}'.format(spec['kind'], e)) from e
    return results


# --- run directory ------------------------------------------------------------

def write_plots(trajectory, scenario, results, plot_dir):
    os.makedirs(plot_dir, exist_ok=True)
    times = np.asarray(trajectory.times)
    visualize.plot_counts(times, trajectory.counts(), osp.join(plot_dir, 'counts.png'),
                          scenario.name)
    for spec in scenario.analyses:
        if spec['kind'] in ('diffusion', 'flux_profile'):
            cells = _line_cells(spec, trajectory)
            visualize.plot_flux_profile(flux_history(trajectory.grids, cells), times,
                                        osp.join(plot_dir, 'flux.png'), scenario.name)
            if spec['kind'] == 'diffusion':
                visualize.plot_diffusion_scatter(diffusion_fit(trajectory, cells),
                                                 osp.join(plot_dir, 'diffusion.png'), scenario.name)
        elif spec['kind'] == 'cancer':
            r = results[spec.get('name', 'cancer')]
            fit = kinetics_fit(np.array(r['n3']), np.array(r['times']))
            visualize.plot_n3(r['times'], r['n3'], osp.join(plot_dir, 'n3.png'), fit, scenario.name)


def write_run(scenario, trajectory, results, out_dir, frames=False, plots=False, base_dir='.'):
    os.makedirs(osp.join(out_dir, SNAPSHOT_DIR), exist_ok=True)
    for k, grid in enumerate(trajectory.grids):
        with open(osp.join(out_dir, snapshot_name(k)), 'w') as f:
            f.write(serialize_grid(grid) + '\n')
    counts = trajectory.counts()
    scans = np.arange(len(trajectory))
    table = np.column_stack([scans, trajectory.times, counts])
    np.savetxt(osp.join(out_dir, 'counts.csv'), table, fmt='%d', delimiter=',',
               header='scan,time,s0,s1,s2,s3', comments='')
    with open(osp.join(out_dir, ECHO), 'w') as f:
        yaml.safe_dump(scenario_echo(scenario, base_dir), f, sort_keys=False)
    with open(osp.join(out_dir, 'events.json'), 'w') as f:
        json.dump(trajectory.events, f, indent=2, default=_jsonable)
    report = dict(name=scenario.name, seed=scenario.seed, version=ddq_helper.__version__,
                  scans=scenario.scans, config=scenario.config.to_dict(),
                  rule_counts={str(k): v for k, v in sorted(trajectory.state.rule_counts.items())},
                  analyses=results)
    for key in ('gate', 'tissue'):
        if key in scenario.context:
            report[key] = scenario.context[key].to_dict()
    with open(osp.join(out_dir, 'report.json'), 'w') as f:
        json.dump(report, f, indent=2, default=_jsonable)
    if frames:
        os.makedirs(osp.join(out_dir, 'frames'), exist_ok=True)
        visualize.save_frames(trajectory.grids, osp.join(out_dir, 'frames'))
    if plots:
        write_plots(trajectory, scenario, results, osp.join(out_dir, 'plots'))
    return report


def run_scenario(path, out_dir, frames=False, plots=False, progress=False):
    """Load, simulate, analyse, then move the finished run into out_dir.

    Validation and analysis errors propagate before anything is written to
    out_dir.
    """
    scenario = load_scenario(path)
    trajectory = simulate(scenario, progress)
    results = run_analyses(trajectory, scenario)
    parent = osp.dirname(osp.abspath(out_dir))
    os.makedirs(parent, exist_ok=True)
    tmp = tempfile.mkdtemp(prefix='.ddq_run_', dir=parent)
    try:
        report = write_run(scenario, trajectory, results, tmp, frames, plots,
                           osp.dirname(osp.abspath(path)))
        if osp.exists(out_dir):
            shutil.rmtree(out_dir)
        shutil.move(tmp, out_dir)
    finally:
        if osp.exists(tmp):
            shutil.rmtree(tmp)
    return report


# --- replay and stored-run analysis --------------------------------------------

@dataclass
class VerifyResult:
    ok: bool
    mismatched: list = field(default_factory=list)
    missing: list = field(default_factory=list)

    def __str__(self):
        if self.ok:
            return 'PASS'
        if self.missing:
            return 'FAIL: missing {}'.format(', '.join(self.missing))
        return 'FAIL: snapshot mismatch at scan {}'.format(', '.join(map(str, self.mismatched)))


def load_echo(run_dir):
    path = osp.join(run_dir, ECHO)
    if not osp.exists(path):
        raise ScenarioError('{} has no {}'.format(run_dir, ECHO))
    with open(path) as f:
        raw = yaml.safe_load(f)
    raw.pop('version', None)
    return scenario_from_dict(raw, run_dir)


def load_trajectory(run_dir, scenario):
    grids = []
    for k in range(scenario.scans + 1):
        with open(osp.join(run_dir, snapshot_name(k))) as f:
            grids.append(parse_grid(f.read(), scenario.config.spacing))
    events = []
    if osp.exists(osp.join(run_dir, 'events.json')):
        with open(osp.join(run_dir, 'events.json')) as f:
            events = json.load(f)
    frames = [Snapshot(g, k * scenario.config.scan_period) for k, g in enumerate(grids)]
    return Trajectory(frames, events, scenario.config)


def replay_verify(run_dir):
    """Re-run the echoed scenario and compare every stored snapshot byte for byte"""
    if not osp.exists(osp.join(run_dir, ECHO)):
        return VerifyResult(False, missing=[ECHO])
    scenario = load_echo(run_dir)
    names = [snapshot_name(k) for k in range(scenario.scans + 1)]
    missing = [n for n in names if not osp.exists(osp.join(run_dir, n))]
    if missing:
        return VerifyResult(False, missing=missing)
    trajectory = simulate(scenario)
    mismatched = []
    for k, grid in enumerate(trajectory.grids):
        with open(osp.join(run_dir, names[k])) as f:
            if f.read() != serialize_grid(grid) + '\n':
                mismatched.append(k)
    return VerifyResult(not mismatched, mismatched)


def analyze_run(run_dir, kinds=None):
    scenario = load_echo(run_dir)
    trajectory = load_trajectory(run_dir, scenario)
    return run_analyses(trajectory, scenario, kinds)
