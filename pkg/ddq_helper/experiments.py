"""Multi-seed sweeps over the bundled protocols and the mobility calibration."""
import itertools
from multiprocessing import Pool

import numpy as np
from tqdm import tqdm

from ddq_helper.analysis import (UC_FACTOR, diffusion_fit, diffusion_samples, fit_diffusion,
                                 fit_flux_history, flux_history, flux_profile_fit, gate_readout,
                                 n3_series, unit_cell_tiling)
from ddq_helper.circuits import RULE1_FIRST
from ddq_helper.errors import AnalysisError
from ddq_helper.kinetics import (cin_ratio, effective_normal_cells, fit_u2, half_life_by_population,
                                 kinetics_fit)
from ddq_helper.lattice import CellCoord
from ddq_helper.runs import encoded_s1, simulate
from ddq_helper.scenario import scenario_from_dict
from ddq_helper.utils import spawn_seeds


GATE_INPUTS = ((0, 0), (1, 0), (0, 1), (1, 1))
DIFFUSION_LINE = dict(start=[-6, 13], n=10, direction=0)
DIFFUSION_TARGET = dict(D=2.0, a=14.0, z0=5.5, b=1.0, saturation=280)
# fewer micro-steps per scan so the spreading fills the 280 s the experiment shows
DIFFUSION_ENGINE = dict(micro_steps=3)


# --- scenario builders -------------------------------------------------------

def cancer_scenario(n, seed, scans=15, cin_deleted=False, engine=None):
    events = [dict(time=0, tissue_rings=dict(n=n)),
              dict(time=0, trigger={}),
              dict(time=40, repeat=40, add_s1=dict(count='auto', region='cg'))]
    if cin_deleted:
        events.append(dict(time=40, repeat=40, delete_s2=dict(region='cg')))
    return dict(name='cancer_{}{}'.format(n, '_cin' if cin_deleted else ''), seed=seed,
                engine=dict(engine or {}), schedule=dict(scans=scans, events=events),
                analyses=['cancer'])


def gate_engine(engine=None):
    """Engine overrides for the AND gate: Rule 1 outranks Rule 3 in every circuit"""
    engine = dict(engine or {})
    circuits = dict(engine.get('circuits') or {})
    circuits.setdefault('priorities', {c: list(RULE1_FIRST) for c in (1, 5, 7)})
    engine['circuits'] = circuits
    return engine


def gate_scenario(a, b, seed, separation=10, scans=12, engine=None):
    return dict(name='gate_{}{}'.format(a, b), seed=seed, engine=gate_engine(engine),
                schedule=dict(scans=scans, events=[
                    dict(time=0, and_inputs=dict(a=a, b=b, separation=separation)),
                    dict(time=0, trigger={})]),
                analyses=['gate'])


def diffusion_scenario(seed, scans=12, engine=None):
    return dict(name='diffusion', seed=seed, engine=dict(DIFFUSION_ENGINE, **(engine or {})),
                schedule=dict(scans=scans, events=[
                    dict(time=0, alternating_lines=dict(n_lines=3, length=4, start=[-1, 11])),
                    dict(time=0, trigger={})]),
                analyses=[dict(kind='diffusion', line=DIFFUSION_LINE),
                          dict(kind='flux_profile', line=DIFFUSION_LINE)])


# --- single runs (module level so a Pool can pickle them) ---------------------

def cancer_trial(args):
    n, seed, scans, cin_deleted, engine = args
    scenario = scenario_from_dict(cancer_scenario(n, seed, scans, cin_deleted, engine))
    trajectory = simulate(scenario)
    tissue = scenario.context['tissue']
    n3 = n3_series(trajectory.grids, tissue.cg)
    times = np.asarray(trajectory.times[1:], dtype=np.float64)
    x0_0 = effective_normal_cells(tissue.s1_count, encoded_s1(trajectory.events))
    result = dict(n=n, seed=seed, n3=n3, times=times, x0_0=x0_0, t_half=None, u2=None)
    try:
        result['t_half'] = kinetics_fit(n3, times).t_half
        result['u2'] = fit_u2(n3, times, x0_0)
    except AnalysisError as e:
        result['error'] = str(e)
    return result


def gate_trial(args):
    a, b, seed, separation, scans, engine = args
    scenario = scenario_from_dict(gate_scenario(a, b, seed, separation, scans, engine))
    trajectory = simulate(scenario)
    readout = gate_readout(trajectory.final, scenario.context['gate'])
    return dict(a=a, b=b, seed=seed, **readout.to_dict())


def diffusion_trial(args):
    seed, scans, engine = args
    scenario = scenario_from_dict(diffusion_scenario(seed, scans, engine))
    trajectory = simulate(scenario)
    cells = unit_cell_tiling(trajectory.final, CellCoord(*DIFFUSION_LINE['start']),
                             DIFFUSION_LINE['n'], DIFFUSION_LINE['direction'])
    result = dict(seed=seed, phi=flux_history(trajectory.grids, cells), times=trajectory.times,
                  uc=UC_FACTOR * cells[0].area)
    try:
        result.update(diffusion_fit(trajectory, cells).to_dict())
        result.update(flux_profile_fit(trajectory, cells).to_dict())
    except AnalysisError as e:
        result['error'] = str(e)
    return result


def _map(fn, tasks, jobs=1, desc=''):
    if jobs > 1:
        with Pool(jobs) as pool:
            return list(tqdm(pool.imap(fn, tasks), total=len(tasks), desc=desc))
    return [fn(t) for t in tqdm(tasks, desc=desc)]


# --- sweeps --------------------------------------------------------------------

def cancer_sweep(populations=(286, 456, 627), seeds=20, scans=15, base_seed=0, cin_deleted=False,
                 engine=None, jobs=1):
    """Per population: kinetics fit of the seed-averaged N3 and the t_half summary"""
    seed_list = spawn_seeds(base_seed, seeds)
    tasks = [(n, s, scans, cin_deleted, engine) for n in populations for s in seed_list]
    trials = _map(cancer_trial, tasks, jobs, desc='cancer')
    summary = {}
    for n in populations:
        runs = [t for t in trials if t['n'] == n]
        mean_n3 = np.mean([t['n3'] for t in runs], axis=0)
        entry = dict(n=n, seeds=len(runs), mean_n3=mean_n3.tolist())
        try:
            fit = kinetics_fit(mean_n3, runs[0]['times'])
            entry.update(c=fit.c, p=fit.p, r2=fit.r2)
        except AnalysisError as e:
            entry['error'] = str(e)
        u2 = [t['u2'] for t in runs if t['u2'] is not None]
        entry['u2'] = float(np.mean(u2)) if u2 else None
        summary[n] = entry
    half_life = half_life_by_population({n: [t['t_half'] for t in trials if t['n'] == n]
                                         for n in populations})
    for n, (mean, std, count) in half_life.items():
        summary[n].update(t_half=mean, t_half_std=std, t_half_runs=count)
    return summary


def cin_sweep(n=456, seeds=20, scans=15, base_seed=0, engine=None, jobs=1):
    intact = cancer_sweep((n,), seeds, scans, base_seed, False, engine, jobs)[n]
    deleted = cancer_sweep((n,), seeds, scans, base_seed, True, engine, jobs)[n]
    ratio = None
    if intact['u2'] is not None and deleted['u2'] is not None:
        ratio = cin_ratio(intact['u2'], deleted['u2'])
    return dict(n=n, u2_intact=intact['u2'], u2_deleted=deleted['u2'], ratio=ratio)


def gate_sweep(seeds=20, separation=10, scans=12, base_seed=0, engine=None, jobs=1):
    """Success rate of the truth table per input pair, plus in-place collapse for (1, 0)"""
    seed_list = spawn_seeds(base_seed, seeds)
    tasks = [(a, b, s, separation, scans, engine) for a, b in GATE_INPUTS for s in seed_list]
    trials = _map(gate_trial, tasks, jobs, desc='gate')
    table = {}
    for a, b in GATE_INPUTS:
        runs = [t for t in trials if (t['a'], t['b']) == (a, b)]
        expected = a & b
        entry = dict(expected=expected,
                     success=float(np.mean([t['bit'] == expected for t in runs])))
        if (a, b) == (1, 0):
            entry['collapsed'] = float(np.mean([bool(t['collapsed_a']) for t in runs]))
        table['{}{}'.format(a, b)] = entry
    return table


def diffusion_sweep(seeds=5, scans=12, base_seed=0, engine=None, jobs=1):
    """Per-seed fit means plus the fits of the seed-averaged phi history (ensemble)"""
    trials = _map(diffusion_trial, [(s, scans, engine) for s in spawn_seeds(base_seed, seeds)],
                  jobs, desc='diffusion')
    ok = [t for t in trials if 'error' not in t]
    summary = dict(seeds=len(trials), fitted=len(ok))
    for key in ('D', 'r2', 'a', 'z0', 'b'):
        if ok:
            summary[key] = float(np.mean([t[key] for t in ok]))
    sat = [t['saturation_time'] for t in ok if t.get('saturation_time') is not None]
    summary['saturation_time'] = float(np.mean(sat)) if sat else None
    phi = np.mean([t['phi'] for t in trials], axis=0)
    ensemble = dict(phi=phi.tolist())
    try:
        ensemble.update(fit_diffusion(*diffusion_samples(phi, trials[0]['uc'])).to_dict())
        ensemble.update(fit_flux_history(phi, trials[0]['times']).to_dict())
    except AnalysisError as e:
        ensemble['error'] = str(e)
    summary['ensemble'] = ensemble
    return summary


def diffusion_score(summary, target=DIFFUSION_TARGET):
    """Sum of log-ratios to the diffusion targets; lower is better, inf if unfitted"""
    if not summary.get('fitted') or summary.get('D', 0) <= 0:
        return float('inf')
    score = abs(np.log(summary['D'] / target['D'])) + (1. - summary['r2'])
    score += abs(summary['z0'] - target['z0']) / target['z0']
    for key in ('a', 'b'):
        score += abs(np.log(max(summary[key], 1e-12) / target[key]))
    return float(score)


def calibrate(p_s1_values=(0.1, 0.25, 0.4), micro_steps_values=(5, 10, 20), seeds=3, scans=12,
              base_seed=0, jobs=1):
    """Grid search of base mobility and micro-steps per scan against the diffusion targets.
    S3 keeps twice the S1 base probability, capped at 1."""
    results = []
    for p_s1, steps in itertools.product(p_s1_values, micro_steps_values):
        engine = dict(p_s1=p_s1, p_s3=min(1., 2 * p_s1), micro_steps=steps)
        summary = diffusion_sweep(seeds, scans, base_seed, engine, jobs)
        summary.update(engine, score=diffusion_score(summary))
        results.append(summary)
    return sorted(results, key=lambda r: r['score'])
