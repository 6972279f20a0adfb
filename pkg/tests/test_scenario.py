import os.path as osp

import pytest

from ddq_helper.errors import ConfigError, ScenarioError
from ddq_helper.protocols import GateGeometry, TissueSpec
from ddq_helper.scenario import load_scenario, resolve_region, scenario_from_dict


SCENARIOS = osp.join(osp.dirname(osp.dirname(osp.abspath(__file__))), 'scenarios')


def minimal(**kw):
    raw = dict(name='t', seed=0, schedule=dict(scans=2, events=[dict(time=0, trigger={})]))
    raw.update(kw)
    return raw


def events(*entries, scans=3):
    return minimal(schedule=dict(scans=scans, events=list(entries)))


def test_load_gate_scenario():
    scenario = load_scenario(osp.join(SCENARIOS, 'gate_11.yaml'))
    assert scenario.seed == 11 and scenario.config.seed == 11
    assert scenario.scans == 12
    assert [e.kind for e in scenario.events] == ['and_inputs', 'trigger']
    assert isinstance(scenario.context['gate'], GateGeometry)
    assert [a['kind'] for a in scenario.analyses] == ['gate', 'classify']


def test_repeats_expand_in_time_order():
    scenario = load_scenario(osp.join(SCENARIOS, 'cancer_286_cin_deleted.yaml'))
    assert isinstance(scenario.context['tissue'], TissueSpec)
    kinds = [e.kind for e in scenario.events]
    assert kinds[:4] == ['tissue_rings', 'trigger', 'add_s1', 'delete_s2']
    assert kinds.count('add_s1') == kinds.count('delete_s2') == 15
    assert [e.time for e in scenario.events] == sorted(e.time for e in scenario.events)
    assert scenario.events[2].details['count'] == 5


def test_all_bundled_scenarios_load():
    for name in ('packet', 'diffusion', 'voronoi', 'density_classification',
                 'write_erase_retrieve', 'cancer_627'):
        scenario = load_scenario(osp.join(SCENARIOS, name + '.yaml'))
        assert scenario.name == name


def test_seed_is_mandatory():
    raw = minimal()
    del raw['seed']
    with pytest.raises(ScenarioError):
        scenario_from_dict(raw)
    with pytest.raises(ScenarioError):
        scenario_from_dict(minimal(seed='7'))


def test_engine_overrides():
    scenario = scenario_from_dict(minimal(engine=dict(micro_steps=3, p_s1=0.1)))
    assert scenario.config.micro_steps == 3 and scenario.config.p_s1 == 0.1
    with pytest.raises(ConfigError):
        scenario_from_dict(minimal(engine=dict(warp=9)))
    with pytest.raises(ScenarioError):
        scenario_from_dict(minimal(colour='red'))


def test_schedule_entry_errors_name_the_entry():
    bad = [
        events(dict(time=0, trigger={}, erase_all={})),
        events(dict(time=0, explode={})),
        events(dict(time=30, trigger={})),
        events(dict(time=0, repeat=30, trigger={})),
        events(dict(time=0, add_s1=dict(count=2, region='cg'))),
        events(dict(time=0, add_s1=dict(count=2, region=dict(disc=dict(center=[-50, 0],
                                                                          radius=2))))),
        events(dict(time=0, and_inputs=dict(a=1, b=1, separation=2))),
    ]
    for raw in bad:
        with pytest.raises(ScenarioError) as e:
            scenario_from_dict(raw)
        assert 'Schedule entry 0' in str(e.value)


def test_unknown_analysis():
    with pytest.raises(ScenarioError):
        scenario_from_dict(minimal(analyses=['astrology']))


def test_initial_pattern_sets_grid_size():
    scenario = scenario_from_dict(minimal(initial=dict(pattern='0000\n0130\n0000')))
    assert (scenario.width, scenario.height) == (4, 3)
    assert scenario.initial.charge_map().sum() == 3
    with pytest.raises(ScenarioError):
        scenario_from_dict(minimal(initial=dict(pattern='00\n00'), grid=dict(width=5, height=5)))


def test_resolve_region():
    scenario = scenario_from_dict(minimal())
    template = scenario.template()
    assert resolve_region('all', template, {}, 'here') is None
    disc = resolve_region(dict(disc=dict(center=[5, 13], radius=1)), template, {}, 'here')
    assert len(disc) == 7
    with pytest.raises(ScenarioError):
        resolve_region('north', template, {}, 'here')


def test_load_errors(tmp_path):
    with pytest.raises(ScenarioError):
        load_scenario(str(tmp_path / 'missing.yaml'))
    path = tmp_path / 'broken.yaml'
    path.write_text('seed: [1, 2\n')
    with pytest.raises(ScenarioError):
        load_scenario(str(path))


def test_pattern_path_is_relative_to_scenario(tmp_path):
    (tmp_path / 'word.txt').write_text('313')
    (tmp_path / 's.yaml').write_text(
        'name: s\nseed: 2\nschedule:\n  scans: 1\n  events:\n'
        '    - time: 0\n      write: {path: word.txt, anchor: [2, 2]}\n')
    scenario = load_scenario(str(tmp_path / 's.yaml'))
    assert scenario.events[0].kind == 'write'
