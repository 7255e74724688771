import csv
import json

import numpy as np
import pytest
from typer.testing import CliRunner

from rwenas import __version__
from rwenas.__main__ import app, main
from rwenas.genome import SearchSpaceSpec, sample_random

from conftest import MACRO_TEXT, MICRO_TEXT

runner = CliRunner()

TINY = {
    'scale': {'init_channels': 4, 'layers': 3, 'resolution': 8, 'phase_channels': [4, 8, 16]},
    'dataset': {'classes': 4, 'size': 120, 'resolution': 8, 'seed': 1},
    'rwe': {'epochs': 3, 'folds': 2, 'batch_size': 32, 'norm_batch': 32, 'loader_batch': 32},
}


def config_file(tmp_path, data, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def invoke(*args):
    return runner.invoke(app, ['--quiet', *args])


def json_from(output):
    return json.loads(output[output.index('{'):])


def table_file(tmp_path, n=5):
    spec = SearchSpaceSpec.micro(compat_mode=True)
    rng = np.random.default_rng(0)
    path = tmp_path / 'table.csv'
    with path.open('w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['genome', 'accuracy'])
        for i, g in enumerate({sample_random(spec, rng).to_string() for _ in range(n)}):
            writer.writerow([g, 0.5 + i / 100])
    return str(path)


def test_version():
    result = runner.invoke(app, ['version'])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_describe_prints_graph_and_cost(tmp_path):
    result = invoke('--config', config_file(tmp_path, TINY), 'describe', MACRO_TEXT)
    assert result.exit_code == 0
    described = json_from(result.stdout)
    assert described['genome'] == MACRO_TEXT
    assert described['flops'] > 0 and described['params'] > 0
    assert described['flops_m'] == pytest.approx(described['flops'] / 1e6)
    assert described['violations'] == []
    assert described['graph']['kind'] == 'macro'


def test_eval_prints_report(tmp_path):
    result = invoke('--config', config_file(tmp_path, TINY), 'eval', MICRO_TEXT)
    assert result.exit_code == 0
    report = json_from(result.stdout)
    assert report['genome'] == MICRO_TEXT
    assert 0.0 <= report['rwe_error'] <= 1.0
    assert len(report['fold_errors']) == 2
    assert 'wall_seconds' not in report


def test_eval_is_reproducible(tmp_path):
    path = config_file(tmp_path, TINY)
    first = invoke('--config', path, '--seed', '7', 'eval', MICRO_TEXT)
    second = invoke('--config', path, '--seed', '7', 'eval', MICRO_TEXT)
    assert json_from(first.stdout) == json_from(second.stdout)


def test_eval_with_timing(tmp_path):
    result = invoke('--config', config_file(tmp_path, TINY), 'eval', '--timing', MICRO_TEXT)
    assert 'wall_seconds' in json_from(result.stdout)


@pytest.mark.parametrize('genome', ['micro:1,2,3', 'micro:' + ','.join(['9'] * 32), 'nano:1', 'vector:3'])
def test_bad_genomes_are_usage_errors(tmp_path, genome):
    result = invoke('--config', config_file(tmp_path, TINY), 'eval', genome)
    assert result.exit_code == 1


def test_unknown_config_key(tmp_path):
    result = invoke('--config', config_file(tmp_path, {'rwe': {'epoch': 3}}), 'describe', MICRO_TEXT)
    assert result.exit_code == 1
    assert 'rwe.epoch' in result.output


def test_workers_must_be_positive(tmp_path):
    result = invoke('--workers', '0', 'describe', MICRO_TEXT)
    assert result.exit_code == 1


def schaffer_config(tmp_path):
    return config_file(tmp_path, {'search': {'backend': 'schaffer', 'pop_size': 10, 'max_gen': 3}}, 'schaffer.json')


def test_search_writes_outputs(tmp_path):
    out = tmp_path / 'run'
    result = invoke('--config', schaffer_config(tmp_path), '--out', str(out), 'search')
    assert result.exit_code == 0
    for name in ('config.json', 'generations.jsonl', 'evaluations.jsonl', 'front.csv'):
        assert (out / name).is_file()
    assert len((out / 'generations.jsonl').read_text().splitlines()) == 4
    assert json.loads((out / 'config.json').read_text())['search']['backend'] == 'schaffer'
    with (out / 'front.csv').open() as f:
        assert next(csv.reader(f)) == ['genome', 'f1', 'f2']


def test_search_reruns_are_byte_identical(tmp_path):
    path = schaffer_config(tmp_path)
    for name in ('a', 'b'):
        assert invoke('--config', path, '--seed', '3', '--out', str(tmp_path / name), 'search').exit_code == 0
    for name in ('generations.jsonl', 'front.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_search_with_benchmark_backend_needs_a_readable_table(tmp_path):
    cfg = config_file(tmp_path, {'search': {'backend': 'benchmark', 'table_path': str(tmp_path / 'nope.csv'),
                                            'compat_mode': True}})
    result = invoke('--config', cfg, '--out', str(tmp_path / 'run'), 'search')
    assert result.exit_code == 2


def test_search_over_a_partial_table_completes(tmp_path):
    cfg = config_file(tmp_path, {'search': {'backend': 'benchmark', 'table_path': table_file(tmp_path),
                                            'compat_mode': True, 'pop_size': 6, 'max_gen': 2}})
    out = tmp_path / 'run'
    result = invoke('--config', cfg, '--out', str(out), 'search')
    assert result.exit_code == 0
    records = [json.loads(line) for line in (out / 'generations.jsonl').read_text().splitlines()]
    assert any(ind['failed'] for record in records for ind in record['individuals'])


def test_ablate_writes_trace(tmp_path):
    cfg = config_file(tmp_path, {'search': {'pop_size': 4},
                                 'ablation': {'generations': 1, 'trials': 2, 'allow_missing': True}})
    out = tmp_path / 'ablation'
    result = invoke('--config', cfg, '--out', str(out), 'ablate', '--table', table_file(tmp_path),
                    '-e', 'neg_flops')
    assert result.exit_code == 0
    with (out / 'trace.csv').open() as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == 2 * 2
    assert {row['estimator'] for row in rows} == {'neg_flops'}


def test_ablate_without_table_is_a_usage_error(tmp_path):
    result = invoke('--out', str(tmp_path), 'ablate', '-e', 'neg_flops')
    assert result.exit_code == 1


def test_ablate_missing_entries_is_a_runtime_error(tmp_path):
    cfg = config_file(tmp_path, {'search': {'pop_size': 4}, 'ablation': {'generations': 1, 'trials': 1}})
    result = invoke('--config', cfg, '--out', str(tmp_path / 'ablation'), 'ablate',
                    '--table', table_file(tmp_path), '-e', 'neg_flops')
    assert result.exit_code == 2


def test_ablate_unknown_estimator(tmp_path):
    result = invoke('--out', str(tmp_path), 'ablate', '--table', table_file(tmp_path), '-e', 'oracle')
    assert result.exit_code == 1


def test_main_exit_codes():
    with pytest.raises(SystemExit) as info:
        main(['--no-such-option'])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(['version'])
    assert info.value.code == 0


@pytest.mark.slow
def test_search_output_does_not_depend_on_workers(tmp_path):
    path = schaffer_config(tmp_path)
    for workers in ('1', '4'):
        result = invoke('--config', path, '--workers', workers, '--out', str(tmp_path / workers), 'search')
        assert result.exit_code == 0
    for name in ('generations.jsonl', 'evaluations.jsonl', 'front.csv'):
        assert (tmp_path / '1' / name).read_bytes() == (tmp_path / '4' / name).read_bytes()


def test_oracle_table_feeds_the_ablation(tmp_path):
    cfg = config_file(tmp_path, {**TINY, 'search': {'compat_mode': True, 'pop_size': 4},
                                 'oracle': {'epochs': 1, 'batch_size': 32},
                                 'ablation': {'generations': 1, 'trials': 1, 'allow_missing': True}})
    out = tmp_path / 'oracle'
    result = invoke('--config', cfg, '--out', str(out), 'oracle', '--networks', '3')
    assert result.exit_code == 0
    with (out / 'oracle.csv').open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['genome', 'accuracy'] and len(rows) == 4
    assert all(0.0 <= float(acc) <= 1.0 for _, acc in rows[1:])

    result = invoke('--config', cfg, '--out', str(tmp_path / 'ablation'), 'ablate',
                    '--table', str(out / 'oracle.csv'), '-e', 'neg_flops')
    assert result.exit_code == 0


def test_oracle_needs_two_networks(tmp_path):
    result = invoke('--out', str(tmp_path), 'oracle', '--networks', '1')
    assert result.exit_code == 1
