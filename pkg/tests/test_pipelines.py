import csv
import json

from rwenas.config import SearchConfig
from rwenas.items import EvalReport, GenerationRecord
from rwenas.moea import RweEvaluator, SchafferEvaluator, SearchPipeline, run_search
from rwenas.pipelines import (EvaluationLogPipeline, FrontExportPipeline, GenerationLogPipeline,
                              ProgressTrackerPipeline, default_pipelines)


class Recorder:
    def __init__(self):
        self.calls = []

    def start_search(self, max_gen, pop_size):
        self.calls.append(('start', max_gen, pop_size))

    def update_generation(self, generation, evaluations, front_size, failed, hypervolume=None):
        self.calls.append(('update', generation, front_size, failed))

    def finish_search(self, result):
        self.calls.append(('finish', len(result.front)))


class HookOrder(SearchPipeline):
    def __init__(self):
        self.events = []

    def open_search(self, search):
        self.events.append('open')

    def process_generation(self, record, search):
        self.events.append(record.generation)

    def close_search(self, result, search):
        self.events.append('close')


def schaffer_run(tmp_path, max_gen=4, extra=()):
    cfg = SearchConfig(pop_size=10, max_gen=max_gen, backend='schaffer')
    return run_search(cfg, SchafferEvaluator(), seed=0,
                      pipelines=[*default_pipelines(tmp_path), *extra])


def test_hooks_run_in_order(tmp_path):
    hooks = HookOrder()
    schaffer_run(tmp_path, max_gen=3, extra=[hooks])
    assert hooks.events == ['open', 0, 1, 2, 3, 'close']


def test_generation_log(tmp_path):
    result = schaffer_run(tmp_path)
    lines = (tmp_path / 'generations.jsonl').read_text().splitlines()
    assert len(lines) == 5
    records = [GenerationRecord.model_validate_json(line) for line in lines]
    assert [r.generation for r in records] == [0, 1, 2, 3, 4]
    assert records == result.archive


def test_front_csv(tmp_path):
    result = schaffer_run(tmp_path)
    with (tmp_path / 'front.csv').open() as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['genome', 'f1', 'f2']
    assert len(rows) - 1 == len(result.front)
    for row, ind in zip(rows[1:], result.front):
        assert row[0] == ind.genome.to_string()
        assert [float(v) for v in row[1:]] == list(ind.objectives)


def test_schaffer_writes_no_evaluation_records(tmp_path):
    schaffer_run(tmp_path)
    assert (tmp_path / 'evaluations.jsonl').read_text() == ''


def test_outputs_are_reproducible(tmp_path):
    schaffer_run(tmp_path / 'a')
    schaffer_run(tmp_path / 'b')
    for name in ('generations.jsonl', 'front.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_progress_tracker_pipeline(tmp_path):
    recorder = Recorder()
    result = schaffer_run(tmp_path, max_gen=2, extra=[ProgressTrackerPipeline(recorder)])
    assert recorder.calls[0] == ('start', 2, 10)
    assert [c[1] for c in recorder.calls if c[0] == 'update'] == [0, 1, 2]
    assert recorder.calls[-1] == ('finish', len(result.front))


def test_progress_tracker_reports_each_generation_front(tmp_path):
    recorder = Recorder()
    result = schaffer_run(tmp_path, max_gen=3, extra=[ProgressTrackerPipeline(recorder)])
    updates = [c for c in recorder.calls if c[0] == 'update']
    expected = [sum(1 for ind in r.individuals if ind.rank == 0 and not ind.failed) for r in result.archive]
    assert [c[2] for c in updates] == expected
    assert all(c[3] == 0 for c in updates)


def test_progress_tracker_tolerates_partial_callbacks(tmp_path):
    class OnlyFinish:
        def __init__(self):
            self.done = False

        def finish_search(self, result):
            self.done = True

    callback = OnlyFinish()
    schaffer_run(tmp_path, max_gen=1, extra=[ProgressTrackerPipeline(callback)])
    assert callback.done


def test_default_pipelines(tmp_path):
    kinds = [type(p) for p in default_pipelines(tmp_path)]
    assert kinds == [GenerationLogPipeline, EvaluationLogPipeline, FrontExportPipeline]
    assert isinstance(default_pipelines(tmp_path, Recorder())[-1], ProgressTrackerPipeline)


def test_rwe_search_logs_each_evaluation_once(tmp_path, micro_spec, tiny_data, tiny_scale, tiny_rwe):
    cfg = SearchConfig(pop_size=4, max_gen=1)
    evaluator = RweEvaluator(micro_spec, tiny_data, tiny_scale, tiny_rwe)
    result = run_search(cfg, evaluator, seed=0, pipelines=default_pipelines(tmp_path))
    lines = (tmp_path / 'evaluations.jsonl').read_text().splitlines()
    assert len(lines) == result.evaluations
    reports = [EvalReport.model_validate_json(line) for line in lines]
    assert len({r.genome for r in reports}) == len(reports)
    assert all('wall_seconds' not in json.loads(line) for line in lines)
    with (tmp_path / 'front.csv').open() as f:
        assert next(csv.reader(f)) == ['genome', 'rwe_error', 'flops_m']
