import pytest

from app.core.exceptions import NonTermination
from app.schemas.config import AdversaryScriptFile, ScriptEntry
from app.schemas.trace import (
    DecideRecord, DetectedRecord, ExecutionTrace, HeaderRecord, MessageRecord, RtAssignRecord, SummaryRecord,
)
from app.services.adversary_lib import ScriptedAdversary
from app.services.fault_detection import NOT_VOTER
from app.services.sync_sim import Execution, bundle_bits, run_batch
from app.utils.codec import BOTTOM


def split_script():
    """p6 tells p0..p2 its input is 0 and p3..p5 that it is 1"""
    return AdversaryScriptFile(base="honest", entries=[
        ScriptEntry(round=1, sender=6, recipient=pid, label="eps", value=0 if pid < 3 else 1)
        for pid in range(6)
    ])


class TestFaultFree:
    def test_unanimous_resolves_root_in_round_one(self, make_config, run):
        trace = run(make_config(n=7, t=2, inputs="uniform:1"))
        roots = [r for r in trace.of(RtAssignRecord) if r.label == "eps" and r.instance == "1:1"]
        assert len(roots) == 7
        assert all(r.rule == "EARLYITRULE" and r.round == 1 and r.value == 1 for r in roots)
        summary = trace.summary
        assert summary.decisions == [1] * 7
        assert summary.halt_rounds == [1] * 7
        assert summary.f_actual == 0

    def test_records_open_with_header_and_end_with_summary(self, make_config, run):
        trace = run(make_config())
        assert isinstance(trace.records[0], HeaderRecord)
        assert isinstance(trace.records[-1], SummaryRecord)
        assert trace.of(MessageRecord)

    def test_split_inputs_without_faults(self, make_config, run):
        trace = run(make_config(n=7, t=2, inputs=[0, 0, 0, 0, 1, 1, 1]))
        decisions = {r.external for r in trace.of(DecideRecord)}
        assert len(decisions) == 1
        assert trace.summary.halt_rounds == [2] * 7


class TestFaulty:
    def test_silent_process_unanimous(self, make_config, run):
        trace = run(make_config(corrupt=[3], adversary="silent"))
        assert trace.summary.decisions[:3] == [1, 1, 1]
        assert trace.summary.decisions[3] is None
        assert trace.summary.halt_rounds[:3] == [1, 1, 1]
        assert trace.summary.f_actual == 1
        assert trace.header.inputs[3] is None

    def test_silent_process_split(self, make_config, run):
        trace = run(make_config(inputs=[0, 1, 1, 0], corrupt=[3], adversary="silent"))
        assert trace.summary.decisions[:3] == [BOTTOM] * 3
        assert trace.summary.halt_rounds[:3] == [2, 2, 2]

    def test_equivocation_is_caught(self, make_config, run):
        config = make_config(n=7, t=2, inputs=[0, 0, 0, 1, 1, 1, 0], corrupt=[6])
        trace = run(config, ScriptedAdversary(split_script()))
        detections = [r for r in trace.of(DetectedRecord) if r.source == NOT_VOTER]
        assert sorted(r.process for r in detections) == [0, 1, 2, 3, 4, 5]
        assert {(r.suspect, r.round) for r in detections} == {(6, 2)}
        assert trace.summary.decisions[:6] == [BOTTOM] * 6
        assert trace.summary.halt_rounds[:6] == [3] * 6
        assert trace.summary.deviated == [6]


class TestEngine:
    def test_deterministic(self, make_config, run):
        config = make_config(n=7, t=2, inputs=[0, 1, 0, 1, 0, 1, 0], corrupt=[5, 6], adversary="random", seed=11)
        assert run(config).dumps() == run(config).dumps()

    def test_trace_survives_serialization(self, make_config, run):
        trace = run(make_config(corrupt=[3], adversary="silent"))
        again = ExecutionTrace.loads(trace.dumps())
        assert again.dumps() == trace.dumps()
        assert again.summary == trace.summary

    def test_round_cap(self, make_config, test_settings):
        config = make_config(inputs=[0, 1, 1, 0], max_rounds=1)
        with pytest.raises(NonTermination):
            Execution(config, settings=test_settings).run()

    def test_bits_of_nothing(self):
        assert bundle_bits(None, 4, 2) == 0

    def test_batch_runs_consecutive_seeds(self, make_config):
        traces = run_batch(make_config(seed=5), runs=3, workers=1)
        assert [trace.header.seed for trace in traces] == [5, 6, 7]
