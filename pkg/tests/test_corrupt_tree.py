import pytest

from app.schemas.reports import CorruptTreeReport
from app.schemas.trace import DecideRecord, ExecutionTrace, FaRecord, HaltRecord, HeaderRecord, ItUncoveredRecord
from app.services.corrupt_tree import (
    check_it_ct_bound, check_single_extension, check_waste_coupling, compute_fully_corrupt, mark_alpha_series,
)
from app.utils.codec import BAD, BOTTOM


def header(n=7, t=2, corrupt=(5, 6)):
    return HeaderRecord(
        schema_version=1, app_version="test", n=n, t=t, alphabet_size=2, seed=0, adversary="scripted",
        inputs=[0] * n, corrupt=list(corrupt), max_rounds=t + 1,
    )


def uncovered(r, processes, labels, deep=False):
    return [ItUncoveredRecord(round=r, process=pid, labels=labels, deep=deep) for pid in processes]


class TestFullyCorrupt:
    def test_honest_run_has_empty_tree(self, make_config, run):
        report = compute_fully_corrupt(run(make_config(n=7, t=2, inputs=[0, 0, 0, 0, 1, 1, 1])))
        assert report.size == 0
        assert report.alpha == [0, 0, 0, 0]

    def test_label_reported_by_every_correct_process(self):
        trace = ExecutionTrace([header()])
        trace.extend(uncovered(2, range(5), ["5", "6"]))
        trace.extend(uncovered(3, range(5), ["6.5"]))
        report = compute_fully_corrupt(trace)
        assert report.regular == ["5", "6"]
        assert report.special == ["6.5"]
        assert report.corrupt_at == {5: 1, 6: 1}
        assert report.alpha == [0, 2, 0, 0]
        assert report.waste == [0, 1, 0, -1]

    def test_one_dissenting_process_clears_the_label(self):
        trace = ExecutionTrace([header()])
        trace.extend(uncovered(2, range(4), ["6"]))
        assert compute_fully_corrupt(trace).size == 0

    def test_halted_processes_have_no_say(self):
        trace = ExecutionTrace([header(), HaltRecord(round=1, process=4)])
        trace.extend(uncovered(2, range(4), ["6"]))
        assert compute_fully_corrupt(trace).regular == ["6"]

    def test_tree_is_prefix_closed(self):
        trace = ExecutionTrace([header()])
        trace.extend(uncovered(3, range(5), ["6.5"]))
        assert compute_fully_corrupt(trace).size == 0


class TestAlphaSeries:
    @pytest.mark.parametrize("alpha, shapes", [
        ([0, 1, 1, 2, 1, 0], [("prefix_ones", 1, 2), ("cross", 3, 5)]),
        ([0, 0, 1, 0], [("stuck", 1, 3)]),
        ([0, 3, 0], [("blowup", 1, 2)]),
        ([0, 2, 1], [("blowup_open", 1, 2)]),
        ([0, 0], []),
    ])
    def test_shapes(self, alpha, shapes):
        assert [(s.shape, s.start, s.end) for s in mark_alpha_series(alpha)] == shapes

    def test_single_extension(self):
        one = CorruptTreeReport(regular=["5", "5.6", "5.4"], special=["5.6.4"])
        two = CorruptTreeReport(regular=["5", "5.6", "5.4"], special=["5.6.4", "5.4.6"])
        assert check_single_extension(one, 1, 2)
        assert not check_single_extension(two, 1, 2)


class TestBounds:
    def test_deep_labels_need_a_nearby_ancestor(self):
        trace = ExecutionTrace([header(n=31, t=10, corrupt=range(21, 31))])
        trace.extend(uncovered(9, [0], ["0.1.2.3.4.5.6.7.8"], deep=True))
        assert not check_it_ct_bound(trace)

    def test_no_deep_labels(self, make_config, run):
        assert check_it_ct_bound(run(make_config()))

    def test_waste_coupling_vacuous(self, make_config, run):
        verdict = check_waste_coupling(run(make_config(corrupt=[3], adversary="silent")))
        assert verdict.passed


class TestMaterializedShapes:
    def test_cross_segment_keeps_a_single_extension(self):
        trace = ExecutionTrace([header(n=16, t=5, corrupt=range(11, 16))])
        trace.extend(uncovered(6, range(11), ["11", "12", "11.13", "11.13.14", "11.13.14.12", "11.13.14.12.15"]))
        report = compute_fully_corrupt(trace)
        assert report.alpha == [0, 2, 1, 1, 0, 1, 0]
        crosses = [s for s in report.segments if s.shape == "cross"]
        assert [(s.start, s.end) for s in crosses] == [(1, 4)]
        assert check_single_extension(report, crosses[0].start, crosses[0].end)

    def coupled_trace(self, known, halt_round=7):
        records = [FaRecord(round=4, process=pid, faulty=list(range(known)), known=list(range(known))) for pid in range(3)]
        records += [DecideRecord(round=5, process=pid, value=BAD, external=BOTTOM) for pid in range(3)]
        records += [HaltRecord(round=halt_round, process=pid) for pid in range(3)]
        return ExecutionTrace([header(n=31, t=10, corrupt=range(21, 31))] + records)

    def test_waste_trigger_with_enough_known_faulty(self):
        report = CorruptTreeReport(waste=[0, 6, 5])
        verdict = check_waste_coupling(self.coupled_trace(known=7), report)
        assert verdict.passed and "reaches 6 at depth 1" in verdict.detail

    def test_waste_trigger_with_too_few_known_faulty(self):
        report = CorruptTreeReport(waste=[0, 6, 5])
        assert not check_waste_coupling(self.coupled_trace(known=6), report).passed

    def test_waste_trigger_with_a_late_halt(self):
        report = CorruptTreeReport(waste=[0, 6, 5])
        assert not check_waste_coupling(self.coupled_trace(known=7, halt_round=8), report).passed