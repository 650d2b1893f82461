"""
Trace-only property checks. Every failing verdict carries the first trace
record that violates it.
"""
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Tuple

from app.core.config import Settings, settings as default_settings
from app.schemas.reports import PropertyReport, Verdict
from app.schemas.trace import (
    DecideRecord, DetectedRecord, ExecutionTrace, FaRecord, HaltRecord,
    MonitorRecord, RtAssignRecord, StoppedRecord,
)
from app.services.corrupt_tree import check_it_ct_bound, compute_fully_corrupt
from app.services.eig_core import PutRule, prefixes
from app.utils.codec import BOTTOM, Codec, Label

logger = logging.getLogger(__name__)

TOP_LEVEL = "1:1"


def _fail(name: str, detail: str, record=None, enforced: bool = True) -> Verdict:
    return Verdict(
        name=name, passed=False, enforced=enforced, detail=detail,
        record=record.model_dump() if record is not None else None,
    )


def _pass(name: str, detail: Optional[str] = None, enforced: bool = True) -> Verdict:
    return Verdict(name=name, passed=True, enforced=enforced, detail=detail)


def bit_budget(n: int, polynomial: Optional[List[float]], settings: Settings) -> float:
    if polynomial:
        return sum(coefficient * n ** power for power, coefficient in enumerate(polynomial))
    return settings.budget_coefficient * n ** settings.budget_degree


class PropertyChecker:
    def __init__(self, trace: ExecutionTrace, settings: Optional[Settings] = None):
        self.trace = trace
        self.settings = settings or default_settings
        self.header = trace.header
        self.correct = [pid for pid in range(self.header.n) if pid not in self.header.corrupt]
        self.decisions: Dict[int, DecideRecord] = {record.process: record for record in trace.of(DecideRecord)}
        self.halts: Dict[int, HaltRecord] = {record.process: record for record in trace.of(HaltRecord)}

    def agreement(self) -> Verdict:
        reference: Optional[DecideRecord] = None
        for pid in self.correct:
            record = self.decisions.get(pid)
            if record is None:
                return _fail("agreement", f"process {pid} never decided", self.halts.get(pid))
            if reference is None:
                reference = record
            elif record.external != reference.external:
                return _fail(
                    "agreement",
                    f"p{record.process} decided {record.external}, p{reference.process} decided {reference.external}",
                    record,
                )
        return _pass("agreement")

    def _correct_inputs(self) -> List[int]:
        return [self.header.inputs[pid] for pid in self.correct]

    def validity(self) -> Verdict:
        inputs = self._correct_inputs()
        t = self.header.t
        for record in sorted(self.decisions.values(), key=lambda item: (item.round, item.process)):
            if record.process not in self.correct or record.external == BOTTOM:
                continue
            if sum(1 for value in inputs if value == record.external) < t + 1:
                return _fail("validity", f"decision {record.external} backed by fewer than t+1 correct inputs", record)
        return _pass("validity")

    def unanimity(self) -> Verdict:
        inputs = set(self._correct_inputs())
        if len(inputs) != 1:
            return _pass("unanimity", "inputs not unanimous")
        expected = inputs.pop()
        for record in sorted(self.decisions.values(), key=lambda item: (item.round, item.process)):
            if record.process in self.correct and record.external != expected:
                return _fail("unanimity", f"decided {record.external}, all inputs were {expected}", record)
        return _pass("unanimity")

    def early_stopping(self) -> Verdict:
        summary = self.trace.summary
        f_actual = summary.f_actual if summary else len(self.header.corrupt)
        bound = min(f_actual + 2, self.header.t + 1)
        for pid in self.correct:
            record = self.halts.get(pid)
            if record is None:
                return _fail("early_stopping", f"process {pid} never halted")
            if record.round > bound:
                return _fail("early_stopping", f"process {pid} halted at {record.round} > {bound}", record)
        return _pass("early_stopping", f"bound {bound}")

    def no_false_detection(self) -> Verdict:
        correct = set(self.correct)
        for record in self.trace.records:
            if isinstance(record, DetectedRecord) and record.process in correct and record.suspect in correct:
                return _fail("no_false_detection", f"p{record.process} suspects correct p{record.suspect}", record)
            if isinstance(record, FaRecord) and record.process in correct and correct & set(record.faulty):
                return _fail("no_false_detection", f"p{record.process} holds a correct process in F", record)
        return _pass("no_false_detection")

    def _top_entries(self) -> Dict[int, List[RtAssignRecord]]:
        entries: Dict[int, List[RtAssignRecord]] = defaultdict(list)
        for record in self.trace.of(RtAssignRecord):
            if record.instance == TOP_LEVEL and record.process in self.correct:
                entries[record.process].append(record)
        return entries

    def _inactive_from(self) -> Dict[int, int]:
        """Round after which a process no longer advances the top-level run"""
        cut: Dict[int, int] = {}

        def lower(pid: int, r: int) -> None:
            cut[pid] = min(cut.get(pid, r), r)

        for record in self.trace.of(StoppedRecord):
            if record.instance == TOP_LEVEL:
                lower(record.process, record.round)
        for record in self.trace.of(MonitorRecord):
            if record.seq == 1 and record.action == "halt":
                lower(record.process, record.round)
        for pid, record in self.halts.items():
            lower(pid, record.round)
        return cut

    def liveness(self) -> Verdict:
        entries = self._top_entries()
        phi = self.header.t
        inactive = self._inactive_from()
        stamps: Dict[int, Dict[Label, int]] = {
            pid: {Codec.parse_label(record.label): record.round for record in records}
            for pid, records in entries.items()
        }

        def covered_by(pid: int, label: Label, deadline: int) -> bool:
            owned = stamps.get(pid, {})
            return any(
                owned.get(candidate, deadline + 1) <= deadline
                for candidate in [label] + prefixes(label)
            )

        for p, records in sorted(entries.items()):
            for record in records:
                label = Codec.parse_label(record.label)
                target = min(record.round + 2, phi + 1)
                for q in self.correct:
                    if q == p or inactive.get(q, target + 1) < target:
                        continue
                    if not covered_by(q, label, target):
                        return _fail("liveness", f"{record.label} resolved at p{p} but not at p{q} by round {target}", record)
        return _pass("liveness")

    def put_safety(self) -> Verdict:
        puts: Dict[str, Tuple[int, RtAssignRecord]] = {}
        for pid, records in sorted(self._top_entries().items()):
            for record in records:
                if record.rule == PutRule.last_round_rule.value:
                    continue
                seen = puts.get(record.label)
                if seen is None:
                    puts[record.label] = (record.value, record)
                elif seen[0] != record.value:
                    return _fail("put_safety", f"{record.label} put as {seen[0]} and {record.value}", record)
        return _pass("put_safety")

    def tree_bound(self, report) -> Verdict:
        if check_it_ct_bound(self.trace, report):
            return _pass("tree_bound")
        return _fail("tree_bound", "a deep tree node has no corrupt-tree ancestor within reach")

    def message_budget(self) -> Tuple[Verdict, int, float]:
        summary = self.trace.summary
        budget = bit_budget(self.header.n, self.header.budget_polynomial, self.settings)
        max_bits = summary.max_bits if summary else 0
        enforced = self.settings.enforce_budget
        if max_bits > budget:
            return _fail("message_budget", f"{max_bits} bits > budget {budget:g}", summary, enforced=enforced), max_bits, budget
        return _pass("message_budget", f"{max_bits} bits <= {budget:g}", enforced=enforced), max_bits, budget

    def report(self) -> PropertyReport:
        ct = compute_fully_corrupt(self.trace)
        budget_verdict, max_bits, budget = self.message_budget()
        verdicts = [
            self.agreement(),
            self.validity(),
            self.unanimity(),
            self.early_stopping(),
            self.no_false_detection(),
            self.liveness(),
            self.put_safety(),
            self.tree_bound(ct),
            budget_verdict,
        ]
        summary = self.trace.summary
        report = PropertyReport(
            seed=self.header.seed,
            n=self.header.n,
            t=self.header.t,
            adversary=self.header.adversary,
            verdicts=verdicts,
            rounds=summary.rounds if summary else 0,
            f_actual=summary.f_actual if summary else 0,
            max_bits=max_bits,
            bit_budget=budget,
            max_it_size=summary.max_it_size if summary else 0,
            ct_size=ct.size,
        )
        for verdict in report.failures():
            logger.warning(f"seed {report.seed}: {verdict.name} failed: {verdict.detail}")
        return report


def check_properties(trace: ExecutionTrace, settings: Optional[Settings] = None) -> PropertyReport:
    return PropertyChecker(trace, settings).report()
