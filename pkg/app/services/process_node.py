"""
A correct process: its fault state, its protocol instances and its monitor
pipeline, advanced one global round at a time.
"""
import logging
from typing import Dict, List, Mapping, Optional

from pydantic import BaseModel

from app.core.config import Settings, settings as default_settings
from app.schemas.messages import MonitorMessage, RoundBundle
from app.schemas.trace import (
    ClosedRecord, DecideRecord, DetectedRecord, FaRecord, HaltRecord, ItSizeRecord,
    ItUncoveredRecord, MaskedRecord, MonitorRecord, OutputRecord, RtAssignRecord, StoppedRecord,
)
from app.services.agreement_process import ProtocolInstance, RoundOutcome, init_instance
from app.services.eig_core import is_prefix
from app.services.fault_detection import MALFORMED, PRESEEDED, DetectionEvent, FaultState, detection_fixpoint
from app.services.monitor_stack import MonitorContext, MonitorEvent, MonitorPipeline
from app.utils.codec import Codec

logger = logging.getLogger(__name__)

TOP_LEVEL = "1:1"
# Labels deeper than this are reported for the tree-size bound
DEEP_LABEL = 7


class ProcessNode:
    def __init__(
        self,
        pid: int,
        n: int,
        t: int,
        alphabet_size: int,
        input: int,
        preseeded_fa: Optional[List[int]] = None,
        settings: Optional[Settings] = None,
    ):
        self.pid = pid
        self.n = n
        self.t = t
        self.alphabet_size = alphabet_size
        self.input = input
        self.settings = settings or default_settings
        self.fault = FaultState(pid, n, t)
        self.fault.seed(preseeded_fa or [])
        self.instances: Dict[str, ProtocolInstance] = {}
        self.pipeline = MonitorPipeline(pid, n, t, input)
        self.round = 0
        self.halted = False
        self.halt_round: Optional[int] = None
        self.decision: Optional[int] = None
        self.records: List[BaseModel] = []
        self._preseeded = sorted(preseeded_fa or [])

    @property
    def top(self) -> Optional[ProtocolInstance]:
        return self.instances.get(TOP_LEVEL)

    def live_instances(self) -> List[ProtocolInstance]:
        return [inst for inst in self.instances.values() if not inst.stopped and not inst.deactivated]

    def _invoke(self, seq: int, phi: int, input: int) -> ProtocolInstance:
        key = f"{seq}:{self.round}"
        inst = init_instance(
            self.pid, input, phi, self.fault,
            alphabet_size=self.alphabet_size,
            allow_bad=key != TOP_LEVEL,
            key=key,
            start_round=self.round,
        )
        self.instances[key] = inst
        return inst

    def begin_round(self, r: int) -> None:
        self.round = r
        if r == 1:
            for suspect in self._preseeded:
                self.records.append(DetectedRecord(round=0, process=self.pid, suspect=suspect, source=PRESEEDED, known=True))
        if self.halted:
            return
        self._log_monitor(self.pipeline.begin_round(r, self._invoke))

    def compose(self, r: int) -> Optional[RoundBundle]:
        """The broadcast bundle for round r; None once halted"""
        if self.halted:
            return None
        eig = {}
        for inst in self.live_instances():
            entries = inst.outgoing(inst.local_round(r))
            if entries:
                eig[inst.key] = entries
        return RoundBundle(
            sender=self.pid,
            round=r,
            eig=eig,
            gossip=sorted(self.fault.faulty),
            monitor=self.pipeline.outgoing(r),
        )

    def _well_formed(self, sender: int, bundle: RoundBundle, r: int) -> bool:
        if bundle.sender != sender or bundle.round != r:
            return False
        if any(not 0 <= pid < self.n for pid in bundle.gossip):
            return False
        seen = set()
        for message in bundle.monitor:
            if (message.seq, message.kind) in seen:
                return False
            seen.add((message.seq, message.kind))
        return True

    def receive(self, r: int, bundles: Mapping[int, Optional[RoundBundle]]) -> None:
        """Ingest, detect, resolve and run the monitors for round r"""
        if self.halted:
            return
        accepted: Dict[int, RoundBundle] = {}
        for sender in sorted(bundles):
            bundle = bundles[sender]
            if bundle is None:
                continue
            if not self._well_formed(sender, bundle, r):
                logger.warning(f"p{self.pid} r{r}: malformed bundle from p{sender}")
                self._detect(r, DetectionEvent(suspect=sender, source=MALFORMED))
                continue
            accepted[sender] = bundle

        reports = [bundle.gossip_report() for _, bundle in sorted(accepted.items())]
        live = self.live_instances()
        for inst in live:
            local = inst.local_round(r)
            delivered = {sender: bundle.eig.get(inst.key) for sender, bundle in accepted.items()}
            for sender in inst.ingest(local, delivered):
                self._detect(r, DetectionEvent(suspect=sender, source=MALFORMED, instance=inst.key), added=True)

        log = detection_fixpoint(self.fault, live, reports, self.settings.retroactive_masking)
        for event in log.detections:
            self._detect(r, event, added=True)
        for mask in log.masks:
            self.records.append(MaskedRecord(round=r, process=self.pid, instance=mask.instance, label=Codec.format_label(mask.label)))

        for inst in live:
            self._log_outcome(r, inst, inst.finish_round())

        received: Dict[int, List[MonitorMessage]] = {sender: bundle.monitor for sender, bundle in accepted.items()}
        ctx = MonitorContext(
            round=r, n=self.n, t=self.t,
            known_faulty=len(self.fault.known),
            silent={q for q in range(self.n) if q not in accepted},
        )
        self._log_monitor(self.pipeline.end_round(ctx, received))

        if self.pipeline.globally_halted:
            self.halted = True
            self.halt_round = r
            self.decision = self.pipeline.global_decision
            self.records.append(DecideRecord(round=r, process=self.pid, value=self.decision, external=Codec.external(self.decision)))
            self.records.append(HaltRecord(round=r, process=self.pid))
            logger.debug(f"p{self.pid} r{r}: halts with {Codec.format_value(self.decision)}")

        self.fault.snapshot(r)
        self.records.append(FaRecord(round=r, process=self.pid, faulty=sorted(self.fault.faulty), known=sorted(self.fault.known)))
        self._log_tree(r)

    def _detect(self, r: int, event: DetectionEvent, added: bool = False) -> None:
        if not added:
            grew, _ = self.fault.add(event.suspect)
            if not grew:
                return
        self.records.append(DetectedRecord(
            round=r, process=self.pid, suspect=event.suspect, source=event.source,
            instance=event.instance, known=event.known,
        ))

    def _log_outcome(self, r: int, inst: ProtocolInstance, outcome: RoundOutcome) -> None:
        for mutation in outcome.mutations:
            label = Codec.format_label(mutation.label)
            if mutation.kind == "assign":
                self.records.append(RtAssignRecord(
                    round=r, process=self.pid, instance=inst.key, local_round=outcome.round,
                    label=label, value=mutation.value, rule=mutation.rule,
                ))
            else:
                self.records.append(ClosedRecord(round=r, process=self.pid, instance=inst.key, label=label, rule=mutation.rule))
        for event in outcome.detections:
            self._detect(r, event, added=True)
        if outcome.output_now:
            self.records.append(OutputRecord(round=r, process=self.pid, instance=inst.key, value=outcome.output))
        if outcome.stopped_now:
            self.records.append(StoppedRecord(round=r, process=self.pid, instance=inst.key))

    def _log_monitor(self, events: List[MonitorEvent]) -> None:
        for event in events:
            self.records.append(MonitorRecord(
                round=self.round, process=self.pid, seq=event.seq, action=event.action, value=event.value,
                phi=event.phi, instance=event.instance, rule=event.rule, early=event.early,
            ))

    def it_size(self) -> int:
        return sum(len(inst.it) for inst in self.instances.values())

    def _log_tree(self, r: int) -> None:
        self.records.append(ItSizeRecord(round=r, process=self.pid, size=self.it_size()))
        top = self.top
        if top is None or r < 2:
            return
        depth = r - 2
        puts = [(label, entry.round) for label, entry in top.rt.entries.items()]
        uncovered = []
        for label in top.it.labels_at(depth):
            if not label:
                continue
            if not any(stamp <= r and (is_prefix(put, label) or is_prefix(label, put)) for put, stamp in puts):
                uncovered.append(Codec.format_label(label))
        if uncovered:
            self.records.append(ItUncoveredRecord(round=r, process=self.pid, labels=uncovered))
        deep = [Codec.format_label(label) for label in top.it.labels_at(r) if len(label) > DEEP_LABEL]
        if deep:
            self.records.append(ItUncoveredRecord(round=r, process=self.pid, labels=deep, deep=True))

    def drain(self) -> List[BaseModel]:
        records, self.records = self.records, []
        return records
