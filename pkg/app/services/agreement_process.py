"""
One D_phi run at one process: send and receive rules, the end-of-round
pipeline, output and stopping.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

from app.core.exceptions import ConfigError, MalformedMessage
from app.schemas.messages import EigEntry, GossipReport
from app.services.eig_core import ROOT, InfoTree, ResolveTree
from app.services.fault_detection import DetectionLog, FaultState, NOT_MASKING, DetectionEvent, detection_fixpoint
from app.services.resolve_engine import Mutation, resolve_fixpoint
from app.utils.codec import BAD, BOTTOM, Codec, Label

logger = logging.getLogger(__name__)


@dataclass
class RoundOutcome:
    round: int
    mutations: List[Mutation] = field(default_factory=list)
    detections: List[DetectionEvent] = field(default_factory=list)
    output: Optional[int] = None
    output_now: bool = False
    stopped_now: bool = False


def value_domain(alphabet_size: int, allow_bad: bool = False) -> FrozenSet[int]:
    values = set(range(alphabet_size)) | {BOTTOM}
    if allow_bad:
        values.add(BAD)
    return frozenset(values)


class ProtocolInstance:
    """State of D_phi at one process; `round` is the local round, 1 at invocation"""

    def __init__(
        self,
        pid: int,
        n: int,
        t: int,
        phi: int,
        input: int,
        fault: FaultState,
        domain: FrozenSet[int],
        key: str = "1:1",
        start_round: int = 1,
    ):
        self.pid = pid
        self.n = n
        self.t = t
        self.phi = phi
        self.input = input
        self.fault = fault
        self.domain = domain
        self.key = key
        self.start_round = start_round
        self.round = 0
        self.it = InfoTree()
        self.rt = ResolveTree()
        self.it.set(ROOT, input)
        self.output: Optional[int] = None
        self.output_round: Optional[int] = None
        self.stopped = False
        self.stop_round: Optional[int] = None
        # set when the owning monitor sequence or the process halts
        self.deactivated = False
        # suspects from Not Masking, keyed to the sigma''w nodes that must be resolved to clear them
        self.deferred: Dict[int, List[Label]] = {}

    def local_round(self, global_round: int) -> int:
        return global_round - self.start_round + 1

    def outgoing(self, r: int) -> List[EigEntry]:
        if self.stopped:
            return []
        return [
            (label, self.it.get(label))
            for label in self.it.active_at(r - 1)
            if self.pid not in label
        ]

    def _validate(self, sender: int, entries: Sequence[EigEntry], r: int) -> Dict[Label, int]:
        relayed: Dict[Label, int] = {}
        for raw_label, value in entries:
            label = tuple(raw_label)
            if len(label) != r - 1 or sender in label or len(set(label)) != len(label):
                raise MalformedMessage(f"bad label {Codec.format_label(label)} from p{sender}", sender=sender)
            if any(not 0 <= pid < self.n for pid in label):
                raise MalformedMessage(f"unknown id in {Codec.format_label(label)} from p{sender}", sender=sender)
            if value not in self.domain:
                raise MalformedMessage(f"value {value} outside the domain from p{sender}", sender=sender)
            if label in relayed:
                raise MalformedMessage(f"duplicate relay of {Codec.format_label(label)} from p{sender}", sender=sender)
            relayed[label] = value
        return relayed

    def ingest(self, r: int, delivered: Mapping[int, Optional[Sequence[EigEntry]]]) -> List[int]:
        """Apply the receive rule for local round r; returns senders found malformed"""
        self.round = r
        malformed: List[int] = []
        relays: Dict[int, Dict[Label, int]] = {}
        for sender in sorted(delivered):
            entries = delivered[sender]
            if entries is None:
                continue
            try:
                relays[sender] = self._validate(sender, entries, r)
            except MalformedMessage as exc:
                logger.warning(f"p{self.pid} [{self.key}] r{r}: {exc.message}")
                self.fault.add(sender)
                malformed.append(sender)

        faulty = self.fault.faulty
        for sigma in list(self.it.active_at(r - 1)):
            parent_value = self.it.get(sigma)
            for x in range(self.n):
                if x in sigma:
                    continue
                if x in faulty:
                    value = BOTTOM
                else:
                    value = relays.get(x, {}).get(sigma, parent_value)
                self.it.set(sigma + (x,), value)
        return malformed

    def finish_round(self) -> RoundOutcome:
        r = self.round
        outcome = RoundOutcome(round=r)
        outcome.mutations = resolve_fixpoint(self)

        for suspect in sorted(self.deferred):
            unresolved = [label for label in self.deferred[suspect] if self.rt.lookup(label) is None]
            if unresolved:
                grew, _ = self.fault.add(suspect)
                if grew:
                    outcome.detections.append(DetectionEvent(suspect=suspect, source=NOT_MASKING, instance=self.key))
        self.deferred.clear()

        if self.output is None:
            root = self.rt.lookup(ROOT)
            if root is not None:
                self.output = root.value
            elif self.rt.frontier_exists(self.n, self.phi):
                self.output = BOTTOM
            if self.output is not None:
                self.output_round = r
                outcome.output_now = True
                logger.debug(f"p{self.pid} [{self.key}] r{r}: output {Codec.format_value(self.output)}")
        outcome.output = self.output

        if not self.stopped and (r >= self.phi + 1 or not self.it.active_at(r)):
            self.stopped = True
            self.stop_round = r
            outcome.stopped_now = True
        return outcome


def init_instance(
    pid: int,
    input: int,
    phi: int,
    fault: FaultState,
    alphabet_size: int = 2,
    allow_bad: bool = False,
    key: str = "1:1",
    start_round: int = 1,
) -> ProtocolInstance:
    if fault.n <= 3 * fault.t:
        raise ConfigError(f"n={fault.n} must exceed 3t={3 * fault.t}", n=fault.n, t=fault.t)
    return ProtocolInstance(
        pid=pid,
        n=fault.n,
        t=fault.t,
        phi=phi,
        input=input,
        fault=fault,
        domain=value_domain(alphabet_size, allow_bad),
        key=key,
        start_round=start_round,
    )


def outgoing(inst: ProtocolInstance, r: int) -> List[EigEntry]:
    return inst.outgoing(r)


def ingest(inst: ProtocolInstance, r: int, delivered: Mapping[int, Optional[Sequence[EigEntry]]]) -> List[int]:
    return inst.ingest(r, delivered)


def end_of_round(
    inst: ProtocolInstance,
    r: int,
    reports: Sequence[GossipReport] = (),
    retroactive: bool = False,
) -> Tuple[DetectionLog, RoundOutcome]:
    """Detection fixpoint, then resolve, output and stopping, for a lone instance"""
    inst.round = r
    detections = detection_fixpoint(inst.fault, [inst], reports, retroactive)
    return detections, inst.finish_round()
