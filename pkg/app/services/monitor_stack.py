"""
Monitor sequences: periodic D_phi invocations on v in {bot, BAD}, the early
flag exchange, halting rules, and the four-sequence pipeline with global
decision and halting.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Set

from app.core.exceptions import UndecidableError
from app.schemas.messages import MonitorMessage
from app.services.agreement_process import ProtocolInstance
from app.utils.codec import BAD, BOTTOM, Codec

logger = logging.getLogger(__name__)

SEQUENCES = (1, 2, 3, 4)


def phase_of(seq: int, r: int) -> Optional[int]:
    """Phase of sequence seq at round r, None before it starts"""
    position = r + 1 - seq
    if position <= 0:
        return None
    return position % 4


@dataclass
class MonitorEvent:
    seq: int
    action: str
    value: Optional[int] = None
    phi: Optional[int] = None
    instance: Optional[str] = None
    rule: Optional[str] = None
    early: Optional[bool] = None


@dataclass
class MonitorContext:
    """What a sequence sees of its process at the end of a round"""
    round: int
    n: int
    t: int
    known_faulty: int
    v_messages: Dict[int, int] = field(default_factory=dict)
    early_messages: Dict[int, bool] = field(default_factory=dict)
    silent: Set[int] = field(default_factory=set)


class MonitorSequence:
    def __init__(self, index: int, pid: int, n: int, t: int, input: int):
        self.index = index
        self.pid = pid
        self.n = n
        self.t = t
        self.input = input
        self.v = BOTTOM
        self.early = False
        self.last_early_seen: Dict[int, bool] = {}
        self.invoked: List[ProtocolInstance] = []
        self.decided: Optional[int] = None
        self.decided_round: Optional[int] = None
        self.halted = False
        self.halt_round: Optional[int] = None
        self.pending_halt_round: Optional[int] = None
        self.prev_count = 0

    def started(self, r: int) -> bool:
        return phase_of(self.index, r) is not None

    def invocation(self, r: int) -> Optional[Dict[str, int]]:
        """phi and input for an invocation at the beginning of round r, if any"""
        if self.halted or phase_of(self.index, r) != 1:
            return None
        if self.index == 1 and r == 1:
            return {"phi": self.t, "input": self.input}
        if 1 < r < self.t - 1:
            return {"phi": self.t + 1 - r, "input": self.v}
        return None

    def outgoing(self, r: int) -> List[MonitorMessage]:
        if self.halted:
            return []
        phase = phase_of(self.index, r)
        if phase == 3:
            return [MonitorMessage(seq=self.index, kind="v", value=self.v)]
        if phase == 0:
            return [MonitorMessage(seq=self.index, kind="early", early=self.early)]
        return []

    def _early_or_halted(self, ctx: MonitorContext) -> int:
        return sum(
            1 for q in range(self.n)
            if self.last_early_seen.get(q, False) or q in ctx.silent
        )

    def monitor_phase(self, ctx: MonitorContext) -> List[MonitorEvent]:
        """End-of-round phase work"""
        events: List[MonitorEvent] = []
        if self.halted:
            return events
        r = ctx.round
        phase = phase_of(self.index, r)
        if phase == 2:
            self.v = BAD if ctx.known_faulty >= r + 3 else BOTTOM
            events.append(MonitorEvent(seq=self.index, action="set_v", value=self.v))
        elif phase == 3:
            bad_votes = sum(1 for value in ctx.v_messages.values() if value == BAD)
            self.early = bad_votes <= self.t
            events.append(MonitorEvent(seq=self.index, action="set_early", early=self.early))
        elif phase == 0:
            self.last_early_seen.update(ctx.early_messages)
            trusted = sum(1 for flag in self.last_early_seen.values() if flag)
            if trusted >= self.t + 1 or all(inst.output is not None for inst in self.invoked):
                if self.v != BOTTOM:
                    events.append(MonitorEvent(seq=self.index, action="set_v", value=BOTTOM))
                self.v = BOTTOM
        return events

    def monitor_decision(self) -> int:
        if any(inst.output == BAD for inst in self.invoked):
            return BAD
        if self.index != 1:
            return BOTTOM
        top = self.invoked[0] if self.invoked else None
        if top is None or top.output is None:
            raise UndecidableError(f"p{self.pid}: sequence 1 must decide before D_t produced an output")
        return top.output

    def _decidable(self) -> bool:
        """Sequence 1 can only decide once D_t has an output"""
        if self.index != 1 or any(inst.output == BAD for inst in self.invoked):
            return True
        return bool(self.invoked) and self.invoked[0].output is not None

    def _decide(self, r: int, events: List[MonitorEvent], rule: str) -> None:
        if self.decided is None:
            self.decided = self.monitor_decision()
            self.decided_round = r
            events.append(MonitorEvent(seq=self.index, action="decide", value=self.decided, rule=rule))

    def _halt(self, r: int, events: List[MonitorEvent], rule: str) -> None:
        self._decide(r, events, rule)
        self.halted = True
        self.halt_round = r
        for inst in self.invoked:
            inst.deactivated = True
        events.append(MonitorEvent(seq=self.index, action="halt", value=self.decided, rule=rule))
        logger.debug(f"p{self.pid} r{r}: sequence {self.index} halts on {Codec.format_value(self.decided)} ({rule})")

    def _plan_halt(self, r: int, delay: int, events: List[MonitorEvent], rule: str) -> None:
        self._decide(r, events, rule)
        target = min(r + delay, self.t + 1)
        if self.pending_halt_round is None or target < self.pending_halt_round:
            self.pending_halt_round = target

    def evaluate_halting(self, ctx: MonitorContext) -> List[MonitorEvent]:
        events: List[MonitorEvent] = []
        r = ctx.round
        if self.halted or not self.started(r):
            return events
        count = self._early_or_halted(ctx)
        prev_count, self.prev_count = self.prev_count, count

        if any(inst.stopped and inst.output == BAD for inst in self.invoked):
            self._halt(r, events, "HBAD")
            return events
        if any(inst.output == BAD for inst in self.invoked):
            self._plan_halt(r, 2, events, "HBAD")

        all_stopped = all(inst.stopped for inst in self.invoked)
        latest = self.invoked[-1] if self.invoked else None
        only_latest = (
            latest is not None and not latest.stopped
            and all(inst.stopped for inst in self.invoked[:-1])
        )
        phase = phase_of(self.index, r)

        if phase == 1:
            if all_stopped:
                self._halt(r, events, "H1")
            elif only_latest and self._decidable():
                if count >= self.n - self.t:
                    self._halt(r, events, "H1")
                elif count >= self.t + 1:
                    self._plan_halt(r, 2, events, "H1")
        elif phase == 2:
            if all_stopped:
                self._halt(r, events, "H2")
            elif only_latest and self._decidable():
                if prev_count >= self.n - self.t:
                    self._halt(r, events, "H2")
                elif prev_count >= self.t + 1:
                    self._plan_halt(r, 1, events, "H2")
        elif phase == 3:
            if all_stopped:
                self._halt(r, events, "H3")
        elif all_stopped and count >= self.n - self.t:
            self._halt(r, events, "H4")

        if not self.halted and self.pending_halt_round is not None and r >= self.pending_halt_round:
            self._halt(r, events, "planned")
        if not self.halted and r >= self.t + 1:
            self._halt(r, events, "last_round")
        return events


class MonitorPipeline:
    """The basic sequence and three offset copies, plus the global decision"""

    def __init__(self, pid: int, n: int, t: int, input: int):
        self.pid = pid
        self.t = t
        self.sequences: Dict[int, MonitorSequence] = {
            index: MonitorSequence(index, pid, n, t, input) for index in SEQUENCES
        }
        self.global_decision: Optional[int] = None
        self.globally_halted = False
        self.halt_round: Optional[int] = None

    def begin_round(self, r: int, invoke: Callable[[int, int, int], ProtocolInstance]) -> List[MonitorEvent]:
        """Phase-1 invocations; invoke(seq, phi, input) builds and registers the instance"""
        events = []
        for index, seq in self.sequences.items():
            plan = seq.invocation(r)
            if plan is None:
                continue
            inst = invoke(index, plan["phi"], plan["input"])
            seq.invoked.append(inst)
            events.append(MonitorEvent(seq=index, action="invoke", value=plan["input"], phi=plan["phi"], instance=inst.key))
        return events

    def outgoing(self, r: int) -> List[MonitorMessage]:
        messages: List[MonitorMessage] = []
        for seq in self.sequences.values():
            messages.extend(seq.outgoing(r))
        return messages

    def end_round(self, ctx: MonitorContext, received: Mapping[int, List[MonitorMessage]]) -> List[MonitorEvent]:
        events: List[MonitorEvent] = []
        for index, seq in self.sequences.items():
            seq_ctx = MonitorContext(
                round=ctx.round, n=ctx.n, t=ctx.t, known_faulty=ctx.known_faulty, silent=ctx.silent,
                v_messages={
                    q: m.value for q, msgs in received.items() for m in msgs
                    if m.seq == index and m.kind == "v" and m.value is not None
                },
                early_messages={
                    q: bool(m.early) for q, msgs in received.items() for m in msgs
                    if m.seq == index and m.kind == "early"
                },
            )
            events.extend(seq.monitor_phase(seq_ctx))
            events.extend(seq.evaluate_halting(seq_ctx))
        events.extend(self.global_decide_and_halt(ctx.round))
        return events

    def global_decide_and_halt(self, r: int) -> List[MonitorEvent]:
        if self.globally_halted:
            return []
        halted = [seq for seq in self.sequences.values() if seq.halted]
        started = [seq for seq in self.sequences.values() if seq.started(r)]
        bad_halt = any(seq.decided == BAD for seq in halted)
        if not bad_halt and not all(seq.halted for seq in started):
            return []
        decisions = [seq.decided for seq in self.sequences.values() if seq.decided is not None]
        if BAD in decisions:
            self.global_decision = BAD
        else:
            self.global_decision = self.sequences[1].decided
        self.globally_halted = True
        self.halt_round = r
        for seq in self.sequences.values():
            for inst in seq.invoked:
                inst.deactivated = True
        return [MonitorEvent(seq=0, action="global_halt", value=self.global_decision)]


def monitor_phase(seq: MonitorSequence, ctx: MonitorContext) -> List[MonitorEvent]:
    return seq.monitor_phase(ctx)


def evaluate_halting(seq: MonitorSequence, ctx: MonitorContext) -> List[MonitorEvent]:
    return seq.evaluate_halting(ctx)


def monitor_decision(seq: MonitorSequence) -> int:
    return seq.monitor_decision()


def global_decide_and_halt(pipeline: MonitorPipeline, r: int) -> List[MonitorEvent]:
    return pipeline.global_decide_and_halt(r)
