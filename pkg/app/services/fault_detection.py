"""
Fault detection: F/FA gossip thresholds, the Not Voter, Not IT-to-RT and
Not Masking rules, and masking of detected processes' messages.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Set, Tuple

from app.schemas.messages import GossipReport
from app.services.eig_core import InfoTree
from app.services.resolve_engine import candidate_values, compute_support, split_label
from app.utils.codec import BOTTOM, Codec, Label

if TYPE_CHECKING:
    from app.services.agreement_process import ProtocolInstance

logger = logging.getLogger(__name__)

NOT_VOTER = "NOTVOTER"
NOT_IT_TO_RT = "NOTITTORT"
NOT_MASKING = "NOTMASKING"
GOSSIP = "gossip"
MALFORMED = "malformed"
PRESEEDED = "preseeded"


@dataclass(frozen=True)
class DetectionEvent:
    suspect: int
    source: str
    instance: Optional[str] = None
    known: bool = False


@dataclass(frozen=True)
class MaskEvent:
    instance: str
    label: Label


@dataclass
class DetectionLog:
    detections: List[DetectionEvent] = field(default_factory=list)
    masks: List[MaskEvent] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.detections or self.masks)

    def extend(self, other: "DetectionLog") -> None:
        self.detections.extend(other.detections)
        self.masks.extend(other.masks)


class FaultState:
    """Process-level F and FA, shared by every instance the process runs"""

    def __init__(self, pid: int, n: int, t: int):
        self.pid = pid
        self.n = n
        self.t = t
        self.faulty: Set[int] = set()
        self.known: Set[int] = set()
        self.fa_round_log: Dict[int, List[int]] = {}

    def add(self, suspect: int, known: bool = False) -> Tuple[bool, bool]:
        """Add to F (and FA); returns whether F, FA grew. A process never suspects itself."""
        if suspect == self.pid:
            logger.warning(f"p{self.pid}: refusing to add itself to F")
            return False, False
        new_f = suspect not in self.faulty
        self.faulty.add(suspect)
        new_fa = False
        if known and suspect not in self.known:
            self.known.add(suspect)
            new_fa = True
        return new_f, new_fa

    def seed(self, ids: Sequence[int]) -> None:
        for pid in ids:
            self.add(pid, known=True)

    def snapshot(self, round: int) -> None:
        self.fa_round_log[round] = sorted(self.known)


def merge_gossip(fs: FaultState, reports: Sequence[GossipReport], t: int) -> Tuple[Set[int], Set[int]]:
    """Ids reported by t+1 distinct senders join F, by 2t+1 also FA.

    The process's own report arrives through self-delivery and counts as one list.
    """
    counts: Dict[int, int] = {}
    seen: Set[int] = set()
    for report in reports:
        if report.sender in seen:
            continue
        seen.add(report.sender)
        for suspect in set(report.suspects):
            counts[suspect] = counts.get(suspect, 0) + 1

    new_f: Set[int] = set()
    new_fa: Set[int] = set()
    for suspect in sorted(counts):
        if suspect == fs.pid or not 0 <= suspect < fs.n:
            continue
        if counts[suspect] >= 2 * t + 1:
            grew_f, grew_fa = fs.add(suspect, known=True)
            if grew_f:
                new_f.add(suspect)
            if grew_fa:
                new_fa.add(suspect)
        elif counts[suspect] >= t + 1:
            grew_f, _ = fs.add(suspect)
            if grew_f:
                new_f.add(suspect)
    return new_f, new_fa


def detect_not_voter(inst: "ProtocolInstance") -> Set[int]:
    r = inst.round
    found: Set[int] = set()
    if r < 2:
        return found
    faulty = inst.fault.faulty
    for label in inst.it.labels_at(r - 1):
        sigma, w = split_label(label)
        if w == inst.pid or w in faulty or w in found:
            continue
        if inst.rt.lookup(label) is not None or not inst.it.is_active(label):
            continue
        value = inst.it.get(label)
        echoes = sum(
            1 for u in range(inst.n)
            if u not in label and inst.it.get(label + (u,)) == value
        )
        if echoes < inst.n - inst.t - 1:
            logger.debug(f"p{inst.pid} [{inst.key}] r{r}: {NOT_VOTER} on {Codec.format_label(label)}")
            found.add(w)
    return found


def detect_not_it_to_rt(inst: "ProtocolInstance") -> Set[int]:
    r = inst.round
    found: Set[int] = set()
    if r < 3:
        return found
    faulty = inst.fault.faulty
    for label in inst.it.labels_at(r - 2):
        sigma, w = split_label(label)
        if w == inst.pid or w in faulty or w in found:
            continue
        # a branch this process closed holds no echoes below it
        if inst.rt.lookup(sigma) is not None or not inst.it.is_active(label):
            continue
        has_voters = any(
            len(compute_support(inst.it, sigma, w, d, inst.n, inst.t).voters) >= inst.n - inst.t
            for d in candidate_values(inst.it, label, inst.n)
        )
        if not has_voters:
            logger.debug(f"p{inst.pid} [{inst.key}] r{r}: {NOT_IT_TO_RT} on {Codec.format_label(label)}")
            found.add(w)
    return found


def leaning_targets(it: InfoTree, label: Label, n: int, t: int) -> Set[int]:
    """Values d with at least t+1 unconfirmed voters of (sigma, w, d)"""
    sigma, w = split_label(label)
    return {
        d for d in candidate_values(it, label, n)
        if len(compute_support(it, sigma, w, d, n, t).unconfirmed_voters) >= t + 1
    }


def detect_not_masking(inst: "ProtocolInstance") -> Tuple[List[Label], Dict[int, List[Label]]]:
    """Mask unmasked relays of leaning nodes; returns masked labels and deferred suspects"""
    r = inst.round
    masked: List[Label] = []
    deferred: Dict[int, List[Label]] = {}
    if r < 4:
        return masked, deferred
    faulty = inst.fault.faulty
    for label in inst.it.labels_at(r - 3):
        targets = leaning_targets(inst.it, label, inst.n, inst.t)
        if not targets:
            continue
        w = label[-1]
        for u in range(inst.n):
            if u in label or u == inst.pid or u in faulty:
                continue
            node = label + (u,)
            relayed: Dict[int, int] = {}
            for v in range(inst.n):
                if v in node:
                    continue
                value = inst.it.get(node + (v,))
                if value is not None:
                    relayed[value] = relayed.get(value, 0) + 1
            if not any(count >= inst.t + 1 and value not in targets for value, count in relayed.items()):
                continue
            for depth in (r - 1, r):
                for other in inst.it.labels_at(depth):
                    if other[-2:] != (w, u) or len(other) <= len(node):
                        continue
                    if inst.it.get(other) == BOTTOM:
                        continue
                    inst.it.set(other, BOTTOM)
                    masked.append(other)
                    deferred.setdefault(u, []).append(other[:-1])
    return masked, deferred


def remask(inst: "ProtocolInstance", suspect: int, retroactive: bool = False) -> List[Label]:
    """Receive-rule masking for a process that just entered F"""
    depths = range(1, inst.round + 1) if retroactive else (inst.round,)
    masked = []
    for depth in depths:
        for label in inst.it.labels_at(depth):
            if label[-1] == suspect and inst.it.get(label) != BOTTOM:
                inst.it.set(label, BOTTOM)
                masked.append(label)
    return masked


def detection_fixpoint(
    fault: FaultState,
    instances: Sequence["ProtocolInstance"],
    reports: Sequence[GossipReport],
    retroactive: bool = False,
) -> DetectionLog:
    """Alternate gossip merging and the detection rules until nothing changes"""
    log = DetectionLog()
    while True:
        step = DetectionLog()
        new_f, new_fa = merge_gossip(fault, reports, fault.t)
        added = sorted(new_f | new_fa)
        step.detections.extend(
            DetectionEvent(suspect=suspect, source=GOSSIP, known=suspect in new_fa) for suspect in added
        )

        for inst in instances:
            found = detect_not_voter(inst)
            rule_hits = [(suspect, NOT_VOTER) for suspect in sorted(found)]
            rule_hits += [(suspect, NOT_IT_TO_RT) for suspect in sorted(detect_not_it_to_rt(inst) - found)]
            for suspect, rule in rule_hits:
                grew, _ = fault.add(suspect)
                if grew:
                    added.append(suspect)
                    step.detections.append(DetectionEvent(suspect=suspect, source=rule, instance=inst.key))

            masked, deferred = detect_not_masking(inst)
            step.masks.extend(MaskEvent(instance=inst.key, label=label) for label in masked)
            for suspect, labels in deferred.items():
                inst.deferred.setdefault(suspect, []).extend(labels)

        for suspect in added:
            for inst in instances:
                step.masks.extend(
                    MaskEvent(instance=inst.key, label=label)
                    for label in remask(inst, suspect, retroactive)
                )

        if not step:
            return log
        log.extend(step)
