"""
EIG tree substrate shared by the information tree (IT) and the resolve tree (RT).

Labels are repetition-free tuples of process ids; the root is the empty tuple.
Coloring is lazy: reading a node that has no entry of its own returns the value
of its nearest assigned ancestor.
"""
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Set

from app.core.exceptions import AlreadyAssigned, DepthError, RepetitionError
from app.utils.codec import Codec, Label

logger = logging.getLogger(__name__)

ROOT: Label = ()


class PutRule(str, Enum):
    it_rule = "ITRULE"
    last_round_rule = "LASTROUNDRULE"
    gc_rule = "GCRULE"
    rgc_rule = "RGCRULE"
    s_rule = "SRULE"
    sroot_rule = "SROOTRULE"
    early_it_rule = "EARLYITRULE"
    strong_it_rule = "STRONGITRULE"


# Closing-only rule name used in the mutation log
DECAY_RULE = "DECAYRULE"


def make_label(ids: Sequence[int], t: int) -> Label:
    """Build a label, rejecting repeats and labels deeper than t+1"""
    label = tuple(int(pid) for pid in ids)
    if len(set(label)) != len(label):
        raise RepetitionError(f"label {Codec.format_label(label)} repeats a process id")
    if len(label) > t + 1:
        raise DepthError(f"label {Codec.format_label(label)} is deeper than t+1={t + 1}")
    return label


def children(label: Label, n: int) -> List[Label]:
    """Children in ascending id order; a node at depth k has n-k of them"""
    return [label + (pid,) for pid in range(n) if pid not in label]


def is_prefix(prefix: Label, label: Label) -> bool:
    return len(prefix) <= len(label) and label[:len(prefix)] == prefix


def prefixes(label: Label) -> List[Label]:
    """Proper prefixes, nearest first"""
    return [label[:k] for k in range(len(label) - 1, -1, -1)]


class InfoTree:
    """Raw received values per node, plus the set of closed branch roots"""

    def __init__(self):
        self.entries: Dict[Label, int] = {}
        self.closed: Set[Label] = set()
        self._by_depth: Dict[int, List[Label]] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, label: Label) -> bool:
        return label in self.entries

    def get(self, label: Label) -> Optional[int]:
        return self.entries.get(label)

    def set(self, label: Label, value: int) -> None:
        if label not in self.entries:
            if label and label[:-1] not in self.entries:
                raise DepthError(f"parent of {Codec.format_label(label)} is not in the tree")
            self._by_depth.setdefault(len(label), []).append(label)
        self.entries[label] = value

    def labels_at(self, depth: int) -> List[Label]:
        return self._by_depth.get(depth, [])

    def close(self, label: Label) -> bool:
        """Close the branch rooted at label; False when it was already closed"""
        if not self.is_active(label):
            return False
        self.closed.add(label)
        return True

    def is_active(self, label: Label) -> bool:
        if not self.closed:
            return True
        if label in self.closed:
            return False
        return not any(prefix in self.closed for prefix in prefixes(label))

    def active_at(self, depth: int) -> List[Label]:
        return [label for label in self.labels_at(depth) if self.is_active(label)]


@dataclass(frozen=True)
class RtEntry:
    value: int
    rule: Optional[PutRule]
    round: int
    colored_from: Optional[Label] = None

    @property
    def is_put(self) -> bool:
        return self.colored_from is None

    @property
    def provenance(self) -> str:
        if self.colored_from is None:
            return f"put:{self.rule.value}"
        return f"colored:{Codec.format_label(self.colored_from)}"


class ResolveTree:
    """Write-once resolved values; descendants of an entry read as colored"""

    def __init__(self):
        self.entries: Dict[Label, RtEntry] = {}
        # Proper prefixes of every entry, used to prune the frontier walk
        self._above: Set[Label] = set()

    def __len__(self) -> int:
        return len(self.entries)

    def assign(self, label: Label, value: int, rule: PutRule, round: int) -> RtEntry:
        existing = self.lookup(label)
        if existing is not None:
            raise AlreadyAssigned(
                f"{Codec.format_label(label)} already resolved ({existing.provenance})",
                label=Codec.format_label(label),
            )
        entry = RtEntry(value=value, rule=rule, round=round)
        self.entries[label] = entry
        self._above.update(label[:k] for k in range(len(label)))
        return entry

    def lookup(self, label: Label) -> Optional[RtEntry]:
        entry = self.entries.get(label)
        if entry is not None:
            return entry
        for prefix in prefixes(label):
            ancestor = self.entries.get(prefix)
            if ancestor is not None:
                return RtEntry(value=ancestor.value, rule=None, round=ancestor.round, colored_from=prefix)
        return None

    def value(self, label: Label) -> Optional[int]:
        entry = self.lookup(label)
        return None if entry is None else entry.value

    def has_entries_below(self, label: Label) -> bool:
        return label in self._above

    def put_entries(self) -> Dict[Label, RtEntry]:
        """The put-tree view: puts other than the last-round copy"""
        return {
            label: entry for label, entry in self.entries.items()
            if entry.rule is not PutRule.last_round_rule
        }

    def frontier_exists(self, n: int, phi: int) -> bool:
        leaf_depth = phi + 1

        def covered(label: Label) -> bool:
            if label in self.entries:
                return True
            if len(label) >= leaf_depth or label not in self._above:
                return False
            return all(covered(child) for child in children(label, n))

        return covered(ROOT)


def rt_assign(rt: ResolveTree, label: Label, value: int, rule: PutRule, round: int) -> RtEntry:
    return rt.assign(label, value, rule, round)


def rt_lookup(rt: ResolveTree, label: Label) -> Optional[RtEntry]:
    return rt.lookup(label)


def frontier_exists(rt: ResolveTree, n: int, phi: int) -> bool:
    return rt.frontier_exists(n, phi)


def bfs_order(labels: Iterable[Label]) -> List[Label]:
    return sorted(labels, key=lambda label: (len(label), label))
