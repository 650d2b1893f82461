"""
Resolve rules: IT-to-RT rules, RT-only rules and branch-closing rules,
applied to one protocol instance until nothing changes.
"""
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Dict, FrozenSet, List, Optional, Set, Tuple

from app.core.exceptions import DivergenceError
from app.services.eig_core import DECAY_RULE, ROOT, InfoTree, PutRule, ResolveTree, bfs_order
from app.utils.codec import BOTTOM, Codec, Label

if TYPE_CHECKING:
    from app.services.agreement_process import ProtocolInstance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Mutation:
    kind: str  # "assign" or "close"
    label: Label
    rule: str
    value: Optional[int] = None


@dataclass
class SupportEvidence:
    supporters: Dict[int, Set[int]] = field(default_factory=dict)
    confirmed: Set[int] = field(default_factory=set)
    voters: Set[int] = field(default_factory=set)
    unconfirmed_voters: Set[int] = field(default_factory=set)


@dataclass
class RtSupportEvidence:
    rt_confirmed: Set[int] = field(default_factory=set)
    rt_voters: Set[int] = field(default_factory=set)


def split_label(label: Label) -> Tuple[Label, Optional[int]]:
    """sigma and w of a label sigma.w; the root has no w"""
    if not label:
        return ROOT, None
    return label[:-1], label[-1]


def compute_support(it: InfoTree, sigma: Label, w: Optional[int], d: int, n: int, t: int) -> SupportEvidence:
    base = sigma if w is None else sigma + (w,)
    echoers = [pid for pid in range(n) if pid not in base]
    w_says = w is not None and it.get(base) == d
    need = n - t

    supporters: Dict[int, Set[int]] = {}
    for v in echoers:
        child = base + (v,)
        backing: Set[int] = {w} if w_says else set()
        if it.get(child) == d:
            backing.add(v)
        for u in echoers:
            if u != v and it.get(child + (u,)) == d:
                backing.add(u)
        supporters[v] = backing

    evidence = SupportEvidence(supporters=supporters)
    evidence.confirmed = {v for v, backing in supporters.items() if len(backing) >= need}
    if w_says:
        evidence.confirmed.add(w)
        evidence.voters.add(w)
        evidence.unconfirmed_voters.add(w)

    for u in echoers:
        # an echoer that relayed d for sigma.w also backs w itself
        backs_w = w_says and it.get(base + (u,)) == d
        supported = [v for v in echoers if u in supporters[v]]
        unconfirmed = len(supported) + (1 if backs_w else 0)
        if unconfirmed >= need:
            evidence.unconfirmed_voters.add(u)
        confirmed = sum(1 for v in supported if v in evidence.confirmed) + (1 if backs_w else 0)
        if confirmed >= need:
            evidence.voters.add(u)
    return evidence


def candidate_values(it: InfoTree, label: Label, n: int, depth: int = 2) -> List[int]:
    """Values seen at label and its descendants down to the given depth, ascending"""
    seen: Set[int] = set()
    frontier = [label]
    for level in range(depth + 1):
        next_frontier = []
        for node in frontier:
            value = it.get(node)
            if value is None:
                continue
            seen.add(value)
            if level < depth:
                next_frontier.extend(node + (pid,) for pid in range(n) if pid not in node)
        frontier = next_frontier
    return sorted(seen)


def _rt_candidates(rt: ResolveTree, label: Label, n: int) -> List[int]:
    seen: Set[int] = set()
    for v in range(n):
        if v in label:
            continue
        child = label + (v,)
        value = rt.value(child)
        if value is not None:
            seen.add(value)
            continue
        for u in range(n):
            if u not in child:
                value = rt.value(child + (u,))
                if value is not None:
                    seen.add(value)
    return sorted(seen)


def compute_rt_support(rt: ResolveTree, sigma: Label, w: Optional[int], d: int, n: int, t: int) -> RtSupportEvidence:
    base = sigma if w is None else sigma + (w,)
    echoers = [pid for pid in range(n) if pid not in base]
    evidence = RtSupportEvidence()

    for v in echoers:
        child = base + (v,)
        if rt.value(child) == d:
            evidence.rt_confirmed.add(v)
            continue
        agreeing = sum(1 for u in echoers if u != v and rt.value(child + (u,)) == d)
        if agreeing >= t + 1:
            evidence.rt_confirmed.add(v)

    for u in echoers:
        backed = 0
        for v in evidence.rt_confirmed:
            if v == u:
                if rt.value(base + (u,)) == d:
                    backed += 1
            elif rt.value(base + (v, u)) == d:
                backed += 1
        if backed >= n - t:
            evidence.rt_voters.add(u)
    return evidence


def _assign(inst: "ProtocolInstance", label: Label, value: int, rule: PutRule) -> Mutation:
    inst.rt.assign(label, value, rule, inst.round)
    logger.debug(f"p{inst.pid} [{inst.key}] r{inst.round}: {rule.value} {Codec.format_label(label)} := {Codec.format_value(value)}")
    return Mutation(kind="assign", label=label, rule=rule.value, value=value)


def apply_it_rule(inst: "ProtocolInstance", label: Label) -> Optional[Mutation]:
    if inst.rt.lookup(label) is not None:
        return None
    sigma, w = split_label(label)
    winners = []
    for d in candidate_values(inst.it, label, inst.n):
        evidence = compute_support(inst.it, sigma, w, d, inst.n, inst.t)
        if len(evidence.voters) >= inst.n - inst.t:
            winners.append(d)
    if not winners:
        return None
    if len(winners) > 1:
        logger.warning(
            f"p{inst.pid} [{inst.key}] r{inst.round}: ITRULE evidence for several values at "
            f"{Codec.format_label(label)}: {winners}, taking the smallest"
        )
    return _assign(inst, label, winners[0], PutRule.it_rule)


def apply_last_round_rule(inst: "ProtocolInstance") -> List[Mutation]:
    if inst.round != inst.phi + 1:
        return []
    log = []
    for label in inst.it.labels_at(inst.phi + 1):
        if inst.rt.lookup(label) is None:
            log.append(_assign(inst, label, inst.it.get(label), PutRule.last_round_rule))
    return log


def apply_gc_rule(inst: "ProtocolInstance", label: Label) -> Optional[Mutation]:
    if inst.rt.lookup(label) is not None or not inst.rt.has_entries_below(label):
        return None
    sigma, w = split_label(label)
    for d in _rt_candidates(inst.rt, label, inst.n):
        evidence = compute_rt_support(inst.rt, sigma, w, d, inst.n, inst.t)
        if len(evidence.rt_voters) >= inst.t + 1:
            return _assign(inst, label, d, PutRule.gc_rule)
    return None


def apply_rgc_rule(inst: "ProtocolInstance", label: Label) -> Optional[Mutation]:
    if not label or inst.rt.lookup(label) is not None or not inst.rt.has_entries_below(label):
        return None
    counts: Dict[int, int] = {}
    for pid in range(inst.n):
        if pid in label:
            continue
        value = inst.rt.value(label + (pid,))
        if value is None:
            return None
        counts[value] = counts.get(value, 0) + 1
    winners = sorted(d for d, count in counts.items() if count >= inst.n - inst.t - 1)
    if not winners:
        return None
    return _assign(inst, label, winners[0], PutRule.rgc_rule)


def apply_s_rule(inst: "ProtocolInstance", label: Label) -> Optional[Mutation]:
    if len(label) < 2 or inst.rt.lookup(label) is not None or not inst.rt.has_entries_below(label):
        return None
    parent, u = label[:-1], label[-1]
    for sibling in range(inst.n):
        if sibling == u or sibling in parent:
            continue
        if inst.rt.lookup(parent + (sibling,)) is None:
            return None
    at_bottom = sum(
        1 for v in range(inst.n)
        if v not in label and inst.rt.value(label + (v,)) == BOTTOM
    )
    if at_bottom >= inst.t + 2 - len(label):
        return _assign(inst, label, BOTTOM, PutRule.s_rule)
    return None


def apply_sroot_rule(inst: "ProtocolInstance") -> Optional[Mutation]:
    if inst.rt.lookup(ROOT) is not None:
        return None
    at_bottom = sum(1 for pid in range(inst.n) if inst.rt.value((pid,)) == BOTTOM)
    if at_bottom >= inst.t + 1:
        return _assign(inst, ROOT, BOTTOM, PutRule.sroot_rule)
    return None


def _close(inst: "ProtocolInstance", label: Label, rule: str) -> Optional[Mutation]:
    if inst.it.close(label):
        return Mutation(kind="close", label=label, rule=rule)
    return None


def _vertex_cover_within(edges: List[Tuple[int, int]], budget: int) -> bool:
    if not edges:
        return True
    if budget <= 0:
        return False
    u, v = edges[0]
    return any(
        _vertex_cover_within([edge for edge in edges if pick not in edge], budget - 1)
        for pick in (u, v)
    )


def _early_it_holds(inst: "ProtocolInstance", sigma: Label, faulty: FrozenSet[int]) -> bool:
    # the evaluator's own echo is not part of U
    value = inst.it.get(sigma)
    agreeing = sum(
        1 for u in range(inst.n)
        if u not in sigma and u != inst.pid and (u in faulty or inst.it.get(sigma + (u,)) == value)
    )
    return agreeing >= inst.n - inst.round


def _strong_it_holds(inst: "ProtocolInstance", sigma: Label, faulty: FrozenSet[int]) -> bool:
    value = inst.it.get(sigma)
    pool = [u for u in range(inst.n) if u not in sigma]
    free = [u for u in pool if u in faulty]
    checked = [u for u in pool if u not in faulty]
    needed = inst.n - inst.round + 1 - len(free)
    if needed <= 0:
        return True
    budget = len(checked) - needed
    if budget < 0:
        return False
    conflicts = [
        (u, v) for i, u in enumerate(checked) for v in checked[i + 1:]
        if inst.it.get(sigma + (u, v)) != value or inst.it.get(sigma + (v, u)) != value
    ]
    return _vertex_cover_within(conflicts, budget)


def apply_closing_rules(inst: "ProtocolInstance") -> List[Mutation]:
    r = inst.round
    if r > inst.phi:
        return []
    log: List[Mutation] = []
    faulty = frozenset(inst.fault.faulty)

    for label in bfs_order(inst.rt.entries):
        if inst.rt.entries[label].round <= r - 1:
            mutation = _close(inst, label, DECAY_RULE)
            if mutation:
                log.append(mutation)

    for sigma in list(inst.it.active_at(r - 1)):
        if _early_it_holds(inst, sigma, faulty):
            log.extend(_put_and_close(inst, sigma, PutRule.early_it_rule))

    if r >= 2:
        for sigma in list(inst.it.active_at(r - 2)):
            if _strong_it_holds(inst, sigma, faulty):
                log.extend(_put_and_close(inst, sigma, PutRule.strong_it_rule))
    return log


def _put_and_close(inst: "ProtocolInstance", sigma: Label, rule: PutRule) -> List[Mutation]:
    """Put IT(sigma) unless sigma already reads from RT; the branch closes either way"""
    log = []
    if inst.rt.lookup(sigma) is None:
        log.append(_assign(inst, sigma, inst.it.get(sigma), rule))
    inst.it.close(sigma)
    log.append(Mutation(kind="close", label=sigma, rule=rule.value))
    return log


def _unresolved(inst: "ProtocolInstance", low: int, high: int, need_below: bool = False) -> List[Label]:
    labels = []
    for depth in range(max(low, 0), high + 1):
        for label in inst.it.labels_at(depth):
            if need_below and not inst.rt.has_entries_below(label):
                continue
            if inst.rt.lookup(label) is None:
                labels.append(label)
    return labels


def _sweep(inst: "ProtocolInstance") -> List[Mutation]:
    r = inst.round
    log: List[Mutation] = []

    def run(rule: Callable[["ProtocolInstance", Label], Optional[Mutation]], labels: List[Label]) -> None:
        for label in labels:
            mutation = rule(inst, label)
            if mutation:
                log.append(mutation)

    run(apply_it_rule, _unresolved(inst, 0, r - 2))
    log.extend(apply_last_round_rule(inst))
    run(apply_gc_rule, _unresolved(inst, 0, r - 1, need_below=True))
    run(apply_rgc_rule, _unresolved(inst, 1, r - 1, need_below=True))
    run(apply_s_rule, _unresolved(inst, 2, r - 1, need_below=True))
    mutation = apply_sroot_rule(inst)
    if mutation:
        log.append(mutation)
    log.extend(apply_closing_rules(inst))
    return log


def resolve_fixpoint(inst: "ProtocolInstance") -> List[Mutation]:
    """Sweep every rule in a fixed order until a sweep changes nothing"""
    log: List[Mutation] = []
    limit = 2 * len(inst.it) + 2
    sweeps = 0
    while True:
        sweeps += 1
        if sweeps > limit:
            raise DivergenceError(
                f"resolve fixpoint of p{inst.pid} [{inst.key}] did not settle after {limit} sweeps",
                round=inst.round,
            )
        changed = _sweep(inst)
        if not changed:
            return log
        log.extend(changed)
