"""
Offline analysis of the top-level run: fully corrupt nodes, the corrupt tree,
the alpha and waste series, and the structural bounds read off them.
"""
import logging
from typing import Dict, List, Optional, Set

from app.schemas.reports import AlphaSegment, CorruptTreeReport, Verdict
from app.schemas.trace import ExecutionTrace, FaRecord, HaltRecord, DecideRecord, ItUncoveredRecord
from app.services.eig_core import is_prefix, prefixes
from app.utils.codec import BAD, Codec, Label

logger = logging.getLogger(__name__)

# Depth gap between a deep tree node and its nearest corrupt-tree ancestor
CT_ANCESTOR_GAP = 7
WASTE_TRIGGER = 6


def _fully_corrupt(trace: ExecutionTrace) -> Set[Label]:
    header = trace.header
    correct = [pid for pid in range(header.n) if pid not in header.corrupt]
    reported: Dict[int, Dict[int, Set[Label]]] = {}
    halted_at: Dict[int, int] = {record.process: record.round for record in trace.of(HaltRecord)}
    for record in trace.of(ItUncoveredRecord):
        if record.deep:
            continue
        labels = reported.setdefault(record.round, {}).setdefault(record.process, set())
        labels.update(Codec.parse_label(text) for text in record.labels)

    corrupt: Set[Label] = set()
    for r, by_process in reported.items():
        # a process that halted earlier has no say; one still running that reported nothing covered everything
        alive = [pid for pid in correct if halted_at.get(pid, r) >= r]
        if not alive or any(pid not in by_process for pid in alive):
            continue
        common = set.intersection(*(by_process[pid] for pid in alive))
        corrupt.update(common)
    return corrupt


def compute_fully_corrupt(trace: ExecutionTrace) -> CorruptTreeReport:
    candidates = _fully_corrupt(trace)
    tree = {
        label for label in candidates
        if all(prefix in candidates for prefix in prefixes(label) if prefix)
    }

    corrupt_at: Dict[int, int] = {}
    for label in sorted(tree, key=lambda item: (len(item), item)):
        corrupt_at.setdefault(label[-1], len(label))

    regular, special = [], []
    for label in sorted(tree, key=lambda item: (len(item), item)):
        text = Codec.format_label(label)
        if corrupt_at[label[-1]] == len(label) - 1:
            special.append(text)
        else:
            regular.append(text)

    t = trace.header.t
    alpha = [0] * (t + 2)
    for depth in corrupt_at.values():
        if 0 < depth < len(alpha):
            alpha[depth] += 1
    waste = []
    total = 0
    for i, count in enumerate(alpha):
        total += count
        waste.append(total - i)

    report = CorruptTreeReport(
        regular=regular, special=special, alpha=alpha, waste=waste,
        corrupt_at=corrupt_at, segments=mark_alpha_series(alpha),
    )
    logger.debug(f"corrupt tree: {report.size} nodes, alpha={alpha}")
    return report


def mark_alpha_series(alpha: List[int]) -> List[AlphaSegment]:
    """Split the alpha series (index 0 excluded) into the marked shapes"""
    segments: List[AlphaSegment] = []
    i = 1
    end = len(alpha) - 1
    if i <= end and alpha[i] == 1:
        j = i
        while j + 1 <= end and alpha[j + 1] == 1:
            j += 1
        segments.append(AlphaSegment(shape="prefix_ones", start=i, end=j))
        i = j + 1
    while i <= end:
        j = i + 1
        while j <= end and alpha[j] == 1:
            j += 1
        closed = j <= end and alpha[j] == 0
        head = alpha[i]
        if head == 0 and closed:
            segments.append(AlphaSegment(shape="stuck", start=i, end=j))
        elif head == 2 and closed:
            segments.append(AlphaSegment(shape="cross", start=i, end=j))
        elif head >= 3 and closed:
            segments.append(AlphaSegment(shape="blowup", start=i, end=j))
        elif head >= 2 and j > end:
            segments.append(AlphaSegment(shape="blowup_open", start=i, end=end))
            break
        else:
            i += 1
            continue
        i = j
    return segments


def check_single_extension(report: CorruptTreeReport, i1: int, i2: int) -> bool:
    """Every corrupt-tree node at depth i1-1 keeps at most one extension at depth i2+1"""
    labels = [Codec.parse_label(text) for text in report.labels]
    anchors = [label for label in labels if len(label) == i1 - 1]
    leaves = [label for label in labels if len(label) == i2 + 1]
    if i1 - 1 == 0:
        anchors = [()]
    return all(sum(1 for leaf in leaves if is_prefix(anchor, leaf)) <= 1 for anchor in anchors)


def check_it_ct_bound(trace: ExecutionTrace, report: Optional[CorruptTreeReport] = None) -> bool:
    report = report or compute_fully_corrupt(trace)
    tree = {Codec.parse_label(text) for text in report.labels}
    for record in trace.of(ItUncoveredRecord):
        if not record.deep:
            continue
        for text in record.labels:
            label = Codec.parse_label(text)
            if not any(
                prefix in tree and len(prefix) >= len(label) - CT_ANCESTOR_GAP
                for prefix in prefixes(label)
            ):
                return False
    return True


def check_waste_coupling(trace: ExecutionTrace, report: Optional[CorruptTreeReport] = None) -> Verdict:
    """waste_i >= 6 implies large FA three rounds later and a BAD halt within six rounds"""
    report = report or compute_fully_corrupt(trace)
    trigger = next((i for i, value in enumerate(report.waste) if value >= WASTE_TRIGGER), None)
    if trigger is None:
        return Verdict(name="waste_coupling", passed=True, detail="waste never reaches the trigger")

    r = trigger + 3
    for record in trace.of(FaRecord):
        if record.round == r and len(record.known) < r + 3:
            return Verdict(
                name="waste_coupling", passed=False,
                detail=f"|FA|={len(record.known)} < {r + 3} at round {r}",
                record=record.model_dump(),
            )
    halts = {record.process: record.round for record in trace.of(HaltRecord)}
    for record in trace.of(DecideRecord):
        if record.value != BAD or halts.get(record.process, r) > trigger + WASTE_TRIGGER:
            return Verdict(
                name="waste_coupling", passed=False,
                detail=f"no BAD halt by round {trigger + WASTE_TRIGGER}",
                record=record.model_dump(),
            )
    return Verdict(name="waste_coupling", passed=True, detail=f"waste reaches {WASTE_TRIGGER} at depth {trigger}")
