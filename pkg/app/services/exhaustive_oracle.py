"""
Exhaustive adversary enumeration at n=4, t=1 with one corrupt process.

Round 1: the corrupt process picks a palette entry per recipient; choices that
only permute recipients holding equal inputs are collapsed. Round 2: it picks
a palette entry per relayed label. A recipient's round-2 outcome depends only
on what it receives, so per-recipient equivocation in round 2 is covered by
comparing each recipient's set of outcomes over all broadcast choices.
"""
import copy
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations_with_replacement, product
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

from app.core.config import Settings, settings as default_settings
from app.core.exceptions import BudgetExceeded, ConfigError
from app.schemas.config import SimConfig
from app.schemas.reports import OracleReport
from app.services.adversary_lib import SILENCE, EnumeratedAdversary, HonestAdversary
from app.services.sync_sim import Execution
from app.utils.codec import BOTTOM, Codec

logger = logging.getLogger(__name__)

ORACLE_N = 4
ORACLE_T = 1
INPUT_VALUES = (0, 1, BOTTOM)
DEFAULT_PALETTE = (0, 1, BOTTOM, SILENCE)


def _key(choice: Any, palette: Sequence[Any]) -> int:
    return list(palette).index(choice)


def is_canonical(inputs: Sequence[int], choices: Sequence[Any], palette: Sequence[Any]) -> bool:
    """Within each group of equal-input recipients, choices must be non-decreasing"""
    groups: Dict[int, List[int]] = {}
    for recipient, value in enumerate(inputs):
        groups.setdefault(value, []).append(_key(choices[recipient], palette))
    return all(keys == sorted(keys) for keys in groups.values())


class AssignmentOracle:
    """All branches for one assignment of correct inputs"""

    def __init__(self, inputs: Tuple[int, ...], palette: Sequence[Any], settings: Settings, corrupt: Optional[int]):
        self.inputs = tuple(inputs)
        self.palette = tuple(palette)
        self.settings = settings
        self.corrupt = corrupt
        self.correct = [pid for pid in range(ORACLE_N) if pid != corrupt]
        self.branches = 0
        self.pruned = 0
        self.spot_checked = 0
        self.counterexamples: List[Dict[str, Any]] = []
        vector: List[Optional[int]] = [None] * ORACLE_N
        for pid, value in zip(self.correct, self.inputs):
            vector[pid] = value
        self.config = SimConfig(
            n=ORACLE_N, t=ORACLE_T, alphabet_size=2,
            inputs=vector,
            corrupt=[] if corrupt is None else [corrupt],
            adversary="none",
        )

    def _violations(self, execution: Execution) -> List[str]:
        problems = []
        correct = set(self.correct)
        for pid, node in execution.nodes.items():
            if not node.halted or node.halt_round > min(ORACLE_T + 1, 2):
                problems.append(f"p{pid} not halted by round 2")
                continue
            value = Codec.external(node.decision)
            if value != BOTTOM and sum(1 for item in self.inputs if item == value) < ORACLE_T + 1:
                problems.append(f"p{pid} decided {value} without t+1 correct inputs")
            if node.fault.faulty & correct:
                problems.append(f"p{pid} suspects correct {sorted(node.fault.faulty & correct)}")
        return problems

    def _record(self, first: Sequence[Any], second: Optional[Sequence[Any]], problems: List[str]) -> None:
        self.counterexamples.append({
            "inputs": [Codec.format_value(value) for value in self.inputs],
            "round1": [str(choice) for choice in first],
            "round2": None if second is None else [str(choice) for choice in second],
            "problems": problems,
        })

    def explore(self, first: Sequence[Any]) -> None:
        adversary = EnumeratedAdversary()
        adversary.first = dict(zip(self.correct, first))
        execution = Execution(self.config, adversary, self.settings)
        execution.step()
        if execution.finished:
            self.branches += 1
            problems = self._violations(execution)
            if problems:
                self._record(first, None, problems)
            return

        outcomes: Dict[int, Set[int]] = {pid: set() for pid in self.correct}
        labels = [(pid,) for pid in self.correct]
        for second in product(self.palette, repeat=len(labels)):
            branch = copy.deepcopy(execution)
            branch.adversary.second = dict(zip(labels, second))
            branch.step()
            self.branches += 1
            problems = self._violations(branch)
            if problems:
                self._record(first, second, problems)
                continue
            for pid, node in branch.nodes.items():
                outcomes[pid].add(Codec.external(node.decision))
        distinct = {frozenset(values) for values in outcomes.values()}
        if len(distinct) > 1 or any(len(values) > 1 for values in distinct):
            seen = {pid: sorted(values) for pid, values in outcomes.items()}
            self._record(first, None, [f"round-2 outcomes disagree: {seen}"])

    def run(self, rng: random.Random) -> None:
        if self.corrupt is None:
            execution = Execution(self.config, HonestAdversary(), self.settings)
            while not execution.finished and execution.round < 2:
                execution.step()
            self.branches += 1
            problems = self._violations(execution)
            if problems:
                self._record([], None, problems)
            return
        for first in product(self.palette, repeat=len(self.correct)):
            if is_canonical(self.inputs, first, self.palette):
                self.explore(first)
                continue
            self.pruned += 1
            if rng.random() < self.settings.oracle_spot_check_rate:
                self.spot_checked += 1
                self.explore(first)


def _explore_assignment(args: Tuple[Tuple[int, ...], Tuple[Any, ...], Dict[str, Any], Optional[int], int]) -> Dict[str, Any]:
    inputs, palette, settings_data, corrupt, seed = args
    settings = Settings(**settings_data)
    oracle = AssignmentOracle(inputs, palette, settings, corrupt)
    oracle.run(random.Random(seed))
    return {
        "branches": oracle.branches,
        "pruned": oracle.pruned,
        "spot_checked": oracle.spot_checked,
        "counterexamples": oracle.counterexamples,
    }


def estimate_branches(palette: Sequence[Any], assignments: int, correct: int) -> int:
    per_round = len(palette) ** correct
    return assignments * per_round * per_round


def exhaustive_oracle(
    n: int = ORACLE_N,
    t: int = ORACLE_T,
    palette: Sequence[Any] = DEFAULT_PALETTE,
    corrupt: Optional[int] = 3,
    settings: Optional[Settings] = None,
    workers: Optional[int] = None,
) -> OracleReport:
    if n != ORACLE_N or t != ORACLE_T:
        raise ConfigError(f"the exhaustive oracle runs at n={ORACLE_N}, t={ORACLE_T} only", n=n, t=t)
    settings = (settings or default_settings).model_copy(update={"record_messages": False})
    correct = ORACLE_N - (0 if corrupt is None else 1)
    assignments = list(combinations_with_replacement(INPUT_VALUES, correct))

    estimate = estimate_branches(palette, len(assignments), correct) if corrupt is not None else len(assignments)
    if estimate > settings.oracle_branch_cap:
        raise BudgetExceeded(
            f"enumeration needs up to {estimate} branches, cap is {settings.oracle_branch_cap}",
            estimate=estimate,
        )

    jobs = [
        (inputs, tuple(palette), settings.model_dump(), corrupt, settings.oracle_seed + index)
        for index, inputs in enumerate(assignments)
    ]
    workers = workers or settings.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_explore_assignment, jobs))
    else:
        results = [_explore_assignment(job) for job in jobs]

    report = OracleReport(
        assignments=len(assignments),
        branches=sum(result["branches"] for result in results),
        pruned=sum(result["pruned"] for result in results),
        spot_checked=sum(result["spot_checked"] for result in results),
        counterexamples=[example for result in results for example in result["counterexamples"]],
    )
    logger.info(
        f"oracle: {report.assignments} assignments, {report.branches} branches, "
        f"{report.pruned} pruned, {len(report.counterexamples)} counterexamples"
    )
    return report
