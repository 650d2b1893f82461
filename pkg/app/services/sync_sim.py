"""
Lockstep round engine: correct processes broadcast, the adversary answers for
the corrupt ones after seeing the round's correct bundles, everything is
delivered, and every live correct process finishes the round.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional

from app.core.config import Settings, settings as default_settings
from app.core.exceptions import NonTermination
from app.schemas.config import SimConfig
from app.schemas.messages import RoundBundle
from app.schemas.trace import ExecutionTrace, HeaderRecord, MessageRecord, SummaryRecord
from app.services.adversary_lib import Adversary, build_adversary
from app.services.process_node import ProcessNode
from app.utils.codec import BOTTOM

logger = logging.getLogger(__name__)

MONITOR_BITS = 5
INSTANCE_BITS = 8


def bundle_bits(bundle: Optional[RoundBundle], n: int, alphabet_size: int) -> int:
    if bundle is None:
        return 0
    id_bits = max(1, (n - 1).bit_length())
    value_bits = max(2, (alphabet_size + 1).bit_length())
    bits = len(bundle.gossip) * id_bits + len(bundle.monitor) * MONITOR_BITS
    for entries in bundle.eig.values():
        bits += INSTANCE_BITS
        bits += sum(len(label) * id_bits + value_bits for label, _ in entries)
    return bits


class Execution:
    def __init__(self, config: SimConfig, adversary: Optional[Adversary] = None, settings: Optional[Settings] = None):
        self.config = config
        self.settings = settings or default_settings
        self.inputs = config.input_vector()
        self.nodes: Dict[int, ProcessNode] = {pid: self._node(pid) for pid in config.correct}
        self.adversary = adversary or build_adversary(config)
        self.adversary.bind(config, self.nodes, self._node)
        self.round = 0
        self.bits: Dict[int, int] = {pid: 0 for pid in config.correct}
        self.max_it_size = 0
        self.trace = ExecutionTrace()
        self.trace.append(HeaderRecord(
            schema_version=self.settings.trace_schema_version,
            app_version=self.settings.app_version,
            n=config.n,
            t=config.t,
            alphabet_size=config.alphabet_size,
            seed=config.seed,
            adversary=self.adversary.name,
            inputs=[None if pid in config.corrupt else value for pid, value in enumerate(self.inputs)],
            corrupt=config.corrupt,
            preseeded_fa=config.preseeded_fa,
            budget_polynomial=config.budget_polynomial,
            max_rounds=config.last_round,
        ))

    def _node(self, pid: int) -> ProcessNode:
        value = self.inputs[pid]
        return ProcessNode(
            pid, self.config.n, self.config.t, self.config.alphabet_size,
            BOTTOM if value is None else value,
            preseeded_fa=self.config.preseeded_fa if pid not in self.config.corrupt else [],
            settings=self.settings,
        )

    @property
    def finished(self) -> bool:
        return all(node.halted for node in self.nodes.values())

    def step(self) -> None:
        """Run one lockstep round"""
        r = self.round + 1
        n = self.config.n
        k = self.config.alphabet_size
        for pid in sorted(self.nodes):
            self.nodes[pid].begin_round(r)
        correct = {pid: self.nodes[pid].compose(r) for pid in sorted(self.nodes)}
        self.adversary.begin_round(r, correct)
        corrupt = {
            sender: {recipient: self.adversary.send(r, sender, recipient) for recipient in range(n)}
            for sender in self.config.corrupt
        }

        record = self.settings.record_messages
        for sender, bundle in correct.items():
            if bundle is None:
                continue
            bits = bundle_bits(bundle, n, k)
            self.bits[sender] += bits * (n - 1)
            if record:
                self.trace.append(MessageRecord(round=r, sender=sender, bits=bits, entries=bundle.entry_count()))
        if record:
            for sender, outgoing in corrupt.items():
                for recipient, bundle in outgoing.items():
                    if bundle is not None:
                        self.trace.append(MessageRecord(
                            round=r, sender=sender, recipient=recipient,
                            bits=bundle_bits(bundle, n, k), entries=bundle.entry_count(),
                            payload=bundle.model_dump(mode="json") if self.settings.debug else None,
                        ))

        deliveries = {
            recipient: {**correct, **{sender: corrupt[sender][recipient] for sender in corrupt}}
            for recipient in range(n)
        }
        self.adversary.observe(r, {pid: deliveries[pid] for pid in self.config.corrupt})
        for pid in sorted(self.nodes):
            node = self.nodes[pid]
            node.receive(r, deliveries[pid])
            self.trace.extend(node.drain())
            self.max_it_size = max(self.max_it_size, node.it_size())
        self.round = r
        logger.debug(f"round {r} done, {sum(not node.halted for node in self.nodes.values())} processes running")

    def run(self) -> ExecutionTrace:
        while not self.finished:
            if self.round >= self.config.last_round:
                running = sorted(pid for pid, node in self.nodes.items() if not node.halted)
                raise NonTermination(
                    f"processes {running} still running after round {self.round}",
                    round=self.round, running=running,
                )
            self.step()
        return self.finalize()

    def finalize(self) -> ExecutionTrace:
        n = self.config.n
        decisions: List[Optional[int]] = [None] * n
        halt_rounds: List[Optional[int]] = [None] * n
        for pid, node in self.nodes.items():
            decisions[pid] = node.decision
            halt_rounds[pid] = node.halt_round
        bits_per_process = [self.bits.get(pid, 0) for pid in range(n)]
        self.trace.append(SummaryRecord(
            rounds=self.round,
            decisions=decisions,
            halt_rounds=halt_rounds,
            f_actual=len(self.adversary.deviated),
            deviated=sorted(self.adversary.deviated),
            max_it_size=self.max_it_size,
            max_bits=max(self.bits.values(), default=0),
            bits_per_process=bits_per_process,
        ))
        return self.trace


def run_execution(config: SimConfig, adversary: Optional[Adversary] = None, settings: Optional[Settings] = None) -> ExecutionTrace:
    logger.debug(f"run n={config.n} t={config.t} seed={config.seed} adversary={config.adversary}")
    return Execution(config, adversary, settings).run()


def _run_seed(payload: dict) -> str:
    config = SimConfig.model_validate(payload)
    return run_execution(config).dumps()


def run_batch(config: SimConfig, runs: Optional[int] = None, workers: Optional[int] = None) -> List[ExecutionTrace]:
    """Seeds seed..seed+runs-1, merged in seed order"""
    runs = runs or config.runs
    workers = workers or default_settings.workers
    configs = [config.model_copy(update={"seed": config.seed + offset}) for offset in range(runs)]
    if workers <= 1 or runs == 1:
        return [run_execution(item) for item in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        dumps = list(pool.map(_run_seed, [item.model_dump() for item in configs]))
    return [ExecutionTrace.loads(text) for text in dumps]
