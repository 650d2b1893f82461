"""
Adversary strategies. An adversary sees every correct bundle of the round
before choosing what its corrupt processes send (rushing, full information),
and may send different bundles to different recipients.
"""
import logging
import random
from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Set

from app.core.exceptions import ConfigError, InfeasiblePattern
from app.schemas.config import AdversaryScriptFile, SimConfig
from app.schemas.messages import MonitorMessage, RoundBundle
from app.services.monitor_stack import SEQUENCES, phase_of
from app.utils.codec import BAD, BOTTOM, Codec
from app.utils.loader import load_script

if TYPE_CHECKING:
    from app.services.process_node import ProcessNode

logger = logging.getLogger(__name__)

# Palette marker for "send nothing for this label"
SILENCE = "silence"


class Adversary(ABC):
    name = "adversary"
    uses_shadows = True

    def __init__(self, params: Optional[Mapping[str, Any]] = None):
        self.params = dict(params or {})
        self.deviated: Set[int] = set()
        self.shadows: Dict[int, "ProcessNode"] = {}
        self.honest: Dict[int, Optional[RoundBundle]] = {}
        self.correct_bundles: Dict[int, Optional[RoundBundle]] = {}
        self.nodes: Mapping[int, "ProcessNode"] = {}

    def bind(self, config: SimConfig, nodes: Mapping[int, "ProcessNode"], node_factory) -> None:
        """Attach to an execution; node_factory(pid) builds an honest shadow process"""
        self.config = config
        self.n = config.n
        self.t = config.t
        self.corrupt: List[int] = list(config.corrupt)
        self.nodes = nodes
        if self.uses_shadows:
            self.shadows = {pid: node_factory(pid) for pid in self.corrupt}

    def begin_round(self, r: int, correct_bundles: Mapping[int, Optional[RoundBundle]]) -> None:
        self.correct_bundles = dict(correct_bundles)
        self.honest = {}
        for pid, shadow in self.shadows.items():
            shadow.begin_round(r)
            self.honest[pid] = shadow.compose(r)

    @abstractmethod
    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        """What corrupt sender delivers to recipient in round r"""

    def observe(self, r: int, deliveries: Mapping[int, Mapping[int, Optional[RoundBundle]]]) -> None:
        """Feed the shadows what their corrupt process received"""
        for pid, shadow in self.shadows.items():
            shadow.receive(r, deliveries.get(pid, {}))
            shadow.drain()

    def _track(self, sender: int, bundle: Optional[RoundBundle], reference: Optional[RoundBundle]) -> Optional[RoundBundle]:
        if bundle != reference and sender not in self.deviated:
            self.deviated.add(sender)
            logger.debug(f"{self.name}: p{sender} deviates")
        return bundle

    def expected_labels(self, r: int, sender: int) -> Dict[str, List[tuple]]:
        """Labels correct processes expect sender to relay this round, per instance"""
        expected: Dict[str, Set[tuple]] = {}
        for node in self.nodes.values():
            if node.halted:
                continue
            for inst in node.live_instances():
                depth = inst.local_round(r) - 1
                labels = expected.setdefault(inst.key, set())
                labels.update(label for label in inst.it.active_at(depth) if sender not in label)
        return {key: sorted(labels) for key, labels in sorted(expected.items()) if labels}

    def silent_bundle(self, r: int, sender: int) -> RoundBundle:
        monitor = []
        for seq in SEQUENCES:
            phase = phase_of(seq, r)
            if phase == 3:
                monitor.append(MonitorMessage(seq=seq, kind="v", value=BOTTOM))
            elif phase == 0:
                monitor.append(MonitorMessage(seq=seq, kind="early", early=False))
        eig = {
            key: [(label, BOTTOM) for label in labels]
            for key, labels in self.expected_labels(r, sender).items()
        }
        return RoundBundle(sender=sender, round=r, eig=eig, monitor=monitor)


class HonestAdversary(Adversary):
    """Corrupt processes that follow the protocol"""
    name = "none"

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        return self.honest.get(sender)


class SilentAdversary(Adversary):
    """Sends bot for every expected label, every round"""
    name = "silent"
    uses_shadows = False

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        self.deviated.add(sender)
        return self.silent_bundle(r, sender)


class CrashAdversary(Adversary):
    """Honest until its crash round, then reaches only part of the recipients and goes quiet"""
    name = "crash"

    def crash_round(self, pid: int) -> int:
        rounds = self.params.get("rounds") or {}
        if str(pid) in rounds:
            return int(rounds[str(pid)])
        if pid in rounds:
            return int(rounds[pid])
        return int(self.params.get("round", 1))

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        honest = self.honest.get(sender)
        crash = self.crash_round(sender)
        if r < crash:
            return honest
        if r == crash and recipient < (self.n + 1) // 2:
            return self._track(sender, honest, honest)
        return self._track(sender, None, honest)


class ScriptedAdversary(Adversary):
    name = "scripted"

    def __init__(self, script: AdversaryScriptFile, params: Optional[Mapping[str, Any]] = None):
        super().__init__(params)
        self.script = script
        self.uses_shadows = script.base == "honest"

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        if self.script.base == "honest":
            base = self.honest.get(sender)
        else:
            base = self.silent_bundle(r, sender)
            self.deviated.add(sender)
        entries = [
            entry for entry in self.script.entries
            if entry.round == r and entry.sender == sender and entry.targets(recipient)
        ]
        if not entries:
            return self._track(sender, base, self.honest.get(sender, base))
        bundle = base.model_copy(deep=True) if base is not None else RoundBundle(sender=sender, round=r)
        for entry in entries:
            if entry.silence and entry.label is None:
                return self._track(sender, None, self.honest.get(sender, base))
            relays = dict((tuple(label), value) for label, value in bundle.eig.get(entry.instance, []))
            label = Codec.parse_label(entry.label)
            if entry.silence:
                relays.pop(label, None)
            else:
                relays[label] = entry.value
            bundle.eig[entry.instance] = sorted(relays.items())
        return self._track(sender, bundle, self.honest.get(sender, base))


class RandomByzantine(Adversary):
    """Honest bundles with random rewrites drawn from a palette of values, BAD and silence"""
    name = "random"

    def bind(self, config: SimConfig, nodes, node_factory) -> None:
        super().bind(config, nodes, node_factory)
        self.rng = random.Random(config.seed)
        self.rate = float(self.params.get("rate", 0.3))
        self.silence_rate = float(self.params.get("silence_rate", 0.05))
        self.palette: List[Any] = list(range(config.alphabet_size)) + [BOTTOM, BAD, SILENCE]

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        honest = self.honest.get(sender)
        if honest is None or self.rng.random() < self.silence_rate:
            return self._track(sender, None, honest)
        bundle = honest.model_copy(deep=True)
        for key, entries in bundle.eig.items():
            rewritten = []
            for label, value in entries:
                if self.rng.random() < self.rate:
                    choice = self.rng.choice(self.palette)
                    if choice == SILENCE:
                        continue
                    value = choice
                rewritten.append((label, value))
            bundle.eig[key] = rewritten
        if self.rng.random() < self.rate:
            bundle.gossip = sorted(set(bundle.gossip) | {self.rng.randrange(self.n)})
        for message in bundle.monitor:
            if self.rng.random() < self.rate:
                if message.kind == "v":
                    message.value = self.rng.choice([BOTTOM, BAD])
                else:
                    message.early = not message.early
        return self._track(sender, bundle, honest)


class CrossCorruption(Adversary):
    """Designated processes equivocate in their round; a partner cross-relays a round later.

    pattern[k] processes are designated for depth k+1.
    """
    name = "cross"

    def __init__(self, pattern: List[int], params: Optional[Mapping[str, Any]] = None):
        super().__init__(params)
        self.pattern = [int(count) for count in pattern]

    def bind(self, config: SimConfig, nodes, node_factory) -> None:
        super().bind(config, nodes, node_factory)
        if any(count < 0 for count in self.pattern) or sum(self.pattern) > len(self.corrupt):
            raise InfeasiblePattern(
                f"pattern {self.pattern} needs {sum(self.pattern)} corrupt processes, {len(self.corrupt)} configured",
                pattern=self.pattern,
            )
        self.alphabet_size = config.alphabet_size
        self.designated: Dict[int, int] = {}
        pool = iter(self.corrupt)
        for depth, count in enumerate(self.pattern, start=1):
            for _ in range(count):
                self.designated[next(pool)] = depth
        spare = [pid for pid in self.corrupt if pid not in self.designated]
        order = list(self.designated)
        self.partner: Dict[int, int] = {}
        for index, pid in enumerate(order):
            if spare:
                self.partner[pid] = spare[index % len(spare)]
            elif len(order) > 1:
                self.partner[pid] = order[(index + 1) % len(order)]
        correct = config.correct
        self.targets = set(correct[:self.t])

    def _flip(self, value: int) -> int:
        if value < 0:
            return 0
        return (value + 1) % max(self.alphabet_size, 2)

    def _rewrite(self, bundle: RoundBundle, owner: Optional[int] = None) -> RoundBundle:
        flipped = bundle.model_copy(deep=True)
        for key, entries in flipped.eig.items():
            flipped.eig[key] = [
                (label, self._flip(value) if owner is None or (label and label[-1] == owner) else value)
                for label, value in entries
            ]
        return flipped

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        honest = self.honest.get(sender)
        if honest is None:
            return None
        bundle = honest
        if self.designated.get(sender) == r and recipient in self.targets:
            bundle = self._rewrite(honest)
        for owner, partner in self.partner.items():
            if partner == sender and self.designated[owner] + 1 == r and recipient not in self.targets:
                bundle = self._rewrite(bundle, owner=owner)
        return self._track(sender, bundle, honest)


class EnumeratedAdversary(Adversary):
    """One corrupt process driven by an explicit two-round choice plan"""
    name = "enumerated"
    uses_shadows = False

    def __init__(self, params: Optional[Mapping[str, Any]] = None):
        super().__init__(params)
        self.first: Dict[int, Any] = {}
        self.second: Dict[tuple, Any] = {}

    def send(self, r: int, sender: int, recipient: int) -> Optional[RoundBundle]:
        self.deviated.add(sender)
        if r == 1:
            choice = self.first.get(recipient, BOTTOM)
            entries = [] if choice == SILENCE else [((), choice)]
            return RoundBundle(sender=sender, round=r, eig={"1:1": entries} if entries else {})
        if r == 2:
            entries = [
                (label, choice) for label, choice in sorted(self.second.items())
                if choice != SILENCE
            ]
            return RoundBundle(sender=sender, round=r, eig={"1:1": entries} if entries else {})
        return self.silent_bundle(r, sender)


def cross_corruption_strategy(pattern: List[int]) -> CrossCorruption:
    return CrossCorruption(pattern)


def build_adversary(config: SimConfig) -> Adversary:
    """Adversary named by the config, or a scripted one when it names a file"""
    name = config.adversary
    params = config.adversary_params
    if name == "none":
        return HonestAdversary(params)
    if name == "silent":
        return SilentAdversary(params)
    if name == "crash":
        return CrashAdversary(params)
    if name == "random":
        return RandomByzantine(params)
    if name == "cross":
        pattern = params.get("pattern")
        if not pattern:
            raise ConfigError("the cross adversary needs adversary_params.pattern")
        return CrossCorruption([int(count) for count in pattern], params)
    if name == "scripted":
        path = params.get("script")
        if not path:
            raise ConfigError("the scripted adversary needs adversary_params.script")
        return ScriptedAdversary(load_script(path), params)
    if name.endswith((".yaml", ".yml")):
        return ScriptedAdversary(load_script(name), params)
    raise ConfigError(f"unknown adversary {name!r}", adversary=name)
