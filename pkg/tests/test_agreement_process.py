import pytest

from app.core.exceptions import ConfigError
from app.services.agreement_process import end_of_round, ingest, init_instance, outgoing, value_domain
from app.services.eig_core import ROOT
from app.services.fault_detection import FaultState
from app.utils.codec import BAD, BOTTOM


def test_needs_n_above_3t():
    with pytest.raises(ConfigError):
        init_instance(0, 1, 1, FaultState(0, 3, 1))


def test_value_domain():
    assert value_domain(2) == frozenset({0, 1, BOTTOM})
    assert BAD in value_domain(2, allow_bad=True)


def test_first_round_sends_the_input(make_instance):
    inst = make_instance(n=4, t=1, input=1, round=0)
    assert outgoing(inst, 1) == [(ROOT, 1)]


def test_receive_rule(make_instance):
    inst = make_instance(n=4, t=1, input=1, round=0)
    malformed = ingest(inst, 1, {0: [((), 1)], 1: [((), 0)], 2: None, 3: [((), 5)]})
    assert malformed == [3]
    assert 3 in inst.fault.faulty
    assert inst.it.get((0,)) == 1
    assert inst.it.get((1,)) == 0
    # silence inherits the parent value, a known-faulty sender reads as bottom
    assert inst.it.get((2,)) == 1
    assert inst.it.get((3,)) == BOTTOM


def test_relay_of_own_label_is_malformed(make_instance):
    inst = make_instance(n=4, t=1, input=1, round=0)
    ingest(inst, 1, {pid: [((), 1)] for pid in range(4)})
    malformed = ingest(inst, 2, {0: [((1,), 1)], 1: [((1,), 1)], 2: [((1,), 1)], 3: [((1,), 1)]})
    assert malformed == [1]


def test_second_round_relays_skip_own_id(make_instance):
    inst = make_instance(n=4, t=1, input=1, round=0)
    ingest(inst, 1, {pid: [((), pid % 2)] for pid in range(4)})
    assert outgoing(inst, 2) == [((1,), 1), ((2,), 0), ((3,), 1)]


def test_unanimous_round(make_instance):
    inst = make_instance(n=4, t=1, input=1, round=0)
    ingest(inst, 1, {pid: [((), 1)] for pid in range(4)})
    detections, outcome = end_of_round(inst, 1)
    assert not detections
    assert outcome.output == 1
    assert outcome.output_now and outcome.stopped_now
    assert outgoing(inst, 2) == []


def test_split_round_waits(make_instance):
    inst = make_instance(n=4, t=1, input=0, round=0)
    ingest(inst, 1, {0: [((), 0)], 1: [((), 1)], 2: [((), 1)], 3: [((), 0)]})
    _, outcome = end_of_round(inst, 1)
    assert outcome.output is None
    assert not outcome.stopped_now


def test_last_round_stops(make_instance):
    inst = make_instance(n=4, t=1, input=0, round=0)
    split = {0: [((), 0)], 1: [((), 1)], 2: [((), 1)], 3: [((), BOTTOM)]}
    ingest(inst, 1, split)
    end_of_round(inst, 1)
    relays = {
        sender: [((pid,), value[0][1]) for pid, value in split.items() if pid != sender]
        for sender in range(4)
    }
    ingest(inst, 2, relays)
    _, outcome = end_of_round(inst, 2)
    assert outcome.stopped_now
    assert outcome.output == BOTTOM
