"""End-to-end runs checked through the property checker and the corrupt-tree analysis"""
import random

import pytest
from hypothesis import HealthCheck, given, settings as hypothesis_settings, strategies as st

from app.schemas.config import AdversaryScriptFile, ScriptEntry, SimConfig
from app.schemas.trace import OutputRecord, RtAssignRecord
from app.services.adversary_lib import CrossCorruption, ScriptedAdversary
from app.services.corrupt_tree import check_single_extension, check_waste_coupling, compute_fully_corrupt
from app.services.property_checks import check_properties
from app.services.sync_sim import run_execution
from app.utils.codec import BOTTOM


def assert_clean(trace, settings):
    report = check_properties(trace, settings)
    assert report.passed, [(v.name, v.detail) for v in report.failures()]
    return report


def top_outputs(trace):
    return {r.process: r for r in trace.of(OutputRecord) if r.instance == "1:1"}


@pytest.mark.parametrize("n, t", [(4, 1), (7, 2), (10, 3)])
def test_unanimous_inputs(make_config, run, test_settings, n, t):
    trace = run(make_config(n=n, t=t, inputs="uniform:0"))
    roots = [r for r in trace.of(RtAssignRecord) if r.label == "eps" and r.instance == "1:1"]
    assert {(r.rule, r.round, r.value) for r in roots} == {("EARLYITRULE", 1, 0)}
    assert max(trace.summary.halt_rounds) <= 2
    assert set(trace.summary.decisions) == {0}
    assert_clean(trace, test_settings)


def one_lie():
    return AdversaryScriptFile(entries=[ScriptEntry(round=1, sender=6, recipient=0, label="eps", value=0)])


@pytest.mark.parametrize("adversary", ["silent", "crash", "script"])
def test_single_fault(make_config, run, test_settings, adversary):
    config = make_config(n=7, t=2, inputs="uniform:1", corrupt=[6], adversary="none" if adversary == "script" else adversary)
    trace = run(config, ScriptedAdversary(one_lie()) if adversary == "script" else None)
    outputs = top_outputs(trace)
    assert all(outputs[pid].value == 1 and outputs[pid].round <= 2 for pid in range(6))
    assert trace.summary.decisions[:6] == [1] * 6
    assert max(trace.summary.halt_rounds[:6]) <= 3
    assert_clean(trace, test_settings)


def test_bottom_majority(make_config, run, test_settings):
    config = make_config(n=7, t=2, inputs=["bot", "bot", "bot", 0, 1, 0, 1], corrupt=[6], adversary="silent")
    trace = run(config)
    outputs = top_outputs(trace)
    assert all(outputs[pid].value == BOTTOM and outputs[pid].round <= 3 for pid in range(6))
    assert trace.summary.decisions[:6] == [BOTTOM] * 6
    assert_clean(trace, test_settings)


SWEEP = [
    (4, 1, [3], "silent"),
    (4, 1, [3], "crash"),
    (7, 2, [5, 6], "silent"),
    (7, 2, [5, 6], "crash"),
    (7, 2, [6], "random"),
    (7, 2, [5, 6], "random"),
]


@pytest.mark.parametrize("n, t, corrupt, adversary", SWEEP)
@pytest.mark.parametrize("seed", range(5))
def test_early_stopping_sweep(make_config, run, test_settings, n, t, corrupt, adversary, seed):
    inputs = [(pid * 7 + seed) % 3 - 1 for pid in range(n)]
    config = make_config(n=n, t=t, inputs=inputs, corrupt=corrupt, adversary=adversary, seed=seed)
    trace = run(config)
    bound = min(trace.summary.f_actual + 2, t + 1)
    assert all(r is None or r <= bound for r in trace.summary.halt_rounds)
    assert_clean(trace, test_settings)


@hypothesis_settings(max_examples=15, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(
    seed=st.integers(min_value=0, max_value=10_000),
    inputs=st.lists(st.sampled_from([0, 1, BOTTOM]), min_size=7, max_size=7),
    corrupt=st.sampled_from([[6], [5, 6], [0, 3]]),
    adversary=st.sampled_from(["silent", "crash", "random"]),
)
def test_random_executions_hold_properties(test_settings, seed, inputs, corrupt, adversary):
    config = SimConfig(n=7, t=2, inputs=inputs, corrupt=corrupt, adversary=adversary, seed=seed)
    trace = run_execution(config, settings=test_settings)
    bound = min(trace.summary.f_actual + 2, 3)
    assert all(r is None or r <= bound for r in trace.summary.halt_rounds)
    assert_clean(trace, test_settings)


@pytest.mark.slow
@pytest.mark.parametrize("n, t", [(10, 3), (13, 4)])
@pytest.mark.parametrize("adversary", ["silent", "crash", "random"])
@pytest.mark.parametrize("seed", range(20))
def test_early_stopping_sweep_large(make_config, run, test_settings, n, t, adversary, seed):
    inputs = [(pid + seed) % 3 - 1 for pid in range(n)]
    corrupt = list(range(n - 1 - seed % t, n))
    config = make_config(n=n, t=t, alphabet_size=2, inputs=inputs, corrupt=corrupt, adversary=adversary, seed=seed)
    assert_clean(run(config), test_settings)


@pytest.mark.slow
def test_cross_corruption_keeps_single_extensions(make_config, run, test_settings):
    config = make_config(n=16, t=5, inputs=[pid % 2 for pid in range(16)], corrupt=list(range(11, 16)))
    trace = run(config, CrossCorruption([2, 1, 1, 0]))
    report = compute_fully_corrupt(trace)
    for segment in report.segments:
        if segment.shape == "cross":
            assert check_single_extension(report, segment.start, segment.end)
    assert_clean(trace, test_settings)


@pytest.mark.slow
def test_waste_coupling(make_config, run, test_settings):
    config = make_config(n=19, t=6, inputs=[pid % 2 for pid in range(19)], corrupt=list(range(13, 19)))
    trace = run(config, CrossCorruption([2, 2, 1, 1]))
    report = compute_fully_corrupt(trace)
    # six corrupt processes keep waste below the trigger at every depth
    assert max(report.waste) < 6
    assert check_waste_coupling(trace, report).passed
    assert_clean(trace, test_settings)


def equivocator_script(n, corrupt, seed, base="honest"):
    """Every corrupt process tells each recipient its own root value and rewrites two relays in round 2"""
    rng = random.Random(seed)
    entries = []
    for sender in corrupt:
        for recipient in range(n):
            entries.append(ScriptEntry(round=1, sender=sender, recipient=recipient, label="eps",
                                       value=rng.choice([0, 1, BOTTOM])))
            for relayed in rng.sample([pid for pid in range(n) if pid != sender], 2):
                entries.append(ScriptEntry(round=2, sender=sender, recipient=recipient, label=str(relayed),
                                           value=rng.choice([0, 1])))
    return AdversaryScriptFile(base=base, entries=entries)


@pytest.mark.parametrize("n, t, corrupt", [(4, 1, [3]), (7, 2, [6]), (7, 2, [5, 6]), (7, 2, [0, 3])])
@pytest.mark.parametrize("seed", range(10))
def test_equivocators(make_config, run, test_settings, n, t, corrupt, seed):
    inputs = [(pid * 5 + seed) % 3 - 1 for pid in range(n)]
    config = make_config(n=n, t=t, inputs=inputs, corrupt=corrupt, seed=seed)
    script = equivocator_script(n, corrupt, seed, base="silent" if seed % 2 else "honest")
    trace = run(config, ScriptedAdversary(script))
    assert all(r is None or r <= min(trace.summary.f_actual + 2, t + 1) for r in trace.summary.halt_rounds)
    assert_clean(trace, test_settings)


@pytest.mark.parametrize("first", [[0, 0, 1], [0, 0, None]])
def test_split_first_round_at_four(make_config, run, test_settings, first):
    entries = [
        ScriptEntry(round=1, sender=3, recipient=pid, label=None if value is None else "eps",
                    value=value, silence=value is None)
        for pid, value in enumerate(first)
    ]
    config = make_config(inputs=[0, 0, 1, 0], corrupt=[3])
    trace = run(config, ScriptedAdversary(AdversaryScriptFile(base="silent", entries=entries)))
    assert len(set(trace.summary.decisions[:3])) == 1
    assert_clean(trace, test_settings)


def sweep_config(make_config, n, t, adversary, seed):
    inputs = [(pid + seed) % 3 - 1 for pid in range(n)]
    corrupt = list(range(n - 1 - seed % t, n))
    return make_config(n=n, t=t, alphabet_size=2, inputs=inputs, corrupt=corrupt, adversary=adversary, seed=seed)


@pytest.mark.parametrize("n, t, seed", [(10, 3, 0), (10, 3, 3), (13, 4, 4)])
def test_single_crash_halts_by_round_three(make_config, run, test_settings, n, t, seed):
    trace = run(sweep_config(make_config, n, t, "crash", seed))
    assert trace.summary.f_actual <= 1
    assert max(r for r in trace.summary.halt_rounds if r is not None) <= 3
    assert_clean(trace, test_settings)


@pytest.mark.parametrize("seed", [2, 4, 10, 14])
def test_random_byzantine_keeps_correct_processes_unsuspected(make_config, run, test_settings, seed):
    assert_clean(run(sweep_config(make_config, 10, 3, "random", seed)), test_settings)


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 14])
def test_random_byzantine_at_thirteen(make_config, run, test_settings, seed):
    assert_clean(run(sweep_config(make_config, 13, 4, "random", seed)), test_settings)


WIDE = [(4, 1), (7, 2), (10, 3), (13, 4)]


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(200))
def test_early_stopping_sweep_wide(make_config, run, test_settings, seed):
    n, t = WIDE[seed % len(WIDE)]
    kind = ("silent", "crash", "random", "equivocate")[seed // len(WIDE) % 4]
    config = sweep_config(make_config, n, t, "none" if kind == "equivocate" else kind, seed)
    adversary = ScriptedAdversary(equivocator_script(n, config.corrupt, seed)) if kind == "equivocate" else None
    trace = run(config, adversary)
    bound = min(trace.summary.f_actual + 2, t + 1)
    assert all(r is None or r <= bound for r in trace.summary.halt_rounds)
    assert_clean(trace, test_settings)
