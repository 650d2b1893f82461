import pytest

from app.core.config import Settings
from app.schemas.config import SimConfig
from app.services.agreement_process import init_instance
from app.services.fault_detection import FaultState
from app.services.sync_sim import run_execution


@pytest.fixture
def test_settings():
    return Settings(record_messages=True, retroactive_masking=False, enforce_budget=False)


@pytest.fixture
def make_config():
    def build(**fields):
        fields.setdefault("n", 4)
        fields.setdefault("t", 1)
        fields.setdefault("alphabet_size", 2)
        fields.setdefault("inputs", "uniform:1")
        return SimConfig(**fields)

    return build


@pytest.fixture
def run(test_settings):
    def execute(config, adversary=None):
        return run_execution(config, adversary, test_settings)

    return execute


@pytest.fixture
def make_instance():
    def build(n=4, t=1, phi=None, input=0, pid=0, alphabet_size=2, round=1):
        fault = FaultState(pid, n, t)
        inst = init_instance(pid, input, t if phi is None else phi, fault, alphabet_size=alphabet_size)
        inst.round = round
        return inst

    return build
