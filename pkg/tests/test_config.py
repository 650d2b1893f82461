import pytest
from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.schemas.config import ScriptEntry, SimConfig
from app.utils.codec import BAD, BOTTOM
from app.utils.loader import load_config, load_script


def write(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestSimConfig:
    def test_uniform_inputs(self):
        assert SimConfig(n=4, t=1, inputs="uniform:bot").input_vector() == [BOTTOM] * 4

    def test_mapping_inputs_leave_corrupt_open(self):
        config = SimConfig(n=4, t=1, inputs={0: 1, 1: 0, 2: 1}, corrupt=[3])
        assert config.input_vector() == [1, 0, 1, None]
        assert config.correct == [0, 1, 2]

    @pytest.mark.parametrize("fields", [
        {"n": 6, "t": 2},
        {"n": 4, "t": 1, "corrupt": [2, 3]},
        {"n": 4, "t": 1, "corrupt": [4]},
        {"n": 4, "t": 1, "corrupt": [3, 3]},
        {"n": 4, "t": 1, "preseeded_fa": [2]},
        {"n": 4, "t": 1, "inputs": [0, 1, 2, 0]},
        {"n": 4, "t": 1, "inputs": [0, 1]},
        {"n": 4, "t": 1, "inputs": "constant:1"},
        {"n": 4, "t": 1, "unknown": 1},
    ])
    def test_rejected(self, fields):
        with pytest.raises(ValidationError):
            SimConfig(**fields)

    def test_last_round(self):
        assert SimConfig(n=7, t=2).last_round == 3
        assert SimConfig(n=7, t=2, max_rounds=9).last_round == 9


class TestScriptEntry:
    def test_value_names(self):
        assert ScriptEntry(round=2, sender=3, label="0", value="bad").value == BAD

    def test_needs_value_or_silence(self):
        with pytest.raises(ValidationError):
            ScriptEntry(round=1, sender=3, label="eps")

    def test_broadcast_target(self):
        entry = ScriptEntry(round=1, sender=3, label="eps", value=0)
        assert entry.targets(0) and entry.targets(2)
        assert not ScriptEntry(round=1, sender=3, recipient="1", label="eps", value=0).targets(2)


class TestLoader:
    def test_structured_text(self, tmp_path):
        path = write(tmp_path, "n: 7\nt: 2\ninputs: uniform:1\ncorrupt:\n  - 6\nadversary: silent\nseed: 4\n")
        config = load_config(path)
        assert (config.n, config.t, config.corrupt, config.seed) == (7, 2, [6], 4)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "- 1\n- 2\n"))

    def test_duplicate_keys(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(write(tmp_path, "n: 7\nn: 4\nt: 1\n"))

    def test_script(self, tmp_path):
        script = load_script(write(tmp_path, "base: honest\nentries:\n  - round: 1\n    sender: 3\n    recipient: 0\n    label: eps\n    value: 0\n"))
        assert script.entries[0].recipient == 0
