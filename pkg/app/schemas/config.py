from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Any, Dict, List, Optional, Union

from app.utils.codec import BOTTOM, Codec

ADVERSARY_NAMES = ("none", "silent", "crash", "random", "cross", "scripted")


class SimConfig(BaseModel):
    n: int = Field(..., ge=1, description="Number of processes")
    t: int = Field(..., ge=0, description="Resilience bound")
    alphabet_size: int = Field(2, ge=1, description="Size of the concrete value alphabet")
    inputs: Union[str, List[Any], Dict[int, Any]] = Field(
        "uniform:0", description='Per-process inputs: a list, a mapping or "uniform:v"'
    )
    corrupt: List[int] = Field(default_factory=list)
    adversary: str = Field("none", description="Adversary name or path to a script file")
    adversary_params: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    runs: int = Field(1, ge=1)
    max_rounds: Optional[int] = Field(None, ge=1)
    budget_polynomial: Optional[List[float]] = Field(
        None, description="Coefficients of B(n), constant term first"
    )
    preseeded_fa: List[int] = Field(default_factory=list)

    class Config:
        extra = "forbid"
        json_schema_extra = {
            "example": {
                "n": 7,
                "t": 2,
                "alphabet_size": 2,
                "inputs": "uniform:1",
                "corrupt": [6],
                "adversary": "silent",
                "seed": 1,
            }
        }

    @field_validator("corrupt", "preseeded_fa")
    @classmethod
    def sorted_ids(cls, value: List[int]) -> List[int]:
        if len(set(value)) != len(value):
            raise ValueError("process ids must be distinct")
        return sorted(value)

    @model_validator(mode="after")
    def check_model(self) -> "SimConfig":
        if self.n <= 3 * self.t:
            raise ValueError(f"n={self.n} must exceed 3t={3 * self.t}")
        if len(self.corrupt) > self.t:
            raise ValueError(f"{len(self.corrupt)} corrupt processes exceed t={self.t}")
        if any(not 0 <= pid < self.n for pid in self.corrupt):
            raise ValueError("corrupt ids must lie in [0, n)")
        if not set(self.preseeded_fa) <= set(self.corrupt):
            raise ValueError("preseeded_fa may only name corrupt processes")
        resolved = self.input_vector()
        for pid, value in enumerate(resolved):
            if pid in self.corrupt:
                continue
            if value is None:
                raise ValueError(f"no input for correct process {pid}")
            if value != BOTTOM and not 0 <= value < self.alphabet_size:
                raise ValueError(f"input {value} of process {pid} is outside the alphabet")
        return self

    @property
    def last_round(self) -> int:
        return self.max_rounds if self.max_rounds is not None else self.t + 1

    @property
    def correct(self) -> List[int]:
        return [pid for pid in range(self.n) if pid not in self.corrupt]

    def input_vector(self) -> List[Optional[int]]:
        """Inputs by process id; corrupt processes without an input get None"""
        if isinstance(self.inputs, str):
            kind, _, raw = self.inputs.partition(":")
            if kind.strip() != "uniform" or not raw:
                raise ValueError(f'inputs must be a list, a mapping or "uniform:v", got {self.inputs!r}')
            value = Codec.parse_value(raw)
            return [value] * self.n
        if isinstance(self.inputs, dict):
            vector: List[Optional[int]] = [None] * self.n
            for pid, raw in self.inputs.items():
                if not 0 <= int(pid) < self.n:
                    raise ValueError(f"input given for unknown process {pid}")
                vector[int(pid)] = Codec.parse_value(raw)
            return vector
        if len(self.inputs) != self.n:
            raise ValueError(f"expected {self.n} inputs, got {len(self.inputs)}")
        return [None if raw is None else Codec.parse_value(raw) for raw in self.inputs]


class ScriptEntry(BaseModel):
    round: int = Field(..., ge=1)
    sender: int
    recipient: Union[int, str] = "*"
    instance: str = "1:1"
    label: Optional[str] = Field(None, description='Dotted label; omitted with silence drops the whole bundle')
    value: Optional[Any] = None
    silence: bool = False

    @field_validator("recipient")
    @classmethod
    def check_recipient(cls, value: Union[int, str]) -> Union[int, str]:
        if isinstance(value, str) and value.strip() != "*":
            return int(value)
        return value

    @model_validator(mode="after")
    def check_entry(self) -> "ScriptEntry":
        if not self.silence and (self.label is None or self.value is None):
            raise ValueError("an entry needs a label and a value, or silence")
        if self.value is not None:
            self.value = Codec.parse_value(self.value)
        return self

    def targets(self, recipient: int) -> bool:
        return self.recipient == "*" or self.recipient == recipient


class AdversaryScriptFile(BaseModel):
    base: str = Field("honest", pattern="^(honest|silent)$")
    entries: List[ScriptEntry] = Field(default_factory=list)
