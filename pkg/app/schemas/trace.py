"""
Trace records. A trace is a JSON-lines file: a header record, then one record
per event in execution order, then a summary.
"""
from pathlib import Path
from typing import Annotated, Any, Dict, Iterable, Iterator, List, Literal, Optional, Type, TypeVar, Union

from pydantic import BaseModel, Field, TypeAdapter


class HeaderRecord(BaseModel):
    event: Literal["header"] = "header"
    schema_version: int
    app_version: str
    n: int
    t: int
    alphabet_size: int
    seed: int
    adversary: str
    inputs: List[Optional[int]]
    corrupt: List[int]
    preseeded_fa: List[int] = Field(default_factory=list)
    budget_polynomial: Optional[List[float]] = None
    max_rounds: int


class MessageRecord(BaseModel):
    event: Literal["message"] = "message"
    round: int
    sender: int
    recipient: Optional[int] = Field(None, description="None for a broadcast")
    bits: int
    entries: int
    payload: Optional[Dict[str, Any]] = None


class RtAssignRecord(BaseModel):
    event: Literal["rt_assign"] = "rt_assign"
    round: int
    process: int
    instance: str
    local_round: int
    label: str
    value: int
    rule: str


class ClosedRecord(BaseModel):
    event: Literal["closed"] = "closed"
    round: int
    process: int
    instance: str
    label: str
    rule: str


class DetectedRecord(BaseModel):
    event: Literal["detected"] = "detected"
    round: int
    process: int
    suspect: int
    source: str
    instance: Optional[str] = None
    known: bool = False


class MaskedRecord(BaseModel):
    event: Literal["masked"] = "masked"
    round: int
    process: int
    instance: str
    label: str


class OutputRecord(BaseModel):
    event: Literal["output"] = "output"
    round: int
    process: int
    instance: str
    value: int


class StoppedRecord(BaseModel):
    event: Literal["stopped"] = "stopped"
    round: int
    process: int
    instance: str


class MonitorRecord(BaseModel):
    event: Literal["monitor"] = "monitor"
    round: int
    process: int
    seq: int
    action: str
    value: Optional[int] = None
    phi: Optional[int] = None
    instance: Optional[str] = None
    rule: Optional[str] = None
    early: Optional[bool] = None


class DecideRecord(BaseModel):
    event: Literal["decide"] = "decide"
    round: int
    process: int
    value: int
    external: int


class HaltRecord(BaseModel):
    event: Literal["halt"] = "halt"
    round: int
    process: int


class FaRecord(BaseModel):
    event: Literal["fa"] = "fa"
    round: int
    process: int
    faulty: List[int]
    known: List[int]


class ItSizeRecord(BaseModel):
    event: Literal["it_size"] = "it_size"
    round: int
    process: int
    size: int


class ItUncoveredRecord(BaseModel):
    """Top-level tree labels a process has not resolved, nor any extension, in time"""
    event: Literal["it_uncovered"] = "it_uncovered"
    round: int
    process: int
    labels: List[str]
    deep: bool = False


class SummaryRecord(BaseModel):
    event: Literal["summary"] = "summary"
    rounds: int
    decisions: List[Optional[int]]
    halt_rounds: List[Optional[int]]
    f_actual: int
    deviated: List[int]
    max_it_size: int
    max_bits: int
    bits_per_process: List[int]


TraceRecord = Annotated[
    Union[
        HeaderRecord, MessageRecord, RtAssignRecord, ClosedRecord, DetectedRecord,
        MaskedRecord, OutputRecord, StoppedRecord, MonitorRecord, DecideRecord,
        HaltRecord, FaRecord, ItSizeRecord, ItUncoveredRecord, SummaryRecord,
    ],
    Field(discriminator="event"),
]

_record_adapter: TypeAdapter = TypeAdapter(TraceRecord)

R = TypeVar("R", bound=BaseModel)


class ExecutionTrace:
    """Append-only list of trace records"""

    def __init__(self, records: Optional[Iterable[BaseModel]] = None):
        self.records: List[BaseModel] = list(records or [])

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[BaseModel]:
        return iter(self.records)

    def append(self, record: BaseModel) -> None:
        self.records.append(record)

    def extend(self, records: Iterable[BaseModel]) -> None:
        self.records.extend(records)

    def of(self, kind: Type[R]) -> List[R]:
        return [record for record in self.records if isinstance(record, kind)]

    @property
    def header(self) -> HeaderRecord:
        for record in self.records:
            if isinstance(record, HeaderRecord):
                return record
        raise ValueError("trace has no header record")

    @property
    def summary(self) -> Optional[SummaryRecord]:
        for record in reversed(self.records):
            if isinstance(record, SummaryRecord):
                return record
        return None

    def dumps(self) -> str:
        return "".join(record.model_dump_json() + "\n" for record in self.records)

    def write(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "ExecutionTrace":
        return cls(_record_adapter.validate_json(line) for line in text.splitlines() if line.strip())

    @classmethod
    def read(cls, path: Union[str, Path]) -> "ExecutionTrace":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
