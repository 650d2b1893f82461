from pydantic import BaseModel, Field
from typing import Any, Dict, List, Optional


class Verdict(BaseModel):
    name: str
    passed: bool
    enforced: bool = True
    detail: Optional[str] = None
    record: Optional[Dict[str, Any]] = Field(None, description="First violating trace record")


class PropertyReport(BaseModel):
    seed: int
    n: int
    t: int
    adversary: str
    verdicts: List[Verdict]
    rounds: int
    f_actual: int
    max_bits: int
    bit_budget: float
    max_it_size: int
    ct_size: int

    @property
    def passed(self) -> bool:
        return all(verdict.passed for verdict in self.verdicts if verdict.enforced)

    def failures(self) -> List[Verdict]:
        return [verdict for verdict in self.verdicts if verdict.enforced and not verdict.passed]


class AlphaSegment(BaseModel):
    shape: str
    start: int
    end: int


class CorruptTreeReport(BaseModel):
    regular: List[str] = Field(default_factory=list)
    special: List[str] = Field(default_factory=list)
    alpha: List[int] = Field(default_factory=list)
    waste: List[int] = Field(default_factory=list)
    corrupt_at: Dict[int, int] = Field(default_factory=dict, description="Process id -> depth it became fully corrupt")
    segments: List[AlphaSegment] = Field(default_factory=list)

    @property
    def labels(self) -> List[str]:
        return sorted(self.regular + self.special, key=lambda text: (text.count("."), text))

    @property
    def size(self) -> int:
        return len(self.regular) + len(self.special)


class OracleReport(BaseModel):
    assignments: int
    branches: int
    pruned: int
    spot_checked: int
    counterexamples: List[Dict[str, Any]] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples
