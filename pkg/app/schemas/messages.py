from pydantic import BaseModel, Field
from typing import Dict, List, Literal, Optional, Tuple

# One EIG relay: (label of the node being relayed, value the sender holds for it)
EigEntry = Tuple[Tuple[int, ...], int]


class MonitorMessage(BaseModel):
    seq: int = Field(..., ge=1, le=4, description="Monitor sequence index")
    kind: Literal["v", "early"]
    value: Optional[int] = Field(None, description="Carried v (phase 3)")
    early: Optional[bool] = Field(None, description="Carried early flag (phase 0)")


class GossipReport(BaseModel):
    sender: int
    suspects: List[int] = Field(default_factory=list)


class RoundBundle(BaseModel):
    """Everything one process sends to one recipient in one round"""
    sender: int
    round: int = Field(..., ge=1)
    eig: Dict[str, List[EigEntry]] = Field(default_factory=dict, description="Relays keyed by instance id")
    gossip: List[int] = Field(default_factory=list, description="Sender's current F")
    monitor: List[MonitorMessage] = Field(default_factory=list)

    def entry_count(self) -> int:
        return sum(len(entries) for entries in self.eig.values())

    def gossip_report(self) -> GossipReport:
        return GossipReport(sender=self.sender, suspects=list(self.gossip))
