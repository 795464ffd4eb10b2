from dataclasses import asdict, dataclass
from typing import Optional

UNDETECTED = "undetected"
DETECTED = "detected"


@dataclass(frozen=True)
class DetectionEvent:
    """One emitted detector score; a row of detection.csv."""

    round: int
    detector: str
    client: int
    score: float
    trailing_mean: Optional[float]
    decision: str

    def to_dict(self) -> dict:
        return asdict(self)
