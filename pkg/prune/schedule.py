"""
Pruning Schedule
Halving rule for intermediate sparsities and the event list derived from it
"""

from enum import Enum
from typing import List

from pydantic import BaseModel, Field, model_validator

from config import settings


class PruneTarget(str, Enum):
    WEIGHTS = "weights"
    NODES = "nodes"
    UNION = "union"


def schedule_kappa(i: int, s: int, kappa_final: float) -> float:
    """
    Sparsity of intermediate event i: half the model first, then half of the
    remainder towards kappa_final each time after.
    """
    if not 0 <= i < s:
        raise ValueError(f"event index must satisfy 0 <= i < s, got i={i}, s={s}")
    return kappa_final - (kappa_final - 0.5) * 0.5 ** i


class PruneSchedule(BaseModel):
    """Target sparsity, training interval, step count and structure type of one pruning run"""
    kappa_final: float = Field(..., gt=0.0, lt=1.0, description="Final sparsity")
    tau: int = Field(default=settings.PRUNE_INTERVAL, ge=0, description="Epochs trained before each intermediate event")
    steps: int = Field(default=settings.PRUNE_STEPS, ge=1, description="Number of halving steps")
    epsilon: float = Field(default=0.0, ge=0.0, description="Proximity of the last intermediate step to kappa_final")
    target: PruneTarget = Field(default=PruneTarget.WEIGHTS)

    @model_validator(mode="after")
    def check_epsilon(self):
        if self.epsilon >= self.kappa_final:
            raise ValueError("epsilon must be smaller than kappa_final")
        return self

    @property
    def halving(self) -> bool:
        """False when the schedule collapses to a single event at kappa_final"""
        return self.steps > 1 and self.kappa_final > 0.5

    def event_kappas(self) -> List[float]:
        """
        Sparsities of every pruning event in order.

        With steps >= 2 and kappa_final > 0.5: the `steps` intermediate values
        followed by kappa_final. Otherwise one event at kappa_final.
        """
        if not self.halving:
            return [self.kappa_final]
        return [schedule_kappa(i, self.steps, self.kappa_final) for i in range(self.steps)] + [self.kappa_final]

    def trains_before(self, event: int) -> bool:
        """Whether tau epochs of training precede event `event`"""
        if self.tau == 0:
            return False
        return not self.halving or event < self.steps

    def within_epsilon(self) -> bool:
        kappas = self.event_kappas()
        return len(kappas) == 1 or abs(kappas[-1] - kappas[-2]) <= self.epsilon

    @property
    def training_epochs(self) -> int:
        """Epochs consumed by the schedule before the final event"""
        return self.tau * sum(self.trains_before(i) for i in range(len(self.event_kappas())))
