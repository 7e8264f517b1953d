# /services/neighbourhood.py
# The weighted neighbourhood shared by both recommenders and the fixed-neighbourhood regimes.
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Provenance(str, Enum):
    AIS = "AIS"
    SIMPLE_PEARSON = "SimplePearson"
    FIXED = "Fixed"
    RANDOMIZED_CONCENTRATION = "RandomizedConcentration"


@dataclass(frozen=True)
class Neighbourhood:
    members: tuple[tuple[int, float], ...]  # (user, weight), in selection order
    provenance: Provenance

    def __post_init__(self) -> None:
        ids = [u for u, _ in self.members]
        if len(set(ids)) != len(ids):
            raise ValueError("neighbourhood members must be unique")
        if self.provenance is Provenance.SIMPLE_PEARSON and any(w == 0 for _, w in self.members):
            raise ValueError("Simple Pearson neighbours must have non-zero weight")

    @property
    def size(self) -> int:
        return len(self.members)

    def user_ids(self) -> tuple[int, ...]:
        return tuple(u for u, _ in self.members)

    def weights(self) -> dict[int, float]:
        return dict(self.members)

    def with_weights(self, weights: dict[int, float], provenance: Provenance) -> "Neighbourhood":
        """Same membership and order, new weights."""
        return Neighbourhood(tuple((u, weights[u]) for u, _ in self.members), provenance)

    def __len__(self) -> int:
        return len(self.members)
