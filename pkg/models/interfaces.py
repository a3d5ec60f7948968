"""
Abstract interface for bootstrap replicate generation.
Criteria depend on IReplicateGenerator, not on a concrete mechanism.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tobit import CensoredDataset, TobitFit


@dataclass(frozen=True, eq=False)
class BootstrapReplicate:
    """One bootstrap training sample.

    ``source_indices`` records which original rows were drawn (absent for
    purely parametric draws); ``oob_indices`` are the rows never drawn.
    """
    sample: CensoredDataset
    source_indices: Optional[np.ndarray] = None
    oob_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.intp))
    redraws_used: int = 0

    @property
    def m_star(self) -> int:
        """Size of the out-of-bag complement."""
        return int(self.oob_indices.size)


class IReplicateGenerator(ABC):
    """Produces the training samples of one bootstrap mechanism."""

    @abstractmethod
    def draw(self, data: CensoredDataset, fit: Optional[TobitFit],
             replicate: int, attempt: int = 0) -> BootstrapReplicate:
        """Draw replicate number ``replicate``; ``attempt`` counts redraws."""
        pass
