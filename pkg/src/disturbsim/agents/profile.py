from __future__ import annotations

import enum
from dataclasses import dataclass, field

from ..sensors import SensorConfig


class ProfileKind(str, enum.Enum):
    """Which channel an agent trusts for geometry.

    Every agent uses vision for semantics and bumps for locomotion feedback.
    """

    VISION_ONLY = "visiononly"
    MAP_DEPTH = "mapdepth"
    MAP_GT_DEPTH = "mapgtdepth"


@dataclass(frozen=True)
class AgentProfile:
    kind: ProfileKind
    cfg: SensorConfig = field(default_factory=SensorConfig)
    fail_limit: int = 10

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProfileKind(self.kind))
        if self.fail_limit < 1:
            raise ValueError(f"fail_limit must be >= 1, got {self.fail_limit}")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def wants_gt_depth(self) -> bool:
        return self.kind is ProfileKind.MAP_GT_DEPTH
