"""Architecture configuration for the attention classifier.

The backbone is a four-stage toy residual network standing in for a full
pretrained backbone: each stage is a downsampling conv followed by one
identity-skip residual block.  Defaults are sized so CPU training stays in
the minutes range while preserving the topology the attention mechanism
needs: the stage-2 map is large enough to partition into subregions with
7x7 ROI pooling, and the stage-4 map matches the local branch's pooled
output so the two concatenate cleanly.

With 64x64 inputs and the default strides (2,1,2,2) / pads (0,1,0,0) the
stage spatial sizes run 64 -> 31 -> 31 -> 15 -> 7.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

SCHEME_KINDS = ("HS", "VS", "SQ")


class ConfigError(Exception):
    """Inconsistent model configuration."""


@dataclass(frozen=True)
class SubregionScheme:
    """One partition rule for the shared feature map.

    HS: N full-width horizontal strips; VS: N full-height vertical strips;
    SQ: an r x r grid of blocks with r*r = N.  Every region is ROI-pooled
    to ``pooled`` before entering the local network.
    """

    kind: str
    count: int = 4
    pooled: tuple[int, int] = (7, 7)

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ConfigError(f"scheme kind must be one of {SCHEME_KINDS}, got {self.kind!r}")
        if self.count < 1:
            raise ConfigError(f"scheme count must be at least 1, got {self.count}")
        if self.kind == "SQ":
            r = math.isqrt(self.count)
            if r * r != self.count:
                raise ConfigError(f"SQ scheme count must be a perfect square, got {self.count}")
        if self.pooled[0] < 1 or self.pooled[1] < 1:
            raise ConfigError(f"pooled size must be positive, got {self.pooled}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "count": self.count, "pooled": list(self.pooled)}

    @classmethod
    def from_dict(cls, d: dict) -> "SubregionScheme":
        return cls(kind=d["kind"], count=int(d["count"]),
                   pooled=tuple(d.get("pooled", (7, 7))))


def default_schemes() -> tuple[SubregionScheme, ...]:
    return (SubregionScheme("SQ", 4),)


@dataclass(frozen=True)
class DamConfig:
    """Hyperparameters fixing every parameter shape of the model."""

    input_hw: tuple[int, int] = (64, 64)
    in_channels: int = 3
    stage_widths: tuple[int, int, int, int] = (8, 16, 32, 64)
    stage_strides: tuple[int, int, int, int] = (2, 1, 2, 2)
    stage_pads: tuple[int, int, int, int] = (0, 1, 0, 0)
    local_widths: tuple[int, int] = (16, 16)
    schemes: tuple[SubregionScheme, ...] = field(default_factory=default_schemes)
    d: int = 32
    num_classes: int = 2
    use_local: bool = True
    # feature map the subregions are cut from (1-based stage index); the
    # later-stage attachment variant exists as a hook but is untested
    roi_stage: int = 2
    da_mode: bool = False
    # 1x1 dimension-reduction convs appended after fusion in da_mode
    da_reduce_widths: tuple[int, int] = (32, 16)
    # local widths used instead of local_widths when da_mode is on
    da_local_widths: tuple[int, int] = (8, 8)

    def __post_init__(self):
        if self.d < 2:
            raise ConfigError(f"feature dimension d must be at least 2, got {self.d}")
        if self.num_classes != 2:
            raise ConfigError(f"only 2-class models are supported, got {self.num_classes}")
        for name, widths in (("stage_widths", self.stage_widths),
                             ("local_widths", self.local_widths),
                             ("da_reduce_widths", self.da_reduce_widths),
                             ("da_local_widths", self.da_local_widths)):
            if any(w < 1 for w in widths):
                raise ConfigError(f"{name} must all be at least 1, got {widths}")
        if len(self.stage_widths) != 4 or len(self.stage_strides) != 4 or len(self.stage_pads) != 4:
            raise ConfigError("backbone is fixed at 4 stages")
        if self.use_local and not self.schemes:
            raise ConfigError("at least one subregion scheme is required")
        if len({s.pooled for s in self.schemes}) > 1:
            raise ConfigError("all schemes must share one pooled size "
                              "(local maps are fused through a single branch)")
        if self.roi_stage not in (1, 2, 3):
            raise ConfigError(f"roi_stage must be 1, 2 or 3, got {self.roi_stage}")

    @property
    def active_local_widths(self) -> tuple[int, int]:
        return self.da_local_widths if self.da_mode else self.local_widths

    def stage_hw(self, stage: int) -> tuple[int, int]:
        """Spatial size of the given stage's output (1-based; 0 = input)."""
        h, w = self.input_hw
        for i in range(stage):
            k, s, p = 3, self.stage_strides[i], self.stage_pads[i]
            h = (h + 2 * p - k) // s + 1
            w = (w + 2 * p - k) // s + 1
            if h < 1 or w < 1:
                raise ConfigError(f"stage {i + 1} collapses spatial size to {h}x{w}")
        return h, w

    @property
    def fused_channels(self) -> int:
        base = self.stage_widths[3]
        return base + (self.active_local_widths[1] if self.use_local else 0)

    @property
    def head_in_channels(self) -> int:
        """Channels of the final pre-pool conv map feeding GAP and CAM."""
        return self.da_reduce_widths[1] if self.da_mode else self.fused_channels

    def to_dict(self) -> dict:
        d = asdict(self)
        d["input_hw"] = list(self.input_hw)
        d["stage_widths"] = list(self.stage_widths)
        d["stage_strides"] = list(self.stage_strides)
        d["stage_pads"] = list(self.stage_pads)
        d["local_widths"] = list(self.local_widths)
        d["da_reduce_widths"] = list(self.da_reduce_widths)
        d["da_local_widths"] = list(self.da_local_widths)
        d["schemes"] = [s.to_dict() for s in self.schemes]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DamConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown model config keys: {sorted(extra)}")
        kwargs = dict(d)
        for key in ("input_hw", "stage_widths", "stage_strides", "stage_pads",
                    "local_widths", "da_reduce_widths", "da_local_widths"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if "schemes" in kwargs:
            kwargs["schemes"] = tuple(SubregionScheme.from_dict(s) for s in kwargs["schemes"])
        return cls(**kwargs)
