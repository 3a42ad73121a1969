"""Architecture descriptions for conv backbones with tapped read-out heads.

A network is a stack of conv stages (conv+relu repeats, optional pool at the
stage end) followed by a single dense classifier head. The head reads a
concatenation of "taps": per-stage outputs reduced either by global average
pooling ('gap') or by flattening ('flatten'). Choosing taps produces the
four classifier variants the bench compares:

  base   flatten the last stage output
  multi  gap of every stage output
  final  gap of the last stage output
  flat   base's flatten plus multi's gaps

The taps are read-only branches: they read stage outputs without altering
the main path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .ops import PAD_MODES, PoolSpec


class ArchitectureError(ValueError):
    """Inconsistent or unsupported architecture description."""


VARIANTS = ("base", "multi", "final", "flat")


@dataclass(frozen=True)
class ConvSpec:
    """One conv+relu layer; spatial size is preserved ('same' padding)."""

    out_channels: int
    kernel: int = 3

    def __post_init__(self):
        if self.out_channels < 1:
            raise ArchitectureError(f"out_channels must be >= 1, got {self.out_channels}")
        if self.kernel < 1 or self.kernel % 2 == 0:
            raise ArchitectureError(f"kernel must be odd and >= 1, got {self.kernel}")


@dataclass(frozen=True)
class StageSpec:
    """A run of conv layers optionally closed by a pooling step."""

    convs: tuple[ConvSpec, ...]
    pool: PoolSpec | None

    def __post_init__(self):
        if not self.convs:
            raise ArchitectureError("a stage needs at least one conv layer")


@dataclass(frozen=True)
class Tap:
    """Head input drawn from a stage output: reduce is 'gap' or 'flatten'."""

    stage: int
    reduce: str

    def __post_init__(self):
        if self.reduce not in ("gap", "flatten"):
            raise ArchitectureError(f"unknown tap reduce {self.reduce!r}")


@dataclass(frozen=True)
class ArchitectureSpec:
    variant: str
    in_channels: int
    input_size: int
    stages: tuple[StageSpec, ...]
    taps: tuple[Tap, ...]
    num_classes: int
    pad_mode: str = "zero"
    frozen_backbone: bool = False
    name: str = field(default="", compare=False)


def validate(spec: ArchitectureSpec) -> None:
    """Raise ArchitectureError if the description cannot build a network."""
    if spec.in_channels < 1:
        raise ArchitectureError(f"in_channels must be >= 1, got {spec.in_channels}")
    if spec.input_size < 1:
        raise ArchitectureError(f"input_size must be >= 1, got {spec.input_size}")
    if spec.num_classes < 2:
        raise ArchitectureError(f"num_classes must be >= 2, got {spec.num_classes}")
    if not spec.stages:
        raise ArchitectureError("at least one stage is required")
    if not spec.taps:
        raise ArchitectureError("at least one tap is required")
    if spec.pad_mode not in PAD_MODES:
        raise ArchitectureError(f"unknown pad mode {spec.pad_mode!r}")
    for tap in spec.taps:
        if not 0 <= tap.stage < len(spec.stages):
            raise ArchitectureError(
                f"tap references stage {tap.stage}, valid range is 0..{len(spec.stages) - 1}"
            )
    for (c, h, w) in stage_output_shapes(spec):
        if h < 1 or w < 1:
            raise ArchitectureError(f"a stage reduces the input to {h}x{w}")


def stage_output_shapes(spec: ArchitectureSpec) -> list[tuple[int, int, int]]:
    """(channels, height, width) after each stage; pooling floors ragged edges."""
    h = w = spec.input_size
    shapes = []
    for stage in spec.stages:
        for conv in stage.convs:
            if h < conv.kernel or w < conv.kernel:
                raise ArchitectureError(f"kernel {conv.kernel} does not fit a {h}x{w} map")
        c = stage.convs[-1].out_channels
        if stage.pool is not None:
            if stage.pool.kernel > h or stage.pool.kernel > w:
                raise ArchitectureError(
                    f"pool window {stage.pool.kernel} does not fit a {h}x{w} map"
                )
            h = (h - stage.pool.kernel) // stage.pool.stride + 1
            w = (w - stage.pool.kernel) // stage.pool.stride + 1
        shapes.append((c, h, w))
    return shapes


def tap_width(spec: ArchitectureSpec, tap: Tap) -> int:
    c, h, w = stage_output_shapes(spec)[tap.stage]
    return c if tap.reduce == "gap" else c * h * w


def head_input_width(spec: ArchitectureSpec) -> int:
    return sum(tap_width(spec, tap) for tap in spec.taps)


def parameter_shapes(spec: ArchitectureSpec) -> dict[str, tuple[int, ...]]:
    """Ordered parameter name -> shape map; the order fixes init draw order."""
    shapes: dict[str, tuple[int, ...]] = {}
    if not spec.stages and not spec.taps:
        return shapes
    c_in = spec.in_channels
    for si, stage in enumerate(spec.stages):
        for ci, conv in enumerate(stage.convs):
            shapes[f"stage{si}.conv{ci}.weight"] = (
                conv.out_channels,
                c_in,
                conv.kernel,
                conv.kernel,
            )
            shapes[f"stage{si}.conv{ci}.bias"] = (conv.out_channels,)
            c_in = conv.out_channels
    shapes["head.weight"] = (spec.num_classes, head_input_width(spec))
    shapes["head.bias"] = (spec.num_classes,)
    return shapes


@dataclass(frozen=True)
class ParamReport:
    """Parameter accounting: totals plus a per-layer (name, count, trainable) list."""

    total: int
    trainable: int
    breakdown: tuple[tuple[str, int, bool], ...]


def count_parameters(spec: ArchitectureSpec) -> ParamReport:
    """Count conv (c_out*c_in*kh*kw + c_out) and dense (d_out*d_in + d_out) layers.

    Pooling, GAP, activations, and concatenation contribute nothing.
    """
    breakdown = []
    layers: dict[str, int] = {}
    for name, shape in parameter_shapes(spec).items():
        layer = name.rsplit(".", 1)[0]
        n = 1
        for d in shape:
            n *= d
        layers[layer] = layers.get(layer, 0) + n
    for layer, count in layers.items():
        trainable = layer == "head" or not spec.frozen_backbone
        breakdown.append((layer, count, trainable))
    total = sum(c for _, c, _ in breakdown)
    trainable_total = sum(c for _, c, t in breakdown if t)
    return ParamReport(total, trainable_total, tuple(breakdown))


_VGG16_PLAN = ((64, 64), (128, 128), (256, 256, 256), (512, 512, 512), (512, 512, 512))


def _variant_taps(variant: str, last_stage: int) -> tuple[Tap, ...]:
    if variant == "base":
        return (Tap(last_stage, "flatten"),)
    if variant == "multi":
        return tuple(Tap(i, "gap") for i in range(last_stage + 1))
    if variant == "final":
        return (Tap(last_stage, "gap"),)
    if variant == "flat":
        return (Tap(last_stage, "flatten"),) + tuple(
            Tap(i, "gap") for i in range(last_stage + 1)
        )
    raise ArchitectureError(f"unknown variant {variant!r}, expected one of {VARIANTS}")


def build_vgg16_variant(
    variant: str, input_size: int = 256, num_classes: int = 160
) -> ArchitectureSpec:
    """VGG-16 conv backbone (13 conv layers, 5 max-pool stages), frozen, with the
    chosen trainable head. Input size must be divisible by 32."""
    if input_size % 32 != 0:
        raise ArchitectureError(
            f"input_size must be divisible by 32 (five stride-2 pools), got {input_size}"
        )
    stages = tuple(
        StageSpec(tuple(ConvSpec(c) for c in widths), PoolSpec(2))
        for widths in _VGG16_PLAN
    )
    spec = ArchitectureSpec(
        variant=variant,
        in_channels=3,
        input_size=input_size,
        stages=stages,
        taps=_variant_taps(variant, len(stages) - 1),
        num_classes=num_classes,
        pad_mode="zero",
        frozen_backbone=True,
        name=f"vgg16-{variant}",
    )
    validate(spec)
    return spec


def build_toy_variant(
    variant: str,
    channels: tuple[int, ...] = (8, 16),
    pool: PoolSpec | None = PoolSpec(2),
    input_size: int = 24,
    num_classes: int = 10,
    in_channels: int = 1,
    pad_mode: str = "circular",
) -> ArchitectureSpec:
    """Small single-conv-per-stage network, fully trainable, circular by default."""
    stages = tuple(StageSpec((ConvSpec(c),), pool) for c in channels)
    spec = ArchitectureSpec(
        variant=variant,
        in_channels=in_channels,
        input_size=input_size,
        stages=stages,
        taps=_variant_taps(variant, len(stages) - 1),
        num_classes=num_classes,
        pad_mode=pad_mode,
        frozen_backbone=False,
        name=f"toy-{variant}",
    )
    validate(spec)
    return spec


def freeze_prefixes() -> tuple[str, ...]:
    """Parameter-name prefixes that make up the conv backbone."""
    return ("stage",)


def to_config(spec: ArchitectureSpec) -> dict:
    return {
        "variant": spec.variant,
        "name": spec.name,
        "in_channels": spec.in_channels,
        "input_size": spec.input_size,
        "num_classes": spec.num_classes,
        "pad_mode": spec.pad_mode,
        "frozen_backbone": spec.frozen_backbone,
        "stages": [
            {
                "convs": [{"out_channels": c.out_channels, "kernel": c.kernel} for c in st.convs],
                "pool": None
                if st.pool is None
                else {"kernel": st.pool.kernel, "stride": st.pool.stride, "mode": st.pool.mode},
            }
            for st in spec.stages
        ],
        "taps": [{"stage": t.stage, "reduce": t.reduce} for t in spec.taps],
    }


def from_config(cfg: dict) -> ArchitectureSpec:
    try:
        stages = tuple(
            StageSpec(
                tuple(ConvSpec(c["out_channels"], c.get("kernel", 3)) for c in st["convs"]),
                None
                if st.get("pool") is None
                else PoolSpec(
                    st["pool"]["kernel"],
                    st["pool"].get("stride"),
                    st["pool"].get("mode", "max"),
                ),
            )
            for st in cfg["stages"]
        )
        spec = ArchitectureSpec(
            variant=cfg["variant"],
            in_channels=cfg["in_channels"],
            input_size=cfg["input_size"],
            stages=stages,
            taps=tuple(Tap(t["stage"], t["reduce"]) for t in cfg["taps"]),
            num_classes=cfg["num_classes"],
            pad_mode=cfg.get("pad_mode", "zero"),
            frozen_backbone=cfg.get("frozen_backbone", False),
            name=cfg.get("name", ""),
        )
    except (KeyError, TypeError) as exc:
        raise ArchitectureError(f"bad architecture config: {exc}") from None
    validate(spec)
    return spec


def to_json(spec: ArchitectureSpec) -> str:
    return json.dumps(to_config(spec), indent=2, sort_keys=True)


def from_json(text: str) -> ArchitectureSpec:
    return from_config(json.loads(text))
