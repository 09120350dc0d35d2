"""Encoder-decoder segmentation topology as an analyzable dataflow graph.

The graph is never executed: it exists so the architecture's structural
claims can be checked — every spatial size halves exactly on the way
down and doubles back up, skip connections meet tensors of matching
resolution, the output plane equals the input plane, and the parameter
count follows in closed form.

Structure: ``depth`` encoder levels (two same-padded 3x3 convolutions,
each followed by a channel-wise PReLU, then a 3x3 stride-2 downsampling
convolution that also grows the channels), a two-convolution bottleneck,
and a mirrored decoder (2x2 stride-2 transpose convolution shrinking the
channels, concatenation with the encoder skip at equal resolution, two
3x3 convolutions), closed by a 1x1 convolution onto the label classes.
Channels at level k are base_channels * channel_growth**k.

The companion training recipe (objective, optimizer, initializer,
learning-rate endpoints) serializes to a small key-value manifest that
parses back losslessly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

__all__ = [
    "LAYER_KINDS",
    "LayerSpec",
    "TopologyConfig",
    "Topology",
    "ShapeConsistencyError",
    "build_topology",
    "infer_shapes",
    "count_params",
    "format_layer_table",
    "TrainingRecipe",
    "export_recipe",
    "parse_recipe",
]

LAYER_KINDS = (
    "conv",
    "strided_conv_down",
    "transpose_conv_up",
    "concat_skip",
    "activation_prelu",
    "output_conv",
)


class ShapeConsistencyError(RuntimeError):
    """A layer received a tensor shape it cannot consume."""


@dataclass(frozen=True)
class LayerSpec:
    """One node of the dataflow graph.

    ``skip_from`` (concat_skip only) is the index of the earlier layer
    whose output is concatenated onto the incoming tensor.
    """

    name: str
    kind: str
    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (1, 1)
    stride: tuple[int, int] = (1, 1)
    padding: str = "same"
    skip_from: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if min(self.kernel) < 1 or min(self.stride) < 1:
            raise ValueError("kernel and stride must be >= 1")
        if self.padding != "same":
            raise ValueError("only same padding is supported")
        if (self.skip_from is not None) != (self.kind == "concat_skip"):
            raise ValueError("skip_from is set exactly on concat_skip layers")

    def param_count(self) -> int:
        """Learnable parameters: k_h*k_w*c_in*c_out + bias, or one PReLU
        slope per channel; joins carry none."""
        if self.kind in ("conv", "strided_conv_down", "transpose_conv_up", "output_conv"):
            kh, kw = self.kernel
            return kh * kw * self.in_channels * self.out_channels + self.out_channels
        if self.kind == "activation_prelu":
            return self.out_channels
        return 0


@dataclass(frozen=True)
class TopologyConfig:
    """Architecture hyperparameters.

    ``depth`` counts the downsampling steps; the input plane must be
    divisible by 2**depth so every level keeps integer resolution.
    """

    input_size: tuple[int, int] = (256, 256)
    depth: int = 4
    base_channels: int = 64
    channel_growth: int = 2
    in_channels: int = 1
    out_channels: int = 5

    def __post_init__(self) -> None:
        h, w = self.input_size
        if h < 1 or w < 1:
            raise ValueError("input_size must be >= 1x1")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if min(self.base_channels, self.channel_growth, self.in_channels, self.out_channels) < 1:
            raise ValueError("channel counts and growth must be >= 1")
        div = 1 << self.depth
        if h % div or w % div:
            raise ValueError(
                f"input size {h}x{w} not divisible by 2^depth = {div}"
            )

    def level_channels(self, k: int) -> int:
        return self.base_channels * self.channel_growth**k


@dataclass(frozen=True)
class Topology:
    """Ordered layer graph plus the config that generated it."""

    config: TopologyConfig
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)


def build_topology(config: TopologyConfig) -> Topology:
    """Construct the full layer graph for ``config``."""
    layers: list[LayerSpec] = []
    skip_sources: list[int] = []  # layer index of each encoder level's output

    def add(spec: LayerSpec) -> int:
        layers.append(spec)
        return len(layers) - 1

    def conv_block(prefix: str, c_in: int, c_out: int) -> int:
        """Two 3x3 convs with PReLUs; returns the last activation's index."""
        add(LayerSpec(f"{prefix}_conv1", "conv", c_in, c_out, kernel=(3, 3)))
        add(LayerSpec(f"{prefix}_act1", "activation_prelu", c_out, c_out))
        add(LayerSpec(f"{prefix}_conv2", "conv", c_out, c_out, kernel=(3, 3)))
        return add(LayerSpec(f"{prefix}_act2", "activation_prelu", c_out, c_out))

    channels = config.in_channels
    for k in range(config.depth):
        c_k = config.level_channels(k)
        skip_sources.append(conv_block(f"enc{k}", channels, c_k))
        c_next = config.level_channels(k + 1)
        add(LayerSpec(f"down{k}", "strided_conv_down", c_k, c_next, kernel=(3, 3), stride=(2, 2)))
        add(LayerSpec(f"down{k}_act", "activation_prelu", c_next, c_next))
        channels = c_next

    conv_block("bottleneck", channels, config.level_channels(config.depth))
    channels = config.level_channels(config.depth)

    for k in reversed(range(config.depth)):
        c_k = config.level_channels(k)
        add(LayerSpec(f"up{k}", "transpose_conv_up", channels, c_k, kernel=(2, 2), stride=(2, 2)))
        add(LayerSpec(f"up{k}_act", "activation_prelu", c_k, c_k))
        add(
            LayerSpec(
                f"skip{k}",
                "concat_skip",
                c_k,
                2 * c_k,
                skip_from=skip_sources[k],
            )
        )
        conv_block(f"dec{k}", 2 * c_k, c_k)
        channels = c_k

    add(LayerSpec("output", "output_conv", channels, config.out_channels, kernel=(1, 1)))
    return Topology(config=config, layers=tuple(layers))


def infer_shapes(
    graph: Topology, input_shape: tuple[int, int, int]
) -> list[tuple[int, int, int]]:
    """Propagate (h, w, c) through every layer; returns post-layer shapes.

    Raises ShapeConsistencyError when a layer's declared input channels
    disagree with the incoming tensor, when an odd plane hits a stride-2
    layer, or when a skip join meets a different resolution.
    """
    h, w, c = input_shape
    ch, cw = graph.config.input_size
    if (h, w) != (ch, cw) or c != graph.config.in_channels:
        raise ShapeConsistencyError(
            f"input {input_shape} does not match config "
            f"({ch}, {cw}, {graph.config.in_channels})"
        )
    shapes: list[tuple[int, int, int]] = []
    for idx, layer in enumerate(graph.layers):
        if layer.in_channels != c:
            raise ShapeConsistencyError(
                f"layer {layer.name} expects {layer.in_channels} channels, got {c}"
            )
        if layer.kind in ("conv", "output_conv", "activation_prelu"):
            c = layer.out_channels
        elif layer.kind == "strided_conv_down":
            if h % 2 or w % 2:
                raise ShapeConsistencyError(
                    f"layer {layer.name} cannot halve an odd plane {h}x{w}"
                )
            h, w, c = h // 2, w // 2, layer.out_channels
        elif layer.kind == "transpose_conv_up":
            h, w, c = h * 2, w * 2, layer.out_channels
        elif layer.kind == "concat_skip":
            src_h, src_w, src_c = shapes[layer.skip_from]
            if (src_h, src_w) != (h, w):
                raise ShapeConsistencyError(
                    f"layer {layer.name} joins {src_h}x{src_w} onto {h}x{w}"
                )
            if layer.out_channels != c + src_c:
                raise ShapeConsistencyError(
                    f"layer {layer.name} declares {layer.out_channels} channels, "
                    f"join yields {c + src_c}"
                )
            c = layer.out_channels
        shapes.append((h, w, c))
    return shapes


def count_params(graph: Topology) -> tuple[int, list[tuple[str, int]]]:
    """Total learnable parameters and the per-layer breakdown."""
    breakdown = [(layer.name, layer.param_count()) for layer in graph.layers]
    return sum(n for _, n in breakdown), breakdown


def format_layer_table(graph: Topology, input_shape: tuple[int, int, int] | None = None) -> str:
    """Aligned text table: name, kind, output shape, parameters, total."""
    if input_shape is None:
        h, w = graph.config.input_size
        input_shape = (h, w, graph.config.in_channels)
    shapes = infer_shapes(graph, input_shape)
    total, breakdown = count_params(graph)
    rows = [("layer", "kind", "output", "params")]
    for layer, shape, (_, n) in zip(graph.layers, shapes, breakdown):
        rows.append((layer.name, layer.kind, "x".join(map(str, shape)), str(n)))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    lines.append(f"total parameters: {total}")
    return "\n".join(lines)


@dataclass(frozen=True)
class TrainingRecipe:
    """The published training configuration, exportable as a manifest."""

    loss: str = "binary_cross_entropy"
    optimizer: str = "adam"
    init: str = "glorot_uniform"
    lr_initial: float = 1e-3
    lr_final: float = 1e-6
    schedule: str = "gradual_reduction"

    def __post_init__(self) -> None:
        if self.lr_initial <= 0 or self.lr_final <= 0:
            raise ValueError("learning rates must be positive")
        if self.lr_final > self.lr_initial:
            raise ValueError("lr_final must not exceed lr_initial")


_RECIPE_FIELDS = ("loss", "optimizer", "init", "lr_initial", "lr_final", "schedule")


def export_recipe(recipe: TrainingRecipe) -> str:
    """Deterministic key = value manifest, one field per line."""
    lines = []
    for name in _RECIPE_FIELDS:
        value = getattr(recipe, name)
        if isinstance(value, float):
            value = repr(value)
        lines.append(f"{name} = {value}")
    return "\n".join(lines) + "\n"


def parse_recipe(text: str) -> TrainingRecipe:
    """Inverse of export_recipe; rejects unknown or missing keys."""
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    unknown = set(values) - set(_RECIPE_FIELDS)
    if unknown:
        raise ValueError(f"unknown manifest keys {sorted(unknown)}")
    missing = set(_RECIPE_FIELDS) - set(values)
    if missing:
        raise ValueError(f"missing manifest keys {sorted(missing)}")
    return TrainingRecipe(
        loss=values["loss"],
        optimizer=values["optimizer"],
        init=values["init"],
        lr_initial=float(values["lr_initial"]),
        lr_final=float(values["lr_final"]),
        schedule=values["schedule"],
    )
