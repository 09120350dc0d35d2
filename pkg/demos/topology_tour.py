"""Tour of the encoder-decoder topology model.

The graph is symbolic: shapes are inferred, skip joins checked, and
parameters counted in closed form, without any tensor framework. A tiny
one-level network is small enough to verify by hand; the default
configuration reproduces the published 43.6 M-parameter network.
"""

from nunet_core import TopologyConfig, build_topology, count_params, infer_shapes
from nunet_core.topology import TrainingRecipe, export_recipe, format_layer_table


def main():
    toy = TopologyConfig(
        input_size=(4, 4), depth=1, base_channels=2, channel_growth=2,
        in_channels=1, out_channels=3,
    )
    print("one-level toy network (hand-checkable):\n")
    print(format_layer_table(build_topology(toy)))

    print("\nchannel/resolution trace for the default configuration:")
    config = TopologyConfig()  # 256x256, depth 4, base 64
    graph = build_topology(config)
    shapes = infer_shapes(graph, (256, 256, 1))
    for name in ("enc0_act2", "down0_act", "down1_act", "down2_act",
                 "bottleneck_act2", "up0_act", "skip0", "output"):
        idx = [layer.name for layer in graph.layers].index(name)
        h, w, c = shapes[idx]
        print(f"  {name:16s} -> {h}x{w}x{c}")

    total, _ = count_params(graph)
    print(f"\ntotal parameters: {total:,}")
    print(f"output plane equals input plane: {shapes[-1][:2] == (256, 256)}")

    print("\ntraining recipe manifest:")
    print(export_recipe(TrainingRecipe()), end="")


if __name__ == "__main__":
    main()
