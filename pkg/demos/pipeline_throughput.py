"""Show the producer-consumer pipeline hiding augmentation cost.

A slow consumer (think: a training step) overlaps with augmentation
work happening on worker threads; with enough workers the producer
disappears into the consumer's own time. Batches always arrive in
request order and their content is independent of the worker count.
"""

import time

import numpy as np

from nunet_core import BatchRequest, Image2D, LabelMask, run_pipeline


def build_dataset(n=32, size=96, seed=7):
    rng = np.random.default_rng(seed)
    return [
        (
            Image2D(rng.normal(size=(size, size)), (1.0, 1.0)),
            LabelMask(rng.integers(0, 5, (size, size)).astype(np.uint8), (1.0, 1.0)),
        )
        for _ in range(n)
    ]


def run(workers, dataset, requests, consumer_delay=0.01):
    digests = []

    def consume(batch):
        time.sleep(consumer_delay)  # stand-in for a training step
        digests.append(
            tuple(s.image.pixels.tobytes() for s in batch.samples)
        )

    stats = run_pipeline(
        dataset, requests, workers=workers, queue_depth=3, consumer=consume
    )
    return digests, stats


def main():
    dataset = build_dataset()
    requests = [
        BatchRequest(
            dataset_indices=tuple(range(b * 4, b * 4 + 4)),
            sample_indices=tuple(range(b * 4, b * 4 + 4)),
            seed=21,
        )
        for b in range(8)
    ]

    baseline = None
    for workers in (1, 4):
        digests, stats = run(workers, dataset, requests)
        print(
            f"workers={workers}: {stats.batches_produced} batches, "
            f"wall {stats.wall_time:.3f} s, producer busy {stats.producer_busy_time:.3f} s, "
            f"consumer waited {stats.consumer_wait_time:.3f} s"
        )
        if baseline is None:
            baseline = digests
        else:
            print(f"  batch payloads identical to workers=1: {digests == baseline}")


if __name__ == "__main__":
    main()
