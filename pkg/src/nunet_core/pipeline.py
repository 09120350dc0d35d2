"""Threaded producer-consumer augmentation with deterministic output.

Augmentation work (the producer side) runs on a pool of worker threads
while the consumer callback runs in the caller's thread, so the two
overlap: while the consumer digests batch n, workers are already warping
samples of later batches. A permit counter bounds how many batches may be
in flight at once (``queue_depth``), which caps memory without stalling
the overlap.

Determinism comes from keying every sample's randomness to its
``(seed, sample_index)`` pair rather than to any shared stream: work
units can finish in any order on any number of threads, and a reorder
buffer still hands finished batches to the consumer strictly in request
order with byte-identical content.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .augment import AugmentConfig, AugmentSpec, sample_spec, warp_image, warp_mask
from .imaging import Image2D, LabelMask

__all__ = [
    "BatchRequest",
    "AugmentedSample",
    "AugmentedBatch",
    "PipelineStats",
    "PipelineError",
    "run_pipeline",
]


class PipelineError(RuntimeError):
    """A worker failed; wraps the first underlying exception."""


@dataclass(frozen=True)
class BatchRequest:
    """One batch of augmentation work.

    ``dataset_indices`` select samples from the dataset; ``sample_indices``
    are the per-draw counters fed to the random stream (one per output
    sample, typically globally unique across the run). ``seed`` is the
    stream key shared by the whole run.
    """

    dataset_indices: tuple[int, ...]
    sample_indices: tuple[int, ...]
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.dataset_indices) != len(self.sample_indices):
            raise ValueError("dataset_indices and sample_indices must align")
        if len(self.dataset_indices) == 0:
            raise ValueError("a batch must hold at least one sample")
        object.__setattr__(self, "dataset_indices", tuple(int(k) for k in self.dataset_indices))
        object.__setattr__(self, "sample_indices", tuple(int(k) for k in self.sample_indices))


@dataclass(frozen=True)
class AugmentedSample:
    """One warped (image, mask) pair plus the AugmentSpec that produced it."""

    image: Image2D
    mask: LabelMask
    spec: AugmentSpec


@dataclass(frozen=True)
class AugmentedBatch:
    """All samples of one request, in request order."""

    batch_index: int
    samples: tuple[AugmentedSample, ...]


@dataclass
class PipelineStats:
    """Timing evidence that production and consumption overlapped."""

    batches_produced: int = 0
    producer_busy_time: float = 0.0
    consumer_wait_time: float = 0.0
    wall_time: float = 0.0


class _Cancelled(Exception):
    """Internal sentinel telling workers to stop after an abort."""


class _Shared:
    """Worker/caller state; every field is guarded by ``cv``'s lock."""

    def __init__(self, n_batches: int) -> None:
        self.cv = threading.Condition()
        self.n_batches = n_batches
        self.scheduled = 0
        self.tasks: deque = deque()
        self.results: dict[int, list] = {}
        self.pending: dict[int, int] = {}
        self.error: BaseException | None = None
        self.busy_time = 0.0


def _augment_one(
    dataset: Sequence[tuple[Image2D, LabelMask]],
    config: AugmentConfig,
    seed: int,
    dataset_index: int,
    sample_index: int,
) -> AugmentedSample:
    image, mask = dataset[dataset_index]
    spec = sample_spec(config, seed, sample_index)
    return AugmentedSample(image=warp_image(image, spec), mask=warp_mask(mask, spec), spec=spec)


def _worker(shared: _Shared, dataset, config) -> None:
    while True:
        with shared.cv:
            while not shared.tasks and shared.error is None and shared.scheduled < shared.n_batches:
                shared.cv.wait()
            if shared.error is not None or not shared.tasks:
                return
            batch_idx, slot, req = shared.tasks.popleft()
        t0 = time.perf_counter()
        try:
            sample = _augment_one(
                dataset, config, req.seed, req.dataset_indices[slot], req.sample_indices[slot]
            )
        except BaseException as exc:  # propagate to the caller, stop all work
            with shared.cv:
                if shared.error is None:
                    shared.error = exc
                shared.cv.notify_all()
            return
        elapsed = time.perf_counter() - t0
        with shared.cv:
            shared.busy_time += elapsed
            shared.results[batch_idx][slot] = sample
            shared.pending[batch_idx] -= 1
            if shared.pending[batch_idx] == 0:
                shared.cv.notify_all()


def run_pipeline(
    dataset: Sequence[tuple[Image2D, LabelMask]],
    requests: Sequence[BatchRequest],
    *,
    config: AugmentConfig | None = None,
    workers: int = 1,
    queue_depth: int = 2,
    consumer: Callable[[AugmentedBatch], None],
) -> PipelineStats:
    """Augment every request on worker threads, feeding the consumer in order.

    The consumer runs in the calling thread and receives batches strictly
    in request order. At most ``queue_depth`` batches are in flight
    (scheduled but not yet consumed) at any moment. Any exception raised
    by a worker or by the consumer aborts the run; worker failures are
    re-raised as PipelineError with the original exception chained.

    Returns PipelineStats with wall time, summed worker busy time, and
    the time the caller spent blocked waiting for an unfinished batch.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if queue_depth < 1:
        raise ValueError("queue_depth must be >= 1")
    if config is None:
        config = AugmentConfig()
    for req in requests:
        for k in req.dataset_indices:
            if not 0 <= k < len(dataset):
                raise ValueError(f"dataset index {k} out of range for {len(dataset)} samples")

    stats = PipelineStats()
    t_start = time.perf_counter()
    n_batches = len(requests)
    shared = _Shared(n_batches)

    def schedule_up_to(limit: int) -> None:
        # Caller must hold shared.cv.
        while shared.scheduled < min(limit, n_batches):
            idx = shared.scheduled
            req = requests[idx]
            shared.results[idx] = [None] * len(req.dataset_indices)
            shared.pending[idx] = len(req.dataset_indices)
            for slot in range(len(req.dataset_indices)):
                shared.tasks.append((idx, slot, req))
            shared.scheduled += 1
        shared.cv.notify_all()

    with shared.cv:
        schedule_up_to(queue_depth)

    threads = [
        threading.Thread(target=_worker, args=(shared, dataset, config), daemon=True)
        for _ in range(workers)
    ]
    for t in threads:
        t.start()

    try:
        for batch_idx in range(n_batches):
            t_wait = time.perf_counter()
            with shared.cv:
                while shared.pending.get(batch_idx, 1) > 0 and shared.error is None:
                    shared.cv.wait()
                if shared.error is not None:
                    raise PipelineError("augmentation worker failed") from shared.error
                samples = tuple(shared.results.pop(batch_idx))
                del shared.pending[batch_idx]
                # Consuming frees one permit: pull the next batch into flight.
                schedule_up_to(batch_idx + 1 + queue_depth)
            stats.consumer_wait_time += time.perf_counter() - t_wait
            consumer(AugmentedBatch(batch_index=batch_idx, samples=samples))
            stats.batches_produced += 1
    finally:
        with shared.cv:
            if shared.error is None and stats.batches_produced < n_batches:
                shared.error = _Cancelled()
            shared.tasks.clear()
            shared.cv.notify_all()
        for t in threads:
            t.join()

    stats.producer_busy_time = shared.busy_time
    stats.wall_time = time.perf_counter() - t_start
    return stats
