"""Class-balanced epoch construction: duplicate samples of rare classes by
drawing a fixed per-class quota from each class's sample list."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CLASS_NAMES
from .dataset import DatasetIndex


@dataclass(frozen=True)
class EpochPlan:
    sample_ids: tuple  # ordered, duplicates allowed
    per_class_target: int
    drawn_counts: dict  # class name -> number of ids drawn for that class
    seed: int

    def __len__(self):
        return len(self.sample_ids)


def class_sample_lists(index: DatasetIndex) -> dict:
    """Per-class lists of sample_ids in which the class appears.

    A sample holding several classes lands in several lists, so list lengths
    sum to the duplicated total.
    """
    lists = {name: [] for name in CLASS_NAMES}
    for entry in index.entries:
        for name in CLASS_NAMES:
            if entry.present(name):
                lists[name].append(entry.sample_id)
    return lists


def build_epoch(index: DatasetIndex, fraction: float, seed: int,
                classes=CLASS_NAMES) -> EpochPlan:
    """Draw the same per-class quota T = floor(fraction * total) from every
    class list, then globally shuffle the concatenation.

    Draws are without replacement when T <= list length, with replacement
    otherwise (this is what duplicates rare-class samples). `classes` narrows
    the quota to a subset, e.g. for single-class datasets.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    if len(index) == 0:
        raise ValueError("index is empty")

    lists = class_sample_lists(index)
    total = sum(len(lists[name]) for name in classes)
    target = int(np.floor(fraction * total))

    empty = [name for name in classes if not lists[name]]
    if target > 0 and empty:
        raise ValueError(f"classes with no samples cannot meet the quota: {empty}")

    drawn = []
    drawn_counts = {}
    for name in classes:
        ids = lists[name]
        class_id = CLASS_NAMES.index(name)
        # per-class sub-stream keeps draws independent of evaluation order
        rng = np.random.default_rng([seed, class_id])
        if not ids:
            drawn_counts[name] = 0
            continue
        replace = target > len(ids)
        picks = rng.choice(len(ids), size=target, replace=replace)
        drawn.extend(ids[i] for i in picks)
        drawn_counts[name] = target

    shuffle_rng = np.random.default_rng([seed, len(CLASS_NAMES)])
    order = shuffle_rng.permutation(len(drawn))
    sample_ids = tuple(drawn[i] for i in order)
    return EpochPlan(sample_ids=sample_ids, per_class_target=target,
                     drawn_counts=drawn_counts, seed=seed)


def write_plan(plan: EpochPlan, path) -> None:
    with open(path, "w") as f:
        for sid in plan.sample_ids:
            f.write(sid + "\n")


def read_plan_ids(path) -> list:
    with open(path) as f:
        return [line.strip() for line in f if line.strip()]
