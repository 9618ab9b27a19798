#!/usr/bin/env python3
"""Visual sanity check of the three task-vector filters on one random tensor.

Prints retained-entry counts and reconstruction error per filter so parameter
sweeps can be eyeballed quickly.
"""

from __future__ import annotations

import numpy as np

from wardbench.merge import (
    TensorArchive,
    breadcrumbs_filter,
    dare_filter,
    della_filter,
    merge,
    task_vector,
)


def main() -> None:
    rng = np.random.default_rng(42)
    base = TensorArchive.from_arrays({"w": rng.normal(size=(256, 256)).astype(np.float32)})
    tuned = TensorArchive.from_arrays(
        {"w": base.entries["w"] + rng.normal(scale=0.02, size=(256, 256)).astype(np.float32)}
    )
    delta = task_vector(base, tuned)
    n = delta.entries["w"].size

    for label, filtered in (
        ("della rho=0.15", della_filter(delta, 0.15)),
        ("breadcrumbs rho=0.15 gamma=0.02", breadcrumbs_filter(delta, 0.15, 0.02)),
        ("dare rho=0.5 seed=42", dare_filter(delta, 0.5, seed=42)),
    ):
        kept = int(np.count_nonzero(filtered.entries["w"]))
        merged = merge(base, filtered, 1.0)
        err = float(np.abs(merged.entries["w"] - tuned.entries["w"]).mean())
        print(f"{label:34s} kept {kept:7d}/{n} ({kept / n:5.1%})  mean |merged - tuned| = {err:.2e}")


if __name__ == "__main__":
    main()
