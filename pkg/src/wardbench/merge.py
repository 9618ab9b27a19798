"""Weight-space task-vector filtering and merging over named-tensor archives.

Filters: row-wise top-magnitude (density rho), two-sided magnitude band
(outlier quantile gamma on top, noise band below, middle rho retained), and
random drop with 1/rho rescale.  An optional activation mask locks
high-activation weights to their base values.  Archives use the single-file
named-tensor format with a JSON header (name -> dtype/shape/offsets); the
codec here is self-contained so bfloat16 round-trips without a tensor
framework.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np


class ShapeMismatch(ValueError):
    pass


class NameSetMismatch(ValueError):
    pass


class InvalidBand(ValueError):
    pass


class MissingActivationTensor(KeyError):
    pass


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# -- archive container --------------------------------------------------------

_DTYPES = {
    "F64": np.float64,
    "F32": np.float32,
    "F16": np.float16,
    "I64": np.int64,
    "I32": np.int32,
    "I16": np.int16,
    "I8": np.int8,
    "U8": np.uint8,
    "BOOL": np.bool_,
}
_DTYPE_NAMES = {np.dtype(v): k for k, v in _DTYPES.items()}
BF16 = "BF16"


def bf16_to_f32(raw: np.ndarray) -> np.ndarray:
    """Widen bfloat16 (stored as uint16) to float32 by left-shifting 16 bits."""
    as32 = raw.astype(np.uint32) << 16
    return as32.view(np.float32)


def f32_to_bf16(values: np.ndarray) -> np.ndarray:
    """Round float32 to bfloat16 (round-to-nearest-even), stored as uint16."""
    bits = np.ascontiguousarray(values, dtype=np.float32).view(np.uint32)
    rounding = ((bits >> 16) & 1) + 0x7FFF
    return ((bits + rounding) >> 16).astype(np.uint16)


@dataclass
class TensorArchive:
    """name -> array, with per-tensor storage dtype names preserved."""

    entries: dict[str, np.ndarray] = field(default_factory=dict)
    dtypes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, arr in self.entries.items():
            self.dtypes.setdefault(name, _DTYPE_NAMES.get(arr.dtype, "F32"))

    @classmethod
    def from_arrays(cls, arrays: dict[str, np.ndarray], dtype: str | None = None) -> "TensorArchive":
        a = cls(entries={k: np.asarray(v) for k, v in arrays.items()})
        if dtype:
            a.dtypes = {k: dtype for k in a.entries}
        return a

    def names(self) -> list[str]:
        return sorted(self.entries)

    def require_compatible(self, other: "TensorArchive") -> None:
        if set(self.entries) != set(other.entries):
            raise NameSetMismatch(
                f"archives name different tensors: {sorted(set(self.entries) ^ set(other.entries))}"
            )
        for name in self.entries:
            if self.entries[name].shape != other.entries[name].shape:
                raise ShapeMismatch(
                    f"{name}: {self.entries[name].shape} vs {other.entries[name].shape}"
                )


def save_archive(archive: TensorArchive, path: str) -> None:
    """Write the archive with an 8-byte length-prefixed JSON header."""
    header: dict[str, Any] = {}
    blobs: list[bytes] = []
    offset = 0
    for name in archive.names():
        arr = archive.entries[name]
        dtype_name = archive.dtypes.get(name, "F32")
        if dtype_name == BF16:
            data = np.ascontiguousarray(f32_to_bf16(arr.astype(np.float32))).tobytes()
        else:
            data = np.ascontiguousarray(arr.astype(_DTYPES[dtype_name])).tobytes()
        header[name] = {
            "dtype": dtype_name,
            "shape": list(arr.shape),
            "data_offsets": [offset, offset + len(data)],
        }
        blobs.append(data)
        offset += len(data)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(header_bytes)))
        fh.write(header_bytes)
        for blob in blobs:
            fh.write(blob)


def load_archive(path: str) -> TensorArchive:
    with open(path, "rb") as fh:
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        body = fh.read()
    entries: dict[str, np.ndarray] = {}
    dtypes: dict[str, str] = {}
    for name, meta in header.items():
        if name == "__metadata__":
            continue
        lo, hi = meta["data_offsets"]
        raw = body[lo:hi]
        shape = tuple(meta["shape"])
        dtype_name = meta["dtype"]
        if dtype_name == BF16:
            arr = bf16_to_f32(np.frombuffer(raw, dtype=np.uint16)).reshape(shape)
        else:
            arr = np.frombuffer(raw, dtype=_DTYPES[dtype_name]).reshape(shape).copy()
        entries[name] = arr
        dtypes[name] = dtype_name
    return TensorArchive(entries=entries, dtypes=dtypes)


# -- configuration ------------------------------------------------------------

METHOD_DEFAULTS = {
    "della": {"rho": 0.15, "epsilon": 0.02, "weight": 1.0},
    "breadcrumbs": {"rho": 0.15, "gamma": 0.02, "weight": 1.0},
    "dare": {"rho": 0.5, "weight": 1.0},
}


@dataclass
class MergeConfig:
    method: str = "della"
    rho: float | None = None
    gamma: float | None = None
    epsilon: float | None = None  # recorded metadata; no numeric effect
    weight: float = 1.0
    seed: int = 42
    aim_quantile: float | None = None
    out_dtype: str | None = None

    def __post_init__(self) -> None:
        if self.method not in METHOD_DEFAULTS:
            raise ValueError(f"unknown merge method {self.method!r}")
        defaults = METHOD_DEFAULTS[self.method]
        if self.rho is None:
            self.rho = defaults["rho"]
        if self.gamma is None:
            self.gamma = defaults.get("gamma")
        if self.epsilon is None:
            self.epsilon = defaults.get("epsilon")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")

    def to_json(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "rho": self.rho,
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "weight": self.weight,
            "seed": self.seed,
            "aim_quantile": self.aim_quantile,
            "out_dtype": self.out_dtype,
        }


# -- operations ----------------------------------------------------------------


def task_vector(base: TensorArchive, tuned: TensorArchive) -> TensorArchive:
    """Elementwise tuned - base per tensor, computed in float64."""
    base.require_compatible(tuned)
    out = {
        name: tuned.entries[name].astype(np.float64) - base.entries[name].astype(np.float64)
        for name in base.entries
    }
    return TensorArchive.from_arrays(out, dtype="F64")


def _as_rows(arr: np.ndarray) -> np.ndarray:
    if arr.ndim <= 1:
        return arr.reshape(1, -1)
    return arr.reshape(-1, arr.shape[-1])


def _top_k_mask_rows(magnitudes: np.ndarray, k: int) -> np.ndarray:
    """Per-row mask of the k largest magnitudes; ties go to the lower column.

    Selection is the prefix of the (magnitude desc, column asc) total order,
    computed with an O(n) partition instead of a full sort.
    """
    n_rows, n_cols = magnitudes.shape
    if k <= 0:
        return np.zeros_like(magnitudes, dtype=bool)
    if k >= n_cols:
        return np.ones_like(magnitudes, dtype=bool)
    kth = -np.partition(-magnitudes, k - 1, axis=1)[:, k - 1 : k]
    sure = magnitudes > kth
    ties = magnitudes == kth
    need = k - sure.sum(axis=1, keepdims=True)
    tie_rank = np.cumsum(ties, axis=1)
    return sure | (ties & (tie_rank <= need))


def della_filter(delta: TensorArchive, rho: float) -> TensorArchive:
    """Per row, keep the max(1, round_half_up(rho * row_len)) largest magnitudes.

    Ties break toward the lower column index; 1-D tensors are one row.
    """
    if not 0 < rho <= 1:
        raise ValueError("rho must be in (0, 1]")
    out: dict[str, np.ndarray] = {}
    for name, arr in delta.entries.items():
        rows = _as_rows(np.asarray(arr, dtype=np.float64))
        if rho == 1.0:
            out[name] = arr.astype(np.float64).copy()
            continue
        keep = max(1, round_half_up(rho * rows.shape[1]))
        mask = _top_k_mask_rows(np.abs(rows), keep)
        out[name] = np.where(mask, rows, 0.0).reshape(arr.shape)
    return TensorArchive.from_arrays(out, dtype="F64")


def breadcrumbs_filter(delta: TensorArchive, rho: float, gamma: float) -> TensorArchive:
    """Zero the top-gamma magnitude spikes and the bottom (1 - rho - gamma) noise
    band per flattened tensor; keep the middle band of mass fraction rho."""
    if rho + gamma > 1:
        raise InvalidBand(f"rho + gamma = {rho + gamma} exceeds 1")
    if not 0 < rho <= 1 or not 0 <= gamma < 1:
        raise ValueError("need 0 < rho <= 1 and 0 <= gamma < 1")
    out: dict[str, np.ndarray] = {}
    for name, arr in delta.entries.items():
        flat = np.asarray(arr, dtype=np.float64).reshape(1, -1)
        n = flat.shape[1]
        top_n = round_half_up(gamma * n)
        keep_n = min(round_half_up(rho * n), n - top_n)
        mag = np.abs(flat)
        # the kept band is the set difference of two prefixes of the same order
        mask = _top_k_mask_rows(mag, top_n + keep_n) & ~_top_k_mask_rows(mag, top_n)
        out[name] = np.where(mask, flat, 0.0).reshape(arr.shape)
    return TensorArchive.from_arrays(out, dtype="F64")


def dare_filter(delta: TensorArchive, rho: float, seed: int = 42) -> TensorArchive:
    """Keep each entry with probability rho, rescale kept entries by 1/rho."""
    if not 0 < rho <= 1:
        raise ValueError("rho must be in (0, 1]")
    out: dict[str, np.ndarray] = {}
    rng = np.random.Generator(np.random.PCG64(seed))
    for name in sorted(delta.entries):
        arr = np.asarray(delta.entries[name], dtype=np.float64)
        if rho == 1.0:
            out[name] = arr.copy()
            continue
        keep = rng.random(arr.shape) < rho
        out[name] = np.where(keep, arr / rho, 0.0)
    return TensorArchive.from_arrays(out, dtype="F64")


def aim_mask(
    filtered: TensorArchive,
    activations: TensorArchive,
    threshold_quantile: float,
) -> TensorArchive:
    """Zero delta entries whose activation magnitude sits in the top
    (1 - threshold_quantile) fraction, locking those weights to base.

    Activation tensors may match the delta shape (per weight) or broadcast per
    row as shape (rows,) or (rows, 1).
    """
    out: dict[str, np.ndarray] = {}
    for name, arr in filtered.entries.items():
        if name not in activations.entries:
            raise MissingActivationTensor(name)
        act = np.abs(np.asarray(activations.entries[name], dtype=np.float64))
        arr64 = np.asarray(arr, dtype=np.float64)
        if act.shape != arr64.shape:
            rows = arr64.shape[0] if arr64.ndim else 1
            if act.size == rows:
                act = np.broadcast_to(act.reshape(rows, *([1] * (arr64.ndim - 1))), arr64.shape)
            else:
                raise ShapeMismatch(f"{name}: activation shape {act.shape} vs delta {arr64.shape}")
        if threshold_quantile >= 1.0:
            out[name] = arr64.copy()
            continue
        if threshold_quantile <= 0.0:
            out[name] = np.zeros_like(arr64)
            continue
        flat = act.reshape(1, -1)
        n_lock = round_half_up((1.0 - threshold_quantile) * flat.size)
        if n_lock <= 0:
            out[name] = arr64.copy()
            continue
        lock = _top_k_mask_rows(flat, n_lock)
        out[name] = np.where(lock.reshape(arr64.shape), 0.0, arr64)
    return TensorArchive.from_arrays(out, dtype="F64")


def merge(base: TensorArchive, filtered: TensorArchive, weight: float = 1.0,
          out_dtype: str | None = None) -> TensorArchive:
    """merged = base + weight * delta, accumulated in float64, rounded on store."""
    base.require_compatible(filtered)
    entries: dict[str, np.ndarray] = {}
    dtypes: dict[str, str] = {}
    for name in base.entries:
        dtype_name = out_dtype or base.dtypes.get(name, "F32")
        acc = base.entries[name].astype(np.float64) + weight * filtered.entries[name].astype(np.float64)
        if dtype_name == BF16:
            entries[name] = bf16_to_f32(f32_to_bf16(acc.astype(np.float32)))
        else:
            entries[name] = acc.astype(_DTYPES[dtype_name])
        dtypes[name] = dtype_name
    return TensorArchive(entries=entries, dtypes=dtypes)


def apply_merge(base: TensorArchive, tuned: TensorArchive, cfg: MergeConfig,
                activations: TensorArchive | None = None) -> TensorArchive:
    """The full pipeline: task vector, filter, optional activation mask, merge."""
    delta = task_vector(base, tuned)
    if cfg.method == "della":
        filtered = della_filter(delta, cfg.rho)
    elif cfg.method == "breadcrumbs":
        filtered = breadcrumbs_filter(delta, cfg.rho, cfg.gamma or 0.0)
    else:
        filtered = dare_filter(delta, cfg.rho, cfg.seed)
    if cfg.aim_quantile is not None:
        if activations is None:
            raise MissingActivationTensor("activation archive required for masking")
        filtered = aim_mask(filtered, activations, cfg.aim_quantile)
    return merge(base, filtered, cfg.weight, out_dtype=cfg.out_dtype)
