"""Shot boundary detection via adaptive-threshold color histograms.

Partitions a clip's frames into shots so tracking never crosses a cut.
Precomputed boundaries can be ingested instead, bypassing detection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from adgen.annotate import FrameBuffer

HIST_BINS_PER_CHANNEL = 8  # bin width 32 on 8-bit channels
ABS_DISTANCE_FLOOR = 0.3


@dataclass(frozen=True)
class Shot:
    start_frame: int  # inclusive
    end_frame: int    # exclusive

    def __post_init__(self):
        if self.end_frame <= self.start_frame:
            raise ValueError("shot must span at least one frame")

    def __contains__(self, frame_idx: int) -> bool:
        return self.start_frame <= frame_idx < self.end_frame

    def __len__(self) -> int:
        return self.end_frame - self.start_frame


def frame_histogram(frame: FrameBuffer) -> np.ndarray:
    """Joint 8x8x8 RGB histogram, L1-normalized to sum 1 (512 floats)."""
    b = HIST_BINS_PER_CHANNEL
    quantized = frame.pixels.reshape(-1, 3) // (256 // b)
    flat = (quantized[:, 0].astype(np.int64) * b + quantized[:, 1]) * b + quantized[:, 2]
    hist = np.bincount(flat, minlength=b * b * b).astype(np.float64)
    return hist / hist.sum()


def hist_distance(a: np.ndarray, b: np.ndarray) -> float:
    """L1 distance between normalized histograms; range [0, 2]."""
    if a.shape != b.shape:
        raise ValueError(f"histogram length mismatch: {a.shape} vs {b.shape}")
    return float(np.abs(a - b).sum())


def consecutive_distances(frames: list[FrameBuffer]) -> np.ndarray:
    hists = [frame_histogram(f) for f in frames]
    return np.array(
        [hist_distance(hists[i - 1], hists[i]) for i in range(1, len(hists))]
    )


def detect_shots(
    frames: list[FrameBuffer], min_shot_len: int = 8, k_sigma: float = 3.0
) -> list[Shot]:
    """Detect hard cuts with a per-clip adaptive threshold.

    Frame i starts a new shot when the histogram distance d_i to frame i-1
    exceeds mean + k_sigma * stddev of all consecutive distances and the 0.3
    absolute floor. With zero stddev (constant distances) only the floor
    applies. Boundaries closer than min_shot_len to the previously kept one
    are suppressed, keeping the larger-distance boundary.
    """
    if not frames:
        raise ValueError("clip must have at least one frame")
    n = len(frames)
    if n == 1:
        return [Shot(0, 1)]
    dists = consecutive_distances(frames)
    mean = float(dists.mean())
    std = float(dists.std())
    if std > 0.0:
        above = (dists > mean + k_sigma * std) & (dists > ABS_DISTANCE_FLOOR)
    else:
        above = dists > ABS_DISTANCE_FLOOR
    candidates = [(int(i) + 1, float(dists[i])) for i in np.flatnonzero(above)]

    kept: list[tuple[int, float]] = []
    for frame_idx, dist in candidates:
        if kept and frame_idx - kept[-1][0] < min_shot_len:
            if dist > kept[-1][1]:
                kept[-1] = (frame_idx, dist)
        else:
            kept.append((frame_idx, dist))
    return shots_from_boundaries([b for b, _ in kept], n)


def shots_from_boundaries(boundaries: list[int], num_frames: int) -> list[Shot]:
    """Build the disjoint, contiguous shot cover of [0, num_frames) from
    boundary frame indices (each boundary starts a new shot)."""
    if num_frames < 1:
        raise ValueError("clip must have at least one frame")
    cuts = sorted({int(b) for b in boundaries if 0 < b < num_frames})
    edges = [0] + cuts + [num_frames]
    return [Shot(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]


def load_boundaries(path: Path | str) -> list[int]:
    """Read a precomputed per-clip boundary file (JSON list of frame indices)."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list) or not all(isinstance(v, int) for v in raw):
        raise ValueError(f"{path}: boundary file must be a JSON list of integers")
    return raw
