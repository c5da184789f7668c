"""Shared fixtures: synthetic frames, embeddings, and a small on-disk movie
dataset exercising the full pipeline (frames, detections, cast, subtitles,
ground truth)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from adgen.annotate import FrameBuffer

EMB_DIM = 512

CAST = [
    {"cast_id": "c01", "actor_name": "Ada Brook", "character_name": "Amy Dunne",
     "profile_image": "amy.jpg"},
    {"cast_id": "c02", "actor_name": "Ben Cole", "character_name": "Nick Moore",
     "profile_image": "nick.jpg"},
    {"cast_id": "c03", "actor_name": "Cal Drew", "character_name": "Sam Reed",
     "profile_image": "sam.jpg"},
]

# (clip_id, start_s, present cast indices)
CLIP_PLAN = [
    ("clip01", 60.0, (0, 1)),
    ("clip02", 120.0, (1, 2)),
    ("clip03", 200.0, (0, 2)),
    ("clip04", 300.0, (0, 1)),
    ("clip05", 400.0, (1, 2)),
]

GT_TEXTS = {
    "clip01": "Amy glances at Nick across the dark kitchen.",
    "clip02": "Nick follows Sam through the crowded hallway.",
    "clip03": "Amy and Sam run toward the waiting car.",
    "clip04": "Nick hands Amy a folded letter.",
    "clip05": "Sam watches Nick leave the house.",
}

SUBTITLES = [
    (10.0, 12.0, "Where were you last night?"),
    (55.0, 57.0, "I was at the office."),
    (110.0, 112.5, "Don't lie to me."),
    (150.0, 152.0, "We should leave now."),
    (195.0, 197.0, "The car is out front."),
    (290.0, 292.0, "Read this when you're alone."),
    (350.0, 352.0, "He knows everything."),
    (395.0, 397.0, "Lock the door behind me."),
]


def unit(rng: np.random.Generator, dim: int = EMB_DIM) -> np.ndarray:
    v = rng.normal(size=dim)
    return v / np.linalg.norm(v)


def jitter(rng: np.random.Generator, center: np.ndarray, mag: float) -> np.ndarray:
    v = center + mag * unit(rng, center.shape[0])
    return v / np.linalg.norm(v)


def solid_frame(w: int, h: int, rgb) -> FrameBuffer:
    return FrameBuffer.solid(w, h, rgb)


def _clip_frames(rng, n_frames: int, w: int, h: int, boxes_per_frame):
    """Two-tone clip with a hard cut at the midpoint and moving person boxes.
    The bottom-left pixel encodes the frame index so every frame is unique."""
    cut = n_frames // 2
    frames = []
    for f in range(n_frames):
        bg = (20, 24, 30) if f < cut else (210, 205, 200)
        arr = np.empty((h, w, 3), dtype=np.uint8)
        arr[:] = bg
        for (x1, y1, x2, y2), color in boxes_per_frame[f]:
            arr[int(y1):int(y2), int(x1):int(x2)] = color
        arr[h - 1, 0] = ((f * 9) % 256, 77, (f * 31) % 256)
        frames.append(arr)
    return frames


def build_dataset(root: Path, n_prompt_subs_check: bool = True) -> dict:
    """Write a 5-clip single-movie dataset under root; returns its paths."""
    rng = np.random.default_rng(7)
    centers = [unit(rng) for _ in CAST]

    frames_root = root / "frames"
    n_frames, w, h, fps = 24, 64, 48, 3.0
    person_colors = [(200, 60, 60), (60, 200, 60), (60, 60, 200)]

    clips_lines = []
    det_lines = []
    for clip_id, start_s, present in CLIP_PLAN:
        boxes_per_frame = []
        for f in range(n_frames):
            row = []
            for slot, cast_idx in enumerate(present):
                x0 = 4 + slot * 34 + (f % 12) // 4  # slow drift, IoU-continuous
                box = (x0, 10 + slot * 4, x0 + 16, 34 + slot * 4)
                row.append((box, person_colors[cast_idx]))
            boxes_per_frame.append(row)
        arrays = _clip_frames(rng, n_frames, w, h, boxes_per_frame)
        clip_dir = frames_root / clip_id
        clip_dir.mkdir(parents=True, exist_ok=True)
        for f, arr in enumerate(arrays):
            FrameBuffer.from_array(arr).save_png(clip_dir / f"{f:03d}.png")

        for f in range(n_frames):
            for slot, cast_idx in enumerate(present):
                (x1, y1, x2, y2), _ = boxes_per_frame[f][slot]
                emb = jitter(rng, centers[cast_idx], 0.15)
                det_lines.append(json.dumps({
                    "clip_id": clip_id,
                    "frame_idx": f,
                    "person_box": [x1, y1, x2, y2],
                    "confidence": 0.9,
                    "face_box": [x1 + 4, y1 + 2, x1 + 12, y1 + 10],
                    "face_embedding": [round(float(v), 6) for v in emb],
                }))
        clips_lines.append(json.dumps({
            "clip_id": clip_id,
            "movie_id": "mv1",
            "movie_title": "The Long Night",
            "start_s": start_s,
            "end_s": start_s + n_frames / fps,
            "frame_dir": clip_id,
            "fps": fps,
        }))

    (root / "clips.jsonl").write_text("\n".join(clips_lines) + "\n")
    (root / "detections.jsonl").write_text("\n".join(det_lines) + "\n")
    (root / "cast.json").write_text(json.dumps(CAST, indent=1))

    gallery_lines = []
    for member, center in zip(CAST, centers):
        emb = jitter(rng, center, 0.3)  # profile photos drift from footage
        gallery_lines.append(json.dumps({
            "cast_id": member["cast_id"],
            "kind": "original",
            "embedding": [round(float(v), 6) for v in emb],
        }))
    (root / "gallery.jsonl").write_text("\n".join(gallery_lines) + "\n")

    srt_blocks = []
    for i, (s, e, text) in enumerate(SUBTITLES, 1):
        def ts(t):
            ms = int(round(t * 1000))
            return f"{ms//3600000:02d}:{ms//60000%60:02d}:{ms//1000%60:02d},{ms%1000:03d}"
        srt_blocks.append(f"{i}\n{ts(s)} --> {ts(e)}\n{text}\n")
    (root / "movie.srt").write_text("\n".join(srt_blocks))

    gt_lines = []
    for clip_id, start_s, _ in CLIP_PLAN:
        gt_lines.append(json.dumps({
            "clip_id": clip_id,
            "start_s": start_s,
            "end_s": start_s + n_frames / fps,
            "text": GT_TEXTS[clip_id],
        }))
    (root / "ground_truth.jsonl").write_text("\n".join(gt_lines) + "\n")

    return {
        "clips": root / "clips.jsonl",
        "frames_root": frames_root,
        "detections": root / "detections.jsonl",
        "subtitles": root / "movie.srt",
        "cast": root / "cast.json",
        "cast_embeddings": root / "gallery.jsonl",
        "ground_truth": root / "ground_truth.jsonl",
    }


@pytest.fixture(scope="session")
def dataset(tmp_path_factory) -> dict:
    root = tmp_path_factory.mktemp("movie_dataset")
    return build_dataset(root)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
