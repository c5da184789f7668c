"""Extraction driver: frames + cast photos in, interchange files out.

Output formats (consumed by the AD pipeline's loaders):
  detections: JSON-lines {clip_id, frame_idx, person_box, confidence,
              face_box?, face_embedding?}
  gallery:    JSON-lines {cast_id, kind: "original", embedding}
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from adextract.detect import FACE_DETECTORS, PERSON_DETECTORS
from adextract.embed import EMBEDDERS

log = logging.getLogger("adextract")

_FRAME_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"}


@dataclass
class ExtractionJob:
    frames_root: Path
    output_detections: Path
    cast_file: Path | None = None
    cast_images_root: Path | None = None
    output_gallery: Path | None = None
    person_detector: str = "blob"
    face_detector: str = "topblob"
    face_embedder: str = "grid8x8"
    clip_ids: list[str] = field(default_factory=list)

    def resolve(self):
        return (
            PERSON_DETECTORS[self.person_detector],
            FACE_DETECTORS[self.face_detector],
            EMBEDDERS[self.face_embedder],
        )


def _read_image(path: Path) -> np.ndarray | None:
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except Exception as exc:
        log.warning("skipping unreadable frame %s: %s", path, exc)
        return None


def _frame_files(clip_dir: Path) -> list[tuple[int, Path]]:
    files = [
        (int(p.stem), p)
        for p in clip_dir.iterdir()
        if p.suffix.lower() in _FRAME_EXTENSIONS and p.stem.isdigit()
    ]
    files.sort()
    return files


def _embedding_json(vec: np.ndarray) -> list[float]:
    return [round(float(v), 9) for v in vec]


def extract(job: ExtractionJob) -> dict:
    """Run detection and embedding over every clip directory; returns counts.

    One detection line per person per frame. Faces are aligned to 112x112
    before embedding; persons without a plausible face keep box-only lines.
    """
    detect_persons, detect_face, embed = job.resolve()
    frames_root = Path(job.frames_root)
    clip_dirs = [
        d for d in sorted(frames_root.iterdir())
        if d.is_dir() and (not job.clip_ids or d.name in job.clip_ids)
    ]
    if not clip_dirs:
        raise ValueError(f"no clip directories under {frames_root}")

    counts = {"frames": 0, "persons": 0, "faces": 0, "clips": len(clip_dirs)}
    out_path = Path(job.output_detections)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for clip_dir in clip_dirs:
            for frame_idx, frame_path in _frame_files(clip_dir):
                img = _read_image(frame_path)
                if img is None:
                    continue
                counts["frames"] += 1
                h, w = img.shape[:2]
                for det in detect_persons(img):
                    counts["persons"] += 1
                    record = {
                        "clip_id": clip_dir.name,
                        "frame_idx": frame_idx,
                        "person_box": [min(max(v, 0.0), float(w if i % 2 == 0 else h))
                                       for i, v in enumerate(det.box)],
                        "confidence": round(det.confidence, 6),
                    }
                    face_box = detect_face(img, det.box)
                    if face_box is not None:
                        counts["faces"] += 1
                        record["face_box"] = list(face_box)
                        record["face_embedding"] = _embedding_json(embed(img, face_box))
                    fh.write(json.dumps(record, sort_keys=True) + "\n")

    if job.cast_file is not None and job.output_gallery is not None:
        _extract_gallery(job, detect_face, embed)
    return counts


def _extract_gallery(job: ExtractionJob, detect_face, embed) -> None:
    """Embed each cast member's profile image into the gallery file."""
    cast = json.loads(Path(job.cast_file).read_text(encoding="utf-8"))
    images_root = Path(job.cast_images_root or Path(job.cast_file).parent)
    out_path = Path(job.output_gallery)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as fh:
        for member in cast:
            image_path = images_root / member["profile_image"]
            img = _read_image(image_path)
            if img is None:
                log.warning("cast %s has no readable profile image", member["cast_id"])
                continue
            h, w = img.shape[:2]
            face_box = detect_face(img, (0.0, 0.0, float(w), float(h)))
            if face_box is None:
                face_box = (0.0, 0.0, float(w), float(h))  # portrait fallback
            fh.write(json.dumps({
                "cast_id": member["cast_id"],
                "kind": "original",
                "embedding": _embedding_json(embed(img, face_box)),
            }, sort_keys=True) + "\n")
