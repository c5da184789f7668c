"""Loaders for all external inputs: frame directories, SRT subtitles, cast
lists, ground-truth ADs, detection/embedding interchange files, and the
per-clip manifest. Every record is validated at load time."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from adgen.annotate import FrameBuffer
from adgen.tracker import BoundingBox

EMBEDDING_DIM = 512

_FRAME_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".ppm"}

_SRT_TIME_RE = re.compile(
    r"(\d{1,2}):(\d{2}):(\d{2})[,.](\d{1,3})\s*-->\s*(\d{1,2}):(\d{2}):(\d{2})[,.](\d{1,3})"
)


class IngestError(ValueError):
    """Raised when an input file violates its documented format."""


@dataclass
class MovieClip:
    clip_id: str
    movie_id: str
    start_s: float
    end_s: float
    frame_dir: Path
    fps: float
    movie_title: str | None = None

    def __post_init__(self):
        if self.end_s <= self.start_s:
            raise IngestError(f"clip {self.clip_id}: end_s must exceed start_s")
        if self.fps <= 0:
            raise IngestError(f"clip {self.clip_id}: fps must be positive")

    @property
    def title(self) -> str:
        return self.movie_title if self.movie_title else self.movie_id


@dataclass
class Subtitle:
    index: int
    start_s: float
    end_s: float
    text: str

    def __post_init__(self):
        if self.end_s < self.start_s:
            raise IngestError(f"subtitle {self.index}: end before start")
        if not self.text.strip():
            raise IngestError(f"subtitle {self.index}: empty text")


@dataclass
class CastMember:
    cast_id: str
    actor_name: str
    character_name: str
    profile_image: str

    def __post_init__(self):
        if not self.character_name.strip():
            raise IngestError(f"cast {self.cast_id}: empty character_name")


@dataclass
class DetectionRecord:
    frame_idx: int
    person_box: BoundingBox
    confidence: float
    face_box: BoundingBox | None = None
    face_embedding: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise IngestError(f"frame {self.frame_idx}: confidence outside [0,1]")
        if self.face_embedding is not None:
            self.face_embedding = np.asarray(self.face_embedding, dtype=np.float64)
            if self.face_embedding.shape != (EMBEDDING_DIM,):
                raise IngestError(
                    f"frame {self.frame_idx}: face_embedding has "
                    f"{self.face_embedding.shape[0] if self.face_embedding.ndim == 1 else '?'} "
                    f"floats, expected {EMBEDDING_DIM}"
                )


@dataclass
class GroundTruthAD:
    clip_id: str
    text: str
    start_s: float = 0.0
    end_s: float = 0.0
    word_count: int = field(init=False)

    def __post_init__(self):
        self.word_count = len(self.text.split())


def load_frames(frame_dir: Path | str) -> list[FrameBuffer]:
    """Read all raster frames of a clip directory in ascending index order.

    Files must be named by zero-padded frame index (e.g. 000.png). All frames
    must share one width/height.
    """
    frame_dir = Path(frame_dir)
    if not frame_dir.is_dir():
        raise IngestError(f"frame directory not found: {frame_dir}")
    entries = []
    for p in frame_dir.iterdir():
        if p.suffix.lower() not in _FRAME_EXTENSIONS:
            continue
        if not p.stem.isdigit():
            raise IngestError(f"frame file not named by index: {p.name}")
        entries.append((int(p.stem), p))
    if not entries:
        raise IngestError(f"no frames in {frame_dir}")
    entries.sort()

    frames = []
    size = None
    for _, p in entries:
        try:
            with Image.open(p) as im:
                rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise IngestError(f"undecodable image {p.name}: {exc}") from exc
        if size is None:
            size = rgb.shape[:2]
        elif rgb.shape[:2] != size:
            raise IngestError(
                f"mixed dimensions in {frame_dir}: {p.name} is "
                f"{rgb.shape[1]}x{rgb.shape[0]}, expected {size[1]}x{size[0]}"
            )
        frames.append(FrameBuffer.from_array(rgb))
    return frames


def _srt_seconds(h: str, m: str, s: str, ms: str) -> float:
    return int(h) * 3600 + int(m) * 60 + int(s) + int(ms.ljust(3, "0")) / 1000.0


def parse_srt(text: str) -> list[Subtitle]:
    """Parse SRT text into subtitles sorted by start time.

    Multi-line bodies are joined with a single space. A malformed timestamp
    line is reported with its 1-based line number.
    """
    lines = text.split("\n")
    subs: list[Subtitle] = []
    i = 0
    n = len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        index_line = lines[i].strip().lstrip("﻿")
        i += 1
        if i >= n:
            raise IngestError(f"line {i}: subtitle block truncated before timestamps")
        m = _SRT_TIME_RE.match(lines[i].strip())
        if m is None:
            raise IngestError(f"line {i + 1}: malformed timestamp line: {lines[i]!r}")
        start = _srt_seconds(*m.groups()[:4])
        end = _srt_seconds(*m.groups()[4:])
        i += 1
        body = []
        while i < n and lines[i].strip():
            body.append(lines[i].strip())
            i += 1
        try:
            index = int(index_line)
        except ValueError as exc:
            raise IngestError(f"line {i - len(body) - 1}: bad subtitle index {index_line!r}") from exc
        subs.append(Subtitle(index=index, start_s=start, end_s=end, text=" ".join(body)))
    subs.sort(key=lambda s: (s.start_s, s.index))
    return subs


def format_srt(subs: list[Subtitle]) -> str:
    """Serialize subtitles back to SRT (inverse of parse_srt on valid input)."""

    def fmt(t: float) -> str:
        ms = int(round(t * 1000))
        return f"{ms // 3600000:02d}:{ms // 60000 % 60:02d}:{ms // 1000 % 60:02d},{ms % 1000:03d}"

    blocks = [f"{s.index}\n{fmt(s.start_s)} --> {fmt(s.end_s)}\n{s.text}\n" for s in subs]
    return "\n".join(blocks)


def load_subtitles(path: Path | str) -> list[Subtitle]:
    return parse_srt(Path(path).read_text(encoding="utf-8-sig"))


def load_cast(path: Path | str) -> list[CastMember]:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, list):
        raise IngestError(f"{path}: cast list must be a JSON array")
    members = []
    seen = set()
    for entry in raw:
        member = CastMember(
            cast_id=str(entry["cast_id"]),
            actor_name=str(entry.get("actor_name", "")),
            character_name=str(entry["character_name"]),
            profile_image=str(entry.get("profile_image", "")),
        )
        if member.cast_id in seen:
            raise IngestError(f"{path}: duplicate cast_id {member.cast_id}")
        seen.add(member.cast_id)
        members.append(member)
    return members


def load_ground_truth(path: Path | str) -> list[GroundTruthAD]:
    records = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}:{lineno}: invalid JSON") from exc
        records.append(
            GroundTruthAD(
                clip_id=str(obj["clip_id"]),
                text=str(obj["text"]),
                start_s=float(obj.get("start_s", 0.0)),
                end_s=float(obj.get("end_s", 0.0)),
            )
        )
    return records


def _box_from_list(vals, what: str) -> BoundingBox:
    if len(vals) != 4:
        raise IngestError(f"{what}: box must be [x1,y1,x2,y2]")
    return BoundingBox(*(float(v) for v in vals))


def load_detections(
    path: Path | str, known_clips: set[str] | None = None
) -> dict[str, list[DetectionRecord]]:
    """Load the JSON-lines detection/embedding interchange file.

    Returns records grouped by clip_id, each group sorted by frame index.
    When known_clips is given, a record naming any other clip is an error.
    """
    by_clip: dict[str, list[DetectionRecord]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"{path}:{lineno}: invalid JSON") from exc
        clip_id = str(obj["clip_id"])
        if known_clips is not None and clip_id not in known_clips:
            raise IngestError(f"{path}:{lineno}: unknown clip_id {clip_id!r}")
        try:
            record = DetectionRecord(
                frame_idx=int(obj["frame_idx"]),
                person_box=_box_from_list(obj["person_box"], f"{path}:{lineno}"),
                confidence=float(obj["confidence"]),
                face_box=_box_from_list(obj["face_box"], f"{path}:{lineno}")
                if obj.get("face_box") is not None
                else None,
                face_embedding=obj.get("face_embedding"),
            )
        except IngestError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from exc
        by_clip.setdefault(clip_id, []).append(record)
    for records in by_clip.values():
        records.sort(key=lambda r: r.frame_idx)
    return by_clip


def load_clips(path: Path | str, frames_root: Path | str | None = None) -> list[MovieClip]:
    """Load the clip manifest (JSON-lines, one clip per line).

    frame_dir entries may be relative; they are resolved against frames_root.
    """
    clips = []
    seen = set()
    root = Path(frames_root) if frames_root is not None else None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        frame_dir = Path(obj["frame_dir"])
        if root is not None and not frame_dir.is_absolute():
            frame_dir = root / frame_dir
        clip = MovieClip(
            clip_id=str(obj["clip_id"]),
            movie_id=str(obj["movie_id"]),
            start_s=float(obj["start_s"]),
            end_s=float(obj["end_s"]),
            frame_dir=frame_dir,
            fps=float(obj.get("fps", 24.0)),
            movie_title=obj.get("movie_title"),
        )
        if clip.clip_id in seen:
            raise IngestError(f"{path}:{lineno}: duplicate clip_id {clip.clip_id}")
        seen.add(clip.clip_id)
        clips.append(clip)
    return clips
