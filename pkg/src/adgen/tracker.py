"""Per-shot person tracking from frame detections.

IoU-only association solved as an optimal bipartite matching per frame, with
a one-frame coast tolerance before a track terminates. Background characters
are removed by length/confidence filtering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from adgen.shotseg import Shot

COAST_FRAMES = 1  # a track may miss this many consecutive frames and survive
_TIEBREAK_EPS = 1e-9


@dataclass(frozen=True)
class BoundingBox:
    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x2 <= self.x1 or self.y2 <= self.y1:
            raise ValueError(f"degenerate box ({self.x1},{self.y1},{self.x2},{self.y2})")

    @property
    def area(self) -> float:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_list(self) -> list[float]:
        return [self.x1, self.y1, self.x2, self.y2]


@dataclass
class Tracklet:
    tracklet_id: int
    shot: Shot
    boxes: dict[int, BoundingBox] = field(default_factory=dict)
    confidences: dict[int, float] = field(default_factory=dict)
    face_embeddings: dict[int, np.ndarray] = field(default_factory=dict)
    name: str | None = None
    cast_id: str | None = None

    @property
    def frames(self) -> list[int]:
        return sorted(self.boxes)

    @property
    def length(self) -> int:
        return len(self.boxes)

    @property
    def mean_confidence(self) -> float:
        if not self.confidences:
            return 0.0
        return sum(self.confidences.values()) / len(self.confidences)

    def embedding_matrix(self) -> np.ndarray:
        """Face embeddings stacked in frame order; shape (m, dim), m may be 0."""
        keys = sorted(self.face_embeddings)
        if not keys:
            return np.empty((0, 0))
        return np.stack([self.face_embeddings[k] for k in keys])

    def validate(self) -> None:
        frames = self.frames
        if not frames:
            raise ValueError(f"tracklet {self.tracklet_id} is empty")
        if frames[0] < self.shot.start_frame or frames[-1] >= self.shot.end_frame:
            raise ValueError(f"tracklet {self.tracklet_id} leaves its shot")
        if frames != list(range(frames[0], frames[-1] + 1)):
            raise ValueError(f"tracklet {self.tracklet_id} has frame gaps")
        if not set(self.face_embeddings) <= set(self.boxes):
            raise ValueError(f"tracklet {self.tracklet_id} has embeddings off its boxes")


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    ix = min(a.x2, b.x2) - max(a.x1, b.x1)
    iy = min(a.y2, b.y2) - max(a.y1, b.y1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def associate_frame(
    track_boxes: list[BoundingBox],
    det_boxes: list[BoundingBox],
    iou_min: float = 0.3,
    track_priority: list | None = None,
) -> list[tuple[int, int]]:
    """One-to-one track/detection assignment maximizing total IoU.

    Pairs with IoU below iou_min stay unmatched. Ties in total IoU prefer
    keeping higher-priority (older, lower-id) tracks alive, encoded as an
    epsilon bonus that cannot override IoU differences above 1e-9.
    """
    if not track_boxes or not det_boxes:
        return []
    n_t, n_d = len(track_boxes), len(det_boxes)
    scores = np.zeros((n_t, n_d))
    for ti, tb in enumerate(track_boxes):
        for di, db in enumerate(det_boxes):
            scores[ti, di] = iou(tb, db)
    valid = (scores >= iou_min) & (scores > 0)
    if track_priority is None:
        order = list(range(n_t))
    else:
        order = sorted(range(n_t), key=lambda i: track_priority[i])
    bonus = np.zeros(n_t)
    for rank, ti in enumerate(order):
        bonus[ti] = _TIEBREAK_EPS * 2.0 ** (-rank)
    weights = np.where(valid, scores + bonus[:, None], 0.0)
    rows, cols = linear_sum_assignment(-weights)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if valid[r, c]]


class _ActiveTrack:
    __slots__ = ("tid", "start", "last_matched", "boxes", "confs", "embs")

    def __init__(self, tid: int, frame: int, det):
        self.tid = tid
        self.start = frame
        self.last_matched = frame
        self.boxes = {frame: det.person_box}
        self.confs = {frame: det.confidence}
        self.embs = {}
        if det.face_embedding is not None:
            self.embs[frame] = det.face_embedding

    def update(self, frame: int, det) -> None:
        if frame - self.last_matched == 2:
            # one coasted frame: fill the gap by linear interpolation so the
            # tracklet stays frame-consecutive
            prev = self.boxes[self.last_matched]
            cur = det.person_box
            mid = frame - 1
            self.boxes[mid] = BoundingBox(
                (prev.x1 + cur.x1) / 2,
                (prev.y1 + cur.y1) / 2,
                (prev.x2 + cur.x2) / 2,
                (prev.y2 + cur.y2) / 2,
            )
            self.confs[mid] = (self.confs[self.last_matched] + det.confidence) / 2
        self.boxes[frame] = det.person_box
        self.confs[frame] = det.confidence
        if det.face_embedding is not None:
            self.embs[frame] = det.face_embedding
        self.last_matched = frame

    def to_tracklet(self, shot: Shot) -> Tracklet:
        return Tracklet(
            tracklet_id=self.tid,
            shot=shot,
            boxes=self.boxes,
            confidences=self.confs,
            face_embeddings=self.embs,
        )


def build_tracklets(
    shot_detections: dict[int, list],
    shot: Shot,
    iou_min: float = 0.3,
    id_start: int = 0,
) -> list[Tracklet]:
    """Track detections through one shot.

    shot_detections maps frame_idx to that frame's DetectionRecords. Tracks
    unmatched for more than one consecutive frame terminate; a single missed
    frame is interpolated.
    """
    active: list[_ActiveTrack] = []
    done: list[_ActiveTrack] = []
    next_id = id_start
    for f in range(shot.start_frame, shot.end_frame):
        keep = []
        for tr in active:
            (keep if f - tr.last_matched <= COAST_FRAMES + 1 else done).append(tr)
        active = keep

        dets = shot_detections.get(f, [])
        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        if active and dets:
            pairs = associate_frame(
                [tr.boxes[tr.last_matched] for tr in active],
                [d.person_box for d in dets],
                iou_min=iou_min,
                track_priority=[(tr.start, tr.tid) for tr in active],
            )
            for ti, di in pairs:
                active[ti].update(f, dets[di])
                matched_tracks.add(ti)
                matched_dets.add(di)
        for di, det in enumerate(dets):
            if di not in matched_dets:
                active.append(_ActiveTrack(next_id, f, det))
                next_id += 1
    done.extend(active)
    tracklets = [tr.to_tracklet(shot) for tr in done]
    tracklets.sort(key=lambda t: t.tracklet_id)
    return tracklets


def filter_tracklets(
    tracklets: list[Tracklet], min_len: int = 5, min_conf: float = 0.5
) -> list[Tracklet]:
    """Drop short or low-confidence tracklets (background characters)."""
    return [
        t for t in tracklets if t.length >= min_len and t.mean_confidence >= min_conf
    ]
