"""Classical, fully deterministic person and face detectors.

These are desk-scale stand-ins behind the same interchange contract that a
learned detector stack would produce; swap in heavier models by registering
another backend name. The "blob" person detector segments foreground
against the dominant background color; the "topblob" face detector looks
for a skin-toned (else simply distinct) region in the upper part of a
person box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Detection:
    box: tuple[float, float, float, float]  # x1, y1, x2, y2 in pixels
    confidence: float


def _background_color(img: np.ndarray) -> np.ndarray:
    # dominant color of the frame border; robust for synthetic and static shots
    border = np.concatenate([
        img[0, :].reshape(-1, 3), img[-1, :].reshape(-1, 3),
        img[:, 0].reshape(-1, 3), img[:, -1].reshape(-1, 3),
    ])
    colors, counts = np.unique(border, axis=0, return_counts=True)
    return colors[counts.argmax()].astype(np.int32)


def detect_persons_blob(
    img: np.ndarray, color_tol: int = 40, min_area_frac: float = 0.002
) -> list[Detection]:
    """Connected foreground components, boxed.

    Confidence is the component's fill ratio within its box, which is 1.0
    for solid figures and lower for ragged ones.
    """
    h, w = img.shape[:2]
    bg = _background_color(img)
    dist = np.abs(img.astype(np.int32) - bg).sum(axis=2)
    mask = dist > color_tol
    labels, n = ndimage.label(mask)
    out = []
    min_area = max(4, int(min_area_frac * h * w))
    for idx in range(1, n + 1):
        ys, xs = np.nonzero(labels == idx)
        if ys.size < min_area:
            continue
        x1, x2 = int(xs.min()), int(xs.max()) + 1
        y1, y2 = int(ys.min()), int(ys.max()) + 1
        fill = ys.size / ((x2 - x1) * (y2 - y1))
        out.append(Detection(box=(float(x1), float(y1), float(x2), float(y2)),
                             confidence=float(min(1.0, fill))))
    out.sort(key=lambda d: (d.box[0], d.box[1]))
    return out


_SKIN_LO = np.array([140, 90, 60])
_SKIN_HI = np.array([255, 200, 170])


def detect_face_topblob(img: np.ndarray, person_box) -> tuple[float, float, float, float] | None:
    """Face region inside the upper half of a person box.

    Prefers skin-toned pixels; falls back to any pixels distinct from the
    person's dominant color (head vs clothing). Returns frame coordinates
    or None when nothing plausible is present.
    """
    x1, y1, x2, y2 = (int(round(v)) for v in person_box)
    h, w = img.shape[:2]
    x1, y1 = max(0, x1), max(0, y1)
    x2, y2 = min(w, x2), min(h, y2)
    if x2 <= x1 or y2 <= y1:
        return None
    top = img[y1 : y1 + max(1, (y2 - y1) // 2), x1:x2]
    skin = np.all((top >= _SKIN_LO) & (top <= _SKIN_HI), axis=2)
    if not skin.any():
        crop = top.reshape(-1, 3)
        colors, counts = np.unique(crop, axis=0, return_counts=True)
        dominant = colors[counts.argmax()].astype(np.int32)
        skin = np.abs(top.astype(np.int32) - dominant).sum(axis=2) > 40
    if not skin.any():
        return None
    ys, xs = np.nonzero(skin)
    if ys.size < 4:
        return None
    fx1, fx2 = x1 + int(xs.min()), x1 + int(xs.max()) + 1
    fy1, fy2 = y1 + int(ys.min()), y1 + int(ys.max()) + 1
    return (float(fx1), float(fy1), float(fx2), float(fy2))


PERSON_DETECTORS = {"blob": detect_persons_blob}
FACE_DETECTORS = {"topblob": detect_face_topblob}
