"""Prompt-frame sampling and character overlays (green boxes, name tags).

All drawing is done with an embedded 5x7 bitmap font on owned frame copies,
so rendering is deterministic and dependency-free.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

OVERLAY_MODES = ("none", "bbox_only", "name_only", "bbox_and_name")

GLYPH_W = 5
GLYPH_H = 7
# per-glyph cell: 5 px glyph + 1 px spacing; 1 px pad above and below
CELL_W = GLYPH_W + 1
LABEL_H = GLYPH_H + 2

_FONT = {
    "A": (".XXX.", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"),
    "B": ("XXXX.", "X...X", "X...X", "XXXX.", "X...X", "X...X", "XXXX."),
    "C": (".XXX.", "X...X", "X....", "X....", "X....", "X...X", ".XXX."),
    "D": ("XXXX.", "X...X", "X...X", "X...X", "X...X", "X...X", "XXXX."),
    "E": ("XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "XXXXX"),
    "F": ("XXXXX", "X....", "X....", "XXXX.", "X....", "X....", "X...."),
    "G": (".XXX.", "X...X", "X....", "X.XXX", "X...X", "X...X", ".XXXX"),
    "H": ("X...X", "X...X", "X...X", "XXXXX", "X...X", "X...X", "X...X"),
    "I": ("XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "XXXXX"),
    "J": ("..XXX", "...X.", "...X.", "...X.", "...X.", "X..X.", ".XX.."),
    "K": ("X...X", "X..X.", "X.X..", "XX...", "X.X..", "X..X.", "X...X"),
    "L": ("X....", "X....", "X....", "X....", "X....", "X....", "XXXXX"),
    "M": ("X...X", "XX.XX", "X.X.X", "X.X.X", "X...X", "X...X", "X...X"),
    "N": ("X...X", "XX..X", "X.X.X", "X..XX", "X...X", "X...X", "X...X"),
    "O": (".XXX.", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."),
    "P": ("XXXX.", "X...X", "X...X", "XXXX.", "X....", "X....", "X...."),
    "Q": (".XXX.", "X...X", "X...X", "X...X", "X.X.X", "X..X.", ".XX.X"),
    "R": ("XXXX.", "X...X", "X...X", "XXXX.", "X.X..", "X..X.", "X...X"),
    "S": (".XXXX", "X....", "X....", ".XXX.", "....X", "....X", "XXXX."),
    "T": ("XXXXX", "..X..", "..X..", "..X..", "..X..", "..X..", "..X.."),
    "U": ("X...X", "X...X", "X...X", "X...X", "X...X", "X...X", ".XXX."),
    "V": ("X...X", "X...X", "X...X", "X...X", "X...X", ".X.X.", "..X.."),
    "W": ("X...X", "X...X", "X...X", "X.X.X", "X.X.X", "XX.XX", "X...X"),
    "X": ("X...X", "X...X", ".X.X.", "..X..", ".X.X.", "X...X", "X...X"),
    "Y": ("X...X", "X...X", ".X.X.", "..X..", "..X..", "..X..", "..X.."),
    "Z": ("XXXXX", "....X", "...X.", "..X..", ".X...", "X....", "XXXXX"),
    "0": (".XXX.", "X...X", "X..XX", "X.X.X", "XX..X", "X...X", ".XXX."),
    "1": ("..X..", ".XX..", "..X..", "..X..", "..X..", "..X..", "XXXXX"),
    "2": (".XXX.", "X...X", "....X", "...X.", "..X..", ".X...", "XXXXX"),
    "3": (".XXX.", "X...X", "....X", "..XX.", "....X", "X...X", ".XXX."),
    "4": ("...X.", "..XX.", ".X.X.", "X..X.", "XXXXX", "...X.", "...X."),
    "5": ("XXXXX", "X....", "XXXX.", "....X", "....X", "X...X", ".XXX."),
    "6": (".XXX.", "X....", "X....", "XXXX.", "X...X", "X...X", ".XXX."),
    "7": ("XXXXX", "....X", "...X.", "..X..", ".X...", ".X...", ".X..."),
    "8": (".XXX.", "X...X", "X...X", ".XXX.", "X...X", "X...X", ".XXX."),
    "9": (".XXX.", "X...X", "X...X", ".XXXX", "....X", "....X", ".XXX."),
    " ": (".....", ".....", ".....", ".....", ".....", ".....", "....."),
    "-": (".....", ".....", ".....", ".XXX.", ".....", ".....", "....."),
    ".": (".....", ".....", ".....", ".....", ".....", ".XX..", ".XX.."),
    "'": ("..X..", "..X..", ".....", ".....", ".....", ".....", "....."),
    ",": (".....", ".....", ".....", ".....", ".....", "..X..", ".X..."),
    "?": (".XXX.", "X...X", "....X", "...X.", "..X..", ".....", "..X.."),
    "!": ("..X..", "..X..", "..X..", "..X..", "..X..", ".....", "..X.."),
}


@dataclass
class FrameBuffer:
    """One 8-bit RGB frame; pixels is a (height, width, 3) uint8 array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.shape != (self.height, self.width, 3):
            raise ValueError(
                f"pixel buffer shape {self.pixels.shape} does not match "
                f"{self.height}x{self.width}x3"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FrameBuffer":
        arr = np.asarray(arr, dtype=np.uint8)
        return cls(width=arr.shape[1], height=arr.shape[0], pixels=arr)

    @classmethod
    def solid(cls, width: int, height: int, rgb=(0, 0, 0)) -> "FrameBuffer":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = rgb
        return cls(width=width, height=height, pixels=arr)

    def copy(self) -> "FrameBuffer":
        return FrameBuffer(self.width, self.height, self.pixels.copy())

    def tobytes(self) -> bytes:
        return self.pixels.tobytes()

    def digest(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(f"{self.width}x{self.height}:".encode())
        h.update(self.pixels.tobytes())
        return h.hexdigest()

    def save_png(self, path: Path | str) -> None:
        Image.fromarray(self.pixels, mode="RGB").save(path, format="PNG")


@dataclass
class OverlayStyle:
    mode: str = "name_only"
    box_color: tuple[int, int, int] = (0, 255, 0)
    box_thickness: int = 3
    label_scale: int = 1
    text_color: tuple[int, int, int] = field(default=(255, 255, 255))

    def __post_init__(self):
        if self.mode not in OVERLAY_MODES:
            raise ValueError(f"overlay mode must be one of {OVERLAY_MODES}, got {self.mode!r}")
        if self.label_scale < 1:
            raise ValueError("label_scale must be >= 1")

    @property
    def wants_box(self) -> bool:
        return self.mode in ("bbox_only", "bbox_and_name")

    @property
    def wants_name(self) -> bool:
        return self.mode in ("name_only", "bbox_and_name")


def sample_frames(num_frames_in_clip: int, n: int = 10) -> list[int]:
    """Endpoint-inclusive uniform sampling of n frame indices from a clip.

    Returns floor(k*(L-1)/(n-1)) for k in 0..n-1, duplicates removed. Clips
    shorter than n yield every index once.
    """
    if num_frames_in_clip < 1:
        raise ValueError("clip must have at least one frame")
    if n < 1:
        raise ValueError("n must be >= 1")
    length = num_frames_in_clip
    if length <= n:
        return list(range(length))
    if n == 1:
        return [0]
    out = []
    for k in range(n):
        idx = (k * (length - 1)) // (n - 1)
        if not out or idx != out[-1]:
            out.append(idx)
    return out


def _draw_box_inplace(frame: FrameBuffer, box, style: OverlayStyle) -> None:
    t = style.box_thickness
    if t <= 0:
        return
    rx1, rx2 = int(round(box.x1)), int(round(box.x2))
    ry1, ry2 = int(round(box.y1)), int(round(box.y2))
    color = np.array(style.box_color, dtype=np.uint8)
    px = frame.pixels
    # four bands of the outline, each clipped to the frame independently
    bands = [
        (ry1, ry1 + t, rx1, rx2),        # top
        (ry2 - t, ry2, rx1, rx2),        # bottom
        (ry1, ry2, rx1, rx1 + t),        # left
        (ry1, ry2, rx2 - t, rx2),        # right
    ]
    for by1, by2, bx1, bx2 in bands:
        by1, by2 = max(0, by1), min(frame.height, by2)
        bx1, bx2 = max(0, bx1), min(frame.width, bx2)
        if by2 > by1 and bx2 > bx1:
            px[by1:by2, bx1:bx2] = color


def label_size(text: str, style: OverlayStyle) -> tuple[int, int]:
    return len(text) * CELL_W * style.label_scale, LABEL_H * style.label_scale


def _label_anchor_rect(
    anchor: tuple[float, float], text: str, style: OverlayStyle, frame_w: int, frame_h: int
) -> tuple[int, int, int, int]:
    """Place the label rect above the anchor, shifting down-inside at the top
    edge and clamping into the frame. Returns (x, y, w, h)."""
    w, h = label_size(text, style)
    ax, ay = int(round(anchor[0])), int(round(anchor[1]))
    y = ay - h
    if y < 0:
        y = ay
    x = max(0, min(ax, frame_w - w))
    y = max(0, min(y, frame_h - h))
    return x, y, w, h


def _draw_label_inplace(
    frame: FrameBuffer, rect: tuple[int, int, int, int], text: str, style: OverlayStyle
) -> None:
    x, y, w, h = rect
    s = style.label_scale
    px = frame.pixels
    bg = np.array(style.box_color, dtype=np.uint8)
    fg = np.array(style.text_color, dtype=np.uint8)
    bx1, bx2 = max(0, x), min(frame.width, x + w)
    by1, by2 = max(0, y), min(frame.height, y + h)
    if bx2 <= bx1 or by2 <= by1:
        return
    px[by1:by2, bx1:bx2] = bg
    for i, ch in enumerate(text.upper()):
        glyph = _FONT.get(ch, _FONT[" "])
        gx0 = x + i * CELL_W * s
        gy0 = y + s
        for row in range(GLYPH_H):
            for col in range(GLYPH_W):
                if glyph[row][col] != "X":
                    continue
                py1, py2 = gy0 + row * s, gy0 + (row + 1) * s
                qx1, qx2 = gx0 + col * s, gx0 + (col + 1) * s
                py1, py2 = max(0, py1), min(frame.height, py2)
                qx1, qx2 = max(0, qx1), min(frame.width, qx2)
                if py2 > py1 and qx2 > qx1:
                    px[py1:py2, qx1:qx2] = fg


def draw_box(frame: FrameBuffer, box, style: OverlayStyle) -> FrameBuffer:
    """Return a copy of frame with the box outline drawn (clamped to bounds)."""
    out = frame.copy()
    _draw_box_inplace(out, box, style)
    return out


def draw_label(frame: FrameBuffer, anchor: tuple[float, float], text: str, style: OverlayStyle) -> FrameBuffer:
    """Return a copy of frame with a name tag rendered near the anchor point."""
    if not text:
        raise ValueError("label text must be non-empty")
    out = frame.copy()
    rect = _label_anchor_rect(anchor, text, style, frame.width, frame.height)
    _draw_label_inplace(out, rect, text, style)
    return out


def _rects_intersect(a: tuple[int, int, int, int], b: tuple[int, int, int, int]) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return ax < bx + bw and bx < ax + aw and ay < by + bh and by < ay + ah


def render_overlays(
    frames: list[FrameBuffer],
    frame_indices: list[int],
    tracklets,
    style: OverlayStyle,
) -> list[FrameBuffer]:
    """Render per-character overlays on sampled frames.

    frames[i] is the frame at original index frame_indices[i]; tracklets are
    matched by their per-frame boxes. Unnamed tracklets are skipped. Mode
    "none" returns untouched copies. Colliding name tags stack downward in
    tracklet-id order.
    """
    if len(frames) != len(frame_indices):
        raise ValueError("frames and frame_indices must have equal length")
    out = [f.copy() for f in frames]
    if style.mode == "none":
        return out
    named = sorted((t for t in tracklets if t.name), key=lambda t: t.tracklet_id)
    for frame, idx in zip(out, frame_indices):
        present = [t for t in named if idx in t.boxes]
        if style.wants_box:
            for t in present:
                _draw_box_inplace(frame, t.boxes[idx], style)
        if style.wants_name:
            placed: list[tuple[int, int, int, int]] = []
            for t in present:
                box = t.boxes[idx]
                x, y, w, h = _label_anchor_rect(
                    (box.x1, box.y1), t.name, style, frame.width, frame.height
                )
                # stack below earlier labels on collision
                for _ in range(len(placed) + 2):
                    hits = [r for r in placed if _rects_intersect((x, y, w, h), r)]
                    if not hits:
                        break
                    y = max(r[1] + r[3] for r in hits)
                    if y + h > frame.height:
                        y = frame.height - h
                        break
                placed.append((x, y, w, h))
                _draw_label_inplace(frame, (x, y, w, h), t.name, style)
    return out
