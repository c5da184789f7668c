"""Face alignment and embedding.

Face crops are aligned (resized) to 112x112 before embedding. The "grid8x8"
embedder computes 8 simple appearance statistics over an 8x8 spatial grid of
the aligned crop (64 cells x 8 features = 512 dimensions) and L2-normalizes.
It is deterministic and has no weights; a learned embedder can be registered
under another name as long as it emits unit-norm 512-vectors.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

ALIGN_SIZE = 112
GRID = 8
EMBEDDING_DIM = 512


def align_face(img: np.ndarray, face_box) -> np.ndarray:
    """Crop the face box (clamped to the frame) and resize to 112x112 RGB."""
    h, w = img.shape[:2]
    x1, y1, x2, y2 = (int(round(v)) for v in face_box)
    x1, y1 = max(0, x1), max(0, y1)
    x2, y2 = min(w, max(x1 + 1, x2)), min(h, max(y1 + 1, y2))
    crop = img[y1:y2, x1:x2]
    pil = Image.fromarray(crop, mode="RGB").resize(
        (ALIGN_SIZE, ALIGN_SIZE), Image.BILINEAR
    )
    return np.asarray(pil, dtype=np.uint8)


def embed_grid(aligned: np.ndarray) -> np.ndarray:
    """512-d grid-statistics embedding of an aligned 112x112 crop."""
    if aligned.shape != (ALIGN_SIZE, ALIGN_SIZE, 3):
        raise ValueError(f"expected {ALIGN_SIZE}x{ALIGN_SIZE}x3 input, got {aligned.shape}")
    img = aligned.astype(np.float64) / 255.0
    gray = img.mean(axis=2)
    gx = np.zeros_like(gray)
    gy = np.zeros_like(gray)
    gx[:, 1:-1] = (gray[:, 2:] - gray[:, :-2]) / 2
    gy[1:-1, :] = (gray[2:, :] - gray[:-2, :]) / 2
    cell = ALIGN_SIZE // GRID
    feats = []
    for cy in range(GRID):
        for cx in range(GRID):
            sl = (slice(cy * cell, (cy + 1) * cell), slice(cx * cell, (cx + 1) * cell))
            feats.extend([
                gray[sl].mean(),
                gray[sl].std(),
                gx[sl].mean(),
                gy[sl].mean(),
                img[sl + (0,)].mean(),
                img[sl + (1,)].mean(),
                img[sl + (2,)].mean(),
                float((np.abs(gx[sl]) + np.abs(gy[sl]) > 0.05).mean()),
            ])
    vec = np.asarray(feats)
    assert vec.shape == (EMBEDDING_DIM,)
    norm = np.linalg.norm(vec)
    if norm == 0.0:
        vec = np.full(EMBEDDING_DIM, 1.0)
        norm = np.linalg.norm(vec)
    return vec / norm


def embed_face(img: np.ndarray, face_box) -> np.ndarray:
    return embed_grid(align_face(img, face_box))


EMBEDDERS = {"grid8x8": embed_face}
