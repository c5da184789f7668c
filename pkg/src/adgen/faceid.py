"""Tracklet-level character identification against a cast gallery.

Each cast member's gallery holds the embeddings of their profile images plus
up to K exemplar embeddings mined from the movie's own detected faces (to
bridge age/makeup drift between profile photos and footage). A tracklet is
assigned the cast member with the smallest mean pairwise cosine distance
between gallery embeddings and the tracklet's face embeddings, provided that
mean falls below the threshold tau.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from adgen.tracker import Tracklet

DEFAULT_TAU = 0.6
DEFAULT_K = 5


def normalize_embedding(vec) -> np.ndarray:
    """Return vec as a unit-norm float64 vector; zero-norm input is rejected."""
    v = np.asarray(vec, dtype=np.float64).reshape(-1)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ValueError("zero-norm embedding")
    return v / norm


def embed_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine distance 1 - a.b between unit-norm embeddings; range [0, 2]."""
    return float(1.0 - np.dot(a, b))


@dataclass
class GalleryEntry:
    cast_id: str
    original: np.ndarray   # (n_original, dim)
    exemplars: np.ndarray  # (n_exemplars, dim), possibly empty

    @property
    def combined(self) -> np.ndarray:
        if self.exemplars.size == 0:
            return self.original
        return np.vstack([self.original, self.exemplars])


@dataclass
class CastGallery:
    """Per-cast reference embeddings, ordered as the cast list (ties in
    matching break toward the lowest cast index)."""

    entries: list[GalleryEntry]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def cast_ids(self) -> list[str]:
        return [e.cast_id for e in self.entries]

    def entry(self, cast_id: str) -> GalleryEntry:
        for e in self.entries:
            if e.cast_id == cast_id:
                return e
        raise KeyError(cast_id)


@dataclass
class IdentityAssignment:
    tracklet_id: int
    cast_id: str | None
    mean_distance: float


def mine_exemplars(
    cast_original: np.ndarray,
    queries: np.ndarray,
    k: int = DEFAULT_K,
    cutoff: float | None = None,
) -> np.ndarray:
    """Pick the K query embeddings closest to a cast member's originals.

    Closeness is the minimum cosine distance to any original embedding of the
    cast member. Results are ordered by ascending distance, ties by query
    index. An optional cutoff drops queries whose distance exceeds it (guards
    galleries of cast members who never appear).
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if k == 0 or queries.shape[0] == 0 or queries.size == 0:
        return np.empty((0, cast_original.shape[1]))
    originals = np.atleast_2d(np.asarray(cast_original, dtype=np.float64))
    dist = 1.0 - originals @ queries.T        # (n_orig, n_query)
    dmin = dist.min(axis=0)
    order = np.argsort(dmin, kind="stable")
    if cutoff is not None:
        order = [i for i in order if dmin[i] <= cutoff]
    picked = list(order)[:k]
    if not picked:
        return np.empty((0, originals.shape[1]))
    return queries[picked]


def build_cast_gallery(
    originals_by_cast: dict[str, list[np.ndarray]],
    all_queries: list[np.ndarray] | np.ndarray,
    k: int = DEFAULT_K,
    cutoff: float | None = None,
) -> CastGallery:
    """Assemble the gallery: originals plus mined exemplars per cast member.

    all_queries are the detected-face embeddings to mine exemplars from
    (typically every face of the movie). One query may seed exemplars for
    several cast members; no exclusivity is imposed.
    """
    queries = (
        np.stack([normalize_embedding(q) for q in all_queries])
        if len(all_queries)
        else np.empty((0, 0))
    )
    entries = []
    for cast_id, originals in originals_by_cast.items():
        if not len(originals):
            raise ValueError(f"cast {cast_id} has no original embeddings")
        orig = np.stack([normalize_embedding(o) for o in originals])
        if queries.size:
            exemplars = mine_exemplars(orig, queries, k=k, cutoff=cutoff)
        else:
            exemplars = np.empty((0, orig.shape[1]))
        entries.append(GalleryEntry(cast_id=cast_id, original=orig, exemplars=exemplars))
    return CastGallery(entries=entries)


def _mean_pair_distance(gallery_embs: np.ndarray, face_embs: np.ndarray) -> float:
    # mean over every (gallery, face) pair of the cosine distance
    return float(np.mean(1.0 - gallery_embs @ face_embs.T))


def match_tracklet(
    tracklet: Tracklet, gallery: CastGallery, tau: float = DEFAULT_TAU
) -> IdentityAssignment:
    """Assign the cast member whose gallery has the smallest mean pairwise
    distance to the tracklet's face embeddings, if that mean is below tau.

    Tracklets without face embeddings stay unassigned with an infinite
    distance. Ties break toward the lowest cast index.
    """
    if not gallery.entries:
        raise ValueError("empty cast gallery")
    faces = tracklet.embedding_matrix()
    if faces.shape[0] == 0:
        return IdentityAssignment(tracklet.tracklet_id, None, math.inf)
    dists = np.array([_mean_pair_distance(e.combined, faces) for e in gallery.entries])
    imin = int(np.argmin(dists))  # first occurrence wins ties
    if dists[imin] < tau:
        return IdentityAssignment(tracklet.tracklet_id, gallery.entries[imin].cast_id, float(dists[imin]))
    return IdentityAssignment(tracklet.tracklet_id, None, float(dists[imin]))


def assign_identities(
    tracklets: list[Tracklet], gallery: CastGallery, tau: float = DEFAULT_TAU
) -> list[IdentityAssignment]:
    """Match every tracklet independently; several tracklets may share a
    cast member."""
    return [match_tracklet(t, gallery, tau=tau) for t in tracklets]


def match_single_face(
    embedding: np.ndarray, gallery: CastGallery, tau: float = DEFAULT_TAU
) -> tuple[str | None, float]:
    """Match one face embedding on its own (no tracklet averaging)."""
    if not gallery.entries:
        raise ValueError("empty cast gallery")
    face = np.asarray(embedding, dtype=np.float64).reshape(1, -1)
    dists = np.array([_mean_pair_distance(e.combined, face) for e in gallery.entries])
    imin = int(np.argmin(dists))
    if dists[imin] < tau:
        return gallery.entries[imin].cast_id, float(dists[imin])
    return None, float(dists[imin])


def identify_faces_individually(
    embeddings: list[np.ndarray] | np.ndarray,
    gallery: CastGallery,
    tau: float = DEFAULT_TAU,
) -> set[str]:
    """Frame-level identification: the union of per-face matches, with no
    temporal aggregation. Used by the recognition-only ablation mode."""
    found = set()
    for emb in embeddings:
        cast_id, _ = match_single_face(emb, gallery, tau=tau)
        if cast_id is not None:
            found.add(cast_id)
    return found


def save_gallery(gallery: CastGallery, path: Path | str) -> None:
    """Dump a gallery to JSON-lines of {cast_id, kind, embedding}."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in gallery.entries:
            for vec in e.original:
                fh.write(json.dumps({"cast_id": e.cast_id, "kind": "original",
                                     "embedding": [float(x) for x in vec]}) + "\n")
            for vec in e.exemplars:
                fh.write(json.dumps({"cast_id": e.cast_id, "kind": "exemplar",
                                     "embedding": [float(x) for x in vec]}) + "\n")


def load_gallery(path: Path | str) -> CastGallery:
    """Load a gallery dump; cast order follows first appearance in the file."""
    originals: dict[str, list[np.ndarray]] = {}
    exemplars: dict[str, list[np.ndarray]] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        obj = json.loads(line)
        kind = obj.get("kind", "original")
        if kind not in ("original", "exemplar"):
            raise ValueError(f"{path}:{lineno}: unknown embedding kind {kind!r}")
        cast_id = str(obj["cast_id"])
        vec = normalize_embedding(obj["embedding"])
        originals.setdefault(cast_id, [])
        if kind == "original":
            originals[cast_id].append(vec)
        else:
            exemplars.setdefault(cast_id, []).append(vec)
    entries = []
    for cast_id, origs in originals.items():
        if not origs:
            raise ValueError(f"{path}: cast {cast_id} has exemplars but no originals")
        ex = exemplars.get(cast_id, [])
        entries.append(
            GalleryEntry(
                cast_id=cast_id,
                original=np.stack(origs),
                exemplars=np.stack(ex) if ex else np.empty((0, origs[0].shape[0])),
            )
        )
    return CastGallery(entries=entries)
