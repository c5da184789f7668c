import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from adgen.faceid import (
    CastGallery,
    GalleryEntry,
    assign_identities,
    build_cast_gallery,
    embed_distance,
    identify_faces_individually,
    load_gallery,
    match_tracklet,
    mine_exemplars,
    normalize_embedding,
    save_gallery,
)
from adgen.shotseg import Shot
from adgen.tracker import Tracklet


def oracle_assignments(tracklet_embs, gallery_embs, tau):
    """Pure-Python pairwise-mean oracle for the tracklet matching procedure.

    tracklet_embs: list (per tracklet) of lists of vectors.
    gallery_embs: list (per cast, in cast order) of (cast_id, list of vectors).
    """
    results = []
    for tid, faces in enumerate(tracklet_embs):
        if not faces:
            results.append((tid, None, math.inf))
            continue
        best_idx, best_d = None, None
        for idx, (_, vecs) in enumerate(gallery_embs):
            total, count = 0.0, 0
            for g in vecs:
                for f in faces:
                    total += 1.0 - sum(gi * fi for gi, fi in zip(g, f))
                    count += 1
            d = total / count
            if best_d is None or d < best_d:
                best_idx, best_d = idx, d
        cast_id = gallery_embs[best_idx][0] if best_d < tau else None
        results.append((tid, cast_id, best_d))
    return results


def make_tracklet(tid, faces):
    return Tracklet(
        tracklet_id=tid,
        shot=Shot(0, max(1, len(faces))),
        face_embeddings={i: np.asarray(f) for i, f in enumerate(faces)},
    )


def gallery_from_lists(entries, dim):
    return CastGallery(
        entries=[
            GalleryEntry(
                cast_id=cid,
                original=np.stack([np.asarray(v) for v in vecs]),
                exemplars=np.empty((0, dim)),
            )
            for cid, vecs in entries
        ]
    )


def e(i, dim=8):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


class TestEmbedDistance:
    def test_identity_zero(self):
        a = normalize_embedding(np.arange(1, 9, dtype=float))
        assert embed_distance(a, a) == pytest.approx(0.0)

    def test_orthogonal_one(self):
        assert embed_distance(e(0), e(1)) == pytest.approx(1.0)

    def test_dot_08(self):
        a = e(0)
        b = normalize_embedding(0.8 * e(0) + 0.6 * e(1))
        assert embed_distance(a, b) == pytest.approx(0.2)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            normalize_embedding(np.zeros(4))


class TestMineExemplars:
    def test_exact_copy_first(self):
        cast = np.stack([e(0)])
        queries = np.stack([e(1), e(0), e(2)])
        out = mine_exemplars(cast, queries, k=1)
        np.testing.assert_array_equal(out, np.stack([e(0)]))

    def test_k_zero_empty(self):
        out = mine_exemplars(np.stack([e(0)]), np.stack([e(1)]), k=0)
        assert out.shape[0] == 0

    def test_sorted_by_distance(self):
        # queries at distances 0.4, 0.1, 0.3 from the single original
        def at_distance(d):
            cos = 1 - d
            sin = math.sqrt(1 - cos * cos)
            return cos * e(0) + sin * e(1)

        queries = np.stack([at_distance(0.4), at_distance(0.1), at_distance(0.3)])
        out = mine_exemplars(np.stack([e(0)]), queries, k=2)
        np.testing.assert_allclose(out[0], queries[1])
        np.testing.assert_allclose(out[1], queries[2])

    def test_fewer_queries_than_k(self):
        queries = np.stack([e(1), e(2)])
        out = mine_exemplars(np.stack([e(0)]), queries, k=5)
        assert out.shape[0] == 2

    def test_min_over_multiple_originals(self):
        originals = np.stack([e(0), e(3)])
        queries = np.stack([e(3), e(1)])
        out = mine_exemplars(originals, queries, k=1)
        np.testing.assert_array_equal(out[0], e(3))

    def test_cutoff_filters(self):
        queries = np.stack([e(0), e(1)])
        out = mine_exemplars(np.stack([e(0)]), queries, k=5, cutoff=0.5)
        assert out.shape[0] == 1

    def test_tie_broken_by_query_index(self):
        q = np.stack([e(1), e(2)])  # both at distance 1 from e(0)
        out = mine_exemplars(np.stack([e(0)]), q, k=1)
        np.testing.assert_array_equal(out[0], e(1))


class TestBuildCastGallery:
    def test_no_queries_combined_equals_original(self):
        g = build_cast_gallery({"a": [e(0)], "b": [e(1)]}, [], k=5)
        for entry in g.entries:
            np.testing.assert_array_equal(entry.combined, entry.original)

    def test_clustered_queries_mined_per_cast(self, rng):
        ca, cb = e(0, 16), e(1, 16)
        near_a = [normalize_embedding(ca + 0.2 * rng.normal(size=16)) for _ in range(4)]
        near_b = [normalize_embedding(cb + 0.2 * rng.normal(size=16)) for _ in range(4)]
        g = build_cast_gallery({"a": [ca], "b": [cb]}, near_a + near_b, k=3)
        for entry, pool in zip(g.entries, (near_a, near_b)):
            # brute-force: exemplars must be that cast's own cluster
            for ex in entry.exemplars:
                assert any(np.allclose(ex, q) for q in pool)

    def test_k_larger_than_queries(self):
        g = build_cast_gallery({"a": [e(0)]}, [e(1), e(2)], k=10)
        assert g.entries[0].exemplars.shape[0] == 2

    def test_query_may_serve_multiple_casts(self):
        shared = normalize_embedding(e(0) + e(1))
        g = build_cast_gallery({"a": [e(0)], "b": [e(1)]}, [shared], k=1)
        assert all(entry.exemplars.shape[0] == 1 for entry in g.entries)

    def test_empty_originals_rejected(self):
        with pytest.raises(ValueError, match="no original"):
            build_cast_gallery({"a": []}, [], k=1)


class TestMatchTracklet:
    def test_exact_match_distance_zero(self):
        g = gallery_from_lists([("a", [e(0)])], 8)
        t = make_tracklet(0, [e(0), e(0)])
        a = match_tracklet(t, g, tau=0.6)
        assert (a.cast_id, a.mean_distance) == ("a", pytest.approx(0.0))

    def test_orthogonal_unassigned(self):
        g = gallery_from_lists([("a", [e(0)]), ("b", [e(1)])], 8)
        t = make_tracklet(0, [e(5), e(6)])
        a = match_tracklet(t, g, tau=0.6)
        assert a.cast_id is None
        assert a.mean_distance == pytest.approx(1.0)

    def test_empty_tracklet_inf_sentinel(self):
        g = gallery_from_lists([("a", [e(0)])], 8)
        a = match_tracklet(make_tracklet(0, []), g, tau=0.6)
        assert a.cast_id is None
        assert a.mean_distance == math.inf

    def test_empty_gallery_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            match_tracklet(make_tracklet(0, [e(0)]), CastGallery(entries=[]), tau=0.6)

    def test_three_cast_mixture_matches_oracle(self):
        face = normalize_embedding(0.9 * e(0) + 0.1 * e(1))
        gallery_lists = [("a", [e(0)]), ("b", [e(1)]), ("c", [e(2)])]
        g = gallery_from_lists(gallery_lists, 8)
        t = make_tracklet(0, [face, face, face])
        a = match_tracklet(t, g, tau=0.6)
        (oracle,) = oracle_assignments([[face] * 3], gallery_lists, 0.6)
        assert a.cast_id == oracle[1]
        assert a.mean_distance == pytest.approx(oracle[2], abs=1e-9)

    def test_tie_broken_by_lowest_cast_index(self):
        g = gallery_from_lists([("b_first", [e(0)]), ("a_second", [e(0)])], 8)
        t = make_tracklet(0, [e(0)])
        assert match_tracklet(t, g, tau=0.6).cast_id == "b_first"

    def test_order_invariance(self, rng):
        faces = [normalize_embedding(rng.normal(size=8)) for _ in range(5)]
        gallery_lists = [("a", [e(0), e(3)]), ("b", [e(1)])]
        g = gallery_from_lists(gallery_lists, 8)
        t1 = make_tracklet(0, faces)
        t2 = make_tracklet(0, list(reversed(faces)))
        a1, a2 = match_tracklet(t1, g, 0.6), match_tracklet(t2, g, 0.6)
        assert a1.cast_id == a2.cast_id
        assert a1.mean_distance == pytest.approx(a2.mean_distance, abs=1e-12)
        g_rev = gallery_from_lists(
            [("a", [e(3), e(0)]), ("b", [e(1)])], 8
        )
        a3 = match_tracklet(t1, g_rev, 0.6)
        assert a3.mean_distance == pytest.approx(a1.mean_distance, abs=1e-12)

    def test_rotation_invariance(self, rng):
        dim = 16
        faces = [normalize_embedding(rng.normal(size=dim)) for _ in range(4)]
        casts = [normalize_embedding(rng.normal(size=dim)) for _ in range(3)]
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        g1 = gallery_from_lists([(f"c{i}", [c]) for i, c in enumerate(casts)], dim)
        g2 = gallery_from_lists(
            [(f"c{i}", [q @ c]) for i, c in enumerate(casts)], dim
        )
        t1 = make_tracklet(0, faces)
        t2 = make_tracklet(0, [q @ f for f in faces])
        a1, a2 = match_tracklet(t1, g1, 0.6), match_tracklet(t2, g2, 0.6)
        assert a1.cast_id == a2.cast_id
        assert a1.mean_distance == pytest.approx(a2.mean_distance, abs=1e-9)

    def test_exemplar_monotonicity(self, rng):
        # adding an exemplar equal to a tracklet face, whose own distance is
        # below the current mean, can only lower that cast's mean distance
        dim = 16
        face = normalize_embedding(rng.normal(size=dim))
        orig = normalize_embedding(rng.normal(size=dim))
        t = make_tracklet(0, [face, face])
        g_before = gallery_from_lists([("a", [orig])], dim)
        d_before = match_tracklet(t, g_before, tau=2.0).mean_distance
        g_after = CastGallery(
            entries=[GalleryEntry("a", np.stack([orig]), np.stack([face]))]
        )
        d_after = match_tracklet(t, g_after, tau=2.0).mean_distance
        assert d_after <= d_before + 1e-12


class TestAssignIdentities:
    def test_shared_cast_allowed(self):
        g = gallery_from_lists([("a", [e(0)])], 8)
        ts = [make_tracklet(0, [e(0)]), make_tracklet(1, [e(0)])]
        out = assign_identities(ts, g, tau=0.6)
        assert [a.cast_id for a in out] == ["a", "a"]

    def test_empty_list(self):
        g = gallery_from_lists([("a", [e(0)])], 8)
        assert assign_identities([], g) == []

    def test_mixed_scenario_equals_oracle(self, rng):
        dim = 12
        gallery_lists = [
            (f"cast{i}", [normalize_embedding(rng.normal(size=dim)) for _ in range(2)])
            for i in range(3)
        ]
        tracklet_faces = [
            [normalize_embedding(rng.normal(size=dim)) for _ in range(k)]
            for k in (3, 1, 0, 5)
        ]
        g = gallery_from_lists(gallery_lists, dim)
        ts = [make_tracklet(i, faces) for i, faces in enumerate(tracklet_faces)]
        got = assign_identities(ts, g, tau=0.9)
        expected = oracle_assignments(tracklet_faces, gallery_lists, 0.9)
        for a, (tid, cast_id, dist) in zip(got, expected):
            assert a.tracklet_id == tid
            assert a.cast_id == cast_id
            if math.isinf(dist):
                assert math.isinf(a.mean_distance)
            else:
                assert a.mean_distance == pytest.approx(dist, abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_assignment_matches_oracle_randomized(data):
    seed = data.draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    dim = data.draw(st.sampled_from([4, 8, 16]))
    n_cast = data.draw(st.integers(1, 6))
    n_tracklets = data.draw(st.integers(0, 10))
    tau = data.draw(st.floats(0.1, 1.5))
    gallery_lists = [
        (
            f"c{i}",
            [normalize_embedding(rng.normal(size=dim)) for _ in range(rng.integers(1, 4))],
        )
        for i in range(n_cast)
    ]
    tracklet_faces = [
        [normalize_embedding(rng.normal(size=dim)) for _ in range(rng.integers(0, 9))]
        for _ in range(n_tracklets)
    ]
    g = gallery_from_lists(
        [(cid, vecs) for cid, vecs in gallery_lists], dim
    )
    ts = [make_tracklet(i, faces) for i, faces in enumerate(tracklet_faces)]
    got = assign_identities(ts, g, tau=tau)
    expected = oracle_assignments(tracklet_faces, gallery_lists, tau)
    for a, (tid, cast_id, dist) in zip(got, expected):
        assert a.cast_id == cast_id
        if not math.isinf(dist):
            assert a.mean_distance == pytest.approx(dist, abs=1e-9)


class TestFrameLevelMode:
    def test_union_of_matches(self):
        g = gallery_from_lists([("a", [e(0)]), ("b", [e(1)])], 8)
        found = identify_faces_individually([e(0), e(1), e(5)], g, tau=0.5)
        assert found == {"a", "b"}

    def test_no_matches(self):
        g = gallery_from_lists([("a", [e(0)])], 8)
        assert identify_faces_individually([e(3)], g, tau=0.5) == set()


class TestGalleryDumpLoad:
    def test_roundtrip(self, tmp_path, rng):
        g = build_cast_gallery(
            {"a": [normalize_embedding(rng.normal(size=8))],
             "b": [normalize_embedding(rng.normal(size=8))]},
            [normalize_embedding(rng.normal(size=8)) for _ in range(3)],
            k=2,
        )
        path = tmp_path / "gallery.jsonl"
        save_gallery(g, path)
        loaded = load_gallery(path)
        assert loaded.cast_ids == g.cast_ids
        for a, b in zip(loaded.entries, g.entries):
            np.testing.assert_allclose(a.original, b.original, atol=1e-12)
            np.testing.assert_allclose(a.exemplars, b.exemplars, atol=1e-12)

    def test_exemplars_without_originals_rejected(self, tmp_path):
        path = tmp_path / "gallery.jsonl"
        path.write_text('{"cast_id": "x", "kind": "exemplar", "embedding": [1, 0]}\n')
        with pytest.raises(ValueError, match="no originals"):
            load_gallery(path)
