import pytest

from adgen.annotate import FrameBuffer
from adgen.backends import MockBackend
from adgen.context import ContextWindow, build_context
from adgen.ingest import MovieClip, Subtitle
from adgen.promptgen import (
    ADOutput,
    GenerationError,
    LengthPolicy,
    PromptBundle,
    build_ad_prompt,
    build_frame_caption_prompt,
    build_summary_prompt,
    bundle_hash,
    generate_ad,
    generate_ad_two_stage,
    load_templates,
    two_stage_hash,
)


def clip(clip_id="c1", title="The Long Night"):
    return MovieClip(
        clip_id=clip_id, movie_id="mv1", start_s=10.0, end_s=18.0,
        frame_dir=".", fps=3.0, movie_title=title,
    )


def frames(n=3):
    return [FrameBuffer.solid(8, 6, (i * 10, 0, 0)) for i in range(n)]


def ctx():
    return build_context(
        [Subtitle(index=1, start_s=2.0, end_s=3.0, text="Where were you?")],
        [(5.0, "Amy enters the room.")],
        t=2,
    )


class TestLengthPolicy:
    def test_parse(self):
        assert LengthPolicy.parse("none").kind == "none"
        assert LengthPolicy.parse("fixed:10") == LengthPolicy.fixed(10)
        assert LengthPolicy.parse("gt_length").kind == "gt_length"
        with pytest.raises(ValueError):
            LengthPolicy.parse("sometimes")

    def test_fixed_requires_positive_n(self):
        with pytest.raises(ValueError):
            LengthPolicy.fixed(0)

    def test_resolve(self):
        assert LengthPolicy.none().resolve_word_count(None) is None
        assert LengthPolicy.fixed(6).resolve_word_count(None) == 6
        assert LengthPolicy.gt_length().resolve_word_count(12) == 12
        with pytest.raises(ValueError, match="ground-truth"):
            LengthPolicy.gt_length().resolve_word_count(None)


class TestBuildAdPrompt:
    def test_fixed_policy_clause(self):
        b = build_ad_prompt(clip(), frames(), ctx(), {"Amy"}, LengthPolicy.fixed(10))
        assert "exactly 10 words" in b.user_text
        assert b.metadata.requested_word_count == 10

    def test_caption_mode_has_no_ad_wording(self):
        b = build_ad_prompt(clip(), frames(), ctx(), {"Amy"}, LengthPolicy.fixed(10),
                            ad_style=False)
        assert "audio description" not in b.user_text.lower()

    def test_ad_clause_exactly_once(self):
        b = build_ad_prompt(clip(), frames(), ctx(), {"Amy"}, LengthPolicy.fixed(10))
        assert b.user_text.lower().count("audio description") == 1
        assert b.user_text.count("exactly 10 words") == 1

    def test_empty_blocks_elided(self):
        b = build_ad_prompt(clip(), frames(), ContextWindow(), set(), LengthPolicy.none())
        t = load_templates()
        assert t["subtitles_header"] not in b.user_text
        assert t["prev_ads_header"] not in b.user_text
        assert "Characters on screen" not in b.user_text
        assert b.user_text  # still a valid prompt

    def test_block_order(self):
        b = build_ad_prompt(clip(), frames(), ctx(), {"Amy", "Nick"}, LengthPolicy.fixed(8))
        text = b.user_text
        i_title = text.index("The Long Night")
        i_subs = text.index("Where were you?")
        i_prev = text.index("Amy enters the room.")
        i_chars = text.index("Characters on screen")
        i_task = text.index("exactly 8 words")
        assert i_title < i_subs < i_prev < i_chars < i_task

    def test_names_sorted(self):
        b = build_ad_prompt(clip(), frames(), ctx(), {"Zoe", "Amy"}, LengthPolicy.none())
        assert "Amy, Zoe" in b.user_text

    def test_gt_policy_without_count_fails(self):
        with pytest.raises(ValueError):
            build_ad_prompt(clip(), frames(), ctx(), set(), LengthPolicy.gt_length())

    def test_frame_cap(self):
        with pytest.raises(ValueError, match="at most"):
            PromptBundle(system_text="s", user_text="u", frames=frames(11))


class TestTwoStagePrompts:
    def test_caption_bundle_single_frame(self):
        b = build_frame_caption_prompt(0, frames(1)[0], 10, clip=clip())
        assert len(b.frames) == 1
        assert "frame 1 of 10" in b.user_text

    def test_summary_bundle_no_frames(self):
        b = build_summary_prompt(["a", "b"], 2, ctx(), {"Amy"}, LengthPolicy.fixed(6),
                                 clip=clip())
        assert b.frames == []
        assert "Frame 1: a" in b.user_text
        assert "Frame 2: b" in b.user_text
        assert "exactly 6 words" in b.user_text

    def test_caption_count_mismatch(self):
        with pytest.raises(ValueError, match="captions"):
            build_summary_prompt(["a"], 2, ctx(), set(), LengthPolicy.none())


class TestHashing:
    def test_identical_bundles_same_hash(self):
        a = build_ad_prompt(clip(), frames(), ctx(), {"Amy"}, LengthPolicy.fixed(10))
        b = build_ad_prompt(clip(), frames(), ctx(), {"Amy"}, LengthPolicy.fixed(10))
        assert bundle_hash(a) == bundle_hash(b)

    def test_frame_content_changes_hash(self):
        a = build_ad_prompt(clip(), frames(3), ctx(), set(), LengthPolicy.none())
        other = frames(3)
        other[1] = FrameBuffer.solid(8, 6, (1, 2, 3))
        b = build_ad_prompt(clip(), other, ctx(), set(), LengthPolicy.none())
        assert bundle_hash(a) != bundle_hash(b)

    def test_two_stage_hash_stable_and_sensitive(self):
        templates = load_templates()
        caption_bundles = [
            build_frame_caption_prompt(i, f, 3, clip=clip(), templates=templates)
            for i, f in enumerate(frames(3))
        ]
        h1 = two_stage_hash(caption_bundles, ctx(), {"Amy"}, LengthPolicy.fixed(10),
                            True, templates)
        h2 = two_stage_hash(caption_bundles, ctx(), {"Amy"}, LengthPolicy.fixed(10),
                            True, templates)
        h3 = two_stage_hash(caption_bundles, ctx(), {"Amy"}, LengthPolicy.fixed(12),
                            True, templates)
        assert h1 == h2 != h3


class TestGenerate:
    def test_echo_mock_word_count(self):
        b = build_ad_prompt(clip(), frames(), ctx(), {"Amy"}, LengthPolicy.fixed(10))
        out = generate_ad(b, MockBackend(mode="echo"))
        assert out.word_count == 10
        assert out.mode == "one-stage"
        assert out.clip_id == "c1"
        assert out.word_count == len(out.text.split())

    def test_echo_without_clause_uses_canned(self):
        b = build_ad_prompt(clip(), frames(), ctx(), set(), LengthPolicy.none())
        out = generate_ad(b, MockBackend(mode="echo"))
        assert out.word_count > 10

    def test_permanent_failure_raises_after_budget(self):
        b = build_ad_prompt(clip(), frames(), ctx(), set(), LengthPolicy.none())
        backend = MockBackend(mode="fail", fail_times=99)
        with pytest.raises(GenerationError):
            generate_ad(b, backend, retries=3)
        assert backend.call_count == 3

    def test_recovers_within_budget(self):
        b = build_ad_prompt(clip(), frames(), ctx(), set(), LengthPolicy.fixed(5))
        backend = MockBackend(mode="fail", fail_times=2)
        out = generate_ad(b, backend, retries=3)
        assert out.word_count == 5
        assert backend.call_count == 3

    def test_one_stage_single_call(self):
        b = build_ad_prompt(clip(), frames(), ctx(), set(), LengthPolicy.fixed(5))
        backend = MockBackend(mode="echo")
        generate_ad(b, backend)
        assert backend.call_count == 1

    def test_two_stage_eleven_calls_for_ten_frames(self):
        backend = MockBackend(mode="echo")
        out = generate_ad_two_stage(
            clip(), frames(10), ctx(), {"Amy"}, LengthPolicy.fixed(10), backend
        )
        assert backend.call_count == 11
        assert out.mode == "two-stage"
        assert backend.calls[:-1] == [c for c in backend.calls[:-1] if c.n_frames == 1]
        assert backend.calls[-1].n_frames == 0

    def test_adoutput_json_roundtrip(self):
        out = ADOutput.from_text("c9", "  Amy walks away.  ", "one-stage", "deadbeef")
        back = ADOutput.from_json(out.to_json())
        assert back == out
        assert back.word_count == 3


def test_unknown_template_version():
    with pytest.raises(ValueError, match="template"):
        load_templates("v999")


def test_prompt_is_pure_function_of_inputs():
    bundles = [
        build_ad_prompt(clip(), frames(), ctx(), {"Amy", "Nick"}, LengthPolicy.fixed(10))
        for _ in range(3)
    ]
    assert len({b.user_text for b in bundles}) == 1
    assert len({bundle_hash(b) for b in bundles}) == 1
