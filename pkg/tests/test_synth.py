"""Unit planning, text splitting, and engine orchestration."""

import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aloud.audio import Waveform
from aloud.errors import EngineFailure, Overflow, UnsplittableOverflow
from aloud.segmenter import BlockRef, SentenceSeg
from aloud.synth import (
    Engine,
    EngineLimits,
    MockEngine,
    SynthRequest,
    plan_units,
    split_text,
    synthesize_unit,
)


def seg(i, text, block=0, chapter=0):
    return SentenceSeg(
        anchor_id=f"c{chapter + 1:02d}_s{i + 1:04d}",
        display_text=text,
        tts_text=text,
        block=BlockRef(chapter, block, "p"),
        seg_index=i,
    )


class TestSplitText:
    def test_under_limit_unchanged(self):
        assert split_text("x" * 100, 200) == ["x" * 100]

    def test_median_split(self):
        assert split_text("aaa bbb ccc ddd", 8) == ["aaa bbb", "ccc ddd"]

    def test_hard_split_no_whitespace(self):
        assert split_text("a" * 300, 200) == ["a" * 200, "a" * 100]

    def test_tie_prefers_earlier_whitespace(self):
        # Whitespace at 3 and 6; midpoint 4.5 — equidistant, take 3.
        assert split_text("abc de fg", 5) == ["abc", "de fg"]

    def test_recursive_depth(self):
        words = " ".join(["word"] * 100)  # 499 chars
        pieces = split_text(words, 60)
        assert all(len(p) <= 60 for p in pieces)
        assert " ".join(pieces) == words

    @given(st.lists(st.text(alphabet="abcdefg", min_size=1, max_size=30),
                    min_size=1, max_size=40),
           st.integers(min_value=31, max_value=250))
    def test_property_reconstruction(self, words, limit):
        text = " ".join(words)
        pieces = split_text(text, limit)
        assert all(len(p) <= limit for p in pieces)
        assert " ".join(pieces) == text


class TestPlanUnits:
    def test_greedy_merge_chain(self):
        segs = [seg(0, "x" * 10), seg(1, "y" * 10), seg(2, "z" * 80)]
        units = plan_units(segs, EngineLimits())
        assert len(units) == 1
        assert units[0].anchor_ids == ["c01_s0001", "c01_s0002", "c01_s0003"]
        assert units[0].tts_text == " ".join(["x" * 10, "y" * 10, "z" * 80])

    def test_above_threshold_untouched(self):
        units = plan_units([seg(0, "a" * 70), seg(1, "b" * 70)], EngineLimits())
        assert len(units) == 2
        assert [u.anchor_ids for u in units] == [["c01_s0001"], ["c01_s0002"]]

    def test_merge_stops_at_block_boundary(self):
        segs = [seg(0, "short.", block=0), seg(1, "also short.", block=1)]
        units = plan_units(segs, EngineLimits())
        assert len(units) == 2

    def test_long_unit_pre_split(self):
        text = " ".join(["word"] * 90)  # 449 chars
        units = plan_units([seg(0, text)], EngineLimits())
        assert len(units) == 1
        assert len(units[0].pieces) >= 3
        assert all(len(p) <= 200 for p in units[0].pieces)

    def test_empty_input(self):
        assert plan_units([], EngineLimits()) == []

    @given(st.lists(st.tuples(st.integers(1, 400), st.integers(0, 2)),
                    min_size=1, max_size=30))
    def test_property_no_short_unit_with_same_block_successor(self, spec_list):
        rng = random.Random(0)
        segs = []
        block = 0
        for i, (length, adv) in enumerate(spec_list):
            block += adv  # blocks only move forward
            text = "".join(rng.choice("abcdef ") for _ in range(length)).strip() or "a"
            segs.append(seg(i, text, block=block))
        limits = EngineLimits()
        units = plan_units(segs, limits)
        # Pieces respect the ceiling.
        for u in units:
            assert all(len(p) <= limits.lambda_plus for p in u.pieces)
        # A short unit may only end a block.
        for k, u in enumerate(units[:-1]):
            if len(u.tts_text) < limits.lambda_minus:
                assert units[k + 1].seg.block != u.seg.block
        # Anchors cover every sentence exactly once, in order.
        covered = [a for u in units for a in u.anchor_ids]
        assert covered == [s.anchor_id for s in segs]


class TestMockEngine:
    def test_duration_formula(self):
        w = MockEngine().synthesize(SynthRequest("Hi"))
        assert len(w.samples) == 9600  # max(0.4, 0.12) s at 24 kHz
        assert w.sample_rate == 24000

    def test_long_text_scales(self):
        text = "x" * 100
        w = MockEngine().synthesize(SynthRequest(text))
        assert len(w.samples) == round(6.0 * 24000)

    def test_determinism(self):
        a = MockEngine().synthesize(SynthRequest("Same text."))
        b = MockEngine().synthesize(SynthRequest("Same text."))
        assert np.array_equal(a.samples, b.samples)

    def test_probe_overflow(self):
        eng = MockEngine(hard_token_probe=10)
        with pytest.raises(Overflow):
            eng.synthesize(SynthRequest("more than ten characters"))
        eng.synthesize(SynthRequest("short"))  # no raise

    def test_empty_request_rejected(self):
        with pytest.raises(ValueError):
            SynthRequest("   ")


class TestSynthesizeUnit:
    def test_passthrough(self):
        plan = plan_units([seg(0, "A sentence of reasonable length goes here now, "
                                  "padded to avoid the merge threshold entirely.")],
                          EngineLimits())[0]
        unit = synthesize_unit(plan, MockEngine(), EngineLimits())
        assert unit.pieces == plan.pieces
        expected = MockEngine().synthesize(SynthRequest(plan.pieces[0]))
        assert np.array_equal(unit.waveform.samples, expected.samples)

    def test_reactive_split_on_overflow(self):
        limits = EngineLimits(hard_token_probe=10)
        plan = plan_units([seg(0, "1997 was loud.")], limits)[0]
        unit = synthesize_unit(plan, MockEngine(hard_token_probe=10), limits)
        assert unit.pieces == ["1997 was", "loud."]
        total = sum(
            len(MockEngine().synthesize(SynthRequest(p)).samples)
            for p in unit.pieces
        )
        assert len(unit.waveform.samples) == total

    def test_single_word_overflow_unsplittable(self):
        limits = EngineLimits(hard_token_probe=5)
        plan = plan_units([seg(0, "Supercalifragilistic")], limits)[0]
        with pytest.raises(UnsplittableOverflow):
            synthesize_unit(plan, MockEngine(hard_token_probe=5), limits)

    def test_overflow_convergence_probe_above_longest_word(self):
        text = " ".join(["abcdefgh"] * 60)  # 539 chars, longest word 8
        limits = EngineLimits(hard_token_probe=40)
        plan = plan_units([seg(0, text)], limits)[0]
        unit = synthesize_unit(plan, MockEngine(hard_token_probe=40), limits)
        assert all(len(p) <= 40 for p in unit.pieces)
        assert "".join(unit.pieces).replace(" ", "") == text.replace(" ", "")

    def test_transient_errors_retried(self):
        class Flaky(Engine):
            sample_rate = 24000

            def __init__(self):
                self.calls = 0

            def synthesize(self, req):
                self.calls += 1
                if self.calls < 3:
                    raise EngineFailure("transient")
                return MockEngine().synthesize(req)

        engine = Flaky()
        plan = plan_units([seg(0, "Retry me please, twice should do it fine.")],
                          EngineLimits())[0]
        unit = synthesize_unit(plan, engine, EngineLimits())
        assert engine.calls == 3
        assert unit.waveform is not None

    def test_persistent_error_fails_with_anchor(self):
        class Broken(Engine):
            sample_rate = 24000

            def synthesize(self, req):
                raise EngineFailure("dead")

        plan = plan_units([seg(0, "This will never synthesize properly today.")],
                          EngineLimits())[0]
        with pytest.raises(EngineFailure, match="c01_s0001"):
            synthesize_unit(plan, Broken(), EngineLimits())

    def test_mixed_rates_resampled_to_declared(self):
        class TwoRates(Engine):
            sample_rate = 24000

            def __init__(self):
                self.calls = 0

            def synthesize(self, req):
                self.calls += 1
                rate = 22050 if self.calls % 2 else 24000
                n = round(0.5 * rate)
                return Waveform(np.zeros(n, dtype=np.float32), rate)

        text = " ".join(["word"] * 90)
        limits = EngineLimits()
        plan = plan_units([seg(0, text)], limits)[0]
        n_pieces = len(plan.pieces)
        unit = synthesize_unit(plan, TwoRates(), limits)
        assert unit.waveform.sample_rate == 24000
        # Duration conserved within one sample per piece.
        assert abs(unit.waveform.duration - 0.5 * n_pieces) <= n_pieces / 22050

    @settings(max_examples=25)
    @given(st.integers(min_value=8, max_value=60))
    def test_property_duration_additivity(self, probe):
        text = "Years like 1997 and 2003 expand hugely in token space. " * 3
        limits = EngineLimits(hard_token_probe=probe)
        plans = plan_units([seg(0, text.strip())], limits)
        engine = MockEngine(hard_token_probe=probe)
        total = 0
        for plan in plans:
            unit = synthesize_unit(plan, engine, limits)
            per_piece = sum(
                len(MockEngine().synthesize(SynthRequest(p)).samples)
                for p in unit.pieces
            )
            assert len(unit.waveform.samples) == per_piece
            total += len(unit.waveform.samples)
        assert total > 0
