import itertools
import json

import pytest

from verify_forge.core import STAGE_ORDER, StageKind, render_trace
from verify_forge.masking import (
    MaskRegime,
    annotate,
    compute_stage_mask,
    export_sft,
    k_star,
    load_masked_records,
)

from trace_helpers import make_trace


def _pattern_to_vector(answers: tuple[bool, bool, bool]) -> list[bool]:
    """Expand (a0, av, a1) hallucination bits to the full six-stage vector."""
    a0, av, a1 = answers
    return [a0, False, av, a1, False, False]


def _brute_force_mask(hallucinated, regime):
    n = len(hallucinated)
    if regime is MaskRegime.NM:
        return [True] * n
    if regime is MaskRegime.MM:
        return [not h for h in hallucinated]
    last = max((j for j, h in enumerate(hallucinated, 1) if h), default=0)
    return [j > last for j in range(1, n + 1)]


class TestKStar:
    def test_no_hallucination(self):
        assert k_star([False] * 6) == 0

    def test_first_stage_only(self):
        assert k_star([True, False, False, False, False, False]) == 1

    def test_last_hallucinated_wins(self):
        assert k_star([True, False, True, False, False, False]) == 3

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            k_star([True])


class TestComputeStageMask:
    def test_nm_all_supervised(self):
        h = [True, False, True, False, False, False]
        assert compute_stage_mask(h, MaskRegime.NM) == [True] * 6

    def test_mm_complement(self):
        h = [True, False, True, False, False, False]
        assert compute_stage_mask(h, MaskRegime.MM) == [
            False, True, False, True, True, True,
        ]

    def test_sm_suffix(self):
        h = [True, False, True, False, False, False]
        assert compute_stage_mask(h, MaskRegime.SM) == [
            False, False, False, True, True, True,
        ]

    def test_single_leading_hallucination(self):
        h = [True, False, False, False, False, False]
        assert compute_stage_mask(h, MaskRegime.SM) == [
            False, True, True, True, True, True,
        ]

    def test_clean_trace_regimes_coincide(self):
        h = [False] * 6
        for regime in MaskRegime:
            assert compute_stage_mask(h, regime) == [True] * 6

    def test_all_eight_patterns_match_brute_force(self):
        for answers in itertools.product([False, True], repeat=3):
            h = _pattern_to_vector(answers)
            for regime in MaskRegime:
                assert compute_stage_mask(h, regime) == _brute_force_mask(h, regime), (
                    answers,
                    regime,
                )

    def test_monotone_nesting(self):
        # Supervised sets nest: SM within MM within NM, for every pattern.
        for answers in itertools.product([False, True], repeat=3):
            h = _pattern_to_vector(answers)
            nm = compute_stage_mask(h, MaskRegime.NM)
            mm = compute_stage_mask(h, MaskRegime.MM)
            sm = compute_stage_mask(h, MaskRegime.SM)
            for j in range(6):
                assert not sm[j] or mm[j]
                assert not mm[j] or nm[j]


class TestAnnotate:
    def test_blocks_tile_rendered_text(self):
        trace = make_trace()
        record = annotate(trace, MaskRegime.NM)
        total = len(record.text.encode("utf-8"))
        assert record.blocks[0].start == 0
        assert record.blocks[-1].end == total
        for prev, nxt in zip(record.blocks, record.blocks[1:]):
            assert prev.end == nxt.start

    def test_scaffold_attributed_to_introducing_stage(self):
        trace = make_trace()
        record = annotate(trace, MaskRegime.NM)
        rendered, spans = render_trace(trace)
        blob = rendered.encode("utf-8")
        for block, kind in zip(record.blocks, STAGE_ORDER):
            assert block.stage is kind
            # The block covers its stage's text and ends exactly at it,
            # except the final block which also absorbs trailing scaffold.
            start, end = spans[kind]
            assert block.start <= start
            if kind is not StageKind.FINAL_RESPONSE:
                assert block.end == end
            chunk = blob[block.start : block.end].decode("utf-8")
            assert trace.stage(kind).text in chunk

    def test_mm_record_unsupervises_hallucinated_stage(self):
        trace = make_trace()
        trace.stage(StageKind.INITIAL_ANSWER).hallucinated = True
        record = annotate(trace, MaskRegime.MM)
        flags = {b.stage: b.supervised for b in record.blocks}
        assert flags[StageKind.INITIAL_ANSWER] is False
        assert flags[StageKind.VERIFICATION_QUESTION] is True

    def test_unicode_offsets_are_bytes(self):
        trace = make_trace(a0="Réponse: Paris, naturellement.", a1="Paris, bien sûr.")
        record = annotate(trace, MaskRegime.NM)
        blob = record.text.encode("utf-8")
        assert record.blocks[-1].end == len(blob)
        reassembled = b"".join(blob[b.start : b.end] for b in record.blocks)
        assert reassembled == blob


class TestExportSft:
    def test_per_regime_files_and_manifest(self, tmp_path):
        traces = [make_trace(), make_trace(a0="Another answer entirely.")]
        manifest = export_sft(traces, list(MaskRegime), tmp_path)
        assert set(manifest["files"]) == {"NM", "MM", "SM"}
        for regime, entry in manifest["files"].items():
            path = tmp_path / entry["file"]
            assert path.exists()
            assert entry["records"] == 2
            import hashlib

            assert hashlib.sha256(path.read_bytes()).hexdigest() == entry["sha256"]

    def test_round_trip(self, tmp_path):
        traces = [make_trace()]
        manifest = export_sft(traces, [MaskRegime.MM], tmp_path)
        records = load_masked_records(tmp_path / manifest["files"]["MM"]["file"])
        assert len(records) == 1
        assert records[0].regime is MaskRegime.MM
        assert records[0].text == render_trace(traces[0])[0]

    def test_records_versioned(self, tmp_path):
        export_sft([make_trace()], [MaskRegime.NM], tmp_path)
        line = (tmp_path / "sft_nm.jsonl").read_text().splitlines()[0]
        assert json.loads(line)["version"] == 1
