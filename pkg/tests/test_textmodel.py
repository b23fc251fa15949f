import json
import tempfile
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gramattack.errors import ValidationError
from gramattack.textmodel import (
    TaggedSentence,
    TaskInstance,
    apply_edits_to_bad,
    assert_respects_frozen,
    load_dataset,
    load_minimal_pairs,
    naive_pos_tag,
    save_dataset,
)


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


class TestNaivePosTag:
    def test_closed_class(self):
        assert naive_pos_tag(["the"]) == ["DET"]

    def test_inflected_verb_stem(self):
        assert naive_pos_tag(["sleeps"]) == ["VERB"]

    def test_unknown_word(self):
        assert naive_pos_tag(["xyzzy"]) == ["OTHER"]

    def test_suffix_rules(self):
        assert naive_pos_tag(["happily", "enormous", "flotation"]) == [
            "ADV", "ADJ", "NOUN",
        ]

    def test_punctuation(self):
        assert naive_pos_tag([".", "--"]) == ["OTHER", "OTHER"]

    def test_every_token_tagged(self):
        tags = naive_pos_tag("the cat sleeps on a mat .".split())
        assert len(tags) == 7


class TestLoadDataset:
    def test_single_record(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(path, [{"id": "a", "text": "the cat sleeps", "label": 1}])
        insts = load_dataset(path)
        assert len(insts) == 1
        inst = insts[0]
        assert inst.task_kind == "single"
        assert len(inst.mutable()) == 3
        assert inst.gold_label == "1"

    def test_pair_record(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(
            path,
            [{"id": "p", "textA": "a b", "textB": "c d", "label": "x", "mutable": 1}],
        )
        inst = load_dataset(path)[0]
        assert inst.task_kind == "pair"
        assert inst.mutable_segment == 1
        assert inst.mutable().text() == "c d"

    def test_missing_label(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(path, [{"id": "a", "text": "x"}])
        with pytest.raises(ValidationError, match=r"missing field: label @ line 1"):
            load_dataset(path)

    def test_empty_file_is_empty_list(self, tmp_path):
        path = tmp_path / "d.jsonl"
        path.write_text("")
        assert load_dataset(path) == []

    def test_tagging_record(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(
            path,
            [{"id": "t", "text": "a b", "label": ["O", "B"], "frozen": [1]}],
        )
        inst = load_dataset(path)[0]
        assert inst.task_kind == "tagging"
        assert inst.gold_label == ("O", "B")
        assert inst.mutable().frozen == {1}

    def test_tsv(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("a\tthe cat\t1\n")
        inst = load_dataset(path, format="tsv")[0]
        assert inst.mutable().text() == "the cat"

    def test_pos_field_used(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(
            path,
            [{"id": "a", "text": "blorp glorp", "label": 0, "pos": ["NOUN", "VERB"]}],
        )
        inst = load_dataset(path)[0]
        assert [t.pos for t in inst.mutable().tokens] == ["NOUN", "VERB"]


class TestRoundTrip:
    def test_save_load_identity(self, tmp_path):
        path = tmp_path / "d.jsonl"
        write_lines(
            path,
            [
                {"id": "a", "text": "the cat sleeps", "label": 1},
                {"id": "b", "textA": "x y", "textB": "the dog", "label": "p",
                 "mutable": 1, "frozen": [0]},
                {"id": "c", "text": "a b", "label": ["O", "O"]},
            ],
        )
        first = load_dataset(path)
        out = tmp_path / "o.jsonl"
        save_dataset(first, out)
        second = load_dataset(out)
        assert first == second

    @settings(max_examples=25, deadline=None)
    @given(
        tokens=st.lists(
            st.sampled_from("the cat sleeps on a mat dog runs".split()),
            min_size=1,
            max_size=8,
        ),
        label=st.sampled_from(["0", "1", "yes"]),
    )
    def test_round_trip_random(self, tokens, label):
        inst = TaskInstance(
            "r", (TaggedSentence.from_surfaces(tokens),), 0, label, "single"
        )
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "d.jsonl"
            save_dataset([inst], path)
            assert load_dataset(path) == [inst]


class TestMinimalPairs:
    def test_basic_pair(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_lines(
            path,
            [
                {
                    "id": "p1",
                    "bad": ["he", "growing", "up"],
                    "good": ["he", "grows", "up"],
                    "edits": [
                        {"bad_span": [1, 2], "good_span": [1, 2], "tag": "Vform"}
                    ],
                }
            ],
        )
        pairs = load_minimal_pairs(path)
        assert len(pairs) == 1
        assert len(pairs[0].edits) == 1
        assert pairs[0].edits[0].tag == "Vform"

    def test_identical_zero_edits(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_lines(path, [{"id": "z", "bad": ["a", "b"], "good": ["a", "b"],
                            "edits": []}])
        assert load_minimal_pairs(path)[0].edits == ()

    def test_no_change_edit_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_lines(
            path,
            [
                {
                    "id": "bad-edit",
                    "bad": ["a", "b"],
                    "good": ["a", "b"],
                    "edits": [
                        {"bad_span": [0, 1], "good_span": [0, 1], "tag": "Prep"}
                    ],
                }
            ],
        )
        with pytest.raises(ValidationError, match="edit does not change text"):
            load_minimal_pairs(path)

    def test_edit_mismatch_rejected(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_lines(
            path,
            [
                {
                    "id": "m",
                    "bad": ["a", "b", "c"],
                    "good": ["a", "x", "y"],
                    "edits": [
                        {"bad_span": [1, 2], "good_span": [1, 2], "tag": "Prep"}
                    ],
                }
            ],
        )
        with pytest.raises(ValidationError, match="pair m"):
            load_minimal_pairs(path)

    def test_unknown_tag_becomes_other(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_lines(
            path,
            [
                {
                    "id": "u",
                    "bad": ["a", "b"],
                    "good": ["a", "c"],
                    "edits": [
                        {"bad_span": [1, 2], "good_span": [1, 2], "tag": "Vt"}
                    ],
                }
            ],
        )
        warnings = []
        pairs = load_minimal_pairs(path, warn=warnings.append)
        assert pairs[0].edits[0].tag == "OTHER"
        assert warnings

    def test_edits_reproduce_good(self, tmp_path):
        path = tmp_path / "p.jsonl"
        write_lines(
            path,
            [
                {
                    "id": "multi",
                    "bad": ["the", "the", "cat", "sleep"],
                    "good": ["the", "cat", "sleeps"],
                    "edits": [
                        {"bad_span": [1, 2], "good_span": [1, 1], "tag": "ArtOrDet"},
                        {"bad_span": [3, 4], "good_span": [2, 3], "tag": "SVA"},
                    ],
                }
            ],
        )
        pair = load_minimal_pairs(path)[0]
        rebuilt = apply_edits_to_bad(
            pair.bad.surfaces(), pair.good.surfaces(), pair.edits
        )
        assert rebuilt == pair.good.surfaces()


class TestInvariants:
    def test_frozen_guard(self):
        sent = TaggedSentence.from_surfaces(["a", "b"], frozen=[1])
        assert_respects_frozen(sent, [0])
        with pytest.raises(ValidationError):
            assert_respects_frozen(sent, [1])

    def test_sentence_needs_tokens(self):
        with pytest.raises(ValidationError):
            TaggedSentence(())

    def test_frozen_range_checked(self):
        with pytest.raises(ValidationError):
            TaggedSentence.from_surfaces(["a"], frozen=[3])

    def test_tagging_label_alignment(self):
        sent = TaggedSentence.from_surfaces(["a", "b"])
        with pytest.raises(ValidationError):
            TaskInstance("x", (sent,), 0, ("O",), "tagging")
