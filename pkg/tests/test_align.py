import pytest

from phonage.align import (
    load_corpus,
    parse_ctm,
    parse_manifest,
    serialize_ctm,
)
from phonage.errors import DataError, ParseError

CTM = """\
spk007-u1 1 0.25 0.09 T_I
;; a comment line
spk007-u1 1 0.34 0.50 SIL

spk008-u1 1 0.00 0.12 AH1_B
"""


def test_parse_ctm_basic():
    segs = parse_ctm(CTM)
    assert len(segs) == 3
    first = segs[0]
    assert first.utterance_id == "spk007-u1"
    assert first.speaker_id == "spk007"
    assert first.start == 0.25 and first.duration == 0.09
    assert first.label.base == "T" and first.label.position == "intermediate"


def test_parse_ctm_field_count_error_names_line():
    with pytest.raises(ParseError, match=":2"):
        parse_ctm("a-u0 1 0.0 0.5 T\na-u0 1 0.5 T\n")


def test_parse_ctm_non_numeric():
    with pytest.raises(ParseError, match="non-numeric"):
        parse_ctm("a-u0 1 zero 0.5 T\n")


def test_parse_ctm_zero_duration_modes(caplog):
    text = "a-u0 1 0.0 0.10 T\na-u0 1 0.1 0.00 T\na-u0 1 0.2 0.10 T\na-u0 1 0.3 0.10 T\n"
    with pytest.raises(DataError):
        parse_ctm(text)
    with caplog.at_level("WARNING"):
        segs = parse_ctm(text, skip_bad_durations=True)
    assert len(segs) == 3
    assert any("skipping" in r.message for r in caplog.records)


def test_ctm_round_trip():
    segs = parse_ctm(CTM)
    text = serialize_ctm(segs)
    again = parse_ctm(text)
    assert len(again) == len(segs)
    for a, b in zip(segs, again):
        assert a.utterance_id == b.utterance_id
        assert a.raw_label == b.raw_label
        assert abs(a.start - b.start) < 1e-9
        assert abs(a.duration - b.duration) < 1e-9


def test_manifest_parsing_and_errors():
    recs = parse_manifest("speaker_id,age_value,age_unit\nk12,0,grade\nados_031,7.25,years\n")
    assert recs[0].age_value == 0 and recs[0].age_unit == "grade"
    assert recs[1].age_value == 7.25 and recs[1].age_unit == "years"

    with pytest.raises(DataError, match="duplicate"):
        parse_manifest("speaker_id,age_value,age_unit\na,1,grade\na,2,grade\n")
    with pytest.raises(ParseError, match="age_unit"):
        parse_manifest("speaker_id,age_value,age_unit\na,1,days\n")
    with pytest.raises(DataError, match="negative"):
        parse_manifest("speaker_id,age_value,age_unit\na,-1,years\n")
    with pytest.raises(DataError, match="whole number"):
        parse_manifest("speaker_id,age_value,age_unit\na,3.5,grade\n")
    with pytest.raises(ParseError, match="header"):
        parse_manifest("speaker,age\na,1\n")


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_corpus_join(tmp_path, caplog):
    ctm1 = _write(tmp_path, "1.ctm", "a-u0 1 0.0 0.5 SIL\n")
    ctm2 = _write(tmp_path, "2.ctm", "b-u0 1 0.0 0.4 T_I\n")
    manifest = _write(
        tmp_path,
        "m.csv",
        "speaker_id,age_value,age_unit\na,1,grade\nb,2,grade\nc,3,grade\n",
    )
    with caplog.at_level("WARNING"):
        corpus = load_corpus([ctm1, ctm2], manifest)
    assert corpus.speaker_ids() == ["a", "b"]
    assert any("c" in r.message for r in caplog.records)


def test_load_corpus_unknown_speaker(tmp_path):
    ctm = _write(tmp_path, "1.ctm", "d-u0 1 0.0 0.5 SIL\n")
    manifest = _write(tmp_path, "m.csv", "speaker_id,age_value,age_unit\na,1,grade\n")
    with pytest.raises(DataError, match="d"):
        load_corpus([ctm], manifest)


def test_load_corpus_empty(tmp_path):
    ctm = _write(tmp_path, "1.ctm", ";; nothing\n")
    manifest = _write(tmp_path, "m.csv", "speaker_id,age_value,age_unit\na,1,grade\n")
    with pytest.raises(DataError, match="empty"):
        load_corpus([ctm], manifest)


def test_load_corpus_prefix_override(tmp_path):
    ctm = _write(tmp_path, "1.ctm", "ogikids01-u0 1 0.0 0.5 SIL\n")
    manifest = _write(
        tmp_path,
        "m.csv",
        "speaker_id,age_value,age_unit,utterance_prefix\nogi_01,4,grade,ogikids01\n",
    )
    corpus = load_corpus([ctm], manifest)
    assert corpus.speaker_ids() == ["ogi_01"]


def test_load_corpus_overlap_rejected(tmp_path):
    ctm = _write(tmp_path, "1.ctm", "a-u0 1 0.00 0.50 SIL\na-u0 1 0.40 0.10 T\n")
    manifest = _write(tmp_path, "m.csv", "speaker_id,age_value,age_unit\na,1,grade\n")
    with pytest.raises(DataError, match="overlap"):
        load_corpus([ctm], manifest)


def test_load_corpus_merge_order_independence(tmp_path):
    ctm1 = _write(tmp_path, "1.ctm", "a-u0 1 0.0 0.5 SIL\na-u1 1 0.0 0.2 T\n")
    ctm2 = _write(tmp_path, "2.ctm", "a-u2 1 0.0 0.3 AH\n")
    manifest = _write(tmp_path, "m.csv", "speaker_id,age_value,age_unit\na,1,grade\n")
    c12 = load_corpus([ctm1, ctm2], manifest)
    c21 = load_corpus([ctm2, ctm1], manifest)
    durs12 = sorted((s.raw_label, s.duration) for s in c12.segments["a"])
    durs21 = sorted((s.raw_label, s.duration) for s in c21.segments["a"])
    assert durs12 == durs21
