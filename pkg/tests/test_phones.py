import json

import pytest

from phonage.errors import DataError, ParseError
from phonage.phones import (
    build_inventory,
    expand_categories,
    load_class_table,
    parse_phone_label,
)

from conftest import make_corpus


def test_parse_position_dependent_consonant():
    lab = parse_phone_label("T_I")
    assert lab.base == "T"
    assert lab.position == "intermediate"
    assert lab.stress is None
    assert lab.klass == "consonant"


def test_parse_silence():
    lab = parse_phone_label("SIL")
    assert lab.klass == "silence"
    assert lab.position is None and lab.stress is None


def test_parse_stressed_vowel():
    lab = parse_phone_label("AH1_B")
    assert (lab.base, lab.position, lab.stress, lab.klass) == ("AH", "begin", 1, "vowel")


@pytest.mark.parametrize("raw", ["QQ", "SIL_B", "SIL1", "T1_I", ""])
def test_parse_rejects(raw):
    with pytest.raises(ParseError):
        parse_phone_label(raw)


def test_parse_with_class_override(tmp_path):
    path = tmp_path / "classes.json"
    path.write_text(json.dumps({"EU": "vowel", "sp": "silence"}))
    table = load_class_table(path)
    assert parse_phone_label("EU2_E", table).klass == "vowel"
    assert parse_phone_label("sp", table).klass == "silence"
    # silence aliases still pool into SIL
    assert expand_categories(parse_phone_label("sp", table), True) == frozenset({"SIL"})


def test_expand_examples():
    assert expand_categories(parse_phone_label("T_I"), True) == frozenset(
        {"T_I", "T", "NONSILENCE", "CONSONANTS"}
    )
    assert expand_categories(parse_phone_label("AH1_B"), True) == frozenset(
        {"AH1_B", "AH1", "AH", "NONSILENCE", "VOWELS"}
    )
    assert expand_categories(parse_phone_label("AH1_B"), False) == frozenset(
        {"AH_B", "AH", "NONSILENCE", "VOWELS"}
    )
    assert expand_categories(parse_phone_label("SPN"), True) == frozenset({"SPN"})
    assert expand_categories(parse_phone_label("NSN"), True) == frozenset({"NSN"})


def test_expand_membership_pattern():
    # non-speech -> exactly one key; speech -> >= 3 keys including NONSILENCE
    for raw in ("SIL", "SPN", "NSN"):
        assert len(expand_categories(parse_phone_label(raw), True)) == 1
    for raw in ("AH", "T_I", "AH0_B", "ZH_E"):
        keys = expand_categories(parse_phone_label(raw), True)
        assert "NONSILENCE" in keys and len(keys) >= 3


def test_inventory_union_and_sort():
    corpus = make_corpus(
        {
            "a": (1, [("SIL", 0.5), ("T_I", 0.1)]),
            "b": (2, [("SIL", 0.4), ("T_I", 0.2)]),
        }
    )
    inv = build_inventory(corpus, with_stress=True, min_speaker_fraction=0.0)
    assert inv.keys == ("CONSONANTS", "NONSILENCE", "SIL", "T", "T_I")


def test_inventory_single_speaker_stressed():
    corpus = make_corpus({"a": (1, [("AH0_B", 0.1)])})
    inv = build_inventory(corpus, with_stress=True)
    assert inv.keys == ("AH", "AH0", "AH0_B", "NONSILENCE", "VOWELS")


def test_inventory_fraction_filter_exempts_aggregates():
    corpus = make_corpus(
        {
            "a": (1, [("T_I", 0.1), ("AH", 0.2)]),
            "b": (2, [("T_I", 0.1)]),
            "c": (3, [("T_I", 0.1)]),
        }
    )
    inv = build_inventory(corpus, with_stress=True, min_speaker_fraction=0.5)
    # AH appears for 1/3 of speakers and is filtered; VOWELS survives as an aggregate
    assert "AH" not in inv.keys
    assert "VOWELS" in inv.keys and "NONSILENCE" in inv.keys
    assert "T_I" in inv.keys


def test_inventory_empty_after_filter():
    # only non-speech keys, each below the presence threshold and not
    # aggregate-exempt, leaves nothing
    corpus = make_corpus({"a": (1, [("SIL", 0.5)]), "b": (2, [("SPN", 0.5)])})
    with pytest.raises(DataError):
        build_inventory(corpus, True, min_speaker_fraction=0.9)


def test_inventory_stable_and_stress_stripping_never_grows():
    corpus = make_corpus(
        {
            "a": (1, [("AH0_B", 0.1), ("AH1_B", 0.2), ("T_I", 0.1)]),
            "b": (2, [("AH1_E", 0.3), ("SIL", 0.4)]),
        }
    )
    inv1 = build_inventory(corpus, True)
    inv2 = build_inventory(corpus, True)
    assert inv1.keys == inv2.keys
    stripped = build_inventory(corpus, False)
    assert len(stripped) <= len(inv1)
