"""Phone label parsing, category expansion, and inventory construction.

A raw alignment label such as ``AH1_B`` encodes an ARPAbet base symbol,
an optional lexical stress digit (vowels only), and an optional word
position suffix. Each occurrence feeds several duration categories: its
fully qualified key, progressively stress- and position-stripped keys,
and the global pools (all non-silence phones, all vowels or consonants).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ConfigError, DataError, ParseError

ARPABET_VOWELS = frozenset(
    "AA AE AH AO AW AY EH ER EY IH IY OW OY UH UW".split()
)
ARPABET_CONSONANTS = frozenset(
    "B CH D DH F G HH JH K L M N NG P R S SH T TH V W Y Z ZH".split()
)

CLASS_VOWEL = "vowel"
CLASS_CONSONANT = "consonant"
CLASS_SILENCE = "silence"
CLASS_SPOKEN_NOISE = "spoken_noise"
CLASS_OTHER_NOISE = "other_noise"
VALID_CLASSES = frozenset(
    {CLASS_VOWEL, CLASS_CONSONANT, CLASS_SILENCE, CLASS_SPOKEN_NOISE, CLASS_OTHER_NOISE}
)
_NON_SPEECH = frozenset({CLASS_SILENCE, CLASS_SPOKEN_NOISE, CLASS_OTHER_NOISE})

# Canonical category key for each non-speech class.
KEY_SIL = "SIL"
KEY_SPN = "SPN"
KEY_NSN = "NSN"
_CLASS_KEY = {CLASS_SILENCE: KEY_SIL, CLASS_SPOKEN_NOISE: KEY_SPN, CLASS_OTHER_NOISE: KEY_NSN}

KEY_NONSILENCE = "NONSILENCE"
KEY_VOWELS = "VOWELS"
KEY_CONSONANTS = "CONSONANTS"
AGGREGATE_KEYS = frozenset({KEY_NONSILENCE, KEY_VOWELS, KEY_CONSONANTS})

_POSITIONS = {"B": "begin", "I": "intermediate", "E": "end", "S": "singleton"}
_POSITION_CODES = {v: k for k, v in _POSITIONS.items()}


def default_class_table() -> dict:
    table = {sym: CLASS_VOWEL for sym in ARPABET_VOWELS}
    table.update({sym: CLASS_CONSONANT for sym in ARPABET_CONSONANTS})
    table[KEY_SIL] = CLASS_SILENCE
    table[KEY_SPN] = CLASS_SPOKEN_NOISE
    table[KEY_NSN] = CLASS_OTHER_NOISE
    return table


def load_class_table(path) -> dict:
    """Merge a JSON ``{"symbol": "class"}`` override file over the defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        overrides = json.load(fh)
    if not isinstance(overrides, dict):
        raise ParseError(f"{path}: class table must be a JSON object")
    for sym, klass in overrides.items():
        if klass not in VALID_CLASSES:
            raise ParseError(f"{path}: unknown phone class {klass!r} for symbol {sym!r}")
    table = default_class_table()
    table.update(overrides)
    return table


@dataclass(frozen=True)
class PhoneLabel:
    """Structured identity of one aligned phone occurrence."""

    base: str
    position: str | None  # begin / intermediate / end / singleton, or None
    stress: int | None  # 0, 1, 2, or None
    klass: str

    @property
    def is_speech(self) -> bool:
        return self.klass not in _NON_SPEECH


def parse_phone_label(raw: str, class_table: dict | None = None) -> PhoneLabel:
    """Parse ``BASE[stress][_{B|I|E|S}]`` or a reserved non-speech symbol.

    Raises ParseError for unknown base symbols, stress digits on
    non-vowels, or position/stress markers attached to non-speech symbols.
    """
    table = class_table if class_table is not None else default_class_table()
    if not raw:
        raise ParseError("empty phone label")
    klass = table.get(raw)
    if klass in _NON_SPEECH:
        return PhoneLabel(base=raw, position=None, stress=None, klass=klass)

    body = raw
    position = None
    if len(body) > 2 and body[-2] == "_" and body[-1] in _POSITIONS:
        position = _POSITIONS[body[-1]]
        body = body[:-2]
    stress = None
    if body and body[-1] in "012":
        stress = int(body[-1])
        body = body[:-1]
    klass = table.get(body)
    if klass is None:
        raise ParseError(f"unrecognized phone symbol {raw!r} (base {body!r})")
    if klass in _NON_SPEECH:
        raise ParseError(
            f"non-speech symbol {body!r} may not carry stress or position markers ({raw!r})"
        )
    if stress is not None and klass != CLASS_VOWEL:
        raise ParseError(f"stress digit on non-vowel symbol {raw!r}")
    return PhoneLabel(base=body, position=position, stress=stress, klass=klass)


def expand_categories(label: PhoneLabel, with_stress: bool) -> frozenset:
    """Category keys fed by one occurrence of ``label``.

    Non-speech labels map to exactly one pool key. Speech labels feed the
    position-dependent key (when positioned), the position-independent
    key, the stress-stripped base key (when a stress digit is kept), and
    the global pools.
    """
    if not label.is_speech:
        return frozenset({_CLASS_KEY[label.klass]})
    core = label.base
    if with_stress and label.stress is not None:
        core = f"{label.base}{label.stress}"
    keys = {core, KEY_NONSILENCE}
    keys.add(KEY_VOWELS if label.klass == CLASS_VOWEL else KEY_CONSONANTS)
    if label.position is not None:
        keys.add(f"{core}_{_POSITION_CODES[label.position]}")
    if core != label.base:
        keys.add(label.base)
    return frozenset(keys)


@dataclass(frozen=True)
class PhoneInventory:
    """Ordered, reproducible set of category keys for a corpus."""

    keys: tuple
    with_stress: bool = True
    min_speaker_fraction: float = 0.0

    def __len__(self):
        return len(self.keys)

    def __iter__(self):
        return iter(self.keys)

    def index(self, key: str) -> int:
        return self.keys.index(key)


def build_inventory(corpus, with_stress: bool, min_speaker_fraction: float = 0.0) -> PhoneInventory:
    """Union of expanded keys over all segments, presence-filtered and sorted.

    A key survives if it occurs for at least ``min_speaker_fraction`` of
    the corpus speakers; the three global pool keys are exempt.
    """
    if not 0.0 <= min_speaker_fraction <= 1.0:
        raise ConfigError(f"min_speaker_fraction must be in [0, 1], got {min_speaker_fraction}")
    n_speakers = len(corpus.speakers)
    if n_speakers == 0:
        raise DataError("cannot build an inventory from an empty corpus")
    present_counts: dict = {}
    for speaker in corpus.speakers:
        speaker_keys = set()
        for seg in corpus.segments.get(speaker.speaker_id, ()):
            speaker_keys |= expand_categories(seg.label, with_stress)
        for key in speaker_keys:
            present_counts[key] = present_counts.get(key, 0) + 1
    kept = [
        key
        for key, count in present_counts.items()
        if key in AGGREGATE_KEYS or count / n_speakers >= min_speaker_fraction
    ]
    if not kept:
        raise DataError("inventory is empty after presence filtering")
    return PhoneInventory(
        keys=tuple(sorted(kept)),
        with_stress=with_stress,
        min_speaker_fraction=min_speaker_fraction,
    )
