import numpy as np
import pytest

from phonage.align import AlignmentSegment, Corpus, SpeakerRecord
from phonage.phones import parse_phone_label


def make_segment(speaker, label, duration, start=0.0, utt=None):
    return AlignmentSegment(
        utterance_id=utt or f"{speaker}-u0",
        speaker_id=speaker,
        channel=1,
        start=start,
        duration=duration,
        raw_label=label,
        label=parse_phone_label(label),
    )


def make_corpus(spec):
    """Corpus from {speaker: (age, [(label, duration), ...])}."""
    speakers = []
    segments = {}
    for sid, (age, segs) in spec.items():
        speakers.append(SpeakerRecord(speaker_id=sid, age_value=age, age_unit="grade"))
        start = 0.0
        out = []
        for label, dur in segs:
            out.append(make_segment(sid, label, dur, start=start))
            start += dur
        segments[sid] = out
    return Corpus(speakers=tuple(speakers), segments=segments)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
