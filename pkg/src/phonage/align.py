"""CTM and speaker-manifest parsing, joined into an in-memory corpus.

CTM files carry one aligned phone per line::

    <utterance_id> <channel> <start> <duration> <phone_label>

``;;`` comment lines and blank lines are skipped. The speaker is the
utterance-id prefix before the first ``-`` unless the manifest supplies
an explicit ``utterance_prefix`` for a speaker.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace

from .errors import DataError, ParseError
from .phones import PhoneLabel, parse_phone_label

log = logging.getLogger(__name__)

AGE_UNIT_GRADE = "grade"
AGE_UNIT_YEARS = "years"

# Alignments are frame-quantized, so true overlaps cannot occur; allow
# this much slack for printed-float rounding.
OVERLAP_TOLERANCE = 1e-3


@dataclass(frozen=True)
class AlignmentSegment:
    utterance_id: str
    speaker_id: str
    channel: int
    start: float
    duration: float
    raw_label: str
    label: PhoneLabel


@dataclass(frozen=True)
class SpeakerRecord:
    speaker_id: str
    age_value: float
    age_unit: str
    utterance_prefix: str | None = None


@dataclass(frozen=True)
class Corpus:
    """Immutable join of segments and speaker metadata."""

    speakers: tuple
    segments: dict  # speaker_id -> list[AlignmentSegment]

    def speaker_ids(self):
        return [s.speaker_id for s in self.speakers]


def default_speaker_of(utterance_id: str) -> str:
    return utterance_id.split("-", 1)[0]


def _as_lines(stream):
    if isinstance(stream, (bytes, bytearray)):
        return io.StringIO(stream.decode("utf-8")).readlines()
    if isinstance(stream, str):
        return io.StringIO(stream).readlines()
    data = stream.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data).readlines()


def parse_ctm(stream, *, skip_bad_durations: bool = False, class_table=None, source: str = "<ctm>"):
    """Parse CTM text into segments, in file order.

    Zero or negative durations raise a DataError unless
    ``skip_bad_durations`` is set, in which case the line is dropped with
    a warning.
    """
    segments = []
    for lineno, line in enumerate(_as_lines(stream), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith(";;"):
            continue
        fields = stripped.split()
        if len(fields) != 5:
            raise ParseError(
                f"{source}:{lineno}: expected 5 fields "
                f"(utterance channel start duration label), got {len(fields)}"
            )
        utt, channel_s, start_s, dur_s, raw_label = fields
        try:
            channel = int(channel_s)
        except ValueError:
            raise ParseError(f"{source}:{lineno}: non-integer channel {channel_s!r}") from None
        try:
            start = float(start_s)
            duration = float(dur_s)
        except ValueError:
            raise ParseError(
                f"{source}:{lineno}: non-numeric start/duration {start_s!r} {dur_s!r}"
            ) from None
        if start < 0:
            raise ParseError(f"{source}:{lineno}: negative start time {start}")
        if duration <= 0:
            if skip_bad_durations:
                log.warning("%s:%d: skipping segment with duration %s", source, lineno, dur_s)
                continue
            raise DataError(
                f"{source}:{lineno}: non-positive duration {dur_s} "
                "(pass skip_bad_durations to drop such lines)"
            )
        try:
            label = parse_phone_label(raw_label, class_table)
        except ParseError as exc:
            raise ParseError(f"{source}:{lineno}: {exc}") from None
        segments.append(
            AlignmentSegment(
                utterance_id=utt,
                speaker_id=default_speaker_of(utt),
                channel=channel,
                start=start,
                duration=duration,
                raw_label=raw_label,
                label=label,
            )
        )
    return segments


def serialize_ctm(segments) -> str:
    """Render segments back to CTM text with 2-decimal fixed times."""
    lines = [
        f"{s.utterance_id} {s.channel} {s.start:.2f} {s.duration:.2f} {s.raw_label}"
        for s in segments
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def parse_manifest(stream, *, source: str = "<manifest>"):
    """Parse the speaker manifest CSV into records.

    Required header: ``speaker_id,age_value,age_unit``; an optional
    ``utterance_prefix`` column overrides the default speaker-id rule.
    """
    lines = _as_lines(stream)
    reader = csv.DictReader(lines)
    required = {"speaker_id", "age_value", "age_unit"}
    header = set(reader.fieldnames or ())
    if not required <= header:
        raise ParseError(f"{source}: manifest header must contain {sorted(required)}")
    records = []
    seen = set()
    for rownum, row in enumerate(reader, start=2):
        sid = (row["speaker_id"] or "").strip()
        if not sid:
            raise ParseError(f"{source}:{rownum}: empty speaker_id")
        if sid in seen:
            raise DataError(f"{source}:{rownum}: duplicate speaker_id {sid!r}")
        seen.add(sid)
        unit = (row["age_unit"] or "").strip()
        if unit not in (AGE_UNIT_GRADE, AGE_UNIT_YEARS):
            raise ParseError(f"{source}:{rownum}: unknown age_unit {unit!r}")
        try:
            age = float(row["age_value"])
        except (TypeError, ValueError):
            raise ParseError(
                f"{source}:{rownum}: non-numeric age_value {row['age_value']!r}"
            ) from None
        if age < 0:
            raise DataError(f"{source}:{rownum}: negative age {age}")
        if unit == AGE_UNIT_GRADE:
            if age != int(age) or not 0 <= age <= 12:
                raise DataError(f"{source}:{rownum}: grade must be a whole number 0-12, got {age}")
        elif age <= 0:
            raise DataError(f"{source}:{rownum}: years must be positive, got {age}")
        prefix = (row.get("utterance_prefix") or "").strip() or None
        records.append(
            SpeakerRecord(speaker_id=sid, age_value=age, age_unit=unit, utterance_prefix=prefix)
        )
    return records


def _check_overlaps(segments):
    by_utt: dict = {}
    for seg in segments:
        by_utt.setdefault(seg.utterance_id, []).append(seg)
    for utt, segs in by_utt.items():
        ordered = sorted(segs, key=lambda s: s.start)
        for prev, nxt in zip(ordered, ordered[1:]):
            overlap = prev.start + prev.duration - nxt.start
            if overlap > OVERLAP_TOLERANCE:
                raise DataError(
                    f"utterance {utt!r}: segments at {prev.start:.2f} and {nxt.start:.2f} "
                    f"overlap by {overlap * 1000:.1f} ms"
                )


def load_corpus(ctm_paths, manifest_path, *, skip_bad_durations=False, class_table=None) -> Corpus:
    """Parse CTM files and the manifest, join segments to speakers.

    Manifest speakers without any segment are dropped with a warning;
    segments whose speaker is absent from the manifest are an error.
    """
    with open(manifest_path, "rb") as fh:
        speakers = parse_manifest(fh, source=str(manifest_path))

    segments = []
    for path in ctm_paths:
        with open(path, "rb") as fh:
            segments.extend(
                parse_ctm(
                    fh,
                    skip_bad_durations=skip_bad_durations,
                    class_table=class_table,
                    source=str(path),
                )
            )
    _check_overlaps(segments)

    prefix_map = sorted(
        ((s.utterance_prefix, s.speaker_id) for s in speakers if s.utterance_prefix),
        key=lambda kv: -len(kv[0]),
    )
    if prefix_map:
        remapped = []
        for seg in segments:
            for prefix, sid in prefix_map:
                if seg.utterance_id.startswith(prefix):
                    seg = replace(seg, speaker_id=sid)
                    break
            remapped.append(seg)
        segments = remapped

    known = {s.speaker_id for s in speakers}
    grouped: dict = {}
    unknown = set()
    for seg in segments:
        if seg.speaker_id not in known:
            unknown.add(seg.speaker_id)
            continue
        grouped.setdefault(seg.speaker_id, []).append(seg)
    if unknown:
        raise DataError(
            "segments reference speakers absent from the manifest: "
            + ", ".join(sorted(unknown))
        )

    kept = []
    for rec in speakers:
        if rec.speaker_id in grouped:
            kept.append(rec)
        else:
            log.warning("speaker %s has no segments; dropped", rec.speaker_id)
    if not kept:
        raise DataError("corpus is empty: no speaker has any segment")
    return Corpus(speakers=tuple(kept), segments=grouped)
