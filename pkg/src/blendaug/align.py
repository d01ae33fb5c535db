"""Forced-alignment output (CTM) parsing and phoneme segment extraction.

CTM line grammar: ``utt_id SP channel SP start SP dur SP phone``, with
``#``-prefixed comment lines; start/dur are decimal seconds. Running the
alignment itself is out of scope; alignments are consumed as files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .audio import AudioBuffer, SampleSpan

OVERLAP_TOLERANCE = 1e-6  # seconds

VALID_SCORES = (0, 1, 2)


class CtmParseError(ValueError):
    """Malformed CTM content; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class PhonemeInterval:
    """One aligned phoneme occurrence.

    score is the pronunciation label (0 mispronounced/missing, 1 accented,
    2 good) or None when no score manifest has been attached yet.
    """

    utt_id: str
    channel: str
    start: float
    duration: float
    phone: str
    score: int | None = None

    def __post_init__(self):
        if self.start < 0:
            raise ValueError(f"negative start time {self.start}")
        if self.duration <= 0:
            raise ValueError(f"non-positive duration {self.duration}")
        if not self.phone or any(ch.isspace() for ch in self.phone):
            raise ValueError(f"phone label must be a non-empty token, got {self.phone!r}")
        if self.score is not None and self.score not in VALID_SCORES:
            raise ValueError(f"score must be one of {VALID_SCORES}, got {self.score}")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class UtteranceRecord:
    """One utterance: audio path plus its phoneme intervals sorted by start.

    Overlaps beyond OVERLAP_TOLERANCE are rejected rather than trimmed;
    whether intervals fit inside the audio is checked lazily at extraction.
    """

    utt_id: str
    wav_path: Path
    phones: tuple[PhonemeInterval, ...]

    def __post_init__(self):
        ordered = tuple(sorted(self.phones, key=lambda iv: iv.start))
        for prev, cur in zip(ordered, ordered[1:]):
            if prev.end - cur.start > OVERLAP_TOLERANCE:
                raise ValueError(
                    f"{self.utt_id}: intervals overlap "
                    f"({prev.phone} ends {prev.end:.6f}, {cur.phone} starts {cur.start:.6f})"
                )
        object.__setattr__(self, "phones", ordered)
        object.__setattr__(self, "wav_path", Path(self.wav_path))


def parse_ctm(text: str | Iterable[str]) -> list[PhonemeInterval]:
    """Parse CTM content into intervals, line order preserved.

    Accepts a string or an iterable of lines. Blank and ``#`` lines are
    skipped. Field count, numeric, and sign errors name the 1-based line.
    """
    lines = text.splitlines() if isinstance(text, str) else text
    intervals: list[PhonemeInterval] = []
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 5:
            raise CtmParseError(line_no, f"expected 5 fields, got {len(fields)}")
        utt_id, channel, start_text, dur_text, phone = fields
        try:
            start = float(start_text)
            duration = float(dur_text)
        except ValueError:
            raise CtmParseError(
                line_no, f"non-numeric start/dur: {start_text!r} {dur_text!r}"
            ) from None
        if start < 0:
            raise CtmParseError(line_no, f"negative start time {start}")
        if duration <= 0:
            raise CtmParseError(line_no, f"non-positive duration {duration}")
        intervals.append(PhonemeInterval(utt_id, channel, start, duration, phone))
    return intervals


def format_seconds(value: float) -> str:
    """Canonical CTM time formatting: 2 decimals when exact, else lossless."""
    text = f"{value:.2f}"
    if float(text) == value:
        return text
    return np.format_float_positional(value, unique=True, trim="0")


def serialize_ctm(intervals: Iterable[PhonemeInterval]) -> str:
    """Render intervals back to CTM text; parse(serialize(parse(x))) == parse(x)."""
    lines = [
        f"{iv.utt_id} {iv.channel} {format_seconds(iv.start)} "
        f"{format_seconds(iv.duration)} {iv.phone}"
        for iv in intervals
    ]
    return "".join(line + "\n" for line in lines)


def _round_half_away(value: float) -> int:
    # round-half-away-from-zero; inputs are non-negative seconds*rate
    return int(math.floor(value + 0.5))


def to_span(interval: PhonemeInterval, sample_rate: int) -> SampleSpan:
    """Map an interval to sample indices.

    start and end are rounded independently, half away from zero, so the
    mapping is deterministic and order-preserving.
    """
    if sample_rate <= 0:
        raise ValueError(f"sample_rate must be positive, got {sample_rate}")
    start = _round_half_away(interval.start * sample_rate)
    end = _round_half_away(interval.end * sample_rate)
    if end <= start:
        raise ValueError(
            f"{interval.utt_id}/{interval.phone}: interval of {interval.duration}s "
            f"rounds to an empty span at {sample_rate} Hz"
        )
    return SampleSpan(start, end)


def extract_segment(utterance: AudioBuffer, interval: PhonemeInterval) -> AudioBuffer:
    """Slice the interval's samples out of an utterance buffer."""
    span = to_span(interval, utterance.sample_rate)
    if span.end > len(utterance):
        raise ValueError(
            f"{interval.utt_id}/{interval.phone}: alignment exceeds audio "
            f"(needs sample {span.end}, buffer has {len(utterance)})"
        )
    return AudioBuffer(utterance.samples[span.start : span.end], utterance.sample_rate)
