"""Mono PCM audio: WAV I/O, energy measurement and matching, sample splicing.

Samples live as float64 in [-1, 1] from decode to encode; quantization to
int16 happens only in write_wav, so blending never accumulates integer
rounding.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

INT16_SCALE = 32768.0


class AudioFormatError(ValueError):
    """The file is not in the supported profile (RIFF/WAVE, 16-bit PCM, mono)."""


class SilentDonorError(ValueError):
    """Donor segment has zero energy; it cannot be normalized to a target."""


@dataclass(frozen=True)
class AudioBuffer:
    """Mono audio signal: amplitude samples plus sample rate in Hz.

    The sample array is copied on construction and marked read-only, so a
    buffer is safe to share across threads.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D mono, got {samples.ndim} dimensions")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        if not isinstance(self.sample_rate, (int, np.integer)) or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class SampleSpan:
    """Half-open sample index range [start, end)."""

    start: int
    end: int

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise ValueError(f"invalid sample span [{self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start


def read_wav(path) -> AudioBuffer:
    """Decode a 16-bit PCM mono WAV file to a normalized AudioBuffer.

    int16 values map to value/32768.0, so the result lies in [-1.0, 1.0).
    Rejects anything that is not mono 16-bit PCM; there is no silent downmix
    or resampling.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such audio file: {path}")
    try:
        with wave.open(str(path), "rb") as handle:
            n_channels = handle.getnchannels()
            sample_width = handle.getsampwidth()
            rate = handle.getframerate()
            raw = handle.readframes(handle.getnframes())
    except wave.Error as exc:
        raise AudioFormatError(f"{path}: not a PCM WAV file ({exc})") from exc
    if n_channels != 1:
        raise AudioFormatError(f"{path}: unsupported channel count {n_channels} (mono required)")
    if sample_width != 2:
        raise AudioFormatError(
            f"{path}: unsupported sample width {8 * sample_width} bit (16-bit PCM required)"
        )
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / INT16_SCALE
    return AudioBuffer(samples, rate)


def write_wav(buffer: AudioBuffer, path) -> None:
    """Encode a buffer as 16-bit PCM mono WAV.

    Values outside [-1, 1] are clamped before quantization; a read_wav of the
    result reproduces in-range samples within one int16 step (1/32768).
    """
    if len(buffer) == 0:
        raise ValueError("refusing to write an empty audio buffer")
    clipped = np.clip(buffer.samples, -1.0, 1.0)
    quantized = np.clip(np.rint(clipped * INT16_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(int(buffer.sample_rate))
        handle.writeframes(quantized.tobytes())


def _as_samples(audio) -> np.ndarray:
    if isinstance(audio, AudioBuffer):
        return audio.samples
    return np.asarray(audio, dtype=np.float64)


def rms(audio) -> float:
    """Root-mean-square energy of a buffer or raw sample array."""
    samples = _as_samples(audio)
    if samples.size == 0:
        raise ValueError("rms of an empty signal is undefined")
    return float(np.sqrt(np.mean(np.square(samples))))


def normalize_energy(donor: AudioBuffer, target_rms: float) -> AudioBuffer:
    """Scale a donor segment so its RMS equals target_rms.

    Raises SilentDonorError for an all-zero donor; the pipeline treats that
    as a skip signal for the donor occurrence.
    """
    if target_rms < 0:
        raise ValueError(f"target_rms must be non-negative, got {target_rms}")
    current = rms(donor)
    if current == 0.0:
        raise SilentDonorError("silent donor segment")
    gain = target_rms / current
    return AudioBuffer(donor.samples * gain, donor.sample_rate)


def splice(
    utterance: AudioBuffer, span: SampleSpan, replacement: AudioBuffer
) -> tuple[AudioBuffer, int]:
    """Replace utterance[span] with replacement.

    Returns the new buffer and the signed length shift
    len(replacement) - len(span); len(out) = len(utterance) + shift.
    """
    if replacement.sample_rate != utterance.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: replacement {replacement.sample_rate} Hz "
            f"vs utterance {utterance.sample_rate} Hz"
        )
    if span.end > len(utterance):
        raise ValueError(f"span [{span.start}, {span.end}) exceeds buffer of {len(utterance)} samples")
    out = np.concatenate(
        [utterance.samples[: span.start], replacement.samples, utterance.samples[span.end :]]
    )
    shift = len(replacement) - len(span)
    return AudioBuffer(out, utterance.sample_rate), shift
