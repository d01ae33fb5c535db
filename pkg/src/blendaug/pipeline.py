"""End-to-end augmentation runs: corpus loading, candidate and donor
selection, blending, splicing, and manifest emission.

Runs are deterministic under a seed and independent of the worker count:
each utterance gets its own RNG derived from hash(seed, utt_id), every task
owns its output files, and the manifest is assembled in utterance order by a
single writer.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .align import PhonemeInterval, UtteranceRecord, extract_segment, parse_ctm, to_span
from .audio import AudioBuffer, SampleSpan, SilentDonorError, read_wav, splice, write_wav
from .blender import (
    FRAME_WEIGHTED,
    GOOD_SCORE,
    LABEL_MODES,
    speech_blend,
)
from .closedict import CONFUSION_WEIGHTED, DONOR_WEIGHTINGS, CloseDict, pick_donor
from .mask import MIN_SEGMENT_FRAMES, RANDOM_POOL, SegmentTooShortError, resolve_template

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF

MANIFEST_NAME = "augmented.jsonl"
WARNINGS_NAME = "warnings.jsonl"


class ManifestFormatError(ValueError):
    """Malformed corpus manifest JSONL; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class RunError(RuntimeError):
    """One or more utterances failed with I/O or data errors during a run."""

    def __init__(self, failures: list[tuple[str, Exception]]):
        self.failures = failures
        preview = "; ".join(f"{utt}: {exc}" for utt, exc in failures[:5])
        suffix = "" if len(failures) <= 5 else f" (+{len(failures) - 5} more)"
        super().__init__(f"{len(failures)} utterance(s) failed: {preview}{suffix}")


def derive_seed(seed: int, utt_id: str) -> int:
    """Stable per-utterance seed: FNV-1a over seed bytes ++ utt_id bytes.

    The seed is taken as 8 little-endian bytes of its unsigned 64-bit value;
    the utterance id contributes its UTF-8 bytes. This is the mechanism that
    makes runs identical for any worker count and scheduling order.
    """
    digest = FNV_OFFSET
    payload = (seed & MASK64).to_bytes(8, "little") + utt_id.encode("utf-8")
    for byte in payload:
        digest ^= byte
        digest = (digest * FNV_PRIME) & MASK64
    return digest


@dataclass(frozen=True)
class MaskChoice:
    """One entry of the mask pool: template, parameters, selection weight."""

    template: str
    params: Mapping[str, float] = field(default_factory=dict)
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "template", resolve_template(self.template))
        if self.weight <= 0:
            raise ValueError(f"mask pool weight must be positive, got {self.weight}")


DEFAULT_MASK_POOL = tuple(MaskChoice(name) for name in RANDOM_POOL)


@dataclass(frozen=True)
class AugConfig:
    """Free parameters of an augmentation run."""

    seed: int
    output_dir: Path
    close: CloseDict
    candidates_per_utterance: int = 1
    mask_pool: tuple[MaskChoice, ...] = DEFAULT_MASK_POOL
    label_mode: str = FRAME_WEIGHTED
    donor_weighting: str = CONFUSION_WEIGHTED
    min_segment_frames: int = MIN_SEGMENT_FRAMES
    donor_retries: int = 5
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        object.__setattr__(self, "mask_pool", tuple(self.mask_pool))
        if self.label_mode not in LABEL_MODES:
            raise ValueError(f"label_mode must be one of {LABEL_MODES}, got {self.label_mode!r}")
        if self.donor_weighting not in DONOR_WEIGHTINGS:
            raise ValueError(
                f"donor_weighting must be one of {DONOR_WEIGHTINGS}, got {self.donor_weighting!r}"
            )
        if self.candidates_per_utterance < 1:
            raise ValueError("candidates_per_utterance must be >= 1")
        if self.min_segment_frames < MIN_SEGMENT_FRAMES:
            raise ValueError(f"min_segment_frames must be >= {MIN_SEGMENT_FRAMES}")
        if not self.mask_pool:
            raise ValueError("mask_pool must not be empty")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.donor_retries < 1:
            raise ValueError("donor_retries must be >= 1")


@dataclass(frozen=True)
class Corpus:
    """Loaded utterances plus an index of good-scored phone occurrences."""

    utterances: Mapping[str, UtteranceRecord]
    phone_index: Mapping[str, tuple[tuple[str, int], ...]]


@dataclass(frozen=True)
class SegmentRef:
    """Provenance pointer to one phoneme occurrence."""

    utt_id: str
    phone: str
    span: SampleSpan


@dataclass(frozen=True)
class MaskSummary:
    """Everything needed to regenerate the mask and recompute the label."""

    template: str
    params: Mapping[str, float]
    t_frames: int
    l_frames: int
    mu: int
    regions: int
    widths: tuple[int, ...]
    label_mode: str
    regional_labels: tuple[int, ...]


@dataclass(frozen=True)
class AugmentedSample:
    """One produced sample: output audio reference, label, full provenance."""

    new_utt_id: str
    wav_path: str  # relative to the output manifest's directory
    label: int
    candidate: SegmentRef
    donor: SegmentRef
    mask: MaskSummary
    shift: int
    updated_intervals: tuple[PhonemeInterval, ...]


def load_corpus(manifest_path, ctm_path) -> Corpus:
    """Assemble a corpus from an utterance manifest (JSONL) and a CTM file.

    Manifest lines are ``{"utt_id": ..., "wav": path, "scores": [...]}`` with
    one score per CTM phone in CTM order; relative wav paths resolve against
    the manifest's directory. The phone index holds score-2 occurrences only.
    WAV readability is checked lazily, per utterance, at augmentation time.
    """
    manifest_path = Path(manifest_path)
    entries: dict[str, tuple[Path, list[int]]] = {}
    with open(manifest_path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ManifestFormatError(line_no, f"invalid JSON: {exc}") from None
            for key in ("utt_id", "wav", "scores"):
                if key not in obj:
                    raise ManifestFormatError(line_no, f"missing key {key!r}")
            utt_id = obj["utt_id"]
            if utt_id in entries:
                raise ManifestFormatError(line_no, f"duplicated utt_id {utt_id!r}")
            scores = obj["scores"]
            if not isinstance(scores, list) or not all(s in (0, 1, 2) for s in scores):
                raise ManifestFormatError(line_no, f"scores must be a list over {{0,1,2}}")
            wav = Path(obj["wav"])
            if not wav.is_absolute():
                wav = manifest_path.parent / wav
            entries[utt_id] = (wav, scores)

    with open(ctm_path, "r", encoding="utf-8") as handle:
        intervals = parse_ctm(handle)

    by_utt: dict[str, list[PhonemeInterval]] = {}
    for interval in intervals:
        if interval.utt_id not in entries:
            raise ValueError(f"CTM references unknown utterance {interval.utt_id!r}")
        by_utt.setdefault(interval.utt_id, []).append(interval)

    utterances: dict[str, UtteranceRecord] = {}
    for utt_id, (wav, scores) in entries.items():
        phones = by_utt.get(utt_id)
        if not phones:
            raise ValueError(f"manifest utterance {utt_id!r} has no CTM intervals")
        if len(scores) != len(phones):
            raise ValueError(
                f"{utt_id}: {len(scores)} scores for {len(phones)} CTM phones"
            )
        scored = [
            PhonemeInterval(iv.utt_id, iv.channel, iv.start, iv.duration, iv.phone, score)
            for iv, score in zip(phones, scores)
        ]
        utterances[utt_id] = UtteranceRecord(utt_id, wav, tuple(scored))

    phone_index: dict[str, list[tuple[str, int]]] = {}
    for utt_id in sorted(utterances):
        for idx, interval in enumerate(utterances[utt_id].phones):
            if interval.score == GOOD_SCORE:
                phone_index.setdefault(interval.phone, []).append((utt_id, idx))
    return Corpus(
        utterances=utterances,
        phone_index={p: tuple(occ) for p, occ in phone_index.items()},
    )


def select_candidates(
    record: UtteranceRecord,
    config: AugConfig,
    rng: np.random.Generator,
    sample_rate: int,
) -> list[int]:
    """Pick up to candidates_per_utterance interval indices, uniformly
    without replacement among good-scored intervals long enough to blend."""
    eligible = []
    for idx, interval in enumerate(record.phones):
        if interval.score != GOOD_SCORE:
            continue
        try:
            span = to_span(interval, sample_rate)
        except ValueError:
            continue
        if len(span) >= config.min_segment_frames:
            eligible.append(idx)
    if not eligible:
        return []
    k = min(config.candidates_per_utterance, len(eligible))
    chosen = rng.choice(len(eligible), size=k, replace=False)
    return sorted(eligible[int(i)] for i in chosen)


def find_donor_occurrence(
    corpus: Corpus,
    donor_phone: str,
    exclude_utt: str,
    rng: np.random.Generator,
) -> tuple[str, PhonemeInterval] | None:
    """Uniform draw of a good occurrence of donor_phone from another
    utterance, falling back to the excluded one when it is the only source."""
    occurrences = corpus.phone_index.get(donor_phone, ())
    if not occurrences:
        return None
    pool = [occ for occ in occurrences if occ[0] != exclude_utt] or list(occurrences)
    utt_id, idx = pool[int(rng.integers(len(pool)))]
    return utt_id, corpus.utterances[utt_id].phones[idx]


def _pick_mask(pool: tuple[MaskChoice, ...], rng: np.random.Generator) -> MaskChoice:
    if len(pool) == 1:
        return pool[0]
    weights = np.array([choice.weight for choice in pool], dtype=np.float64)
    return pool[int(rng.choice(len(pool), p=weights / weights.sum()))]


def _warning(utt_id: str, reason: str, detail: str) -> dict:
    return {"utt_id": utt_id, "reason": reason, "detail": detail}


def augment_utterance(
    corpus: Corpus,
    utt_id: str,
    config: AugConfig,
    rng: np.random.Generator,
) -> tuple[list[AugmentedSample], list[dict]]:
    """Produce augmented samples for one utterance.

    Each selected candidate yields its own output utterance derived from the
    pristine audio; degenerate candidates (no donor entry, no occurrence,
    short or silent donor) are skipped with a structured warning rather than
    failing the run. I/O and alignment/audio mismatches raise.
    """
    record = corpus.utterances[utt_id]
    buffer = read_wav(record.wav_path)
    samples: list[AugmentedSample] = []
    warnings: list[dict] = []
    for ordinal, idx in enumerate(select_candidates(record, config, rng, buffer.sample_rate)):
        outcome = _augment_candidate(corpus, record, buffer, idx, ordinal, config, rng)
        if isinstance(outcome, dict):
            warnings.append(outcome)
        else:
            samples.append(outcome)
    return samples, warnings


def _augment_candidate(
    corpus: Corpus,
    record: UtteranceRecord,
    buffer: AudioBuffer,
    idx: int,
    ordinal: int,
    config: AugConfig,
    rng: np.random.Generator,
):
    candidate = record.phones[idx]
    cand_span = to_span(candidate, buffer.sample_rate)
    x_c = extract_segment(buffer, candidate)

    result = None
    donor_ref = None
    choice = None
    failure = ("no_donor_occurrence", f"no usable donor found for {candidate.phone}")
    for _ in range(config.donor_retries):
        donor_phone = pick_donor(config.close, candidate.phone, rng, config.donor_weighting)
        if donor_phone is None:
            # deterministic absence; retrying cannot help
            return _warning(
                record.utt_id,
                "no_close_donor",
                f"phone {candidate.phone} has no close-dictionary entry",
            )
        occurrence = find_donor_occurrence(corpus, donor_phone, record.utt_id, rng)
        if occurrence is None:
            failure = ("no_donor_occurrence", f"no good occurrence of {donor_phone}")
            continue
        donor_utt, donor_interval = occurrence
        donor_buffer = read_wav(corpus.utterances[donor_utt].wav_path)
        if donor_buffer.sample_rate != buffer.sample_rate:
            failure = (
                "sample_rate_mismatch",
                f"{donor_utt} is {donor_buffer.sample_rate} Hz, {record.utt_id} "
                f"is {buffer.sample_rate} Hz",
            )
            continue
        donor_span = to_span(donor_interval, donor_buffer.sample_rate)
        if len(donor_span) < config.min_segment_frames:
            failure = (
                "short_donor_segment",
                f"{donor_utt}/{donor_phone} has {len(donor_span)} samples",
            )
            continue
        x_d = extract_segment(donor_buffer, donor_interval)
        choice = _pick_mask(config.mask_pool, rng)
        try:
            result = speech_blend(
                x_c, x_d, GOOD_SCORE, choice.template, choice.params, config.label_mode
            )
        except SilentDonorError:
            failure = ("silent_donor", f"{donor_utt}/{donor_phone} has zero energy")
            continue
        except SegmentTooShortError as exc:
            failure = ("short_donor_segment", str(exc))
            continue
        donor_ref = SegmentRef(donor_utt, donor_phone, donor_span)
        break
    if result is None:
        return _warning(record.utt_id, *failure)

    new_utt_id = f"{record.utt_id}__aug{ordinal}"
    spliced, shift = splice(buffer, cand_span, result.audio)
    shift_seconds = shift / buffer.sample_rate
    updated = []
    for j, interval in enumerate(record.phones):
        if j == idx:
            updated.append(
                PhonemeInterval(
                    new_utt_id,
                    interval.channel,
                    interval.start,
                    interval.duration + shift_seconds,
                    interval.phone,
                    result.label,
                )
            )
        elif j > idx:
            updated.append(
                PhonemeInterval(
                    new_utt_id,
                    interval.channel,
                    interval.start + shift_seconds,
                    interval.duration,
                    interval.phone,
                    interval.score,
                )
            )
        else:
            updated.append(
                PhonemeInterval(
                    new_utt_id,
                    interval.channel,
                    interval.start,
                    interval.duration,
                    interval.phone,
                    interval.score,
                )
            )

    config.output_dir.mkdir(parents=True, exist_ok=True)
    wav_name = f"{new_utt_id}.wav"
    write_wav(spliced, config.output_dir / wav_name)
    return AugmentedSample(
        new_utt_id=new_utt_id,
        wav_path=wav_name,
        label=result.label,
        candidate=SegmentRef(record.utt_id, candidate.phone, cand_span),
        donor=donor_ref,
        mask=MaskSummary(
            template=result.mask.template,
            params=dict(result.mask.params),
            t_frames=len(x_c),
            l_frames=len(donor_ref.span),
            mu=result.mask.mu,
            regions=result.mask.regions,
            widths=result.mask.widths,
            label_mode=config.label_mode,
            regional_labels=result.regional_labels,
        ),
        shift=shift,
        updated_intervals=tuple(updated),
    )


def sample_to_json(sample: AugmentedSample) -> dict:
    """Stable-key-order JSON form of a sample; timestamps at 6 decimals."""
    return {
        "new_utt_id": sample.new_utt_id,
        "wav_path": sample.wav_path,
        "label": sample.label,
        "candidate": {
            "utt_id": sample.candidate.utt_id,
            "phone": sample.candidate.phone,
            "span": [sample.candidate.span.start, sample.candidate.span.end],
        },
        "donor": {
            "utt_id": sample.donor.utt_id,
            "phone": sample.donor.phone,
            "span": [sample.donor.span.start, sample.donor.span.end],
        },
        "mask": {
            "template": sample.mask.template,
            "params": {key: sample.mask.params[key] for key in sorted(sample.mask.params)},
            "t_frames": sample.mask.t_frames,
            "l_frames": sample.mask.l_frames,
            "mu": sample.mask.mu,
            "regions": sample.mask.regions,
            "widths": list(sample.mask.widths),
            "label_mode": sample.mask.label_mode,
            "regional_labels": list(sample.mask.regional_labels),
        },
        "shift": sample.shift,
        "updated_intervals": [
            {
                "channel": iv.channel,
                "start": round(iv.start, 6),
                "duration": round(iv.duration, 6),
                "phone": iv.phone,
                "score": iv.score,
            }
            for iv in sample.updated_intervals
        ],
    }


def validate_sample_dict(obj: dict, line_no: int = 0) -> None:
    """Schema check for one output-manifest record; raises ValueError."""

    def fail(message: str):
        raise ValueError(f"record {line_no}: {message}" if line_no else message)

    for key in (
        "new_utt_id",
        "wav_path",
        "label",
        "candidate",
        "donor",
        "mask",
        "shift",
        "updated_intervals",
    ):
        if key not in obj:
            fail(f"missing key {key!r}")
    if obj["label"] not in (0, 1):
        fail(f"label must be 0 or 1, got {obj['label']!r}")
    for side in ("candidate", "donor"):
        ref = obj[side]
        if set(ref) != {"utt_id", "phone", "span"}:
            fail(f"{side} must have utt_id/phone/span")
        span = ref["span"]
        if not (isinstance(span, list) and len(span) == 2 and 0 <= span[0] < span[1]):
            fail(f"{side} span must be [start, end) with start < end")
    mask = obj["mask"]
    for key in (
        "template",
        "params",
        "t_frames",
        "l_frames",
        "mu",
        "regions",
        "widths",
        "label_mode",
        "regional_labels",
    ):
        if key not in mask:
            fail(f"mask missing key {key!r}")
    if mask["regions"] not in (1, 3):
        fail(f"mask regions must be 1 or 3, got {mask['regions']!r}")
    if len(mask["widths"]) != mask["regions"]:
        fail("mask widths length must equal regions")
    if not isinstance(obj["shift"], int):
        fail("shift must be an integer sample count")
    previous_end = None
    for iv in obj["updated_intervals"]:
        for key in ("channel", "start", "duration", "phone", "score"):
            if key not in iv:
                fail(f"updated interval missing key {key!r}")
        if iv["duration"] <= 0:
            fail("updated interval has non-positive duration")
        if previous_end is not None and previous_end - iv["start"] > 1e-6:
            fail("updated intervals overlap")
        previous_end = iv["start"] + iv["duration"]


@dataclass(frozen=True)
class RunSummary:
    """Aggregate counts and artifact paths of one run."""

    n_utterances: int
    samples: tuple[AugmentedSample, ...]
    produced_by_label: Mapping[int, int]
    produced_by_template: Mapping[str, int]
    skipped_by_reason: Mapping[str, int]
    manifest_path: Path
    warnings_path: Path

    @property
    def n_produced(self) -> int:
        return len(self.samples)


def run(config: AugConfig, corpus: Corpus) -> RunSummary:
    """Process every utterance and write augmented WAVs plus manifests.

    Output bytes are a pure function of (config, corpus): per-utterance RNGs
    make the result identical for any worker count and scheduling order.
    I/O and data errors are aggregated per utterance: the remaining
    utterances still run and their outputs are written, then a RunError
    reporting every failure is raised.
    """
    config.output_dir.mkdir(parents=True, exist_ok=True)
    utt_ids = sorted(corpus.utterances)

    def task(utt_id: str):
        rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, utt_id)))
        try:
            return augment_utterance(corpus, utt_id, config, rng), None
        except (OSError, ValueError) as exc:
            return ([], []), exc

    if config.workers == 1:
        results = [task(utt_id) for utt_id in utt_ids]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(task, utt_ids))

    failures = [
        (utt_id, exc) for utt_id, (_, exc) in zip(utt_ids, results) if exc is not None
    ]
    samples = [sample for (sample_list, _), _ in results for sample in sample_list]
    warnings = [warning for (_, warning_list), _ in results for warning in warning_list]

    manifest_path = config.output_dir / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(json.dumps(sample_to_json(sample)) + "\n")
    warnings_path = config.output_dir / WARNINGS_NAME
    with open(warnings_path, "w", encoding="utf-8") as handle:
        for warning in warnings:
            handle.write(json.dumps(warning) + "\n")

    by_label: dict[int, int] = {0: 0, 1: 0}
    by_template: dict[str, int] = {}
    for sample in samples:
        by_label[sample.label] += 1
        by_template[sample.mask.template] = by_template.get(sample.mask.template, 0) + 1
    by_reason: dict[str, int] = {}
    for warning in warnings:
        by_reason[warning["reason"]] = by_reason.get(warning["reason"], 0) + 1

    if failures:
        raise RunError(failures)
    return RunSummary(
        n_utterances=len(utt_ids),
        samples=tuple(samples),
        produced_by_label=by_label,
        produced_by_template=by_template,
        skipped_by_reason=by_reason,
        manifest_path=manifest_path,
        warnings_path=warnings_path,
    )
