"""GOP feature computation over posterior matrices, plus the text-level and
GOP-level baseline augmenters.

A GOP vector is 84-dimensional: per-phone log posterior (LPP) over the 42
phone inventory, then the log posterior ratio (LPR) of the canonical phone
against each inventory phone, so the canonical LPR slot is exactly 0.
Producing the posteriors (the acoustic model) is out of scope; they are
consumed as CSV files.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .blender import GOOD_SCORE, LABEL_ACCENTED, LABEL_MISPRONOUNCED
from .closedict import CONFUSION_WEIGHTED, CloseDict, pick_distant, pick_donor

PROB_FLOOR = 1e-10  # applied before the log; below any plausible posterior resolution
ROW_SUM_TOLERANCE = 1e-4
GOP_LAYOUT = "lpp42+lpr42/v1"


class PosteriorFormatError(ValueError):
    """Malformed posterior CSV; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class EmptyBankError(LookupError):
    """The chosen donor phone has no vectors in the bank."""


@dataclass(frozen=True)
class PosteriorMatrix:
    """Per-frame phone posterior probabilities, one column per inventory phone."""

    phones: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64, copy=True)
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "phones", tuple(self.phones))
        if len(set(self.phones)) != len(self.phones):
            raise ValueError("duplicate phone labels in posterior header")
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValueError(f"need a (frames, phones) matrix with >= 1 frame, got {rows.shape}")
        if rows.shape[1] != len(self.phones):
            raise ValueError(f"{rows.shape[1]} columns for {len(self.phones)} phone labels")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise ValueError("posterior probabilities must lie in [0,1]")
        sums = rows.sum(axis=1)
        worst = int(np.argmax(np.abs(sums - 1.0)))
        if abs(sums[worst] - 1.0) > ROW_SUM_TOLERANCE:
            raise ValueError(f"frame {worst} posteriors sum to {sums[worst]:.6f}, not 1")

    @property
    def frames(self) -> int:
        return self.rows.shape[0]

    def column(self, phone: str) -> int:
        try:
            return self.phones.index(phone)
        except ValueError:
            raise KeyError(f"unknown phone {phone!r} in posterior matrix") from None


@dataclass(frozen=True)
class GopVector:
    """84-dim feature: 42 LPP values then 42 canonical-anchored LPR values."""

    values: np.ndarray
    canonical: str

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if values.shape != (84,):
            raise ValueError(f"GOP vector must have exactly 84 values, got {values.shape}")


class GopBank:
    """Per-phone bags of GOP vectors collected from good pronunciations."""

    def __init__(self):
        self._bags: dict[str, list[GopVector]] = {}

    def add(self, vector: GopVector) -> None:
        self._bags.setdefault(vector.canonical, []).append(vector)

    def vectors_for(self, phone: str) -> tuple[GopVector, ...]:
        return tuple(self._bags.get(phone, ()))

    def phones(self) -> tuple[str, ...]:
        return tuple(sorted(self._bags))

    def __len__(self) -> int:
        return sum(len(bag) for bag in self._bags.values())


def read_posteriors(path) -> PosteriorMatrix:
    """Read a posterior CSV: header row of phone labels, one row per frame."""
    with open(str(path), "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise PosteriorFormatError(1, "empty posterior file") from None
        phones = tuple(label.strip() for label in header)
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(phones):
                raise PosteriorFormatError(
                    line_no, f"expected {len(phones)} columns, got {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise PosteriorFormatError(line_no, "non-numeric probability") from None
    if not rows:
        raise PosteriorFormatError(2, "posterior file has no frame rows")
    return PosteriorMatrix(phones, np.array(rows, dtype=np.float64))


def _resolve_span(posteriors: PosteriorMatrix, span: tuple[int, int] | None) -> tuple[int, int]:
    if span is None:
        return 0, posteriors.frames
    start, end = span
    if not 0 <= start < end <= posteriors.frames:
        raise ValueError(
            f"frame span [{start}, {end}) invalid for {posteriors.frames} frames"
        )
    return start, end


def lpp(posteriors: PosteriorMatrix, phone: str, span: tuple[int, int] | None = None) -> float:
    """Log phone posterior: mean over the span of ln p(phone|frame).

    Probabilities are floored at 1e-10 before the log so sparse posteriors
    never produce -inf.
    """
    start, end = _resolve_span(posteriors, span)
    column = posteriors.rows[start:end, posteriors.column(phone)]
    return float(np.mean(np.log(np.maximum(column, PROB_FLOOR))))


def lpr(
    posteriors: PosteriorMatrix,
    p_j: str,
    p_i: str,
    span: tuple[int, int] | None = None,
) -> float:
    """Log posterior ratio of p_j against p_i, frame-averaged over the span."""
    return lpp(posteriors, p_j, span) - lpp(posteriors, p_i, span)


def gop_vector(
    posteriors: PosteriorMatrix, canonical: str, span: tuple[int, int] | None = None
) -> GopVector:
    """84-dim GOP feature for one phone occurrence.

    Dims [0..41] are LPP per inventory phone in matrix order; dims [42..83]
    are LPR(canonical | phone_k), so the canonical slot is exactly 0.
    """
    if len(posteriors.phones) != 42:
        raise ValueError(
            f"GOP features need the 42-phone inventory, matrix has {len(posteriors.phones)}"
        )
    start, end = _resolve_span(posteriors, span)
    block = posteriors.rows[start:end, :]
    lpps = np.mean(np.log(np.maximum(block, PROB_FLOOR)), axis=0)
    lprs = lpps[posteriors.column(canonical)] - lpps
    return GopVector(np.concatenate([lpps, lprs]), canonical)


@dataclass(frozen=True)
class TextAugmentation:
    """Result of one text-level swap: the new sequence plus provenance."""

    phones: tuple[str, ...]
    labels: tuple[int, ...]
    position: int
    original: str
    donor: str
    swap_label: int
    is_close: bool


def text_augment(
    phones,
    labels,
    close: CloseDict,
    rng: np.random.Generator,
    close_ratio: float = 0.5,
    donor_weighting: str = CONFUSION_WEIGHTED,
) -> TextAugmentation:
    """Swap one good-scored phone in a canonical sequence.

    With probability close_ratio the swap uses a close donor (label 1,
    accented), otherwise a distant donor (label 0, mispronounced). The branch
    is drawn first; the position is then uniform over good phones eligible
    for that branch. All other labels are unchanged.
    """
    phones = tuple(phones)
    labels = tuple(labels)
    if len(phones) != len(labels):
        raise ValueError(f"{len(phones)} phones with {len(labels)} labels")
    if not 0.0 <= close_ratio <= 1.0:
        raise ValueError(f"close_ratio must be in [0,1], got {close_ratio}")

    use_close = bool(rng.random() < close_ratio)
    if use_close:
        eligible = [
            i for i, (p, y) in enumerate(zip(phones, labels))
            if y == GOOD_SCORE and close.donors(p)
        ]
    else:
        eligible = [
            i for i, (p, y) in enumerate(zip(phones, labels))
            if y == GOOD_SCORE and (close.inventory - {p} - close.close_set(p))
        ]
    if not eligible:
        raise ValueError("no augmentation candidate in sequence")
    position = eligible[int(rng.integers(len(eligible)))]
    candidate = phones[position]

    if use_close:
        donor = pick_donor(close, candidate, rng, donor_weighting)
        swap_label = LABEL_ACCENTED
    else:
        donor = pick_distant(close, candidate, rng)
        swap_label = LABEL_MISPRONOUNCED

    new_phones = phones[:position] + (donor,) + phones[position + 1 :]
    new_labels = labels[:position] + (swap_label,) + labels[position + 1 :]
    return TextAugmentation(
        phones=new_phones,
        labels=new_labels,
        position=position,
        original=candidate,
        donor=donor,
        swap_label=swap_label,
        is_close=use_close,
    )


def gop_augment(
    bank: GopBank,
    candidate_vec: GopVector,
    candidate_phone: str,
    close: CloseDict,
    rng: np.random.Generator,
    close_ratio: float = 0.5,
    donor_weighting: str = CONFUSION_WEIGHTED,
) -> tuple[GopVector, int]:
    """Replace a candidate's GOP vector with one drawn from a donor's bag.

    Donor choice and labels follow the text-augmentation scheme: close donor
    -> label 1, distant donor -> label 0. Raises EmptyBankError when the
    chosen donor has no vectors (callers retry with a fresh draw).
    """
    use_close = bool(rng.random() < close_ratio)
    if use_close:
        donor = pick_donor(close, candidate_phone, rng, donor_weighting)
        if donor is None:
            raise ValueError(f"no close donor entry for {candidate_phone!r}")
        swap_label = LABEL_ACCENTED
    else:
        donor = pick_distant(close, candidate_phone, rng)
        swap_label = LABEL_MISPRONOUNCED
    bag = bank.vectors_for(donor)
    if not bag:
        raise EmptyBankError(f"empty bank for donor phone {donor!r}")
    return bag[int(rng.integers(len(bag)))], swap_label


def gop_augment_with_retries(
    bank: GopBank,
    candidate_vec: GopVector,
    candidate_phone: str,
    close: CloseDict,
    rng: np.random.Generator,
    close_ratio: float = 0.5,
    donor_weighting: str = CONFUSION_WEIGHTED,
    retries: int = 5,
) -> tuple[GopVector, int]:
    """gop_augment with up to ``retries`` fresh donor draws on empty banks."""
    last_error: Exception | None = None
    for _ in range(max(1, retries)):
        try:
            return gop_augment(
                bank, candidate_vec, candidate_phone, close, rng, close_ratio, donor_weighting
            )
        except EmptyBankError as exc:
            last_error = exc
    raise EmptyBankError(f"donor bank draws exhausted for {candidate_phone!r}: {last_error}")
