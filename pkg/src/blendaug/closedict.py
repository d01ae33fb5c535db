"""Close phoneme pair dictionary: weighted donor selection, distant draws.

The dictionary maps a candidate phone to confusable donor phones with
confusion weights; construction of the dictionary itself is an offline
analysis and out of scope, this module loads its TSV artifact.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

CONFUSION_WEIGHTED = "confusion_weighted"
UNIFORM = "uniform"
DONOR_WEIGHTINGS = (CONFUSION_WEIGHTED, UNIFORM)


class DictFormatError(ValueError):
    """Malformed dictionary TSV; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class CloseDict:
    """Candidate phone -> weighted donor list, over a fixed phone inventory."""

    entries: Mapping[str, tuple[tuple[str, float], ...]]
    inventory: frozenset[str]

    def __post_init__(self):
        for candidate, donors in self.entries.items():
            if candidate not in self.inventory:
                raise ValueError(f"candidate phone {candidate!r} not in inventory")
            for donor, weight in donors:
                if donor == candidate:
                    raise ValueError(f"self-pair {candidate!r} -> {donor!r}")
                if donor not in self.inventory:
                    raise ValueError(f"donor phone {donor!r} not in inventory")
                if not 0.0 < weight <= 1.0:
                    raise ValueError(f"weight for {candidate!r}->{donor!r} outside (0,1]: {weight}")

    def donors(self, candidate: str) -> tuple[tuple[str, float], ...]:
        return self.entries.get(candidate, ())

    def close_set(self, candidate: str) -> frozenset[str]:
        return frozenset(d for d, _ in self.donors(candidate))


def default_inventory() -> frozenset[str]:
    """The shipped 42-phone inventory (39 ARPAbet phones + SIL/SPN/UNK)."""
    return load_inventory(resources.files("blendaug") / "data" / "phones.txt")


def starter_dict_path() -> Path:
    """Path of the shipped starter dictionary (five documented pairs, both directions)."""
    return Path(str(resources.files("blendaug") / "data" / "close_pairs.tsv"))


def load_inventory(path) -> frozenset[str]:
    """Read a phone inventory file: one phone per line, ``#`` comments allowed."""
    phones = []
    with open(str(path), "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            token = line.strip()
            if not token or token.startswith("#"):
                continue
            if any(ch.isspace() for ch in token):
                raise DictFormatError(line_no, f"phone label contains whitespace: {token!r}")
            phones.append(token)
    if not phones:
        raise ValueError(f"empty phone inventory: {path}")
    return frozenset(phones)


def load_dict(path, inventory: frozenset[str] | None = None) -> CloseDict:
    """Load a close-pair TSV: lines ``candidate TAB donor TAB weight``.

    Rejects self-pairs, duplicate (candidate, donor) pairs, weights outside
    (0, 1], and phones missing from the inventory, all with line numbers.
    """
    if inventory is None:
        inventory = default_inventory()
    entries: dict[str, list[tuple[str, float]]] = {}
    seen: set[tuple[str, str]] = set()
    with open(str(path), "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            fields = stripped.split("\t")
            if len(fields) != 3:
                raise DictFormatError(line_no, f"expected 3 tab-separated fields, got {len(fields)}")
            candidate, donor, weight_text = (f.strip() for f in fields)
            try:
                weight = float(weight_text)
            except ValueError:
                raise DictFormatError(line_no, f"non-numeric weight {weight_text!r}") from None
            if candidate == donor:
                raise DictFormatError(line_no, f"self-pair {candidate!r} -> {donor!r}")
            for phone in (candidate, donor):
                if phone not in inventory:
                    raise DictFormatError(line_no, f"unknown phone label {phone!r}")
            if not 0.0 < weight <= 1.0:
                raise DictFormatError(line_no, f"weight outside (0,1]: {weight}")
            if (candidate, donor) in seen:
                raise DictFormatError(line_no, f"duplicate pair {candidate!r} -> {donor!r}")
            seen.add((candidate, donor))
            entries.setdefault(candidate, []).append((donor, weight))
    return CloseDict(
        entries={c: tuple(ds) for c, ds in entries.items()},
        inventory=frozenset(inventory),
    )


def pick_donor(
    close: CloseDict,
    candidate: str,
    rng: np.random.Generator,
    weighting: str = CONFUSION_WEIGHTED,
) -> str | None:
    """Draw a donor phone for the candidate, or None when it has no entries.

    confusion_weighted draws proportionally to the confusion weights
    (renormalized per candidate); uniform ignores them.
    """
    donors = close.donors(candidate)
    if not donors:
        return None
    if weighting == UNIFORM:
        return donors[int(rng.integers(len(donors)))][0]
    if weighting != CONFUSION_WEIGHTED:
        raise ValueError(f"unknown donor weighting {weighting!r}")
    weights = np.array([w for _, w in donors], dtype=np.float64)
    probabilities = weights / weights.sum()
    return donors[int(rng.choice(len(donors), p=probabilities))][0]


def pick_distant(close: CloseDict, candidate: str, rng: np.random.Generator) -> str:
    """Uniform draw from the inventory minus the candidate and its close set."""
    eligible = sorted(close.inventory - {candidate} - close.close_set(candidate))
    if not eligible:
        raise ValueError(f"no distant phone available for {candidate!r}")
    return eligible[int(rng.integers(len(eligible)))]
