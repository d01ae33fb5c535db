"""Blend candidate and donor phoneme frames under a mask and label the result.

The output label is 0 for a mispronounced-or-missing phoneme and 1 for an
accented/aberrant unit; 2 (good pronunciation) is never produced by
augmentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .audio import AudioBuffer, normalize_energy, rms
from .mask import CUTPASTE, MaskProperty, MixCurve, generate_mask, get_property

LABEL_MISPRONOUNCED = 0
LABEL_ACCENTED = 1
GOOD_SCORE = 2

LAMBDA_THRESHOLD = 0.25  # below this a region/frame counts as donor-dominated

FRAME_WEIGHTED = "frame_weighted"
REGION_FLOOR = "region_floor"
LABEL_MODES = (FRAME_WEIGHTED, REGION_FLOOR)


@dataclass(frozen=True)
class BlendResult:
    """Blended window audio plus label and full provenance."""

    audio: AudioBuffer
    label: int
    frame_lambdas: MixCurve
    regional_labels: tuple[int, ...]
    mode: str
    mask: MaskProperty

    def __post_init__(self):
        if self.label not in (LABEL_MISPRONOUNCED, LABEL_ACCENTED):
            raise ValueError(f"label must be 0 or 1, got {self.label}")
        if len(self.audio) != len(self.frame_lambdas):
            raise ValueError(
                f"audio/curve length mismatch: {len(self.audio)} vs {len(self.frame_lambdas)}"
            )


def blend(x_c: AudioBuffer, x_d: AudioBuffer, prop: MaskProperty) -> AudioBuffer:
    """Mix the two segments frame by frame: out = lam*x_C + (1-lam)*x_D.

    x_d must already be energy-normalized to x_c. The mask window is the
    first ``prop.window`` frames of both segments; regions come out
    concatenated in order. cutpaste returns the donor wholesale.
    """
    if x_c.sample_rate != x_d.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: candidate {x_c.sample_rate} Hz vs donor {x_d.sample_rate} Hz"
        )
    window = prop.window
    if prop.template == CUTPASTE:
        if len(x_d) < window:
            raise ValueError(f"donor of {len(x_d)} frames shorter than mask window {window}")
        return AudioBuffer(x_d.samples[:window], x_d.sample_rate)
    if len(x_c) < window or len(x_d) < window:
        raise ValueError(
            f"segments of {len(x_c)}/{len(x_d)} frames shorter than mask window {window}"
        )
    _, curve = generate_mask(prop)
    lam = curve.values
    mixed = lam * x_c.samples[:window] + (1.0 - lam) * x_d.samples[:window]
    return AudioBuffer(mixed, x_c.sample_rate)


def regional_indicators(prop: MaskProperty, curve: MixCurve) -> tuple[int, ...]:
    """Per-region labels: 1 when the region's mean mixing factor is >= 0.25."""
    out = []
    offset = 0
    for width in prop.widths:
        mean_lam = float(curve.values[offset : offset + width].mean())
        out.append(1 if mean_lam >= LAMBDA_THRESHOLD else 0)
        offset += width
    return tuple(out)


def label(
    prop: MaskProperty,
    curve: MixCurve,
    y_c: int = GOOD_SCORE,
    mode: str = FRAME_WEIGHTED,
) -> int:
    """Compute the augmented label from the mixing curve.

    frame_weighted (default): a frame counts as candidate-dominated when its
    lambda is >= 0.25; the label is 1 when at least half the window frames
    are. Width-aware, so wide passthrough regions are not outvoted by narrow
    blocked ones.

    region_floor: per-region threshold at 0.25, then floor of the region
    average. Region widths do not enter, so e.g. cutmix ([1,0,1]) floors to
    0 in this mode while frame_weighted yields 1.
    """
    if mode == FRAME_WEIGHTED:
        indicators = curve.values >= LAMBDA_THRESHOLD
        return LABEL_ACCENTED if float(indicators.mean()) >= 0.5 else LABEL_MISPRONOUNCED
    if mode == REGION_FLOOR:
        thetas = regional_indicators(prop, curve)
        return int(math.floor(sum(thetas) / len(thetas)))
    raise ValueError(f"unknown label mode {mode!r}")


def analytic_score(prop: MaskProperty, curve: MixCurve, y_c: int = GOOD_SCORE) -> float:
    """Experimental real-valued score: region average of (mean lambda) * y_c.

    This is the pre-floor regional average; callers discretize it themselves.
    Not used by the default pipeline.
    """
    total = 0.0
    offset = 0
    for width in prop.widths:
        total += float(curve.values[offset : offset + width].mean()) * y_c
        offset += width
    return total / len(prop.widths)


def speech_blend(
    x_c: AudioBuffer,
    x_d: AudioBuffer,
    y_c: int = GOOD_SCORE,
    template="smooth_overlay",
    params: Mapping[str, float] | None = None,
    mode: str = FRAME_WEIGHTED,
) -> BlendResult:
    """Full blending step: normalize donor energy, build mask, blend, label.

    The donor is RMS-normalized to the candidate once, on the full segment,
    before masking; SilentDonorError propagates for zero-energy donors so
    the pipeline can skip the occurrence.
    """
    donor = normalize_energy(x_d, rms(x_c))
    prop = get_property(template, len(x_c), len(donor), params)
    _, curve = generate_mask(prop)
    audio = blend(x_c, donor, prop)
    y = label(prop, curve, y_c, mode)
    return BlendResult(
        audio=audio,
        label=y,
        frame_lambdas=curve,
        regional_labels=regional_indicators(prop, curve),
        mode=mode,
        mask=prop,
    )
