"""Mask templates for phoneme blending.

A mask property bundles the blend-window center point, region count, region
widths, and per-region mixing factors. The mixing factor weights the
candidate signal; 1-lambda weights the donor, and lambda = 0 blocks the
candidate entirely.

Shapes (N = min(T, L), the start-aligned blend window; mu = N // 2):

* smooth_overlay          R=1, W=[N], constant lam0.
* cutmix                  R=3, W=[ceil(3N/8), floor(N/4), rest], lambdas [1, 0, 1]:
                          hard replacement of the middle quarter.
* smooth_concatenation    R=3, candidate head, linear 1->0 crossfade over a
                          configurable fraction (default 1/5), donor tail.
* smooth_gaussian_overlay R=1, per-frame lam(t) = 1 - depth*exp(-(t-mu)^2/(2 sigma^2)),
                          defaults depth=0.5, sigma=N/6: dips toward the donor
                          at the phoneme center, fading at the edges.
* cutpaste                R=1, W=[L], constant 0: wholesale replacement by the
                          energy-normalized donor; output length L, not N.

cutpaste is the baseline and sits outside the random template pool (ids 1-4).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

SMOOTH_OVERLAY = "smooth_overlay"
CUTMIX = "cutmix"
SMOOTH_CONCATENATION = "smooth_concatenation"
SMOOTH_GAUSSIAN_OVERLAY = "smooth_gaussian_overlay"
CUTPASTE = "cutpaste"

# Numeric template ids; cutpaste deliberately has none.
TEMPLATE_IDS = {
    1: SMOOTH_OVERLAY,
    2: CUTMIX,
    3: SMOOTH_CONCATENATION,
    4: SMOOTH_GAUSSIAN_OVERLAY,
}
RANDOM_POOL = tuple(TEMPLATE_IDS[i] for i in sorted(TEMPLATE_IDS))
ALL_TEMPLATES = RANDOM_POOL + (CUTPASTE,)

MIN_SEGMENT_FRAMES = 8  # below this, crossfades and Gaussian widths degenerate

DEFAULT_PARAMS = {
    SMOOTH_OVERLAY: {"lam0": 0.5},
    CUTMIX: {},
    SMOOTH_CONCATENATION: {"crossfade_frac": 0.2},
    SMOOTH_GAUSSIAN_OVERLAY: {"depth": 0.5, "sigma_frac": 6.0},
    CUTPASTE: {},
}


class SegmentTooShortError(ValueError):
    """Candidate or donor segment is below the minimum viable blend window."""


@dataclass(frozen=True)
class ConstRegion:
    """Constant mixing factor over the region."""

    lam: float

    def __post_init__(self):
        _check_lambda(self.lam)


@dataclass(frozen=True)
class RampRegion:
    """Linear interpolation from lam_from at the first frame to lam_to at the last."""

    lam_from: float
    lam_to: float

    def __post_init__(self):
        _check_lambda(self.lam_from)
        _check_lambda(self.lam_to)


@dataclass(frozen=True)
class GaussianRegion:
    """Per-frame dip lam(t) = 1 - depth*exp(-(t-mu)^2/(2 sigma^2)), t over the window."""

    depth: float
    sigma: float

    def __post_init__(self):
        _check_lambda(self.depth)  # depth in [0,1] keeps lam(t) in [0,1]
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")


Region = Union[ConstRegion, RampRegion, GaussianRegion]


def _check_lambda(value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"mixing factor outside [0,1]: {value}")


@dataclass(frozen=True)
class MaskProperty:
    """Template id plus center point, region count, widths, and region factors."""

    template: str
    mu: int
    regions: int
    widths: tuple[int, ...]
    lambdas: tuple[Region, ...]
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.template not in ALL_TEMPLATES:
            raise ValueError(f"unknown template {self.template!r}")
        if len(self.widths) != self.regions or len(self.lambdas) != self.regions:
            raise ValueError(
                f"widths/lambdas length must equal regions={self.regions}, "
                f"got {len(self.widths)}/{len(self.lambdas)}"
            )
        if any(w < 1 for w in self.widths):
            raise ValueError(f"every region width must be >= 1, got {self.widths}")

    @property
    def window(self) -> int:
        """Total frame count covered by the mask."""
        return sum(self.widths)


@dataclass(frozen=True)
class MixCurve:
    """Per-frame mixing factors realized from (widths, region factors)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("curve must be a non-empty 1-D sequence")
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("curve values must lie in [0,1]")

    def __len__(self) -> int:
        return len(self.values)


def resolve_template(template) -> str:
    """Accept a numeric template id (1-4) or a template name."""
    if isinstance(template, (int, np.integer)):
        try:
            return TEMPLATE_IDS[int(template)]
        except KeyError:
            raise ValueError(f"template id must be in 1..4, got {template}") from None
    if template in ALL_TEMPLATES:
        return template
    raise ValueError(f"unknown template {template!r}")


def get_property(
    template,
    t_frames: int,
    l_frames: int,
    params: Mapping[str, float] | None = None,
) -> MaskProperty:
    """Build the mask property for candidate length T and donor length L.

    The blend window is the first N = min(T, L) frames of both segments,
    start-aligned; cutpaste instead covers the full donor (window L).
    """
    name = resolve_template(template)
    if t_frames < MIN_SEGMENT_FRAMES or l_frames < MIN_SEGMENT_FRAMES:
        raise SegmentTooShortError(
            f"segments of {t_frames}/{l_frames} frames are below the "
            f"{MIN_SEGMENT_FRAMES}-frame minimum blend window"
        )
    merged = dict(DEFAULT_PARAMS[name])
    for key, value in (params or {}).items():
        if key not in merged:
            raise ValueError(f"unknown parameter {key!r} for template {name}")
        merged[key] = float(value)

    n = min(t_frames, l_frames)
    mu = n // 2

    if name == SMOOTH_OVERLAY:
        return MaskProperty(name, mu, 1, (n,), (ConstRegion(merged["lam0"]),), merged)

    if name == CUTMIX:
        w1 = math.ceil(3 * n / 8)
        w2 = n // 4
        widths = (w1, w2, n - w1 - w2)
        factors = (ConstRegion(1.0), ConstRegion(0.0), ConstRegion(1.0))
        return MaskProperty(name, mu, 3, widths, factors, merged)

    if name == SMOOTH_CONCATENATION:
        frac = merged["crossfade_frac"]
        if not 0.0 < frac < 1.0:
            raise ValueError(f"crossfade_frac must be in (0,1), got {frac}")
        head = math.ceil(n * (1.0 - frac) / 2.0)
        fade = math.floor(n * frac)
        tail = n - head - fade
        if min(head, fade, tail) < 1:
            raise ValueError(
                f"crossfade_frac={frac} degenerates at window {n} (widths {head},{fade},{tail})"
            )
        widths = (head, fade, tail)
        factors = (ConstRegion(1.0), RampRegion(1.0, 0.0), ConstRegion(0.0))
        return MaskProperty(name, mu, 3, widths, factors, merged)

    if name == SMOOTH_GAUSSIAN_OVERLAY:
        if merged["sigma_frac"] <= 0:
            raise ValueError(f"sigma_frac must be positive, got {merged['sigma_frac']}")
        sigma = n / merged["sigma_frac"]
        return MaskProperty(name, mu, 1, (n,), (GaussianRegion(merged["depth"], sigma),), merged)

    # cutpaste: full donor replacement, window L
    return MaskProperty(name, mu, 1, (l_frames,), (ConstRegion(0.0),), merged)


def generate_mask(prop: MaskProperty) -> tuple[tuple[int, ...], MixCurve]:
    """Expand region factors into the per-frame mixing curve.

    Constants repeat; ramps interpolate linearly with both endpoints
    included; the Gaussian dip is evaluated at absolute frame positions so
    it is always centered on the property's mu.
    """
    parts = []
    offset = 0
    for width, region in zip(prop.widths, prop.lambdas):
        if isinstance(region, ConstRegion):
            parts.append(np.full(width, region.lam, dtype=np.float64))
        elif isinstance(region, RampRegion):
            parts.append(np.linspace(region.lam_from, region.lam_to, width))
        else:
            t = np.arange(offset, offset + width, dtype=np.float64)
            parts.append(
                1.0 - region.depth * np.exp(-((t - prop.mu) ** 2) / (2.0 * region.sigma**2))
            )
        offset += width
    return prop.widths, MixCurve(np.concatenate(parts))


def dump_mask(prop: MaskProperty) -> str:
    """Render the per-frame curve as CSV text: header ``frame,lambda``."""
    _, curve = generate_mask(prop)
    out = io.StringIO()
    out.write("frame,lambda\n")
    for index, value in enumerate(curve.values):
        out.write(f"{index},{value:.9g}\n")
    return out.getvalue()
