import math

import numpy as np
import pytest

from blendaug.mask import (
    ALL_TEMPLATES,
    CUTMIX,
    CUTPASTE,
    RANDOM_POOL,
    SMOOTH_CONCATENATION,
    SMOOTH_GAUSSIAN_OVERLAY,
    SMOOTH_OVERLAY,
    ConstRegion,
    GaussianRegion,
    MaskProperty,
    MixCurve,
    RampRegion,
    SegmentTooShortError,
    dump_mask,
    generate_mask,
    get_property,
    resolve_template,
)


class TestGetProperty:
    def test_smooth_overlay_example(self):
        prop = get_property(1, 100, 60, {"lam0": 0.5})
        assert prop.template == SMOOTH_OVERLAY
        assert prop.mu == 30
        assert prop.regions == 1
        assert prop.widths == (60,)
        assert prop.lambdas == (ConstRegion(0.5),)

    def test_cutmix_example(self):
        prop = get_property(2, 80, 80)
        assert prop.widths == (30, 20, 30)  # ceil(3N/8), floor(N/4), rest
        assert prop.lambdas == (ConstRegion(1.0), ConstRegion(0.0), ConstRegion(1.0))
        assert prop.regions == 3

    def test_cutpaste_example(self):
        prop = get_property(CUTPASTE, 100, 60)
        assert prop.regions == 1
        assert prop.widths == (60,)
        assert prop.lambdas == (ConstRegion(0.0),)

    def test_cutpaste_window_is_donor_length(self):
        prop = get_property(CUTPASTE, 60, 100)
        assert prop.widths == (100,)

    def test_concatenation_shape(self):
        prop = get_property(3, 40, 40)
        head, fade, tail = prop.widths
        assert head == math.ceil(2 * 40 / 5)
        assert fade == 40 // 5
        assert tail == 40 - head - fade
        assert isinstance(prop.lambdas[1], RampRegion)
        assert prop.lambdas[1] == RampRegion(1.0, 0.0)

    def test_gaussian_shape(self):
        prop = get_property(4, 60, 60)
        region = prop.lambdas[0]
        assert isinstance(region, GaussianRegion)
        assert region.depth == 0.5
        assert region.sigma == pytest.approx(10.0)

    def test_too_short_segments(self):
        with pytest.raises(SegmentTooShortError):
            get_property(1, 7, 100)
        with pytest.raises(SegmentTooShortError):
            get_property(CUTPASTE, 100, 7)

    def test_unknown_template(self):
        with pytest.raises(ValueError, match="template"):
            get_property(5, 20, 20)
        with pytest.raises(ValueError, match="template"):
            get_property("bogus", 20, 20)

    def test_unknown_param(self):
        with pytest.raises(ValueError, match="unknown parameter"):
            get_property(1, 20, 20, {"sigma_frac": 3})

    def test_degenerate_crossfade(self):
        with pytest.raises(ValueError, match="crossfade"):
            get_property(3, 8, 8, {"crossfade_frac": 0.9})

    def test_resolve_template(self):
        assert resolve_template(1) == SMOOTH_OVERLAY
        assert resolve_template(CUTPASTE) == CUTPASTE
        with pytest.raises(ValueError):
            resolve_template(0)


class TestGenerateMask:
    def test_constant_expansion(self):
        prop = MaskProperty(SMOOTH_OVERLAY, 5, 1, (10,), (ConstRegion(0.5),))
        _, curve = generate_mask(prop)
        assert np.array_equal(curve.values, np.full(10, 0.5))

    def test_ramp_endpoints_included(self):
        prop = MaskProperty(
            SMOOTH_CONCATENATION, 2, 1, (5,), (RampRegion(1.0, 0.0),)
        )
        _, curve = generate_mask(prop)
        assert np.allclose(curve.values, [1.0, 0.75, 0.5, 0.25, 0.0], atol=1e-15)

    def test_gaussian_example(self):
        prop = get_property(4, 60, 60, {"depth": 0.5, "sigma_frac": 6.0})
        _, curve = generate_mask(prop)
        assert curve.values.min() == pytest.approx(0.5, abs=1e-12)
        assert int(curve.values.argmin()) == 30
        expected_first = 1.0 - 0.5 * math.exp(-(30.0**2) / (2.0 * 10.0**2))
        assert curve.values[0] == pytest.approx(expected_first, abs=1e-12)

    def test_gaussian_symmetry_even_window(self):
        for n in (8, 20, 60, 64):
            prop = get_property(4, n, n)
            _, curve = generate_mask(prop)
            mu = prop.mu
            for k in range(1, min(mu, n - 1 - mu) + 1):
                assert abs(curve.values[mu - k] - curve.values[mu + k]) <= 1e-12

    def test_curve_length_matches_widths(self):
        for template in ALL_TEMPLATES:
            prop = get_property(template, 33, 47)
            widths, curve = generate_mask(prop)
            assert len(curve) == sum(widths) == prop.window

    def test_deterministic(self):
        a = generate_mask(get_property(4, 50, 41))[1]
        b = generate_mask(get_property(4, 50, 41))[1]
        assert np.array_equal(a.values, b.values)


class TestMaskAlgebra:
    def test_invariants_over_length_grid(self):
        # lighter sweep than the acceptance gate's [8, 64] exhaustive run
        for t in range(8, 33):
            for l in range(8, 33):
                n = min(t, l)
                for template in ALL_TEMPLATES:
                    prop = get_property(template, t, l)
                    widths, curve = generate_mask(prop)
                    expected_window = l if template == CUTPASTE else n
                    assert sum(widths) == expected_window
                    assert all(w >= 1 for w in widths)
                    assert prop.regions in (1, 3)
                    assert prop.mu == n // 2
                    assert np.all(curve.values >= 0.0)
                    assert np.all(curve.values <= 1.0)

    def test_region_counts(self):
        assert get_property(SMOOTH_OVERLAY, 20, 20).regions == 1
        assert get_property(SMOOTH_GAUSSIAN_OVERLAY, 20, 20).regions == 1
        assert get_property(CUTMIX, 20, 20).regions == 3
        assert get_property(SMOOTH_CONCATENATION, 20, 20).regions == 3

    def test_random_pool_excludes_cutpaste(self):
        assert CUTPASTE not in RANDOM_POOL
        assert len(RANDOM_POOL) == 4


class TestMaskPropertyValidation:
    def test_width_lambda_mismatch(self):
        with pytest.raises(ValueError, match="regions"):
            MaskProperty(CUTMIX, 5, 3, (4, 4), (ConstRegion(1.0),) * 3)

    def test_zero_width(self):
        with pytest.raises(ValueError, match="width"):
            MaskProperty(SMOOTH_OVERLAY, 5, 1, (0,), (ConstRegion(1.0),))

    def test_lambda_out_of_range(self):
        with pytest.raises(ValueError, match="mixing factor"):
            ConstRegion(1.5)
        with pytest.raises(ValueError, match="mixing factor"):
            RampRegion(-0.1, 0.5)

    def test_curve_range_validation(self):
        with pytest.raises(ValueError, match=r"\[0,1\]"):
            MixCurve(np.array([0.5, 1.1]))


class TestDumpMask:
    def test_cutpaste_rows(self):
        prop = MaskProperty(CUTPASTE, 1, 1, (3,), (ConstRegion(0.0),))
        assert dump_mask(prop) == "frame,lambda\n0,0\n1,0\n2,0\n"

    def test_overlay_rows(self):
        prop = MaskProperty(SMOOTH_OVERLAY, 1, 1, (2,), (ConstRegion(0.6),))
        assert dump_mask(prop) == "frame,lambda\n0,0.6\n1,0.6\n"

    def test_cutmix_width_expansion(self):
        prop = get_property(CUTMIX, 8, 8)
        rows = dump_mask(prop).splitlines()[1:]
        lambdas = [float(row.split(",")[1]) for row in rows]
        assert lambdas == [1, 1, 1, 0, 0, 1, 1, 1]

    def test_lossless_at_nine_significant_digits(self):
        prop = get_property(4, 50, 50)
        _, curve = generate_mask(prop)
        rows = dump_mask(prop).splitlines()[1:]
        parsed = np.array([float(row.split(",")[1]) for row in rows])
        assert np.allclose(parsed, curve.values, rtol=1e-9, atol=0)
