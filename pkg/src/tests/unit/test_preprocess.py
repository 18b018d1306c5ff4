"""
Unit tests for fundusnet.preprocess: hybrid filter, CLAHE and resizing
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fundusnet.errors import ConfigError, EmptyHistogramError, ShapeError
from fundusnet.preprocess import (
    EnhanceConfig,
    build_lut,
    clahe,
    clip_histogram,
    clip_histogram_at,
    enhance,
    enhance_batch,
    histogram256,
    hybrid_filter,
    resize_bilinear,
)
from fundusnet.preprocess.clahe import IDENTITY_LUT, clip_level, tile_luts
from fundusnet.preprocess.filters import gaussian_kernel
from tests.resources import solid_image

histograms = arrays(np.int64, 256, elements=st.integers(0, 400))
slow_data = [HealthCheck.too_slow, HealthCheck.data_too_large]


def naive_median3(channel: np.ndarray) -> np.ndarray:
    padded = np.pad(channel, 1, mode="edge")
    out = np.empty_like(channel)
    for y in range(channel.shape[0]):
        for x in range(channel.shape[1]):
            out[y, x] = np.median(padded[y : y + 3, x : x + 3])
    return out


def naive_gaussian(channel: np.ndarray, sigma: float) -> np.ndarray:
    kernel = gaussian_kernel(sigma)
    radius = kernel.size // 2
    padded = np.pad(channel.astype(np.float64), radius, mode="edge")
    h, w = channel.shape
    out = np.zeros((h, w))
    for y in range(h):
        for x in range(w):
            for dy in range(kernel.size):
                for dx in range(kernel.size):
                    out[y, x] += kernel[dy] * kernel[dx] * padded[y + dy, x + dx]
    return np.clip(np.floor(out + 0.5), 0, 255)


def naive_bilinear(channel: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = channel.shape
    out = np.zeros((out_h, out_w))
    for i in range(out_h):
        for j in range(out_w):
            sy = min(max((i + 0.5) * in_h / out_h - 0.5, 0), in_h - 1)
            sx = min(max((j + 0.5) * in_w / out_w - 0.5, 0), in_w - 1)
            y0, x0 = int(sy), int(sx)
            y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
            fy, fx = sy - y0, sx - x0
            top = channel[y0, x0] * (1 - fx) + channel[y0, x1] * fx
            bottom = channel[y1, x0] * (1 - fx) + channel[y1, x1] * fx
            out[i, j] = top * (1 - fy) + bottom * fy
    return np.floor(out + 0.5)


class TestEnhanceConfig:
    """Test EnhanceConfig validation"""

    @pytest.mark.parametrize("fraction", [0.002, 0.003, 0.005])
    def test_clip_fraction_accepted(self, fraction):
        """Test clip fractions inside the allowed range"""
        assert EnhanceConfig(clip_fraction=fraction).clip_fraction == fraction

    @pytest.mark.parametrize("fraction", [0.0019, 0.0051, 0.0, 1.0])
    def test_clip_fraction_rejected(self, fraction):
        """Test clip fractions outside the allowed range"""
        with pytest.raises(ConfigError):
            EnhanceConfig(clip_fraction=fraction)

    def test_clip_level_rejects_fraction(self):
        """Test that clip_level refuses an out-of-range fraction"""
        with pytest.raises(ConfigError):
            clip_level(0.01, 1000)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"tile_grid": (0, 8)},
            {"median_window": 4},
            {"gaussian_sigma": 0.0},
            {"channel_mode": "hsv"},
        ],
    )
    def test_invalid_settings(self, kwargs):
        """Test invalid tile grids, windows, sigmas and channel modes"""
        with pytest.raises(ConfigError):
            EnhanceConfig(**kwargs)

    def test_dict_round_trip(self):
        """Test that a config survives to_dict and from_dict"""
        cfg = EnhanceConfig(clip_fraction=0.004, tile_grid=(4, 6))
        assert cfg.to_dict()["tile_grid"] == [4, 6]
        assert EnhanceConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_setting(self):
        """Test that an unknown key is refused"""
        with pytest.raises(ConfigError, match="unknown"):
            EnhanceConfig.from_dict({"gamma": 2.0})


class TestHybridFilter:
    """Test the median + Gaussian denoising stage"""

    def test_constant_image_unchanged(self):
        """Test that a constant image is a fixed point"""
        img = solid_image(9, 7, 100)
        np.testing.assert_array_equal(hybrid_filter(img, EnhanceConfig()), img)

    def test_salt_pixel_removed(self):
        """Test that the median removes an isolated bright pixel"""
        img = solid_image(7, 7, 0)
        img[3, 3] = 255
        assert not hybrid_filter(img, EnhanceConfig()).any()

    def test_ramp_matches_reference(self):
        """Test agreement with the loop reference on a ramp"""
        ramp = (np.arange(5)[:, None] * 30 + np.arange(5)[None, :] * 15).astype(np.uint8)
        img = np.stack([ramp, ramp[::-1], ramp.T], axis=-1)
        out = hybrid_filter(img, EnhanceConfig())
        for c in range(3):
            expected = naive_gaussian(naive_median3(img[..., c]), 1.0)
            assert np.abs(out[..., c].astype(int) - expected.astype(int)).max() <= 1

    def test_rejects_grayscale(self):
        """Test that a two-dimensional image is a shape error"""
        with pytest.raises(ShapeError):
            hybrid_filter(np.zeros((4, 4), dtype=np.uint8), EnhanceConfig())

    def test_rejects_float_image(self):
        """Test that non-byte images are refused"""
        with pytest.raises(TypeError):
            hybrid_filter(np.zeros((4, 4, 3)), EnhanceConfig())


class TestClipHistogram:
    """Test clipping with uniform redistribution"""

    def test_four_bin_example(self):
        """Test clipping and redistribution on four bins"""
        np.testing.assert_array_equal(clip_histogram_at(np.array([10, 0, 0, 0]), 4), [6, 2, 1, 1])

    def test_level_above_max_unchanged(self):
        """Test that a level above every bin leaves the histogram alone"""
        h = np.array([3, 1, 0, 2])
        np.testing.assert_array_equal(clip_histogram_at(h, 5), h)

    def test_clip_level_rounding(self):
        """Test how fractions turn into integer clip levels"""
        assert clip_level(0.003, 64) == 1
        assert clip_level(0.005, 1000) == 5
        assert clip_level(0.004, 1000) == 4

    @settings(max_examples=1000, deadline=None, suppress_health_check=slow_data)
    @given(histograms, st.integers(1, 200))
    def test_counts_conserved(self, counts, level):
        """Test that clipping conserves the total count"""
        h = counts.copy()
        clipped = clip_histogram_at(h, level)
        assert clipped.sum() == h.sum()
        assert np.all(clipped >= 0)

    def test_clip_histogram_uses_fraction(self):
        """Test clipping a spike at a fractional level"""
        h = np.zeros(256, dtype=np.int64)
        h[0] = 1000
        clipped = clip_histogram(h, 0.005, 1000)
        assert clipped.sum() == 1000
        assert clipped[0] == 5 + 995 // 256 + 1

    def test_invalid_level(self):
        """Test that a zero level is refused"""
        with pytest.raises(ValueError):
            clip_histogram_at(np.array([1, 2]), 0)


class TestBuildLut:
    """Test look-up tables from clipped histograms"""

    def test_all_mass_in_bin_zero(self):
        """Test that a single occupied bin maps everything to 255"""
        h = np.zeros(256, dtype=np.int64)
        h[0] = 50
        assert np.all(build_lut(h) == 255)

    def test_uniform_histogram_is_near_identity(self):
        """Test that a flat histogram gives a near-identity table"""
        lut = build_lut(np.ones(256, dtype=np.int64))
        assert np.abs(lut.astype(int) - np.arange(256)).max() <= 1

    def test_half_split(self):
        """Test a two-bin histogram"""
        h = np.zeros(256, dtype=np.int64)
        h[:2] = 2
        lut = build_lut(h)
        assert lut[0] == 128
        assert np.all(lut[1:] == 255)

    def test_empty_histogram(self):
        """Test that an empty histogram is refused"""
        with pytest.raises(EmptyHistogramError):
            build_lut(np.zeros(256, dtype=np.int64))

    @settings(max_examples=200, deadline=None, suppress_health_check=slow_data)
    @given(histograms)
    def test_monotone(self, counts):
        """Test that look-up tables never decrease"""
        h = counts.copy()
        if h.sum() == 0:
            h[0] = 1
        assert np.all(np.diff(build_lut(h).astype(int)) >= 0)

    def test_histogram256_counts_pixels(self, rng):
        """Test that every pixel lands in one of 256 bins"""
        region = rng.integers(0, 256, size=(12, 9), dtype=np.uint8)
        h = histogram256(region)
        assert h.shape == (256,)
        assert h.sum() == region.size


class TestClahe:
    """Test the full tiled equalisation"""

    @pytest.mark.parametrize("mode", ["per-channel", "luminance"])
    def test_constant_image_fixed_point(self, mode):
        """Test that a constant image is unchanged in both channel modes"""
        img = solid_image(64, 48, 137)
        np.testing.assert_array_equal(clahe(img, EnhanceConfig(channel_mode=mode)), img)

    def test_raises_contrast(self, rng):
        """Test that a low-contrast image gains contrast"""
        img = rng.integers(100, 121, size=(64, 64, 3)).astype(np.uint8)
        out = clahe(img, EnhanceConfig())
        assert out.dtype == np.uint8
        assert out.std() > img.std()

    def test_clip_fraction_limits_mean_shift(self, rng):
        """Test that clip fractions shift brightness less than global equalisation"""
        base = np.linspace(60, 180, 96)[None, :] + rng.normal(0, 6, size=(96, 96))
        img = np.repeat(np.clip(base, 0, 255).astype(np.uint8)[..., None], 3, axis=2)
        low = clahe(img, EnhanceConfig(clip_fraction=0.002))
        high = clahe(img, EnhanceConfig(clip_fraction=0.005))
        full = build_lut(histogram256(img[..., 0]))[img]
        shift = abs(float(low.mean()) - float(high.mean()))
        assert shift < abs(float(full.mean()) - float(img.mean())) + 1.0

    def test_flat_tile_gets_identity_lut(self, rng):
        """Test that a single-intensity tile maps every value to itself while textured tiles equalise"""
        channel = rng.integers(0, 256, size=(32, 32)).astype(np.uint8)
        channel[:16, :16] = 200
        luts = tile_luts(channel, EnhanceConfig(tile_grid=(2, 2)))
        np.testing.assert_array_equal(luts[0, 0], IDENTITY_LUT)
        assert not np.array_equal(luts[1, 1], IDENTITY_LUT)
        assert luts[0, 0][200] == 200

    def test_image_smaller_than_grid(self):
        """Test that an image with fewer pixels than tiles is a shape error"""
        with pytest.raises(ShapeError):
            clahe(solid_image(4, 4, 10), EnhanceConfig(tile_grid=(8, 8)))

    def test_output_range_and_shape(self, rng):
        """Test that output keeps shape and byte type"""
        img = rng.integers(0, 256, size=(40, 52, 3)).astype(np.uint8)
        out = clahe(img, EnhanceConfig(tile_grid=(4, 4)))
        assert out.shape == img.shape
        assert out.dtype == np.uint8


class TestResizeAndPipeline:
    """Test bilinear resizing and the enhance pipeline"""

    def test_same_size_is_identical(self, rng):
        """Test that resizing to the same size copies the image"""
        img = rng.integers(0, 256, size=(5, 7, 3)).astype(np.uint8)
        out = resize_bilinear(img, 5, 7)
        np.testing.assert_array_equal(out, img)
        assert out is not img

    def test_checkerboard_average(self):
        """Test that shrinking a checkerboard averages it"""
        board = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        img = np.repeat(board[..., None], 3, axis=2)
        assert np.all(resize_bilinear(img, 1, 1) == 128)

    def test_ramp_matches_reference(self):
        """Test agreement with the loop reference on a ramp"""
        ramp = (np.arange(16).reshape(4, 4) * 16).astype(np.uint8)
        img = np.repeat(ramp[..., None], 3, axis=2)
        out = resize_bilinear(img, 2, 2)
        expected = naive_bilinear(ramp.astype(np.float64), 2, 2)
        assert np.abs(out[..., 0].astype(int) - expected.astype(int)).max() <= 1

    def test_invalid_extent(self):
        """Test that a zero target size is a shape error"""
        with pytest.raises(ShapeError):
            resize_bilinear(solid_image(4, 4, 0), 0, 2)

    def test_enhance_resizes(self):
        """Test that enhance applies the requested size"""
        out = enhance(solid_image(40, 40, 90), EnhanceConfig(), size=(32, 24))
        assert out.shape == (32, 24, 3)
        assert np.all(out == 90)

    def test_batch_order_and_workers(self, rng):
        """Test that pooled enhancement keeps order and matches serial output"""
        images = [rng.integers(0, 256, size=(32, 32, 3)).astype(np.uint8) for _ in range(3)]
        serial = enhance_batch(images, EnhanceConfig())
        pooled = enhance_batch(images, EnhanceConfig(), workers=2)
        assert len(serial) == 3
        for a, b, img in zip(serial, pooled, images):
            np.testing.assert_array_equal(a, b)
            np.testing.assert_array_equal(a, enhance(img, EnhanceConfig()))
