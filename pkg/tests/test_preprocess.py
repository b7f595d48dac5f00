"""Preprocessing tests: hand cases, invariants, and a cross-library resize check."""

import numpy as np
import pytest

from mammonet import preprocess as P
from mammonet.errors import ConfigurationError, InputError


class TestMedianFilter:
    def test_removes_single_salt_pixel(self):
        img = np.zeros((7, 7), dtype=np.uint8)
        img[3, 3] = 255
        np.testing.assert_array_equal(P.median_filter(img, 3), 0)

    def test_removes_single_pepper_pixel(self):
        img = np.full((7, 7), 200, dtype=np.uint8)
        img[2, 4] = 0
        np.testing.assert_array_equal(P.median_filter(img, 3), 200)

    def test_hand_case_with_edge_replication(self):
        img = np.array([[1, 2], [3, 4]], dtype=np.uint8)
        np.testing.assert_array_equal(P.median_filter(img, 3),
                                      [[2, 2], [3, 3]])

    def test_constant_image_unchanged(self):
        img = np.full((5, 9), 77, dtype=np.uint8)
        out = P.median_filter(img, 5)
        np.testing.assert_array_equal(out, img)
        assert out.dtype == np.uint8

    def test_window_one_is_identity(self):
        rng = np.random.default_rng(0)
        img = rng.integers(0, 256, (6, 6), dtype=np.uint8)
        np.testing.assert_array_equal(P.median_filter(img, 1), img)

    def test_matches_sorting_definition(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, (8, 9), dtype=np.uint8)
        out = P.median_filter(img, 3)
        padded = np.pad(img, 1, mode="edge")
        for i in range(img.shape[0]):
            for j in range(img.shape[1]):
                values = sorted(padded[i:i + 3, j:j + 3].ravel())
                assert out[i, j] == values[4]

    @pytest.mark.parametrize("window", [0, 2, 4, -3])
    def test_even_or_nonpositive_window_rejected(self, window):
        with pytest.raises(ConfigurationError):
            P.median_filter(np.zeros((4, 4), dtype=np.uint8), window)

    def test_non_uint8_rejected(self):
        with pytest.raises(InputError):
            P.median_filter(np.zeros((4, 4)), 3)


class TestHistogramEqualize:
    def test_hand_case(self):
        img = np.array([[0, 0], [1, 3]], dtype=np.uint8)
        # counts: {0:2, 1:1, 3:1}; cdf_min=2, denom=2
        np.testing.assert_array_equal(P.histogram_equalize(img),
                                      [[0, 0], [128, 255]])

    def test_constant_image_maps_to_zero(self):
        img = np.full((4, 4), 123, dtype=np.uint8)
        np.testing.assert_array_equal(P.histogram_equalize(img), 0)

    def test_mapping_monotone_over_all_levels(self):
        img = np.arange(256, dtype=np.uint8).reshape(16, 16)
        out = P.histogram_equalize(img)
        flat = out.ravel()  # input values are already sorted in raster order
        assert np.all(np.diff(flat.astype(int)) >= 0)

    def test_extremes_hit_full_range(self):
        rng = np.random.default_rng(1)
        img = rng.integers(40, 200, (32, 32), dtype=np.uint8)
        out = P.histogram_equalize(img)
        assert out.min() == 0
        assert out.max() == 255

    def test_equal_values_map_equally(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, (16, 16), dtype=np.uint8)
        out = P.histogram_equalize(img)
        for v in np.unique(img):
            mapped = out[img == v]
            assert np.all(mapped == mapped.flat[0])


class TestBicubicResize:
    def test_identity_when_size_unchanged(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, (11, 7), dtype=np.uint8)
        np.testing.assert_array_equal(P.bicubic_resize(img, 11, 7), img)

    @pytest.mark.parametrize("shape", [(4, 4), (9, 5), (3, 12)])
    def test_constant_preserved(self, shape):
        img = np.full(shape, 173, dtype=np.uint8)
        out = P.bicubic_resize(img, 225, 225)
        np.testing.assert_array_equal(out, 173)

    def test_output_bounds_and_dtype(self):
        rng = np.random.default_rng(5)
        img = rng.integers(0, 256, (30, 40), dtype=np.uint8)
        out = P.bicubic_resize(img, 13, 57)
        assert out.dtype == np.uint8
        assert out.shape == (13, 57)

    @staticmethod
    def _reference(img, out_h, out_w):
        """Direct, non-separable evaluation of the same resize definition."""
        def kernel(t):
            t, a = abs(t), -0.5
            if t <= 1.0:
                return (a + 2.0) * t**3 - (a + 3.0) * t**2 + 1.0
            if t < 2.0:
                return a * t**3 - 5.0 * a * t**2 + 8.0 * a * t - 4.0 * a
            return 0.0

        h, w = img.shape
        out = np.zeros((out_h, out_w))
        for i in range(out_h):
            sy = (i + 0.5) * h / out_h - 0.5
            by = int(np.floor(sy))
            wy = [kernel(sy - by - k) for k in (-1, 0, 1, 2)]
            wy = [v / sum(wy) for v in wy]
            for j in range(out_w):
                sx = (j + 0.5) * w / out_w - 0.5
                bx = int(np.floor(sx))
                wx = [kernel(sx - bx - k) for k in (-1, 0, 1, 2)]
                wx = [v / sum(wx) for v in wx]
                acc = 0.0
                for ky in range(4):
                    yy = min(max(by - 1 + ky, 0), h - 1)
                    for kx in range(4):
                        xx = min(max(bx - 1 + kx, 0), w - 1)
                        acc += wy[ky] * wx[kx] * img[yy, xx]
                out[i, j] = acc
        return np.floor(np.clip(out, 0.0, 255.0) + 0.5).astype(np.uint8)

    @pytest.mark.parametrize("out_shape", [(13, 11), (4, 9), (10, 10)])
    def test_matches_direct_reference(self, out_shape):
        rng = np.random.default_rng(6)
        img = rng.integers(0, 256, (7, 5), dtype=np.uint8)
        ours = P.bicubic_resize(img, *out_shape).astype(int)
        ref = self._reference(img, *out_shape).astype(int)
        assert np.abs(ours - ref).max() <= 1  # summation-order rounding only

    def test_exact_doubling_weights_on_a_row(self):
        # x2 upscale samples at fractions 1/4 and 3/4, whose 4-tap weights are
        # exactly representable; check one fully-interior output by hand:
        # w(3/4 offsets) = (-3/128, 29/128, 111/128, -9/128)
        row = np.zeros((5, 8), dtype=np.uint8)
        row[:] = [10, 200, 30, 120, 250, 5, 90, 160]
        out = P.bicubic_resize(row, 5, 16)
        expected = (-3 * 200 + 29 * 30 + 111 * 120 - 9 * 250) / 128.0
        assert out[2, 6] == np.floor(expected + 0.5)

    def test_downscale_averages_locally(self):
        img = np.zeros((8, 8), dtype=np.uint8)
        img[:, 4:] = 200
        out = P.bicubic_resize(img, 2, 2)
        assert out[0, 0] < 50 and out[0, 1] > 150

    def test_bad_target_rejected(self):
        with pytest.raises(ConfigurationError):
            P.bicubic_resize(np.zeros((4, 4), dtype=np.uint8), 0, 5)


class TestCropRoi:
    def test_exact_subarray(self):
        img = np.arange(36, dtype=np.uint8).reshape(6, 6)
        out = P.crop_roi(img, P.RoiBox(row=1, col=2, height=3, width=2))
        np.testing.assert_array_equal(out, img[1:4, 2:4])

    def test_returns_copy(self):
        img = np.zeros((4, 4), dtype=np.uint8)
        out = P.crop_roi(img, P.RoiBox(0, 0, 2, 2))
        out[0, 0] = 9
        assert img[0, 0] == 0

    @pytest.mark.parametrize("box", [
        P.RoiBox(-1, 0, 2, 2), P.RoiBox(0, 3, 2, 2), P.RoiBox(3, 0, 2, 2),
        P.RoiBox(0, 0, 5, 1), P.RoiBox(0, 0, 0, 2),
    ])
    def test_out_of_bounds_rejected(self, box):
        with pytest.raises(InputError):
            P.crop_roi(np.zeros((4, 4), dtype=np.uint8), box)


class TestExtractPatches:
    def test_standard_grid_origins(self):
        img = np.zeros((1024, 1024), dtype=np.uint8)
        patches = P.extract_patches(img, 225, 25)
        origins = sorted({r for _, (r, c) in patches})
        assert origins == [0, 200, 400, 600, 799]
        assert len(patches) == 25

    def test_grid_covers_every_pixel(self):
        rng = np.random.default_rng(7)
        for h, w, patch, overlap in [(64, 50, 20, 5), (33, 41, 16, 3),
                                     (20, 20, 20, 0), (37, 23, 10, 9)]:
            img = rng.integers(0, 256, (h, w), dtype=np.uint8)
            covered = np.zeros((h, w), dtype=bool)
            for piece, (r, c) in P.extract_patches(img, patch, overlap):
                assert piece.shape == (patch, patch)
                np.testing.assert_array_equal(piece, img[r:r + patch, c:c + patch])
                covered[r:r + patch, c:c + patch] = True
            assert covered.all()

    def test_exact_tiling_has_no_extra_patch(self):
        img = np.zeros((40, 40), dtype=np.uint8)
        patches = P.extract_patches(img, 20, 0)
        assert len(patches) == 4

    def test_bad_overlap_rejected(self):
        img = np.zeros((40, 40), dtype=np.uint8)
        with pytest.raises(ConfigurationError):
            P.extract_patches(img, 20, 20)
        with pytest.raises(ConfigurationError):
            P.extract_patches(img, 20, -1)

    def test_patch_larger_than_image_rejected(self):
        with pytest.raises(InputError):
            P.extract_patches(np.zeros((16, 16), dtype=np.uint8), 20, 5)


class TestToModelInput:
    def test_shape_range_and_replication(self):
        img = np.array([[0, 128], [255, 64]], dtype=np.uint8)
        out = P.to_model_input(img)
        assert out.shape == (2, 2, 3)
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out[:, :, 0], out[:, :, 1])
        np.testing.assert_array_equal(out[:, :, 0], out[:, :, 2])
        assert out[0, 0, 0] == 0.0
        assert out[1, 0, 0] == 1.0
        assert out[0, 1, 0] == 128 / 255


class TestPrepareImage:
    def test_output_contract(self):
        rng = np.random.default_rng(8)
        img = rng.integers(0, 256, (90, 130), dtype=np.uint8)
        out = P.prepare_image(img, size=225)
        assert out.shape == (225, 225)
        assert out.dtype == np.uint8
        np.testing.assert_array_equal(out, P.prepare_image(img, size=225))

    def test_roi_restricts_content(self):
        img = np.zeros((60, 60), dtype=np.uint8)
        img[40:, 40:] = 250  # bright corner outside the ROI
        roi = P.RoiBox(0, 0, 30, 30)
        out = P.prepare_image(img, size=32, roi=roi)
        assert out.shape == (32, 32)
