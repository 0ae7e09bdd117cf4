import numpy as np
import pytest

from panoptikit.grids import BBox, bilinear_sample, paste_mask, resize_bilinear, roi_align_crop

from oracles import bilinear_reference, resize_reference, roi_align_reference


class TestBilinearSample:
    def test_constant_field(self):
        grid = np.full((5, 7), 3.0)
        for x, y in [(0.0, 0.0), (3.2, 1.7), (6.0, 4.0), (-2.0, 9.0)]:
            assert bilinear_sample(grid, x, y) == pytest.approx(3.0)

    def test_exact_at_pixel_centers(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            grid = rng.normal(size=(8, 8))
            for i in range(8):
                for j in range(8):
                    assert bilinear_sample(grid, j, i) == grid[i, j]

    def test_midpoint_between_two_pixels(self):
        grid = np.array([[0.0, 1.0]])
        assert bilinear_sample(grid, 0.5, 0.0) == pytest.approx(0.5)

    def test_clamps_to_border_centers(self):
        grid = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert bilinear_sample(grid, -5.0, -5.0) == 1.0
        assert bilinear_sample(grid, 99.0, 99.0) == 4.0

    def test_matches_reference_at_random_positions(self):
        rng = np.random.default_rng(3)
        grid = rng.normal(size=(6, 9))
        for _ in range(50):
            x = rng.uniform(-1, 10)
            y = rng.uniform(-1, 7)
            assert bilinear_sample(grid, x, y) == pytest.approx(
                bilinear_reference(grid, x, y), abs=1e-12
            )

    def test_rejects_empty_grid_and_bad_coords(self):
        with pytest.raises(ValueError, match="non-empty"):
            bilinear_sample(np.zeros((0, 3)), 0, 0)
        with pytest.raises(ValueError, match="finite"):
            bilinear_sample(np.zeros((2, 2)), np.nan, 0)


class TestRoiAlignCrop:
    def test_constant_field_many_boxes(self):
        rng = np.random.default_rng(5)
        grid = np.full((1, 12, 12), 2.5)
        for _ in range(200):
            x0, y0 = rng.uniform(-2, 10, size=2)
            w, h = rng.uniform(0.5, 8, size=2)
            out = roi_align_crop(grid, BBox(x0, y0, x0 + w, y0 + h), 4, 4)
            assert np.allclose(out, 2.5)

    def test_full_extent_identity(self):
        rng = np.random.default_rng(6)
        grid = rng.normal(size=(2, 9, 7))
        out = roi_align_crop(grid, BBox(0, 0, 7, 9), 9, 7, samples_per_bin=1)
        assert np.abs(out - grid).max() < 1e-5

    def test_channels_crop_independently(self):
        rng = np.random.default_rng(7)
        grid = rng.normal(size=(2, 8, 8))
        box = BBox(1.3, 2.1, 6.7, 5.9)
        out = roi_align_crop(grid, box, 5, 5)
        for c in range(2):
            single = roi_align_crop(grid[c : c + 1], box, 5, 5)
            assert np.array_equal(out[c], single[0])

    @pytest.mark.parametrize("spb", [1, 2, 3])
    def test_matches_reference(self, spb):
        rng = np.random.default_rng(8 + spb)
        grid = rng.normal(size=(2, 10, 11))
        for _ in range(5):
            x0, y0 = rng.uniform(-1, 8, size=2)
            w, h = rng.uniform(1, 6, size=2)
            box = BBox(x0, y0, x0 + w, y0 + h)
            out = roi_align_crop(grid, box, 4, 6, samples_per_bin=spb)
            ref = roi_align_reference(grid, box, 4, 6, samples_per_bin=spb)
            assert np.abs(out - ref).max() < 1e-12

    def test_rejects_degenerate_box_and_bad_params(self):
        grid = np.zeros((1, 4, 4))
        with pytest.raises(ValueError, match="invalid box"):
            roi_align_crop(grid, BBox(2, 1, 2, 3), 2, 2)
        with pytest.raises(ValueError, match="invalid box"):
            roi_align_crop(grid, BBox(3, 3, 1, 4), 2, 2)
        with pytest.raises(ValueError, match=">= 1"):
            roi_align_crop(grid, BBox(0, 0, 2, 2), 0, 2)
        with pytest.raises(ValueError, match="samples_per_bin"):
            roi_align_crop(grid, BBox(0, 0, 2, 2), 2, 2, samples_per_bin=0)


class TestResizeBilinear:
    def test_constant_any_size(self):
        grid = np.full((3, 2, 5), -1.25)
        for h, w in [(1, 1), (2, 5), (7, 3), (16, 16)]:
            assert np.allclose(resize_bilinear(grid, h, w), -1.25)

    def test_identity_size(self):
        rng = np.random.default_rng(9)
        grid = rng.normal(size=(2, 6, 4))
        assert np.abs(resize_bilinear(grid, 6, 4) - grid).max() < 1e-12

    def test_linear_ramp_upsample(self):
        # 2x2 ramp to 4x4, checked against the closed-form mapping with
        # clamped source coordinates (values frozen from the loop reference).
        ramp = np.array([[[0.0, 1.0], [2.0, 3.0]]])
        out = resize_bilinear(ramp, 4, 4)
        ref = resize_reference(ramp, 4, 4)
        assert np.abs(out - ref).max() < 1e-6
        expected = np.array(
            [
                [0.0, 0.25, 0.75, 1.0],
                [0.5, 0.75, 1.25, 1.5],
                [1.5, 1.75, 2.25, 2.5],
                [2.0, 2.25, 2.75, 3.0],
            ]
        )
        assert np.abs(out[0] - expected).max() < 1e-6

    def test_matches_reference_random(self):
        rng = np.random.default_rng(10)
        grid = rng.normal(size=(2, 5, 8))
        out = resize_bilinear(grid, 9, 3)
        ref = resize_reference(grid, 9, 3)
        assert np.abs(out - ref).max() < 1e-12

    def test_rejects_bad_size(self):
        with pytest.raises(ValueError, match=">= 1"):
            resize_bilinear(np.zeros((1, 2, 2)), 0, 4)


class TestPasteMask:
    def test_all_ones_full_image_box(self):
        mask = np.ones((56, 56))
        out = paste_mask(mask, BBox(0, 0, 40, 30), 30, 40)
        assert np.allclose(out, 1.0)

    def test_box_clipped_half_outside(self):
        mask = np.ones((4, 4))
        out = paste_mask(mask, BBox(-10, 0, 10, 10), 10, 10)
        assert np.allclose(out[:, :10], 1.0)
        out2 = paste_mask(np.ones((4, 4)), BBox(5, 5, 15, 15), 10, 10)
        assert np.allclose(out2[5:, 5:], 1.0)
        assert np.count_nonzero(out2[:5, :]) == 0
        assert np.count_nonzero(out2[:, :5]) == 0

    def test_matches_resize_for_integer_box(self):
        rng = np.random.default_rng(12)
        small = rng.uniform(size=(2, 2))
        out = paste_mask(small, BBox(3, 1, 7, 5), 8, 12)
        ref = resize_reference(small[None], 4, 4)[0]
        assert np.abs(out[1:5, 3:7] - ref).max() < 1e-12
        outside = out.copy()
        outside[1:5, 3:7] = 0.0
        assert np.count_nonzero(outside) == 0

    def test_box_fully_outside_warns_and_zeroes(self):
        with pytest.warns(RuntimeWarning, match="outside"):
            out = paste_mask(np.ones((2, 2)), BBox(50, 50, 60, 60), 10, 10)
        assert np.count_nonzero(out) == 0

    def test_values_stay_within_input_range(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            mask = rng.uniform(0.2, 0.9, size=(5, 5))
            x0, y0 = rng.uniform(-3, 14, size=2)
            w, h = rng.uniform(1, 9, size=2)
            box = BBox(x0, y0, x0 + w, y0 + h)
            x_lo, x_hi = max(int(np.floor(x0)), 0), min(int(np.ceil(x0 + w)), 16)
            y_lo, y_hi = max(int(np.floor(y0)), 0), min(int(np.ceil(y0 + h)), 16)
            if x_lo >= x_hi or y_lo >= y_hi:
                continue
            out = paste_mask(mask, box, 16, 16)
            region = out[y_lo:y_hi, x_lo:x_hi]
            assert region.min() >= mask.min() - 1e-12
            assert region.max() <= mask.max() + 1e-12
            outside = out.copy()
            outside[y_lo:y_hi, x_lo:x_hi] = 0.0
            assert np.count_nonzero(outside) == 0
