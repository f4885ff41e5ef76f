import math

import numpy as np
import pytest
from shapely.geometry import box

from roofclass.dataset.patches import ExtractionError, extract_patch, pad_to_square, prepare_patches, resize
from roofclass.geodata import RasterGrid


def raster_100(cell=1.0, bands=1):
    rng = np.random.default_rng(0)
    vals = rng.uniform(0, 100, size=(bands, 100, 100)).astype(np.float32)
    return RasterGrid(vals, cell_size=cell, origin=(0.0, 100.0), crs_id="EPSG:32620")


class TestExtractPatch:
    def test_identity_scale_exact_cells(self):
        r = raster_100()
        # cols 10..20, rows 30..50: y from 50 to 70
        fp = box(10.0, 50.0, 20.0, 70.0)
        patch = extract_patch(r, fp, scale=1.0)
        assert patch.shape == (1, 20, 10)
        assert np.array_equal(patch[0], r.band(0)[30:50, 10:20])

    def test_scaled_dims_formula_and_centering(self):
        r = raster_100()
        rng = np.random.default_rng(1)
        for _ in range(200):
            w = rng.uniform(2.0, 20.0)
            h = rng.uniform(2.0, 20.0)
            x0 = rng.uniform(25.0, 60.0)
            y0 = rng.uniform(25.0, 60.0)
            fp = box(x0, y0, x0 + w, y0 + h)
            scale = 1.5
            patch = extract_patch(r, fp, scale=scale)
            exp_w = max(1, int(math.floor(w * scale / r.cell_size + 0.5)))
            exp_h = max(1, int(math.floor(h * scale / r.cell_size + 0.5)))
            assert patch.shape == (1, exp_h, exp_w)

    def test_corner_padding_keeps_dims(self):
        r = raster_100()
        fp = box(0.0, 90.0, 8.0, 98.0)  # near top-left corner
        patch = extract_patch(r, fp, scale=1.5)
        assert patch.shape == (1, 12, 12)
        # area outside the raster is zero-filled
        assert patch[0, 0, 0] == 0.0

    def test_multiband(self):
        r = raster_100(bands=3)
        patch = extract_patch(r, box(40, 40, 50, 50), scale=1.0)
        assert patch.shape == (3, 10, 10)

    def test_no_intersection_rejected(self):
        r = raster_100()
        with pytest.raises(ExtractionError, match="intersect"):
            extract_patch(r, box(500, 500, 510, 510))

    def test_scale_below_one_rejected(self):
        r = raster_100()
        with pytest.raises(ValueError):
            extract_patch(r, box(10, 10, 20, 20), scale=0.5)


class TestPadToSquare:
    def test_already_square_identity(self):
        a = np.random.default_rng(2).normal(size=(100, 100)).astype(np.float32)
        assert np.array_equal(pad_to_square(a), a)

    def test_even_split(self):
        a = np.ones((50, 100), dtype=np.float32)
        out = pad_to_square(a)
        assert out.shape == (100, 100)
        assert np.all(out[:25] == 0) and np.all(out[75:] == 0)
        assert np.all(out[25:75] == 1)

    def test_odd_split_extra_on_right(self):
        a = np.ones((3, 2), dtype=np.float32)
        out = pad_to_square(a)
        assert out.shape == (3, 3)
        assert np.all(out[:, 2] == 0)
        assert np.all(out[:, 0:2] == 1)

    def test_odd_split_extra_on_bottom(self):
        a = np.ones((2, 3), dtype=np.float32)
        out = pad_to_square(a)
        assert out.shape == (3, 3)
        assert np.all(out[2, :] == 0)

    def test_pixel_sum_conserved_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            h, w = rng.integers(1, 64, size=2)
            a = rng.uniform(0, 10, size=(int(h), int(w))).astype(np.float32)
            out = pad_to_square(a)
            side = max(a.shape)
            assert out.shape == (side, side)
            assert out.sum() == pytest.approx(a.sum(), rel=1e-6)

    def test_multiband(self):
        a = np.ones((3, 4, 7), dtype=np.float32)
        out = pad_to_square(a)
        assert out.shape == (3, 7, 7)
        assert out.sum() == a.sum()


class TestResize:
    def test_identity(self):
        a = np.random.default_rng(4).normal(size=(224, 224)).astype(np.float32)
        assert np.array_equal(resize(a, 224), a)

    def test_constant_invariance(self):
        a = np.full((50, 50), 7.0, dtype=np.float32)
        out = resize(a, 224)
        assert out.shape == (224, 224)
        assert np.allclose(out, 7.0)

    def test_bilinear_monotone_columns(self):
        a = np.array([[0.0, 1.0], [0.0, 1.0]], dtype=np.float32)
        out = resize(a, 4)
        for row in out:
            assert np.all(np.diff(row) >= 0)

    def test_multiband_shape(self):
        a = np.zeros((3, 10, 10), dtype=np.float32)
        assert resize(a, 32).shape == (3, 32, 32)


class TestPreparePatches:
    def test_batch_shapes(self):
        from roofclass.dataset import synth_generate

        samples = synth_generate(8, "roof_type", seed=0, side=20)
        rgb = prepare_patches(samples, "rgb", 32)
        lidar = prepare_patches(samples, "lidar", 32)
        assert rgb.shape == (8, 3, 32, 32)
        assert lidar.shape == (8, 1, 32, 32)

    def test_empty(self):
        assert prepare_patches([], "rgb", 16).shape == (0, 3, 16, 16)
        assert prepare_patches([], "lidar", 16).shape == (0, 1, 16, 16)
