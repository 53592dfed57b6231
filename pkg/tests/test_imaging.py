import numpy as np
import pytest
from PIL import Image

from alfie.imaging import (
    assemble_rgba,
    bilinear_resize,
    composite_over,
    read_png,
    write_png,
    write_png_gray,
)

# frozen byte matrix: write_png of PIN_RGB/PIN_ALPHA decoded with Pillow
PIN_RGB = np.array([[[-1.0, 0.0, 1.0], [0.5, -0.5, 0.25]],
                    [[0.1, 0.2, 0.3], [-0.1, -0.2, -0.3]]])
PIN_ALPHA = np.array([[0.0, 0.5], [1.0, 0.25]])
PIN_BYTES = [[[0, 128, 255, 0], [191, 64, 159, 128]],
             [[140, 153, 166, 255], [115, 102, 89, 64]]]


class TestAssembleRgba:
    def test_opaque(self):
        rgb = np.zeros((2, 2, 3))
        rgba = assemble_rgba(rgb, np.ones((2, 2)))
        assert rgba.shape == (2, 2, 4)
        assert np.all(rgba[:, :, 3] == 1.0)

    def test_transparent(self):
        rgba = assemble_rgba(np.zeros((2, 2, 3)), np.zeros((2, 2)))
        assert np.all(rgba[:, :, 3] == 0.0)

    def test_values_untouched(self):
        rgb = np.linspace(-1, 1, 12).reshape(2, 2, 3)
        rgba = assemble_rgba(rgb, np.full((2, 2), 0.5))
        np.testing.assert_array_equal(rgba[:, :, :3], rgb)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            assemble_rgba(np.zeros((2, 2, 3)), np.zeros((3, 2)))


class TestWritePng:
    def test_endpoint_mapping(self, tmp_path):
        img = assemble_rgba(np.stack([np.full((1, 2), -1.0)] * 3, axis=2), np.ones((1, 2)))
        img[0, 1, :3] = 1.0
        path = str(tmp_path / "endpoints.png")
        write_png(img, path)
        arr = np.asarray(Image.open(path))
        assert list(arr[0, 0]) == [0, 0, 0, 255]
        assert list(arr[0, 1]) == [255, 255, 255, 255]

    def test_half_alpha_rounds_up(self, tmp_path):
        img = assemble_rgba(np.zeros((1, 1, 3)), np.array([[0.5]]))
        path = str(tmp_path / "half.png")
        write_png(img, path)
        assert np.asarray(Image.open(path))[0, 0, 3] == 128

    def test_pinned_bytes_via_reference_decoder(self, tmp_path):
        path = str(tmp_path / "pin.png")
        write_png(assemble_rgba(PIN_RGB, PIN_ALPHA), path)
        with Image.open(path) as im:
            assert im.mode == "RGBA"
            assert np.asarray(im).tolist() == PIN_BYTES

    def test_round_trip_identity_on_quantized_images(self, tmp_path):
        rng = np.random.default_rng(9)
        rgba = np.concatenate([
            rng.uniform(-1, 1, size=(5, 7, 3)),
            rng.uniform(0, 1, size=(5, 7, 1)),
        ], axis=2)
        p1 = str(tmp_path / "a.png")
        p2 = str(tmp_path / "b.png")
        write_png(rgba, p1)
        once = read_png(p1)
        write_png(once, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()
        np.testing.assert_array_equal(read_png(p2), once)

    def test_gray_png(self, tmp_path):
        path = str(tmp_path / "g.png")
        write_png_gray(np.array([[0.0, 0.5], [1.0, 0.25]]), path)
        with Image.open(path) as im:
            assert im.mode == "L"
            assert np.asarray(im).tolist() == [[0, 128], [255, 64]]


class TestCompositeOver:
    def test_alpha_one_returns_fg(self):
        fg = assemble_rgba(np.full((2, 2, 3), 0.3), np.ones((2, 2)))
        bg = np.full((2, 2, 3), -0.8)
        np.testing.assert_array_equal(composite_over(fg, bg), fg[:, :, :3])

    def test_alpha_zero_returns_bg(self):
        fg = assemble_rgba(np.full((2, 2, 3), 0.3), np.zeros((2, 2)))
        bg = np.full((2, 2, 3), -0.8)
        np.testing.assert_array_equal(composite_over(fg, bg), bg)

    def test_quarter_blend_scalar_oracle(self):
        fg = assemble_rgba(np.full((1, 1, 3), 1.0), np.full((1, 1), 0.25))
        bg = np.full((1, 1, 3), -1.0)
        np.testing.assert_allclose(composite_over(fg, bg),
                                   np.full((1, 1, 3), 0.25 * 1.0 + 0.75 * -1.0))

    def test_output_bounded_by_inputs(self):
        rng = np.random.default_rng(4)
        fg = np.concatenate([rng.uniform(-1, 1, (4, 4, 3)), rng.uniform(0, 1, (4, 4, 1))], axis=2)
        bg = rng.uniform(-1, 1, (4, 4, 3))
        out = composite_over(fg, bg)
        lo = np.minimum(fg[:, :, :3], bg)
        hi = np.maximum(fg[:, :, :3], bg)
        assert np.all(out >= lo - 1e-12) and np.all(out <= hi + 1e-12)


class TestBilinearResize:
    def test_identity_size(self):
        rng = np.random.default_rng(2)
        grid = rng.normal(size=(5, 6))
        np.testing.assert_array_equal(bilinear_resize(grid, 5, 6), grid)

    def test_constant_preserved(self):
        out = bilinear_resize(np.full((3, 3), 0.7), 9, 5)
        np.testing.assert_allclose(out, 0.7)

    def test_2x2_to_4x4_manual_weights(self):
        grid = np.array([[0.0, 1.0], [2.0, 3.0]])
        out = bilinear_resize(grid, 4, 4)
        # sample coords (j + 0.5)/2 - 0.5 = [-0.25, 0.25, 0.75, 1.25] -> clamped
        cols = np.array([0.0, 0.25, 0.75, 1.0])
        expected = cols[None, :] + 2.0 * cols[:, None]
        np.testing.assert_allclose(out, expected)

    def test_rejects_zero_target(self):
        with pytest.raises(ValueError):
            bilinear_resize(np.zeros((2, 2)), 0, 2)

    def test_channel_axis_carried(self):
        rng = np.random.default_rng(8)
        img = rng.normal(size=(2, 2, 3))
        out = bilinear_resize(img, 4, 4)
        for c in range(3):
            np.testing.assert_allclose(out[:, :, c], bilinear_resize(img[:, :, c], 4, 4))
