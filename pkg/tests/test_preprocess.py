import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import dilate_naive, remove_nontext_naive, sauvola_naive
from tablegru.errors import InvalidInputError
from tablegru.preprocess import (PreprocessConfig, binarize, dilate, normalize, preprocess,
                                 preprocess_stages, remove_nontext, resize_binary)
from tablegru.synthgen import SynthSpec, generate

CFG = PreprocessConfig()
bitmaps = arrays(np.uint8, st.tuples(st.integers(1, 32), st.integers(1, 32)),
                 elements=st.integers(0, 1))


class TestBinarize:
    def test_white_is_background(self):
        assert not binarize(np.full((40, 50), 255, np.uint8)).any()

    def test_black_is_foreground(self):
        assert binarize(np.zeros((40, 50), np.uint8)).all()

    def test_square_on_white(self):
        img = np.full((64, 64), 255, np.uint8)
        img[27:37, 27:37] = 0
        out = binarize(img, PreprocessConfig(binarize_window=31, binarize_k=0.3))
        np.testing.assert_array_equal(out, sauvola_naive(img, 31, 0.3))
        assert out[27:37, 27:37].all()
        assert not out[:10, :10].any() and not out[-10:, -10:].any()

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_naive_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h, w = rng.integers(1, 65, size=2)
        img = rng.integers(0, 256, size=(h, w)).astype(np.uint8)
        window = int(rng.choice([3, 7, 15, 31]))
        k = float(rng.uniform(0.05, 0.95))
        cfg = PreprocessConfig(binarize_window=window, binarize_k=k)
        np.testing.assert_array_equal(binarize(img, cfg), sauvola_naive(img, window, k))

    def test_window_clamped_to_small_image(self):
        img = np.array([[0, 255, 0, 255]], np.uint8)
        np.testing.assert_array_equal(binarize(img), sauvola_naive(img, 31, 0.3))

    def test_zero_area_rejected(self):
        with pytest.raises(InvalidInputError):
            binarize(np.zeros((0, 5), np.uint8))

    def test_config_rejects_bad_k(self):
        with pytest.raises(InvalidInputError):
            PreprocessConfig(binarize_k=1.0)


class TestRemoveNontext:
    def test_empty_passthrough(self):
        img = np.zeros((30, 40), np.uint8)
        np.testing.assert_array_equal(remove_nontext(img), img)

    def test_line_removed_blob_kept(self):
        img = np.zeros((100, 200), np.uint8)
        img[50:52, :] = 1
        img[10:18, 20:30] = 1  # 10 wide x 8 tall
        expected = np.zeros_like(img)
        expected[10:18, 20:30] = 1
        np.testing.assert_array_equal(remove_nontext(img), expected)
        np.testing.assert_array_equal(remove_nontext_naive(img), expected)

    def test_word_blobs_untouched(self):
        img = np.zeros((80, 120), np.uint8)
        for y in range(5, 75, 12):
            for x in range(4, 110, 15):
                img[y : y + 6, x : x + 6] = 1
        np.testing.assert_array_equal(remove_nontext(img), img)
        np.testing.assert_array_equal(remove_nontext_naive(img), img)

    def test_vertical_rule_and_elongated(self):
        img = np.zeros((100, 200), np.uint8)
        img[:, 100] = 1  # full-height rule
        img[10:12, 10:80] = 1  # 70x2, aspect 35, 70 >= 0.3 * 200
        img[60:63, 10:40] = 1  # 30x3, aspect 10: kept
        out = remove_nontext(img)
        assert not out[:, 100].any()
        assert not out[10:12, 10:80].any()
        assert out[60:63, 10:40].all()

    @given(bitmaps)
    @settings(max_examples=60, deadline=None)
    def test_matches_oracle_and_never_adds(self, img):
        out = remove_nontext(img)
        np.testing.assert_array_equal(out, remove_nontext_naive(img))
        assert np.all(out <= img)


class TestResize:
    def test_identity(self):
        rng = np.random.default_rng(0)
        img = (rng.random((512, 1600)) < 0.3).astype(np.uint8)
        np.testing.assert_array_equal(resize_binary(img), img)

    def test_constant_downscale(self):
        out = resize_binary(np.ones((1024, 3200), np.uint8))
        assert out.shape == (512, 1600) and out.all()

    def test_hand_box_average(self):
        img = np.array([[1, 1, 0, 0], [1, 1, 0, 0]], np.uint8)
        out = resize_binary(img, PreprocessConfig(target_width=2, target_height=1))
        np.testing.assert_array_equal(out, [[1, 0]])

    def test_tie_goes_to_foreground(self):
        img = np.array([[1, 0]], np.uint8)
        out = resize_binary(img, PreprocessConfig(target_width=1, target_height=1))
        np.testing.assert_array_equal(out, [[1]])

    def test_upscale_fractional_coverage(self):
        # 3 -> 2: output pixel 0 covers source 0 fully and half of source 1
        img = np.array([[0, 1, 1]], np.uint8)
        out = resize_binary(img, PreprocessConfig(target_width=2, target_height=1))
        np.testing.assert_array_equal(out, [[0, 1]])

    @given(st.integers(0, 1), st.integers(1, 40), st.integers(1, 40),
           st.integers(1, 40), st.integers(1, 40))
    @settings(max_examples=40, deadline=None)
    def test_constant_preserved(self, value, h, w, th, tw):
        img = np.full((h, w), value, np.uint8)
        out = resize_binary(img, PreprocessConfig(target_width=tw, target_height=th))
        assert out.shape == (th, tw)
        assert np.all(out == value)


class TestDilate:
    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        img = (rng.random((20, 30)) < 0.2).astype(np.uint8)
        np.testing.assert_array_equal(dilate(img, 1, 1, 4), img)

    def test_point_to_structuring_element(self):
        img = np.zeros((21, 21), np.uint8)
        img[10, 10] = 1
        out = dilate(img, 3, 5, 1)
        expected = np.zeros_like(img)
        expected[8:13, 9:12] = 1
        np.testing.assert_array_equal(out, expected)

    def test_three_iterations_grow_block(self):
        img = np.zeros((31, 31), np.uint8)
        img[15, 15] = 1
        out = dilate(img, 3, 5, 3)
        ys, xs = np.nonzero(out)
        assert (xs.max() - xs.min() + 1, ys.max() - ys.min() + 1) == (7, 13)
        assert out.sum() == 7 * 13
        np.testing.assert_array_equal(out, dilate_naive(img, 7, 13))

    def test_border_is_background(self):
        img = np.zeros((5, 5), np.uint8)
        img[0, 0] = 1
        expected = np.zeros_like(img)
        expected[:2, :2] = 1
        np.testing.assert_array_equal(dilate(img, 3, 3, 1), expected)

    def test_even_kernel_rejected(self):
        with pytest.raises(InvalidInputError):
            dilate(np.zeros((5, 5), np.uint8), 4, 3)

    @given(bitmaps, st.sampled_from([1, 3, 5]), st.sampled_from([1, 3, 5]))
    @settings(max_examples=60, deadline=None)
    def test_matches_set_dilation(self, img, kw, kh):
        np.testing.assert_array_equal(dilate(img, kw, kh, 1), dilate_naive(img, kw, kh))


class TestNormalize:
    def test_values(self):
        np.testing.assert_array_equal(normalize(np.zeros((3, 3), np.uint8)), 0.0)
        np.testing.assert_array_equal(normalize(np.ones((3, 3), np.uint8)), 1.0)
        out = normalize(np.array([[1, 0], [0, 1]], np.uint8))
        assert out.dtype == np.float64
        np.testing.assert_array_equal(out, [[1.0, 0.0], [0.0, 1.0]])


class TestPipeline:
    def test_output_dims(self):
        rng = np.random.default_rng(2)
        for shape in [(100, 300), (700, 2000), (512, 1600)]:
            img = rng.integers(0, 256, size=shape).astype(np.uint8)
            assert preprocess(img, "column").shape == (512, 1600)

    def test_white_page(self):
        out = preprocess(np.full((300, 900), 255, np.uint8), "row")
        assert out.shape == (512, 1600) and not out.any()

    @pytest.mark.parametrize("axis", ["row", "column"])
    def test_equals_manual_chain(self, axis):
        img = generate(SynthSpec(width=400, height=128, ruling_lines=True), 7).image
        kw, kh = CFG.kernel_for(axis)
        manual = normalize(dilate(resize_binary(remove_nontext(binarize(img, CFG)), CFG),
                                  kw, kh, CFG.dilation_iterations))
        out = preprocess(img, axis, CFG)
        np.testing.assert_array_equal(out, manual)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_kernel_orientation(self):
        assert CFG.kernel_for("column") == (3, 5)
        assert CFG.kernel_for("row") == (5, 3)

    def test_deterministic_and_stages(self):
        img = generate(SynthSpec(), 3).image
        a = preprocess_stages(img, "column")
        b = preprocess_stages(img, "column")
        assert list(a) == ["binarized", "cleaned", "resized", "dilated", "normalized"]
        for key in a:
            assert a[key].tobytes() == b[key].tobytes()
