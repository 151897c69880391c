import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import CORPUS_DIR, gray, random_gray
from vocprep import filters as F
from vocprep import quality
from vocprep.errors import EvenKernel, InvalidVarianceBand, NegativeNoiseVar, OddDimensions
from vocprep.imagecore import ImageBuffer, load

CORPUS = sorted(CORPUS_DIR.glob("*.pgm"))
MILLION = (1000, 1000)


def constant(v, h=6, w=6):
    return ImageBuffer(np.full((h, w), v))


class TestBox:
    def test_constant(self):
        assert F.box_filter(constant(77), 5) == constant(77)

    def test_k1_identity(self, rng):
        img = random_gray(rng)
        assert F.box_filter(img, 1) == img

    def test_center_impulse(self):
        out = F.box_filter(gray([[0, 0, 0], [0, 255, 0], [0, 0, 0]]), 3)
        # 255 / 9 = 28.33
        assert out.pixels[1, 1] == 28

    def test_even_kernel(self):
        with pytest.raises(EvenKernel):
            F.box_filter(constant(1), 4)


class TestMedian:
    def test_impulse_removed(self):
        px = np.full((5, 5), 40)
        px[2, 2] = 255
        assert F.median_filter(ImageBuffer(px), 3) == constant(40, 5, 5)

    def test_k1_identity(self, rng):
        img = random_gray(rng)
        assert F.median_filter(img, 1) == img

    def test_row_by_hand(self):
        # replicated windows: [10 10 200] [10 200 30] [200 30 40] [30 40 0] [40 0 0]
        out = F.median_filter(gray([[10, 200, 30, 40, 0]]), 3)
        assert out.flat() == [10, 30, 40, 30, 0]

    def test_even_kernel(self):
        with pytest.raises(EvenKernel):
            F.median_filter(constant(1), 2)


class TestWiener:
    def test_constant(self):
        assert F.wiener_filter(constant(130), 5) == constant(130)

    def test_zero_noise_identity(self, rng):
        img = random_gray(rng)
        assert F.wiener_filter(img, 3, noise_var=0) == img

    def test_corner_by_hand(self):
        # corner window is [10 10 20 / 10 10 20 / 40 40 50]:
        # mean 210/9, variance 2000/9, gain (2000/9 - 100) / (2000/9) = 0.55
        # 210/9 + 0.55 * (10 - 210/9) = 16
        out = F.wiener_filter(gray([[10, 20, 30], [40, 50, 60], [70, 80, 90]]), 3, noise_var=100)
        assert out.pixels[0, 0] == 16
        assert out.pixels[1, 1] == 50

    def test_default_noise_is_mean_local_variance(self, rng):
        img = random_gray(rng)
        win = np.lib.stride_tricks.sliding_window_view(np.pad(img.pixels.astype(float), 1, mode="edge"), (3, 3))
        nu2 = win.reshape(16, 16, 9).var(axis=2).mean()
        assert F.wiener_filter(img, 3) == F.wiener_filter(img, 3, noise_var=nu2)

    def test_errors(self):
        with pytest.raises(EvenKernel):
            F.wiener_filter(constant(1), 1)
        with pytest.raises(NegativeNoiseVar):
            F.wiener_filter(constant(1), 3, noise_var=-1)


class TestUnsharp:
    def test_constant(self):
        assert F.unsharp_adaptive(constant(90)) == constant(90)

    def test_zero_gain_identity(self, rng):
        img = random_gray(rng)
        assert F.unsharp_adaptive(img, gain_high=0.0) == img

    def test_step_edge_overshoot(self):
        # x=1: box round(250/3)=83, mask -33, full gain -> 17; x=2 mirrors to 183
        img = gray([[50, 50, 150, 150]] * 3)
        out = F.unsharp_adaptive(img, k=3, gain_high=1.0, var_lo=0.0, var_hi=1.0)
        assert out.pixels[1].tolist() == [50, 17, 183, 150]

    def test_smooth_region_untouched(self, rng):
        # gentle ramp has local variance below var_lo
        img = ImageBuffer(np.tile(np.arange(20, 30), (6, 1)))
        assert F.unsharp_adaptive(img, var_lo=25, var_hi=400) == img

    @pytest.mark.parametrize("lo, hi, g", [(10, 10, 1), (-1, 5, 1), (0, 5, -1)])
    def test_invalid_band(self, lo, hi, g):
        with pytest.raises(InvalidVarianceBand):
            F.unsharp_adaptive(constant(1), 3, g, lo, hi)


class TestHaar:
    @settings(max_examples=40, deadline=None)
    @given(arrays(np.uint8, st.tuples(st.integers(1, 5).map(lambda n: 2 * n), st.integers(1, 5).map(lambda n: 2 * n))))
    def test_perfect_reconstruction(self, arr):
        back = F.haar_inverse(*F.haar_forward(arr))
        assert np.array_equal(back, arr.astype(float))

    def test_ll_convention(self):
        ll, hl, lh, hh = F.haar_forward(np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert (ll[0, 0], hl[0, 0], lh[0, 0], hh[0, 0]) == (5.0, -1.0, -2.0, 0.0)

    def test_odd_rejected(self):
        with pytest.raises(OddDimensions):
            F.haar_forward(np.zeros((3, 2)))


class TestDwtUpscale:
    def test_constant(self):
        out = F.dwt_upscale(constant(80, 4, 6))
        assert out == constant(80, 8, 12)

    def test_two_by_two_by_hand(self):
        # bilinear rows 0, 64, 191, 255; LH of both blocks is -64, LL replaced by 2*input:
        # top (0 -+ 64)/2 -> -32, 32; bottom (510 -+ 64)/2 -> 223, 287; then clamp
        out = F.dwt_upscale(gray([[0, 0], [255, 255]]))
        assert out.pixels.tolist() == [[0] * 4, [32] * 4, [223] * 4, [255] * 4]

    def test_doubles_size(self, rng):
        out = F.dwt_upscale(random_gray(rng, 6, 10))
        assert (out.width, out.height) == (20, 12)

    def test_odd_rejected(self):
        with pytest.raises(OddDimensions):
            F.dwt_upscale(constant(1, 3, 4))


class TestGaussianNoise:
    def test_sigma_zero_identity(self, rng):
        img = random_gray(rng)
        assert F.add_gaussian(img, 0, 7) == img

    def test_deterministic(self, rng):
        img = random_gray(rng)
        assert F.add_gaussian(img, 12, 99) == F.add_gaussian(img, 12, 99)
        assert F.add_gaussian(img, 12, 99) != F.add_gaussian(img, 12, 100)

    def test_pinned_bytes(self):
        # pins the Philox + Box-Muller draw order
        out = F.add_gaussian(constant(128, 1, 6), 10, 1)
        z = F.gaussian_draws(6, 1)
        assert out.flat() == [int(np.floor(128 + 10 * v + 0.5)) for v in z]

    def test_std_over_a_million_pixels(self):
        img = constant(128, *MILLION)
        diff = F.add_gaussian(img, 15, 2024).pixels.astype(float) - 128
        assert abs(diff.std() - 15) < 0.02 * 15
        assert abs(diff.mean()) < 0.05

    def test_draws_are_standard_normal(self):
        z = F.gaussian_draws(10**6, 3)
        assert abs(z.mean()) < 5e-3 and abs(z.std() - 1) < 5e-3


class TestImpulseNoise:
    def test_p0_identity(self, rng):
        img = random_gray(rng)
        assert F.add_impulse(img, 0, 1) == img

    def test_p1_all_extreme(self, rng):
        assert set(F.add_impulse(random_gray(rng), 1, 1).flat()) <= {0, 255}

    @pytest.mark.parametrize("p", [0.05, 0.2])
    def test_fraction_over_a_million_pixels(self, p):
        out = F.add_impulse(constant(128, *MILLION), p, 11).pixels
        frac = float((out != 128).mean())
        assert abs(frac - p) < 0.01 * p
        # salt and pepper in equal measure
        assert abs(float((out == 255).mean()) - p / 2) < 0.02 * p

    def test_rgb(self, rng):
        img = ImageBuffer(rng.integers(1, 255, size=(8, 8, 3)))
        assert F.add_impulse(img, 0.5, 3).channels == 3

    def test_noise_spec(self, rng):
        img = random_gray(rng)
        assert F.NoiseSpec("impulse", p=0.1, seed=4).apply(img) == F.add_impulse(img, 0.1, 4)
        with pytest.raises(ValueError):
            F.NoiseSpec("speckle")


class TestShapeAndRange:
    @settings(max_examples=40, deadline=None)
    @given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))), st.sampled_from([1, 3, 5]))
    def test_box_and_median_within_input_range(self, arr, k):
        img = ImageBuffer(arr)
        for out in (F.box_filter(img, k), F.median_filter(img, k)):
            assert out.pixels.shape == arr.shape
            assert arr.min() <= out.pixels.min() and out.pixels.max() <= arr.max()

    def test_wiener_unsharp_keep_shape(self, rng):
        img = random_gray(rng, 7, 11)
        assert F.wiener_filter(img, 5).pixels.shape == (7, 11)
        assert F.unsharp_adaptive(img).pixels.shape == (7, 11)


@pytest.mark.parametrize("path", CORPUS, ids=lambda p: p.stem)
class TestDenoisingImproves:
    """Strict PSNR improvement image by image on the frozen corpus."""

    def test_wiener_on_gaussian(self, path):
        clean = load(path)
        noisy = F.add_gaussian(clean, 15, 1)
        assert quality.psnr(clean, F.wiener_filter(noisy, 5)) > quality.psnr(clean, noisy)

    def test_median_on_impulse(self, path):
        clean = load(path)
        noisy = F.add_impulse(clean, 0.05, 1)
        assert quality.psnr(clean, F.median_filter(noisy, 3)) > quality.psnr(clean, noisy)
