from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import CORPUS_DIR, gray
import oracles
from oracles import bilinear_1d
from vocprep import imagecore
from vocprep.errors import DataError, MalformedHeader, TruncatedPayload, UnsupportedMaxval, WrongChannelCount
from vocprep.imagecore import ImageBuffer, read_image, resize_bilinear, rgb_to_gray, write_image


def pgm(width, height, payload, maxval=255, magic=b"P5"):
    return magic + b" %d %d %d\n" % (width, height, maxval) + bytes(payload)


class TestReadImage:
    def test_gray_2x2(self):
        img = read_image(pgm(2, 2, [0, 64, 128, 255]))
        assert (img.width, img.height, img.channels) == (2, 2, 1)
        assert img.flat() == [0, 64, 128, 255]

    def test_rgb_1x1(self):
        img = read_image(pgm(1, 1, [10, 20, 30], magic=b"P6"))
        assert img.channels == 3
        assert img.pixels[0, 0].tolist() == [10, 20, 30]

    def test_16bit_maxval_rejected(self):
        with pytest.raises(UnsupportedMaxval):
            read_image(pgm(2, 2, [0] * 8, maxval=65535))

    def test_comments_in_header(self):
        data = b"P5\n# made by hand\n3 1\n# another\n255\n" + bytes([1, 2, 3])
        assert read_image(data).flat() == [1, 2, 3]

    @pytest.mark.parametrize(
        "data",
        [b"P2 1 1 255\n\x00", b"P5 x 1 255\n\x00", b"P5 1", b"", b"P51 1 255\n\x00"],
        ids=["ascii-magic", "non-numeric", "short-header", "empty", "no-space"],
    )
    def test_malformed_header(self, data):
        with pytest.raises(MalformedHeader):
            read_image(data)

    def test_truncated_payload(self):
        with pytest.raises(TruncatedPayload):
            read_image(pgm(2, 2, [1, 2, 3]))

    def test_trailing_bytes_rejected(self):
        with pytest.raises(TruncatedPayload):
            read_image(pgm(1, 1, [1, 2]))

    def test_errors_are_data_errors(self):
        with pytest.raises(DataError):
            read_image(b"nope")


class TestWriteImage:
    def test_header_format(self):
        assert write_image(gray([[7]])) == b"P5\n1 1\n255\n\x07"

    def test_rgb_2x3_roundtrip(self, rng):
        img = ImageBuffer(rng.integers(0, 256, size=(3, 2, 3)))
        data = write_image(img)
        assert data.startswith(b"P6\n2 3\n255\n")
        assert read_image(data) == img
        assert write_image(read_image(data)) == data

    @pytest.mark.parametrize("path", sorted(CORPUS_DIR.glob("*.pgm")), ids=lambda p: p.stem)
    def test_corpus_roundtrip_bytes(self, path):
        data = path.read_bytes()
        assert write_image(read_image(data)) == data

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.uint8, st.tuples(st.integers(1, 6), st.integers(1, 6), st.sampled_from([1, 3]))))
    def test_roundtrip_property(self, arr):
        img = ImageBuffer(arr)
        assert read_image(write_image(img)) == img


class TestImageBuffer:
    def test_immutable(self):
        img = gray([[1, 2]])
        with pytest.raises(ValueError):
            img.pixels[0, 0] = 9

    def test_from_flat(self):
        img = ImageBuffer.from_flat(3, 1, 1, [4, 5, 6])
        assert img.pixels.shape == (1, 3)

    def test_pixel_count_mismatch(self):
        with pytest.raises(ValueError):
            ImageBuffer.from_flat(2, 2, 1, [1, 2, 3])

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            gray([[256]])

    def test_equality_and_hash(self):
        a, b = gray([[1, 2]]), gray([[1, 2]])
        assert a == b and hash(a) == hash(b)
        assert a != gray([[2, 1]])


class TestRgbToGray:
    @pytest.mark.parametrize(
        "rgb, expected",
        [((0, 0, 0), 0), ((255, 255, 255), 255), ((255, 0, 0), 76), ((0, 255, 0), 150), ((0, 0, 255), 29)],
    )
    def test_known_values(self, rgb, expected):
        # 0.587*255 = 149.685, 0.114*255 = 29.07
        img = ImageBuffer(np.array(rgb).reshape(1, 1, 3))
        assert rgb_to_gray(img).flat() == [expected]

    def test_gray_input_rejected(self):
        with pytest.raises(WrongChannelCount):
            rgb_to_gray(gray([[1]]))

    @given(st.integers(0, 255))
    def test_equal_channels_keep_value(self, v):
        img = ImageBuffer(np.full((2, 2, 3), v))
        assert set(rgb_to_gray(img).flat()) == {v}


class TestResize:
    def test_same_dims_identity(self, rng):
        img = ImageBuffer(rng.integers(0, 256, size=(5, 7)))
        assert resize_bilinear(img, 7, 5) == img

    def test_constant(self):
        out = resize_bilinear(gray([[100, 100], [100, 100]]), 4, 4)
        assert out.flat() == [100] * 16

    def test_row_upscale(self):
        # source x = (i + 0.5) / 2 - 0.5 -> -0.25, 0.25, 0.75, 1.25 -> clamp
        # values 0, 63.75, 191.25, 255
        out = resize_bilinear(gray([[0, 255]]), 4, 1)
        assert out.flat() == [0, 64, 191, 255]

    @pytest.mark.parametrize("n_out", [1, 3, 5, 8, 13])
    def test_row_matches_oracle(self, rng, n_out):
        row = rng.integers(0, 256, size=6).tolist()
        out = resize_bilinear(gray([row]), n_out, 1)
        assert out.flat() == bilinear_1d(row, n_out)

    def test_rgb(self, rng):
        img = ImageBuffer(rng.integers(0, 256, size=(4, 4, 3)))
        out = resize_bilinear(img, 8, 2)
        assert out.pixels.shape == (2, 8, 3)

    @settings(max_examples=40, deadline=None)
    @given(
        arrays(np.uint8, st.tuples(st.integers(1, 8), st.integers(1, 8))),
        st.integers(1, 12),
        st.integers(1, 12),
    )
    def test_range_property(self, arr, w, h):
        out = resize_bilinear(ImageBuffer(arr), w, h).pixels
        assert out.min() >= arr.min() and out.max() <= arr.max()


class TestRounding:
    @pytest.mark.parametrize("x, expected", [(0.5, 1), (1.5, 2), (2.5, 3), (-0.5, -1), (-2.5, -3), (2.4999, 2)])
    def test_half_away(self, x, expected):
        assert imagecore.round_half_away(x) == expected

    @given(st.integers(0, 10**6), st.integers(1, 10**4))
    def test_div_round_matches_fraction(self, num, den):
        assert int(imagecore.div_round(num, den)) == oracles.round_half_away(Fraction(num, den))
