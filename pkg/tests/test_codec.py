import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from oamlink.codec import (CodecError, GrayImage, PgmDepthError, PgmFormatError,
                           PgmTruncatedError, ber, bits_to_image, decode_pgm, encode_pgm,
                           image_to_bits, load_image, read_pgm, synthetic_image, write_pgm)
from oamlink.txarray import BitMatrix

images = st.tuples(st.integers(1, 12), st.integers(1, 12)).flatmap(
    lambda hw: hnp.arrays(np.uint8, hw).map(lambda a: GrayImage(a.shape[1], a.shape[0], a)))


def img1(value):
    return GrayImage(1, 1, np.array([[value]]))


class TestBitPlanes:
    def test_pixel_155(self):
        assert image_to_bits(img1(155)).bits[:, 0].tolist() == [1, 0, 0, 1, 1, 0, 1, 1]

    def test_lsb_first(self):
        assert image_to_bits(img1(155), msb_first=False).bits[:, 0].tolist() == [1, 1, 0, 1, 1, 0, 0, 1]

    @pytest.mark.parametrize("v,col", [(0, [0] * 8), (255, [1] * 8), (1, [0] * 7 + [1])])
    def test_extremes(self, v, col):
        assert image_to_bits(img1(v)).bits[:, 0].tolist() == col

    def test_row_major_order(self):
        img = GrayImage(3, 2, np.array([[1, 2, 3], [4, 5, 6]]))
        bits = image_to_bits(img).bits
        values = (bits * (1 << np.arange(7, -1, -1))[:, None]).sum(axis=0)
        assert values.tolist() == [1, 2, 3, 4, 5, 6]

    @given(images, st.booleans())
    def test_round_trip(self, img, msb):
        assert bits_to_image(image_to_bits(img, msb_first=msb), img.width, img.height, msb) == img

    def test_msb_flip_moves_pixel_by_128(self):
        img = synthetic_image(8)
        bits = image_to_bits(img).bits.copy()
        bits[0, 10] ^= 1
        out = bits_to_image(BitMatrix(bits), 8, 8)
        delta = out.pixels.astype(int) - img.pixels.astype(int)
        assert abs(delta.reshape(-1)[10]) == 128
        assert np.count_nonzero(delta) == 1

    def test_erased_channel_zeroed(self):
        bits = image_to_bits(img1(255))
        out = bits_to_image(BitMatrix(bits.bits, erased=(0, 7)), 1, 1)
        assert int(out.pixels[0, 0]) == 126

    def test_channel_count_enforced(self):
        with pytest.raises(CodecError):
            image_to_bits(img1(3), n_channels=4)
        with pytest.raises(CodecError):
            bits_to_image(BitMatrix(np.zeros((4, 1))), 1, 1)
        with pytest.raises(CodecError):
            bits_to_image(BitMatrix(np.zeros((8, 3))), 2, 2)

    def test_pixel_range(self):
        with pytest.raises(CodecError):
            GrayImage(1, 1, np.array([[256]]))


class TestBer:
    def test_identical(self):
        b = image_to_bits(synthetic_image(8))
        rep = ber(b, b)
        assert rep.aggregate_ber == 0 and rep.bit_errors == 0 and rep.pixel_errors == 0
        assert rep.spectral_efficiency == 8

    def test_complement(self):
        b = image_to_bits(synthetic_image(8))
        rep = ber(b, BitMatrix(1 - b.bits))
        assert rep.aggregate_ber == 1.0
        assert rep.per_channel_ber == [1.0] * 8

    def test_single_error(self):
        img = GrayImage(10, 10, np.full((10, 10), 155))
        bad = img.pixels.copy()
        bad[3, 4] ^= 0b00010000
        rep = ber(image_to_bits(img), image_to_bits(GrayImage(10, 10, bad)))
        assert rep.aggregate_ber == 1 / 800
        assert rep.pixel_errors == 1 and rep.total_bits == 800

    @given(hnp.arrays(np.uint8, (8, 24), elements=st.integers(0, 1)),
           hnp.arrays(np.uint8, (8, 24), elements=st.integers(0, 1)),
           st.permutations(range(24)))
    def test_symmetric_and_permutation_invariant(self, a, b, perm):
        ab = ber(BitMatrix(a), BitMatrix(b))
        assert ab.aggregate_ber == ber(BitMatrix(b), BitMatrix(a)).aggregate_ber
        p = ber(BitMatrix(a[:, perm]), BitMatrix(b[:, perm]))
        assert p.aggregate_ber == ab.aggregate_ber
        assert p.pixel_errors == ab.pixel_errors

    def test_shape_mismatch(self):
        with pytest.raises(CodecError):
            ber(BitMatrix(np.zeros((8, 2))), BitMatrix(np.zeros((8, 3))))


class TestPgm:
    def test_two_by_two(self):
        img = GrayImage(2, 2, np.array([[0, 64], [128, 255]]))
        data = encode_pgm(img)
        assert data == b"P5\n2 2\n255\n\x00\x40\x80\xff"
        assert decode_pgm(data) == img

    @given(images)
    def test_round_trip(self, img):
        assert decode_pgm(encode_pgm(img)) == img

    def test_comments_and_whitespace(self):
        data = b"P5 # magic\n# size follows\n 3\t1 \r\n#depth\n255\n\x01\x02\x03"
        assert decode_pgm(data).pixels.tolist() == [[1, 2, 3]]

    def test_raster_byte_resembling_whitespace(self):
        data = b"P5\n2 1\n255\n\x20\x0a"
        assert decode_pgm(data).pixels.tolist() == [[32, 10]]

    def test_sixteen_bit_rejected(self):
        with pytest.raises(PgmDepthError):
            decode_pgm(b"P5\n1 1\n65535\n\x00\x00")

    def test_truncated(self):
        with pytest.raises(PgmTruncatedError):
            decode_pgm(b"P5\n4 4\n255\n" + bytes(10))

    @pytest.mark.parametrize("data", [b"P2\n1 1\n255\n0", b"P5\n1 x\n255\n\x00",
                                      b"P5\n1 1", b"P5\n0 1\n255\n", b"P5\n1 1\n255"])
    def test_malformed(self, data):
        with pytest.raises(PgmFormatError):
            decode_pgm(data)

    def test_file_io_deterministic(self, tmp_path):
        img = synthetic_image(16)
        write_pgm(img, tmp_path / "a.pgm")
        write_pgm(img, tmp_path / "b.pgm")
        assert (tmp_path / "a.pgm").read_bytes() == (tmp_path / "b.pgm").read_bytes()
        assert read_pgm(tmp_path / "a.pgm") == img
        assert load_image(tmp_path / "a.pgm") == img


class TestSynthetic:
    def test_every_bit_plane_active(self):
        bits = image_to_bits(synthetic_image(64)).bits
        assert np.all(bits.any(axis=1)) and np.all((1 - bits).any(axis=1))

    def test_load_names(self):
        assert load_image("synthetic") == synthetic_image(64)
        assert load_image("synthetic:32").width == 32
