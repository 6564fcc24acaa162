import numpy as np
import pytest

from fringe_denoise.image_io import (
    BadMagicError,
    ImageFormatError,
    TruncatedFileError,
    UnsupportedMaxvalError,
    decode_fpd1,
    decode_pgm,
    encode_fpd1,
    encode_pgm,
    quantize_u8,
    read_image,
    write_image,
)


class TestPgm:
    def test_round_trip_bytes(self, tmp_path):
        img = np.array([[0.0, 128.0], [255.0, 7.0]])
        blob = encode_pgm(img)
        assert blob == b"P5\n2 2\n255\n" + bytes([0, 128, 255, 7])
        path = tmp_path / "img.pgm"
        path.write_bytes(blob)
        again = encode_pgm(read_image(path))
        assert again == blob

    def test_rounding_half_away_from_zero(self):
        assert quantize_u8(np.array([[127.5]]))[0, 0] == 128
        assert quantize_u8(np.array([[126.49]]))[0, 0] == 126

    def test_clamping(self):
        out = quantize_u8(np.array([[-3.7, 300.0]]))
        assert out.tolist() == [[0, 255]]

    def test_comment_and_whitespace_tolerant_parse(self):
        blob = b"P5\n# a comment\n 3\t2\n# another\n255\n" + bytes(range(6))
        img = decode_pgm(blob)
        assert img.shape == (2, 3)
        assert img.ravel().tolist() == list(range(6))

    def test_error_kinds(self):
        with pytest.raises(BadMagicError):
            decode_pgm(b"P6\n1 1\n255\n\x00")
        with pytest.raises(UnsupportedMaxvalError):
            decode_pgm(b"P5\n1 1\n65535\n\x00\x00")
        with pytest.raises(TruncatedFileError):
            decode_pgm(b"P5\n4 4\n255\n\x00\x00")


class TestFpd1:
    def test_payload_size(self):
        img = np.zeros((256, 256), dtype=np.float32)
        blob = encode_fpd1(img)
        assert len(blob) == 12 + 262_144

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        img = (rng.uniform(-10, 300, (7, 5)) / 3).astype(np.float32)
        path = tmp_path / "img.fpd1"
        write_image(img, path)
        back = read_image(path)
        np.testing.assert_array_equal(back.astype(np.float32), img)
        assert encode_fpd1(back) == path.read_bytes()

    def test_error_kinds(self):
        with pytest.raises(BadMagicError):
            decode_fpd1(b"XXXX" + b"\0" * 20)
        with pytest.raises(TruncatedFileError):
            decode_fpd1(b"FPD1" + np.uint32(4).tobytes() + np.uint32(4).tobytes() + b"\0" * 8)


class TestDispatch:
    def test_read_dispatches_on_magic(self, tmp_path):
        img = np.array([[1.0, 2.0], [3.0, 4.0]])
        p1 = tmp_path / "a.pgm"
        p2 = tmp_path / "b.fpd1"
        write_image(img, p1)
        write_image(img, p2)
        np.testing.assert_array_equal(read_image(p1), img)
        np.testing.assert_array_equal(read_image(p2), img)

    def test_unknown_magic(self, tmp_path):
        path = tmp_path / "junk.pgm"
        path.write_bytes(b"GIF89a")
        with pytest.raises(BadMagicError):
            read_image(path)

    def test_unknown_extension_on_write(self, tmp_path):
        with pytest.raises(ImageFormatError):
            write_image(np.zeros((2, 2)), tmp_path / "img.png")
