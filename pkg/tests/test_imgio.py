"""Strict binary PNM handling, rounding, and sidecar formats."""

import numpy as np
import pytest

from imapprox.imgio import (
    PnmParseError,
    RasterImage,
    read_labels,
    read_pnm,
    render_approximation,
    round_half_even,
    write_labels,
    write_pnm,
    write_series,
)
from imapprox.series import ErrorSeries
from imapprox.stats import ClusterStats, accumulate


class TestPnmRoundTrip:
    def test_gray(self, rng, tmp_path):
        img = RasterImage(rng.integers(0, 256, size=(5, 7)).astype(np.uint8))
        path = tmp_path / "x.pgm"
        write_pnm(path, img)
        back = read_pnm(path)
        assert back.maxval == 255
        assert back.is_gray
        assert (back.pixels == img.pixels).all()

    def test_color(self, rng, tmp_path):
        img = RasterImage(rng.integers(0, 256, size=(4, 3, 3)).astype(np.uint8))
        path = tmp_path / "x.ppm"
        write_pnm(path, img)
        back = read_pnm(path)
        assert not back.is_gray
        assert back.channels == 3
        assert (back.pixels == img.pixels).all()

    def test_canonical_header_bytes(self, tmp_path):
        img = RasterImage(np.zeros((3, 2), dtype=np.uint8), maxval=200)
        path = tmp_path / "x.pgm"
        write_pnm(path, img)
        data = path.read_bytes()
        assert data == b"P5\n2 3\n200\n" + b"\x00" * 6

    def test_rewrite_is_byte_identical(self, rng, tmp_path):
        img = RasterImage(rng.integers(0, 256, size=(6, 6)).astype(np.uint8))
        a, b = tmp_path / "a.pgm", tmp_path / "b.pgm"
        write_pnm(a, img)
        write_pnm(b, read_pnm(a))
        assert a.read_bytes() == b.read_bytes()


class TestPnmParsing:
    def write(self, tmp_path, blob):
        path = tmp_path / "in.pnm"
        path.write_bytes(blob)
        return path

    def test_header_comments_and_whitespace(self, tmp_path):
        blob = b"P5 # comment\n# another line\n 2\t2 #x\n255\n" + bytes([1, 2, 3, 4])
        img = read_pnm(self.write(tmp_path, blob))
        assert img.pixels.tolist() == [[1, 2], [3, 4]]

    def test_bad_magic_offset_zero(self, tmp_path):
        with pytest.raises(PnmParseError) as err:
            read_pnm(self.write(tmp_path, b"P2\n2 2\n255\n....."))
        assert err.value.offset == 0

    def test_zero_dimension(self, tmp_path):
        with pytest.raises(PnmParseError, match="dimensions"):
            read_pnm(self.write(tmp_path, b"P5\n0 2\n255\n"))

    def test_non_numeric_header(self, tmp_path):
        with pytest.raises(PnmParseError, match="width"):
            read_pnm(self.write(tmp_path, b"P5\nx 2\n255\n...."))

    def test_maxval_limits(self, tmp_path):
        with pytest.raises(PnmParseError, match="maxval"):
            read_pnm(self.write(tmp_path, b"P5\n2 2\n0\n" + b"\x00" * 4))
        with pytest.raises(PnmParseError, match="maxval"):
            read_pnm(self.write(tmp_path, b"P5\n2 2\n65535\n" + b"\x00" * 8))

    def test_short_payload(self, tmp_path):
        with pytest.raises(PnmParseError, match="payload"):
            read_pnm(self.write(tmp_path, b"P5\n2 2\n255\n" + b"\x00" * 3))

    def test_trailing_bytes(self, tmp_path):
        with pytest.raises(PnmParseError, match="trailing"):
            read_pnm(self.write(tmp_path, b"P5\n2 2\n255\n" + b"\x00" * 5))

    def test_sample_above_maxval(self, tmp_path):
        blob = b"P5\n2 2\n100\n" + bytes([0, 50, 100, 101])
        with pytest.raises(PnmParseError, match="maxval"):
            read_pnm(self.write(tmp_path, blob))

    def test_double_whitespace_before_payload_is_payload(self, tmp_path):
        # exactly one whitespace byte separates maxval from the payload;
        # an extra one shifts the raster and must break the byte count
        with pytest.raises(PnmParseError):
            read_pnm(self.write(tmp_path, b"P5\n2 2\n255\n\n" + b"\x00" * 4))

    def test_truncated_header(self, tmp_path):
        with pytest.raises(PnmParseError, match="truncated"):
            read_pnm(self.write(tmp_path, b"P5\n2"))


class TestRounding:
    @pytest.mark.parametrize("num,den,expected", [
        (1, 2, 0),    # 0.5 -> 0
        (3, 2, 2),    # 1.5 -> 2
        (5, 2, 2),    # 2.5 -> 2
        (7, 2, 4),    # 3.5 -> 4
        (-1, 2, 0),   # -0.5 -> 0
        (-3, 2, -2),  # -1.5 -> -2
        (7, 3, 2),
        (8, 3, 3),
        (200, 1, 200),
    ])
    def test_half_even(self, num, den, expected):
        assert round_half_even(num, den) == expected

    def test_matches_python_round_on_integers(self, rng):
        for _ in range(200):
            num = int(rng.integers(-10_000, 10_000))
            den = int(rng.integers(1, 50))
            from fractions import Fraction
            assert round_half_even(num, den) == round(Fraction(num, den))


class TestRender:
    def test_integer_stats_round_half_even(self):
        labels = np.array([[0, 1]])
        stats = {0: accumulate([(0,), (1,)]),    # mean 0.5 -> 0
                 1: accumulate([(1,), (2,)])}    # mean 1.5 -> 2
        img = render_approximation(labels, stats, 1)
        assert img.pixels.tolist() == [[0, 2]]

    def test_float_stats(self):
        labels = np.array([[0]])
        stats = {0: ClusterStats(2, (5.0,), 13.0)}
        img = render_approximation(labels, stats, 1)
        assert img.pixels.tolist() == [[2]]  # 2.5 rounds half to even

    def test_clamped_to_maxval(self):
        labels = np.array([[0]])
        stats = {0: ClusterStats(1, (300,), 90000)}
        img = render_approximation(labels, stats, 1, maxval=255)
        assert img.pixels.tolist() == [[255]]

    def test_color(self):
        labels = np.array([[0, 0], [1, 1]])
        stats = {0: accumulate([(10, 20, 30)]), 1: accumulate([(1, 2, 3)])}
        img = render_approximation(labels, stats, 3)
        assert img.pixels[0, 0].tolist() == [10, 20, 30]
        assert img.pixels[1, 1].tolist() == [1, 2, 3]


class TestSidecars:
    def test_series_csv_format(self, tmp_path):
        path = tmp_path / "series.csv"
        write_series(path, ErrorSeries(((1, 14.0), (2, 1.5), (3, 0.0)), 8))
        assert path.read_bytes() == b"1,14\n2,1.5\n3,0\n"

    def test_series_float_repr_round_trips(self, tmp_path):
        path = tmp_path / "series.csv"
        e = 1234.5600000000002
        write_series(path, ErrorSeries(((1, e),), 8))
        text = path.read_text().strip().split(",")[1]
        assert float(text) == e

    def test_labels_round_trip(self, rng, tmp_path):
        labels = rng.integers(0, 9, size=(6, 4)).astype(np.int32)
        path = tmp_path / "labels.bin"
        write_labels(path, labels)
        assert path.read_bytes().startswith(b"LBL1")
        back = read_labels(path)
        assert back.dtype == np.int32
        assert (back == labels).all()

    def test_labels_guards(self, tmp_path):
        with pytest.raises(ValueError):
            write_labels(tmp_path / "x", np.arange(4))
        path = tmp_path / "bad.bin"
        import struct
        path.write_bytes(b"LBL1" + struct.pack("<II", 2, 2) + b"\x00" * 12)
        with pytest.raises(ValueError):
            read_labels(path)
        path.write_bytes(b"NOPE" + b"\x00" * 8)
        with pytest.raises(ValueError):
            read_labels(path)
