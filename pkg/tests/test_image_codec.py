import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from frqi import image_codec as ic
from frqi.builder import build_mary_circuit, build_mcry_circuit
from frqi.simulator import data_distribution, exact_probabilities

import oracles

FIG = [10, 85, 170, 255]


def images(max_n=2):
    return st.integers(1, max_n).flatmap(
        lambda n: st.lists(st.integers(0, 255), min_size=4 ** n, max_size=4 ** n)
    ).map(ic.Image.from_list)


# PGM -------------------------------------------------------------------------

def test_load_p5(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_bytes(b"P5\n2 2\n255\n" + bytes(FIG))
    img = ic.load_pgm(p)
    assert img.side == 2 and list(img.pixels) == FIG


def test_load_p2_with_comments(tmp_path):
    p = tmp_path / "a.pgm"
    p.write_text("P2\n# made by hand\n2 2\n255\n10 85\n170 255\n")
    assert list(ic.load_pgm(p).pixels) == FIG


def test_save_header_and_bytes(tmp_path):
    p = tmp_path / "z.pgm"
    ic.save_pgm(ic.Image(4, np.arange(16)), p)
    assert p.read_bytes() == b"P5\n4 4\n255\n" + bytes(range(16))
    ic.save_pgm(ic.Image(2, [0, 0, 0, 0]), p)
    assert p.read_bytes().endswith(b"\n255\n\x00\x00\x00\x00")


@pytest.mark.parametrize("data, err", [
    (b"P6\n2 2\n255\n" + bytes(4), ic.NotPGM),
    (b"hello", ic.NotPGM),
    (b"P5\n2 4\n255\n" + bytes(8), ic.NonSquare),
    (b"P5\n3 3\n255\n" + bytes(9), ic.SideNotPowerOfTwo),
    (b"P5\n2 2\n65535\n" + bytes(8), ic.MaxvalNot255),
    (b"P5\n2 2\n255\n" + bytes(3), ic.Truncated),
    (b"P2\n2 2\n255\n1 2 3", ic.Truncated),
    (b"P5\n1 1\n255\n" + bytes(1), ic.NonEncodable),
])
def test_load_errors(tmp_path, data, err):
    p = tmp_path / "bad.pgm"
    p.write_bytes(data)
    with pytest.raises(err):
        ic.load_pgm(p)


@given(images(3))
@settings(max_examples=30, deadline=None)
def test_pgm_roundtrip(img):
    assert ic.parse_pgm(ic.dump_pgm(img)) == img


def test_image_rejects_out_of_range():
    with pytest.raises(ic.NonEncodable):
        ic.Image(2, [0, 1, 2, 256])


# downscale -------------------------------------------------------------------

def test_downscale_constant():
    out = ic.downscale(ic.Image(4, [100] * 16), 2)
    assert list(out.pixels) == [100] * 4


def test_downscale_rounds_half_up():
    px = np.zeros((4, 4), dtype=np.uint8)
    px[0:2, 2:4] = [[0, 0], [255, 255]]
    px[2:, :] = 7
    out = ic.downscale(ic.Image(4, px), 2)
    assert out.as_array()[0, 1] == 128
    assert out.as_array()[1, 0] == 7


@pytest.mark.parametrize("target", [1, 3, 8])
def test_downscale_rejects(target):
    with pytest.raises(ic.IncompatibleSides):
        ic.downscale(ic.Image(4, [0] * 16), target)


# angles ----------------------------------------------------------------------

def test_linear_angles_match_figure_values():
    th = ic.gray_to_angles(ic.Image.from_list(FIG), "linear")
    np.testing.assert_allclose(th, [math.pi / 51, math.pi / 6, math.pi / 3, math.pi / 2], atol=1e-15)


def test_arcsin_endpoints():
    th = ic.gray_to_angles(ic.Image.from_list([0, 255, 0, 255]), "arcsin")
    np.testing.assert_allclose(th, [0, math.pi / 2, 0, math.pi / 2])


@pytest.mark.parametrize("mode", ["linear", "arcsin"])
def test_angles_monotone_and_in_range(mode):
    th = ic.gray_to_angles(ic.Image(16, np.arange(256)), mode)
    assert np.all(np.diff(th) > 0)
    assert th[0] == 0 and abs(th[-1] - math.pi / 2) < 1e-15
    assert np.all((th >= 0) & (th <= math.pi / 2))


# decoding --------------------------------------------------------------------

def test_decode_ideal_state_of_figure():
    th = ic.gray_to_angles(ic.Image.from_list(FIG))
    dist = oracles.frqi_distribution(th)
    assert list(ic.probs_to_image(dist, 1).pixels) == FIG


def test_decode_all_gray_zero():
    dist = np.r_[np.full(4, 0.25), np.zeros(4)]
    assert list(ic.probs_to_image(dist, 1).pixels) == [0] * 4


def test_decode_balanced_is_128():
    assert list(ic.probs_to_image(np.full(8, 0.125), 1).pixels) == [128] * 4


def test_decode_zero_mass_warns():
    dist = np.r_[0.5, 0, 0, 0, 0.5, 0, 0, 0]
    with pytest.warns(ic.ZeroMassWarning):
        img = ic.probs_to_image(dist, 1)
    assert list(img.pixels) == [128, 0, 0, 0]


def test_decode_rejects_wrong_size():
    with pytest.raises(ic.ImageError):
        ic.probs_to_image(np.full(16, 1 / 16), 1)


@given(st.lists(st.floats(0, 1), min_size=8, max_size=8).filter(lambda v: sum(v[:4]) + sum(v[4:]) > 0))
@settings(max_examples=60, deadline=None)
def test_ratio_linear_decode_matches_scalar_oracle(vals):
    dist = np.array(vals) / sum(vals)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ic.ZeroMassWarning)
        got = ic.probs_to_image(dist, 1).pixels
    for j in range(4):
        p0, p1 = dist[j], dist[4 + j]
        want = 0 if p0 + p1 == 0 else oracles.decode_ratio_linear(p0, p1)
        assert got[j] == want


@given(images(2))
@settings(max_examples=40, deadline=None)
def test_scaled_equals_ratio_for_arcsin_on_exact_states(img):
    dist = oracles.frqi_distribution(ic.gray_to_angles(img, "arcsin"))
    a = ic.probs_to_image(dist, img.n, "arcsin", "ratio")
    b = ic.probs_to_image(dist, img.n, "arcsin", "scaled")
    assert a == b == img


@given(images(2))
@settings(max_examples=40, deadline=None)
def test_scaled_linear_decode_inverts_exact_state(img):
    dist = oracles.frqi_distribution(ic.gray_to_angles(img, "linear"))
    assert ic.probs_to_image(dist, img.n, "linear", "scaled") == img


@pytest.mark.parametrize("builder", [build_mcry_circuit, build_mary_circuit])
@given(img=images(2))
@settings(max_examples=15, deadline=None)
def test_roundtrip_through_circuit_within_one_level(builder, img):
    c = builder(ic.gray_to_angles(img))
    dist = data_distribution(c, exact_probabilities(c))
    out = ic.probs_to_image(dist, img.n)
    assert np.abs(out.pixels.astype(int) - img.pixels.astype(int)).max() <= 1


# relative difference ---------------------------------------------------------

def test_relative_difference_example():
    d = ic.relative_difference(ic.Image.from_list(FIG), ic.Image.from_list([125] * 4))
    assert abs(d - 32.353) < 1e-3


def test_relative_difference_extremes():
    assert ic.relative_difference(ic.Image(2, [0] * 4), ic.Image(2, [255] * 4)) == 100.0
    assert ic.relative_difference(ic.Image(2, FIG), ic.Image(2, FIG)) == 0.0


def test_relative_difference_side_mismatch():
    with pytest.raises(ic.SideMismatch):
        ic.relative_difference(ic.Image(2, FIG), ic.Image(4, [0] * 16))


@given(images(1), images(1))
def test_relative_difference_properties(a, b):
    if a.side != b.side:
        return
    d = ic.relative_difference(a, b)
    assert d == ic.relative_difference(b, a)
    assert 0 <= d <= 100
    assert (d == 0) == (a == b)
