import pytest
import torch
from scipy import stats

from trickbounds.errors import ConfigError, ParseError
from trickbounds.textcore import (
    DIGIT_TEXT,
    RAW_BYTES,
    Alphabet,
    RngSpec,
    Sequence,
    format_sequence,
    parse_sequence,
    random_sequence,
    read_sequence,
    serialize_sequence,
    splitmix64,
)


def test_alphabet_rejects_unary():
    with pytest.raises(ConfigError):
        Alphabet(1)
    assert Alphabet(2).symbol_bits == 1
    assert Alphabet(5).symbol_bits == 3


def test_sequence_rejects_out_of_range_symbol():
    with pytest.raises(ParseError) as info:
        Sequence.from_symbols([0, 1, 2], 2)
    assert info.value.position == 3
    assert info.value.symbol == 2


def test_window_linear_and_cyclic():
    seq = Sequence.from_symbols([0, 0, 1, 1], 2)
    assert seq.window(1, 2) == (0, 1)
    assert seq.window(3, 3, cyclic=True) == (1, 0, 0)
    assert str(seq) == "0011"


def test_parse_digit_text_strips_one_newline():
    seq = parse_sequence(b"0011\n")
    assert seq.symbols == (0, 0, 1, 1)
    assert seq.sigma == 2


def test_parse_digit_text_infers_sigma_from_largest_code():
    seq = parse_sequence(b"0A1")
    assert seq.symbols == (0, 10, 1)
    assert seq.sigma == 11
    assert parse_sequence(b"0000").sigma == 2
    assert parse_sequence(b"").n == 0


def test_parse_digit_text_reports_position():
    with pytest.raises(ParseError) as info:
        parse_sequence(b"0021", sigma=2)
    assert info.value.position == 3
    assert "position 3" in str(info.value)
    with pytest.raises(ParseError):
        parse_sequence(b"01-1")


def test_parse_raw_bytes():
    seq = parse_sequence(bytes([0, 255, 7]), RAW_BYTES)
    assert seq.symbols == (0, 255, 7)
    assert seq.sigma == 256
    with pytest.raises(ParseError) as info:
        parse_sequence(bytes([0, 1, 9]), RAW_BYTES, sigma=4)
    assert info.value.position == 3


def test_parse_rejects_bad_sigma_and_mode():
    with pytest.raises(ConfigError):
        parse_sequence(b"01", sigma=1)
    with pytest.raises(ConfigError):
        parse_sequence(b"01", mode="utf-9")


def test_serialize_and_read_back(tmp_path):
    seq = Sequence.from_symbols([3, 0, 2, 1], 4)
    assert format_sequence(seq) == "3021"
    path = tmp_path / "seq.txt"
    path.write_bytes(serialize_sequence(seq, DIGIT_TEXT) + b"\n")
    assert read_sequence(str(path), DIGIT_TEXT, sigma=4) == seq
    raw = tmp_path / "seq.bin"
    raw.write_bytes(serialize_sequence(seq, RAW_BYTES))
    assert read_sequence(str(raw), RAW_BYTES, sigma=4) == seq


def test_splitmix64_reference_value():
    assert splitmix64(0) == 0xE220A8397B1DCDAF


def test_rng_spec_validates_range():
    with pytest.raises(ConfigError):
        RngSpec(-1)
    with pytest.raises(ConfigError):
        RngSpec(1 << 64)
    RngSpec((1 << 64) - 1, (1 << 64) - 1).generator()


def test_random_sequence_is_reproducible_per_stream():
    alphabet = Alphabet(4)
    a = random_sequence(200, alphabet, RngSpec(7, 3))
    b = random_sequence(200, alphabet, RngSpec(7, 3))
    c = random_sequence(200, alphabet, RngSpec(7, 4))
    assert a == b
    assert a != c
    assert random_sequence(0, alphabet, RngSpec(7)).n == 0


def test_random_sequence_accepts_open_generator():
    gen = RngSpec(11).generator()
    first = random_sequence(50, Alphabet(2), gen)
    second = random_sequence(50, Alphabet(2), gen)
    assert first != second
    assert first == random_sequence(50, Alphabet(2), RngSpec(11))


def test_random_sequence_is_uniform():
    seq = random_sequence(40_000, Alphabet(4), RngSpec(2024))
    counts = torch.bincount(torch.tensor(seq.symbols), minlength=4).tolist()
    assert stats.chisquare(counts).pvalue > 1e-4


@pytest.mark.parametrize("stream", range(5))
def test_binary_streams_are_uniform(stream):
    n = 100_000
    seq = random_sequence(n, Alphabet(2), RngSpec(123, stream))
    counts = torch.bincount(torch.tensor(seq.symbols), minlength=2).tolist()
    assert stats.chisquare(counts).pvalue > 1e-6
    assert abs(counts[0] / n - 0.5) <= 3 * (0.25 / n) ** 0.5
