import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Tuple, Union

import torch

from trickbounds.errors import ConfigError, ParseError

logger = logging.getLogger(__name__)

RAW_BYTES = "raw-bytes"
DIGIT_TEXT = "digit-text"
MODES = (RAW_BYTES, DIGIT_TEXT)

# digit-text symbol codes: '0'..'9' -> 0..9, 'A'..'Z' -> 10..35, 'a'..'z' -> 36..61
DIGITS = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
_DIGIT_CODES = {ch: i for i, ch in enumerate(DIGITS)}

RAW_BYTES_SIGMA = 256
MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Alphabet:
    sigma: int

    def __post_init__(self):
        if not isinstance(self.sigma, int) or self.sigma < 2:
            raise ConfigError(f"alphabet size must be an integer >= 2, got {self.sigma!r}")

    @property
    def symbol_bits(self) -> int:
        """Bits needed to pack one symbol code."""
        return (self.sigma - 1).bit_length()


@dataclass(frozen=True)
class Sequence:
    """Immutable string of dense symbol codes in ``[0, sigma)``."""

    symbols: Tuple[int, ...]
    alphabet: Alphabet

    def __post_init__(self):
        sigma = self.alphabet.sigma
        for pos, sym in enumerate(self.symbols, start=1):
            if not 0 <= sym < sigma:
                raise ParseError(pos, sym, sigma)

    @classmethod
    def from_symbols(cls, symbols: Iterable[int], sigma: int) -> "Sequence":
        return cls(tuple(int(s) for s in symbols), Alphabet(sigma))

    @property
    def sigma(self) -> int:
        return self.alphabet.sigma

    @property
    def n(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    def __getitem__(self, index):
        return self.symbols[index]

    def window(self, start: int, k: int, cyclic: bool = False) -> Tuple[int, ...]:
        """The k symbols starting at 0-based ``start``; wraps around when ``cyclic``."""
        if cyclic:
            n = len(self.symbols)
            return tuple(self.symbols[(start + j) % n] for j in range(k))
        return self.symbols[start:start + k]

    def __str__(self) -> str:
        if self.sigma <= len(DIGITS):
            return format_sequence(self)
        return ",".join(str(s) for s in self.symbols)


# ---------------------------------------------------------------------------
# Seeded streams
# ---------------------------------------------------------------------------
def splitmix64(x: int) -> int:
    """SplitMix64 finalizer: a bijective 64-bit mix."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngSpec:
    """(master_seed, stream_index) names one reproducible random stream.

    The stream is a CPU ``torch.Generator`` seeded with
    ``splitmix64(master_seed ^ splitmix64(stream_index))``.
    """

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_index"):
            value = getattr(self, name)
            if not isinstance(value, int) or not 0 <= value <= MASK64:
                raise ConfigError(f"{name} must be a 64-bit unsigned integer, got {value!r}")

    @property
    def derived_seed(self) -> int:
        return splitmix64(self.master_seed ^ splitmix64(self.stream_index))

    def with_stream(self, stream_index: int) -> "RngSpec":
        return RngSpec(self.master_seed, stream_index)

    def generator(self) -> torch.Generator:
        gen = torch.Generator()
        gen.manual_seed(self.derived_seed)
        return gen


def random_sequence(n: int, alphabet: Alphabet, rng: Union[RngSpec, torch.Generator]) -> Sequence:
    """n independent uniform symbols, fully determined by ``rng``.

    ``rng`` may also be a generator already opened from an RngSpec, so one trial
    can draw several sequences from its own stream.
    """
    if n < 0:
        raise ConfigError(f"sequence length must be non-negative, got {n}")
    if n == 0:
        return Sequence((), alphabet)
    gen = rng.generator() if isinstance(rng, RngSpec) else rng
    draws = torch.randint(0, alphabet.sigma, (n,), generator=gen, dtype=torch.int64)
    return Sequence(tuple(draws.tolist()), alphabet)


# ---------------------------------------------------------------------------
# Ingestion / serialization
# ---------------------------------------------------------------------------
def _strip_newline(raw: bytes) -> bytes:
    if raw.endswith(b"\r\n"):
        return raw[:-2]
    if raw.endswith(b"\n"):
        return raw[:-1]
    return raw


def parse_sequence(raw: bytes, mode: str = DIGIT_TEXT, sigma: Optional[int] = None) -> Sequence:
    """Turn a byte stream into a Sequence.

    raw-bytes: every byte is a symbol code (default sigma 256).
    digit-text: one symbol per character of ``DIGITS``, one trailing newline ignored;
    without an explicit sigma the alphabet is sized to the largest code read (at least 2).
    Out-of-alphabet input raises ParseError with the 1-based position.
    """
    if isinstance(raw, str):
        raw = raw.encode("ascii", errors="replace")
    if sigma is not None and sigma < 2:
        raise ConfigError(f"alphabet size must be >= 2, got {sigma}")

    if mode == RAW_BYTES:
        sigma = RAW_BYTES_SIGMA if sigma is None else sigma
        for pos, byte in enumerate(raw, start=1):
            if byte >= sigma:
                raise ParseError(pos, byte, sigma)
        return Sequence(tuple(raw), Alphabet(sigma))

    if mode != DIGIT_TEXT:
        raise ConfigError(f"unknown input mode {mode!r}; expected one of {', '.join(MODES)}")

    text = _strip_newline(raw).decode("ascii", errors="replace")
    limit = len(DIGITS) if sigma is None else sigma
    codes = []
    for pos, ch in enumerate(text, start=1):
        code = _DIGIT_CODES.get(ch)
        if code is None or code >= limit:
            raise ParseError(pos, ch, limit)
        codes.append(code)
    if sigma is None:
        sigma = max(2, max(codes, default=0) + 1)
    return Sequence(tuple(codes), Alphabet(sigma))


def format_sequence(seq: Sequence) -> str:
    if seq.sigma > len(DIGITS):
        raise ConfigError(f"digit-text covers at most {len(DIGITS)} symbols, alphabet has {seq.sigma}")
    return "".join(DIGITS[s] for s in seq.symbols)


def serialize_sequence(seq: Sequence, mode: str = DIGIT_TEXT) -> bytes:
    """Inverse of parse_sequence for the given mode."""
    if mode == RAW_BYTES:
        if seq.sigma > RAW_BYTES_SIGMA:
            raise ConfigError(f"raw-bytes covers at most 256 symbols, alphabet has {seq.sigma}")
        return bytes(seq.symbols)
    if mode == DIGIT_TEXT:
        return format_sequence(seq).encode("ascii")
    raise ConfigError(f"unknown input mode {mode!r}; expected one of {', '.join(MODES)}")


def read_sequence(path: str, mode: str = DIGIT_TEXT, sigma: Optional[int] = None) -> Sequence:
    with open(path, "rb") as f:
        raw = f.read()
    seq = parse_sequence(raw, mode=mode, sigma=sigma)
    logger.debug(f"Read {len(seq)} symbols (sigma={seq.sigma}) from {path}")
    return seq
