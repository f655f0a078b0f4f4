import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence as Seq, Tuple, Union

from trickbounds.errors import ConfigError
from trickbounds.textcore import Sequence

logger = logging.getLogger(__name__)

LINEAR = "linear"
CYCLIC = "cyclic"
CONVENTIONS = (LINEAR, CYCLIC)

DEFAULT_EPSILON = 0.1
THRESHOLD_SLACK = 1e-9
PACKED_KEY_BITS = 64   # contexts packed into one machine word up to this many bits

ContextKey = Union[int, bytes, Tuple[int, ...]]


def _check_args(seq: Sequence, k: int, convention: str, min_k: int = 1):
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown context convention {convention!r}; expected one of {', '.join(CONVENTIONS)}")
    if not isinstance(k, int) or k < min_k:
        raise ConfigError(f"order k must be an integer >= {min_k}, got {k!r}")
    if convention == CYCLIC and k > 0 and len(seq) < k:
        raise ConfigError(f"cyclic convention needs n >= k (n={len(seq)}, k={k})")


def _contributing_positions(n: int, k: int, convention: str) -> int:
    """Positions that carry a (context, successor) pair."""
    if convention == CYCLIC:
        return n
    return max(n - k, 0)


# ---------------------------------------------------------------------------
# Context keys
# ---------------------------------------------------------------------------
class _KeyCodec:
    """Maps k-windows to dict keys: one packed int when k symbols fit in
    PACKED_KEY_BITS bits, else a byte string (or a tuple past 256 symbols)."""

    def __init__(self, sigma: int, k: int):
        self.sigma = sigma
        self.k = k
        self.bits = max(1, (sigma - 1).bit_length())
        self.packed = k * self.bits <= PACKED_KEY_BITS
        self.mask = (1 << (k * self.bits)) - 1

    def keys(self, ext: Seq[int], count: int) -> Iterator[ContextKey]:
        """Keys of the windows ext[i:i+k] for i in [0, count)."""
        if count <= 0:
            return
        k = self.k
        if self.packed:
            bits, mask = self.bits, self.mask
            key = 0
            for j in range(k - 1):
                key = (key << bits) | ext[j]
            for i in range(count):
                key = ((key << bits) | ext[i + k - 1]) & mask
                yield key
        elif self.sigma <= 256:
            for i in range(count):
                yield bytes(ext[i:i + k])
        else:
            for i in range(count):
                yield tuple(ext[i:i + k])

    def encode(self, context: Seq[int]) -> ContextKey:
        return next(self.keys(tuple(context), 1))

    def decode(self, key: ContextKey) -> Tuple[int, ...]:
        if not self.packed:
            return tuple(key)
        sym_mask = (1 << self.bits) - 1
        out = [0] * self.k
        for j in range(self.k - 1, -1, -1):
            out[j] = key & sym_mask
            key >>= self.bits
        return tuple(out)


def _extended(seq: Sequence, k: int, convention: str, extra: int) -> Tuple[int, ...]:
    if convention == CYCLIC:
        return seq.symbols + seq.symbols[:k + extra - 1]
    return seq.symbols


def _window_keys(seq: Sequence, k: int, convention: str, codec: _KeyCodec) -> Iterator[ContextKey]:
    """Keys of every k-window: n - k + 1 linear windows, n cyclic ones."""
    n = len(seq)
    count = n if convention == CYCLIC else max(n - k + 1, 0)
    return codec.keys(_extended(seq, k, convention, 0), count)


# ---------------------------------------------------------------------------
# Context table
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class ContextTable:
    """Successor counts per k-context.

    ``entries`` maps a context key to {successor symbol: count}; only nonzero counts
    are stored. ``successor_vector`` materializes the length-sigma vector.
    """

    k: int
    convention: str
    sigma: int
    total_positions: int
    entries: Dict[ContextKey, Dict[int, int]]
    _codec: _KeyCodec = field(repr=False)

    @property
    def packed(self) -> bool:
        return self._codec.packed

    def __len__(self) -> int:
        return len(self.entries)

    def contexts(self) -> List[Tuple[int, ...]]:
        return sorted(self._codec.decode(key) for key in self.entries)

    def successor_vector(self, context: Seq[int]) -> Tuple[int, ...]:
        if len(context) != self.k:
            raise ConfigError(f"context has length {len(context)}, table order is {self.k}")
        counts = self.entries.get(self._codec.encode(context), {})
        return tuple(counts.get(a, 0) for a in range(self.sigma))

    def items(self) -> Iterator[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
        for context in self.contexts():
            yield context, self.successor_vector(context)

    def is_deterministic(self) -> bool:
        """True when every context has at most one distinct successor."""
        return all(len(counts) <= 1 for counts in self.entries.values())


def build_context_table(seq: Sequence, k: int, convention: str = LINEAR) -> ContextTable:
    _check_args(seq, k, convention)
    n = len(seq)
    codec = _KeyCodec(seq.sigma, k)
    total = _contributing_positions(n, k, convention)
    ext = _extended(seq, k, convention, 1)
    entries: Dict[ContextKey, Dict[int, int]] = {}
    for i, key in enumerate(codec.keys(ext, total)):
        succ = ext[i + k]
        counts = entries.get(key)
        if counts is None:
            entries[key] = {succ: 1}
        else:
            counts[succ] = counts.get(succ, 0) + 1
    return ContextTable(k, convention, seq.sigma, total, entries, codec)


# ---------------------------------------------------------------------------
# Entropy
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EntropyReport:
    n: int
    sigma: int
    k: int
    convention: str
    h_value: float
    total_bits: float
    context_count: int

    def as_record(self) -> dict:
        return {
            "n": self.n,
            "sigma": self.sigma,
            "k": self.k,
            "convention": self.convention,
            "h_value": self.h_value,
            "total_bits": self.total_bits,
            "context_count": self.context_count,
        }


def _weighted_entropy_bits(count_vectors: Iterable[Iterable[int]]) -> float:
    """Sum over vectors of |v| * H0(v), i.e. sum of c * log2(|v| / c) over nonzero c.

    math.fsum makes the result independent of the order the vectors arrive in.
    """
    terms = []
    for counts in count_vectors:
        counts = [c for c in counts if c]
        total = sum(counts)
        for c in counts:
            terms.append(c * math.log2(total / c))
    return math.fsum(terms)


def _per_symbol(bits: float, n: int, sigma: int) -> float:
    if n == 0 or bits == 0.0:
        return 0.0
    return min(bits / n, math.log2(sigma))


def h0(seq: Sequence) -> float:
    """0th-order empirical entropy in bits per symbol; 0.0 for the empty sequence."""
    n = len(seq)
    if n == 0:
        return 0.0
    return _per_symbol(_weighted_entropy_bits([Counter(seq.symbols).values()]), n, seq.sigma)


def _report(seq: Sequence, k: int, convention: str, h_value: float, context_count: int) -> EntropyReport:
    n = len(seq)
    return EntropyReport(n, seq.sigma, k, convention, h_value, n * h_value, context_count)


def hk(seq: Sequence, k: int, convention: str = LINEAR) -> EntropyReport:
    """k-th order empirical entropy, normalized by n (not by the number of contexts' positions)."""
    _check_args(seq, k, convention, min_k=0)
    if k == 0:
        return _report(seq, 0, convention, h0(seq), 1 if len(seq) else 0)
    table = build_context_table(seq, k, convention)
    if table.is_deterministic():
        h_value = 0.0
    else:
        h_value = _per_symbol(_weighted_entropy_bits(c.values() for c in table.entries.values()), len(seq), seq.sigma)
    return _report(seq, k, convention, h_value, len(table))


def hk_bruteforce(seq: Sequence, k: int, convention: str = LINEAR) -> EntropyReport:
    """Reference H_k by literal scanning: no hashing, O(n^2 k). Testing oracle only."""
    _check_args(seq, k, convention, min_k=0)
    n = len(seq)
    s = seq.symbols
    contexts = []   # [context symbols, successor counts of length sigma]
    for i in range(_contributing_positions(n, k, convention) if k else n):
        context = [s[(i + j) % n] for j in range(k)]
        succ = s[(i + k) % n]
        for entry in contexts:
            if entry[0] == context:
                entry[1][succ] += 1
                break
        else:
            counts = [0] * seq.sigma
            counts[succ] = 1
            contexts.append([context, counts])
    deterministic = all(sum(1 for c in counts if c) <= 1 for _, counts in contexts)
    if deterministic and k > 0:
        h_value = 0.0
    else:
        h_value = _per_symbol(_weighted_entropy_bits(counts for _, counts in contexts), n, seq.sigma)
    return _report(seq, k, convention, h_value, len(contexts))


# ---------------------------------------------------------------------------
# Matches
# ---------------------------------------------------------------------------
def match_count(seq: Sequence, k: int, convention: str = LINEAR) -> int:
    """Unordered pairs of window positions whose k-tuples are equal."""
    _check_args(seq, k, convention)
    multiplicity = Counter(_window_keys(seq, k, convention, _KeyCodec(seq.sigma, k)))
    return sum(m * (m - 1) // 2 for m in multiplicity.values())


def first_repeat(seq: Sequence, k: int, convention: str = LINEAR) -> Optional[Tuple[int, int]]:
    """1-based positions of the first window that repeats an earlier one, or None."""
    _check_args(seq, k, convention)
    seen: Dict[ContextKey, int] = {}
    for i, key in enumerate(_window_keys(seq, k, convention, _KeyCodec(seq.sigma, k))):
        first = seen.setdefault(key, i)
        if first != i:
            return first + 1, i + 1
    return None


def expected_match_count(n: int, k: int, sigma: int) -> float:
    """Exact E[linear match_count] for a uniform memoryless string, overlapping pairs included."""
    windows = max(n - k + 1, 0)
    return math.comb(windows, 2) / sigma ** k


def pair_match_bound(n: int, k: int, sigma: int) -> float:
    return math.comb(n, 2) / sigma ** k


# ---------------------------------------------------------------------------
# Compressibility report
# ---------------------------------------------------------------------------
def threshold_flags(n: int, sigma: int, k: int, epsilon: float = DEFAULT_EPSILON) -> Dict[str, bool]:
    """Which lower-bound regimes k falls in. Report-only; nothing is proved here."""
    if n < 1:
        return {"log_sigma_n": False, "one_plus_epsilon": False, "two_plus_epsilon": False}
    # compare in natural-log units with slack so exact powers are not lost to rounding
    k_log = k * math.log(sigma)
    log_n = math.log(n)
    return {
        "log_sigma_n": sigma ** k >= n,
        "one_plus_epsilon": k_log >= (1 + epsilon) * log_n - THRESHOLD_SLACK,
        "two_plus_epsilon": k_log >= (2 + epsilon) * log_n - THRESHOLD_SLACK,
    }


@dataclass(frozen=True)
class CompressibilityRow:
    report: EntropyReport
    thresholds: Dict[str, bool]

    def as_record(self) -> dict:
        return {
            "k": self.report.k,
            "h_value": self.report.h_value,
            "total_bits": self.report.total_bits,
            "context_count": self.report.context_count,
            "thresholds": dict(self.thresholds),
        }


def compressibility_report(
    seq: Sequence,
    k_max: int,
    epsilon: float = DEFAULT_EPSILON,
    convention: str = LINEAR,
) -> List[CompressibilityRow]:
    """One row per k in [0, k_max] with the H_k report and the regime flags."""
    if not isinstance(k_max, int) or k_max < 0:
        raise ConfigError(f"k_max must be a non-negative integer, got {k_max!r}")
    if epsilon < 0:
        raise ConfigError(f"epsilon must be non-negative, got {epsilon}")
    n = len(seq)
    rows = []
    for k in range(k_max + 1):
        if convention == CYCLIC and k > n:
            logger.warning(f"Skipping cyclic rows k={k}..{k_max}: cyclic contexts need n >= k (n={n})")
            break
        report = hk(seq, k, convention)
        logger.debug(f"k={k} h={report.h_value:.6f} contexts={report.context_count}")
        rows.append(CompressibilityRow(report, threshold_flags(n, seq.sigma, k, epsilon)))
    return rows
