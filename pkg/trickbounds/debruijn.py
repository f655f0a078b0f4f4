import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch

from trickbounds.errors import ConfigError, SizeError
from trickbounds.textcore import Alphabet, RngSpec, Sequence

logger = logging.getLogger(__name__)

GREEDY_LEAST = "greedy-least"
EULERIAN_RANDOM = "eulerian-random"
LYNDON = "lyndon"
STRATEGIES = (GREEDY_LEAST, EULERIAN_RANDOM, LYNDON)

GENERATION_LIMIT = 1 << 22         # longest cycle db_generate will build
MAX_COUNT_DIGITS = 10 ** 6         # decimal digits db_count may produce
ENUMERATION_MAX_LENGTH = 16        # sigma^k cap for exhaustive enumeration
ENUMERATION_MAX_COUNT = 10 ** 5


@dataclass(frozen=True)
class DeBruijnSpec:
    sigma: int
    order: int

    def __post_init__(self):
        if not isinstance(self.sigma, int) or self.sigma < 2:
            raise ConfigError(f"De Bruijn alphabet size must be >= 2, got {self.sigma!r}")
        if not isinstance(self.order, int) or self.order < 1:
            raise ConfigError(f"De Bruijn order must be >= 1, got {self.order!r}")

    @property
    def length(self) -> int:
        return self.sigma ** self.order

    @property
    def alphabet(self) -> Alphabet:
        return Alphabet(self.sigma)


@dataclass(frozen=True)
class DeBruijnSeq:
    spec: DeBruijnSpec
    seq: Sequence

    def __len__(self) -> int:
        return len(self.seq)


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    reason: str = ""
    position: Optional[int] = None         # 1-based start of the offending window
    first_position: Optional[int] = None   # 1-based start of its earlier occurrence
    duplicate: Optional[Tuple[int, ...]] = None

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "ok"
        if self.duplicate is not None:
            tup = "".join(str(s) if s < 10 else f"[{s}]" for s in self.duplicate)
            return f"duplicate k-tuple {tup} at position {self.position} (first seen at {self.first_position})"
        return self.reason


def canonical_rotation(symbols: List[int], k: int) -> List[int]:
    """Rotate a cyclic sequence so that it starts with the window 0^k."""
    n = len(symbols)
    run = 0
    # find the end of a run of k zeros, scanning the doubled sequence
    for i in range(2 * n):
        if symbols[i % n] == 0:
            run += 1
            if run >= k:
                start = (i - k + 1) % n
                return symbols[start:] + symbols[:start]
        else:
            run = 0
    raise RuntimeError(f"sequence has no 0^{k} window; cannot canonicalize")


def _check_generation_size(spec: DeBruijnSpec):
    if spec.length > GENERATION_LIMIT:
        raise SizeError(f"sigma^k = {spec.sigma}^{spec.order} exceeds the generation limit {GENERATION_LIMIT}")


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------
def _greedy_least(spec: DeBruijnSpec) -> List[int]:
    # Prefer-smallest walk seeded with (sigma-1)^k; dropping the first k-1 symbols of
    # the walk leaves a cycle whose 0^k rotation is the lexicographically least one.
    sigma, k = spec.sigma, spec.order
    width = sigma ** (k - 1)
    node = width - 1                      # last k-1 symbols, all sigma-1
    walk = [sigma - 1] * k
    used = {node * sigma + sigma - 1}
    for _ in range(spec.length - 1):
        for a in range(sigma):
            edge = node * sigma + a
            if edge not in used:
                used.add(edge)
                walk.append(a)
                node = edge % width
                break
        else:
            raise RuntimeError(f"greedy walk stuck after {len(walk)} symbols")
    return canonical_rotation(walk[k - 1:], k)


def _eulerian_random(spec: DeBruijnSpec, rng: RngSpec) -> List[int]:
    # Hierholzer on the order-(k-1) De Bruijn graph with seeded out-edge orders.
    sigma, k = spec.sigma, spec.order
    width = sigma ** (k - 1)
    order = torch.rand((width, sigma), generator=rng.generator()).argsort(dim=1).tolist()
    stack = [(0, -1)]
    labels = []
    while stack:
        node, label = stack[-1]
        pending = order[node]
        if pending:
            a = pending.pop()
            stack.append(((node * sigma + a) % width, a))
        else:
            stack.pop()
            if label >= 0:
                labels.append(label)
    labels.reverse()
    return canonical_rotation(labels, k)


def _lyndon(spec: DeBruijnSpec) -> List[int]:
    # FKM: concatenate, in lexicographic order, the Lyndon words whose length divides k.
    sigma, k = spec.sigma, spec.order
    out = []
    word = [0] * (k + 1)

    def gen(t, p):
        if t > k:
            if k % p == 0:
                out.extend(word[1:p + 1])
            return
        word[t] = word[t - p]
        gen(t + 1, p)
        for a in range(word[t - p] + 1, sigma):
            word[t] = a
            gen(t + 1, t)

    gen(1, 1)
    return canonical_rotation(out, k)


def db_generate(spec: DeBruijnSpec, strategy: str = GREEDY_LEAST, rng: Optional[RngSpec] = None) -> DeBruijnSeq:
    """Build a verified De Bruijn cycle, rotated to start at 0^k.

    eulerian-random follows a seeded random Eulerian circuit; the result is not
    uniformly distributed over all De Bruijn cycles.
    """
    _check_generation_size(spec)
    if strategy == GREEDY_LEAST:
        symbols = _greedy_least(spec)
    elif strategy == EULERIAN_RANDOM:
        if rng is None:
            raise ConfigError("eulerian-random generation needs an RngSpec")
        symbols = _eulerian_random(spec, rng)
    elif strategy == LYNDON:
        if spec.order > 64:
            raise SizeError("lyndon strategy recurses once per symbol of order; order must be <= 64")
        symbols = _lyndon(spec)
    else:
        raise ConfigError(f"unknown strategy {strategy!r}; expected one of {', '.join(STRATEGIES)}")

    seq = Sequence(tuple(symbols), spec.alphabet)
    result = db_verify(seq, spec)
    if not result:
        raise RuntimeError(f"{strategy} produced an invalid cycle: {result.describe()}")
    logger.debug(f"Generated De Bruijn cycle sigma={spec.sigma} k={spec.order} via {strategy}")
    return DeBruijnSeq(spec, seq)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------
def db_verify(candidate: Sequence, spec: DeBruijnSpec) -> VerifyResult:
    """Length sigma^k and all cyclic k-windows distinct (hence every k-tuple exactly once)."""
    n = len(candidate)
    if n != spec.length:
        return VerifyResult(False, f"length {n} != sigma^k = {spec.length}")
    for pos, sym in enumerate(candidate.symbols, start=1):
        if sym >= spec.sigma:
            return VerifyResult(False, f"symbol {sym} at position {pos} is outside the alphabet of size {spec.sigma}")
    k = spec.order
    s = candidate.symbols + candidate.symbols[:k - 1]
    seen = {}
    for i in range(n):
        window = s[i:i + k]
        first = seen.setdefault(window, i)
        if first != i:
            return VerifyResult(False, "duplicate k-tuple", i + 1, first + 1, window)
    return VerifyResult(True)


# ---------------------------------------------------------------------------
# Counting
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CountBits:
    log2_count: float
    ratio: float          # log2(count) / (sigma^k * log2 sigma)


def db_count_bits(spec: DeBruijnSpec) -> CountBits:
    """log2((sigma!)^(sigma^(k-1)) / sigma^k) in closed form, no big integers."""
    sigma, k = spec.sigma, spec.order
    log2_fact = math.fsum(math.log2(i) for i in range(2, sigma + 1))
    try:
        width = float(sigma ** (k - 1))
    except OverflowError:
        return CountBits(math.inf, math.nan)
    log2_count = width * log2_fact - k * math.log2(sigma)
    return CountBits(log2_count, log2_count / (width * sigma * math.log2(sigma)))


def db_count(spec: DeBruijnSpec) -> int:
    """Exact number of sigma-ary De Bruijn cycles of order k."""
    digits = db_count_bits(spec).log2_count * math.log10(2) + 1
    if digits > MAX_COUNT_DIGITS:
        raise SizeError(f"count for sigma={spec.sigma}, k={spec.order} has ~{digits:.0f} digits (limit {MAX_COUNT_DIGITS})")
    numerator = math.factorial(spec.sigma) ** (spec.sigma ** (spec.order - 1))
    count, remainder = divmod(numerator, spec.length)
    assert remainder == 0, f"non-exact division for sigma={spec.sigma}, k={spec.order}"
    return count


# ---------------------------------------------------------------------------
# Enumeration
# ---------------------------------------------------------------------------
def db_enumerate(spec: DeBruijnSpec) -> List[DeBruijnSeq]:
    """Every canonical (0^k-first) De Bruijn cycle, by backtracking, in lexicographic order."""
    length = spec.length
    if length > ENUMERATION_MAX_LENGTH:
        raise SizeError(f"sigma^k = {length} exceeds the enumeration limit {ENUMERATION_MAX_LENGTH}")
    predicted = db_count(spec)
    if predicted > ENUMERATION_MAX_COUNT:
        raise SizeError(f"{predicted} cycles exceed the enumeration limit {ENUMERATION_MAX_COUNT}")

    sigma, k = spec.sigma, spec.order
    prefix = [0] * k
    used = {tuple(prefix)}
    found: List[List[int]] = []

    def closes(seq):
        # the k-1 windows that wrap around must be new and mutually distinct
        wrap = seq + seq[:k - 1]
        extra = {tuple(wrap[i:i + k]) for i in range(length - k + 1, length)}
        return len(extra) == k - 1 and not (extra & used)

    def extend(seq):
        if len(seq) == length:
            if closes(seq):
                found.append(list(seq))
            return
        for a in range(sigma):
            window = tuple(seq[len(seq) - k + 1:]) + (a,)
            if window in used:
                continue
            used.add(window)
            seq.append(a)
            extend(seq)
            seq.pop()
            used.discard(window)

    extend(prefix)
    logger.debug(f"Enumerated {len(found)} cycles for sigma={sigma} k={k} (predicted {predicted})")
    return [DeBruijnSeq(spec, Sequence(tuple(s), spec.alphabet)) for s in found]
