"""Seeded Monte Carlo harnesses for the entropy, collision, card-trick and
source-distinguishing bounds.

Every experiment is a pure function of its ``ExperimentConfig``: trial i draws
from stream ``RngSpec(seed, i)``, outcomes are collected in trial order and
aggregated with exact integer tallies and ``math.fsum``, so the result does not
depend on the worker count.
"""
import dataclasses
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence as Seq, Tuple

import torch

from trickbounds.debruijn import EULERIAN_RANDOM, GENERATION_LIMIT, DeBruijnSpec, db_generate
from trickbounds.entropy import (
    DEFAULT_EPSILON,
    LINEAR,
    build_context_table,
    expected_match_count,
    first_repeat,
    hk,
    match_count,
    pair_match_bound,
    threshold_flags,
)
from trickbounds.errors import ConfigError, ExperimentAborted
from trickbounds.performance_profile import PerformanceProfiler
from trickbounds.sources import (
    DECK_SIZE,
    PREARRANGED_DRAW,
    arrange_deck_debruijn,
    build_markov_from_string,
    cut_deck,
    decode_draw,
    generate,
    magician_guess,
    shuffled_deck,
)
from trickbounds.textcore import MASK64, Alphabet, RngSpec, Sequence, random_sequence

logger = logging.getLogger(__name__)

MATCHES = "matches"
EXPECTED_ENTROPY = "expected-entropy"
ZERO_PROB = "zero-prob"
TRICK_SHUFFLED = "trick-shuffled"
TRICK_PREARRANGED = "trick-prearranged"
DISTINGUISH = "distinguish"
COLOR_PAIRS = "color-pairs"

REPEAT_SUCCESSOR = "repeat-successor"
REPEAT_ANY = "repeat-any"
DISTINGUISHERS = (REPEAT_SUCCESSOR, REPEAT_ANY)

ADVERSARY_RESAMPLE = "resample"
ADVERSARY_FIXED = "fixed"
ADVERSARIES = (ADVERSARY_RESAMPLE, ADVERSARY_FIXED)

MARKOV = "markov"
MEMORYLESS = "memoryless"

SE_MARGIN = 3.0
DEFAULT_RESAMPLE_LIMIT = 16
FIXED_SEARCH_FACTOR = 64          # fixed-string search gets resample_limit * this many attempts
REJECTION_ABORT_RATE = 0.99
CHUNKS_PER_WORKER = 4
ADVERSARY_STREAM = MASK64         # reserved stream for the fixed adversarial string
FALLBACK_STREAM = MASK64 - 1      # reserved stream for the fallback De Bruijn cycle
DISTINGUISH_THRESHOLD = 2 / 3

LE, GE, EQ = "<=", ">=", "=="


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    trials: int = 1000
    seed: int = 0
    workers: int = 1
    n: Optional[int] = None
    sigma: int = 2
    k: Optional[int] = None
    m: Optional[int] = None
    draw: Optional[int] = None
    distinguisher: str = REPEAT_SUCCESSOR
    epsilon: float = DEFAULT_EPSILON
    adversary: str = ADVERSARY_RESAMPLE
    resample_limit: int = DEFAULT_RESAMPLE_LIMIT

    @property
    def rng(self) -> RngSpec:
        return RngSpec(self.seed, 0)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def params(self) -> Dict[str, Any]:
        """The parameters this experiment actually reads, for records."""
        return {key: getattr(self, key) for key in _PARAMS[self.name]}

    def validate(self) -> "ExperimentConfig":
        if self.name not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.name!r}; valid names: {', '.join(sorted(EXPERIMENTS))}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigError(f"trials must be >= 1, got {self.trials!r}")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers!r}")
        RngSpec(self.seed)
        for key in _PARAMS[self.name]:
            if getattr(self, key) is None:
                raise ConfigError(f"experiment {self.name} needs --{key}")
        if "sigma" in _PARAMS[self.name]:
            Alphabet(self.sigma)
        if self.name in (MATCHES, EXPECTED_ENTROPY, ZERO_PROB):
            if self.k < 1 or self.n < 1:
                raise ConfigError(f"n and k must be >= 1 (n={self.n}, k={self.k})")
            if self.name == MATCHES and self.n <= self.k:
                raise ConfigError(f"matches needs n > k (n={self.n}, k={self.k})")
            if self.epsilon < 0:
                raise ConfigError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.name in (TRICK_SHUFFLED, TRICK_PREARRANGED) and not 1 <= self.draw <= DECK_SIZE:
            raise ConfigError(f"draw size must be in [1, {DECK_SIZE}], got {self.draw}")
        if self.name == DISTINGUISH:
            if self.k < 1 or self.m < self.k + 1:
                raise ConfigError(f"distinguish needs k >= 1 and m >= k + 1 (k={self.k}, m={self.m})")
            if self.distinguisher not in DISTINGUISHERS:
                raise ConfigError(f"unknown distinguisher {self.distinguisher!r}; expected one of {', '.join(DISTINGUISHERS)}")
            if self.adversary not in ADVERSARIES:
                raise ConfigError(f"unknown adversary {self.adversary!r}; expected one of {', '.join(ADVERSARIES)}")
            if self.resample_limit < 1:
                raise ConfigError(f"resample_limit must be >= 1, got {self.resample_limit}")
        return self


_PARAMS = {
    MATCHES: ("n", "sigma", "k"),
    EXPECTED_ENTROPY: ("n", "sigma", "k", "epsilon"),
    ZERO_PROB: ("n", "sigma", "k", "epsilon"),
    TRICK_SHUFFLED: ("draw",),
    TRICK_PREARRANGED: ("draw",),
    DISTINGUISH: ("sigma", "k", "m", "distinguisher", "adversary", "resample_limit"),
    COLOR_PAIRS: (),
}

# acceptance-scale configurations
DEFAULTS: Dict[str, Dict[str, Any]] = {
    MATCHES: dict(n=100, sigma=2, k=20, trials=100_000),
    EXPECTED_ENTROPY: dict(n=100, sigma=2, k=20, trials=100_000),
    ZERO_PROB: dict(n=100, sigma=2, k=20, trials=100_000),
    TRICK_SHUFFLED: dict(draw=7, trials=100_000),
    TRICK_PREARRANGED: dict(draw=PREARRANGED_DRAW, trials=10_000),
    DISTINGUISH: dict(sigma=2, k=16, m=64, trials=10_000),
    COLOR_PAIRS: dict(trials=100_000),
}


def default_config(name: str, **overrides) -> ExperimentConfig:
    if name not in DEFAULTS:
        raise ConfigError(f"unknown experiment {name!r}; valid names: {', '.join(sorted(DEFAULTS))}")
    values = {**DEFAULTS[name], **{k: v for k, v in overrides.items() if v is not None}}
    return ExperimentConfig(name=name, **values)


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BoundCheck:
    """One comparison of an estimate against a theoretical value.

    ``margin`` is SE_MARGIN standard errors (0 for exact checks). Vacuous checks
    are reported but always count as consistent.
    """

    label: str
    estimate: float
    value: float
    direction: str
    margin: float
    vacuous: bool = False

    @property
    def consistent(self) -> bool:
        if self.vacuous:
            return True
        if self.direction == LE:
            return self.estimate <= self.value + self.margin
        if self.direction == GE:
            return self.estimate >= self.value - self.margin
        return abs(self.estimate - self.value) <= self.margin

    def as_record(self) -> dict:
        return {
            "label": self.label,
            "estimate": self.estimate,
            "value": self.value,
            "direction": self.direction,
            "margin": self.margin,
            "vacuous": self.vacuous,
            "consistent": self.consistent,
        }


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    estimate: float
    standard_error: float
    checks: Tuple[BoundCheck, ...]
    summary: Dict[str, Any] = field(default_factory=dict)
    elapsed: Optional[float] = None

    @property
    def bound(self) -> BoundCheck:
        return self.checks[0]

    @property
    def verdict(self) -> str:
        return "consistent" if all(c.consistent for c in self.checks) else "violated"

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def as_record(self, include_elapsed: bool = False) -> dict:
        record = {
            "name": self.config.name,
            "params": self.config.params(),
            "estimate": self.estimate,
            "stderr": self.standard_error,
            "bound": self.bound.value,
            "direction": self.bound.direction,
            "vacuous": self.bound.vacuous,
            "verdict": self.verdict,
            "trials": self.config.trials,
            "seed": self.config.seed,
            "checks": [c.as_record() for c in self.checks],
            "summary": self.summary,
        }
        if include_elapsed:
            record["elapsed"] = self.elapsed
        return record


def _check(label, estimate, value, direction, se, vacuous=False) -> BoundCheck:
    return BoundCheck(label, estimate, value, direction, SE_MARGIN * se, vacuous)


def _exact(label, estimate, value, vacuous=False) -> BoundCheck:
    return BoundCheck(label, estimate, value, EQ, 0.0, vacuous)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------
def mean_and_se(values: Seq[float]) -> Tuple[float, float]:
    """Sample mean and its standard error, floored at 1/T (one-trial resolution)."""
    t = len(values)
    mean = math.fsum(values) / t
    se = 0.0
    if t > 1:
        var = math.fsum((v - mean) ** 2 for v in values) / (t - 1)
        se = math.sqrt(var / t)
    return mean, max(se, 1.0 / t)


def proportion_and_se(successes: int, t: int) -> Tuple[float, float]:
    p = successes / t
    return p, max(math.sqrt(p * (1 - p) / t), 1.0 / t)


def _rate(successes: int, t: int) -> Dict[str, float]:
    p, se = proportion_and_se(successes, t)
    return {"count": successes, "rate": p, "stderr": se}


def _value_summary(values: Seq[float]) -> Dict[str, Any]:
    return {"min": min(values), "max": max(values), "nonzero": sum(1 for v in values if v)}


# ---------------------------------------------------------------------------
# Trial execution
# ---------------------------------------------------------------------------
def _run_trials(config: ExperimentConfig, trial_fn: Callable[[RngSpec], Any],
                profiler: Optional[PerformanceProfiler] = None) -> List[Any]:
    """Outcomes of trial_fn over streams 0..T-1, in trial order."""
    total = config.trials
    base = config.rng
    chunk = max(1, math.ceil(total / (config.workers * CHUNKS_PER_WORKER)))
    spans = [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]

    def run_chunk(span):
        lo, hi = span
        t0 = time.perf_counter()
        out = [trial_fn(base.with_stream(i)) for i in range(lo, hi)]
        if profiler is not None:
            profiler.record_chunk(hi - lo, time.perf_counter() - t0)
        logger.debug(f"[{config.name}] trials {lo}..{hi - 1} done")
        return out

    if config.workers <= 1 or len(spans) == 1:
        chunks = [run_chunk(span) for span in spans]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(run_chunk, spans))
    return [outcome for chunk_out in chunks for outcome in chunk_out]


def _randint(gen: torch.Generator, high: int) -> int:
    return int(torch.randint(high, (1,), generator=gen).item())


# ---------------------------------------------------------------------------
# Collision and entropy experiments
# ---------------------------------------------------------------------------
def exp_matches(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    n, sigma, k = config.n, config.sigma, config.k
    alphabet = Alphabet(sigma)

    def trial(rng):
        return match_count(random_sequence(n, alphabet, rng), k, LINEAR)

    counts = _run_trials(config, trial, profiler)
    mean, se = mean_and_se(counts)
    exact = expected_match_count(n, k, sigma)
    checks = (
        _check("exact expectation C(n-k+1,2)/sigma^k", mean, exact, EQ, se),
        _check("union bound C(n,2)/sigma^k", mean, pair_match_bound(n, k, sigma), LE, se),
    )
    return ExperimentResult(config, mean, se, checks, _value_summary(counts))


def exp_expected_entropy(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    n, sigma, k = config.n, config.sigma, config.k
    alphabet = Alphabet(sigma)

    def trial(rng):
        return hk(random_sequence(n, alphabet, rng), k, LINEAR).h_value

    values = _run_trials(config, trial, profiler)
    mean, se = mean_and_se(values)
    max_entropy = math.log2(sigma)
    bound = n / sigma ** k * max_entropy
    vacuous = bound >= max_entropy
    if vacuous:
        logger.warning(f"[{config.name}] bound {bound:.4g} >= log2 sigma = {max_entropy:.4g}: vacuous at these parameters")
    checks = (_check("(n/sigma^k) log2 sigma", mean, bound, LE, se, vacuous),)
    summary = {**_value_summary(values), "regime": threshold_flags(n, sigma, k, config.epsilon)}
    return ExperimentResult(config, mean, se, checks, summary)


def exp_zero_prob(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    n, sigma, k = config.n, config.sigma, config.k
    alphabet = Alphabet(sigma)

    def trial(rng):
        return build_context_table(random_sequence(n, alphabet, rng), k, LINEAR).is_deterministic()

    zeros = sum(_run_trials(config, trial, profiler))
    p, se = proportion_and_se(zeros, config.trials)
    bound = 1 - pair_match_bound(n, k, sigma)
    vacuous = bound <= 0
    if vacuous:
        logger.warning(f"[{config.name}] bound {bound:.4g} <= 0: vacuous at these parameters")
    checks = (_check("1 - C(n,2)/sigma^k", p, bound, GE, se, vacuous),)
    summary = {"zero_trials": zeros, "regime": threshold_flags(n, sigma, k, config.epsilon)}
    return ExperimentResult(config, p, se, checks, summary)


# ---------------------------------------------------------------------------
# Card tricks
# ---------------------------------------------------------------------------
class _ShuffledTrial(NamedTuple):
    unique: bool
    success: bool
    pair_match: bool
    candidates: int


def exp_trick_shuffled(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    """Shuffle, cut, draw d, replace, cut again; the magician reads the returned deck."""
    d = config.draw

    def trial(rng):
        gen = rng.generator()
        deck = shuffled_deck(gen)
        first_cut = cut_deck(deck, _randint(gen, DECK_SIZE))
        drawn = tuple(card.name for card in first_cut.cards[:d])
        colors = first_cut.colors[:d]
        returned = cut_deck(first_cut, _randint(gen, DECK_SIZE))
        decoding = decode_draw(returned, colors)
        guess = magician_guess(decoding, gen)
        return _ShuffledTrial(decoding.unique, decoding.cards_at(guess) == drawn,
                              deck.colors[0] == deck.colors[1], len(decoding.candidates))

    outcomes = _run_trials(config, trial, profiler)
    t = config.trials
    unique = sum(o.unique for o in outcomes)
    p, se = proportion_and_se(unique, t)
    pair_p, pair_se = proportion_and_se(sum(o.pair_match for o in outcomes), t)
    bound = 1 - (DECK_SIZE - 1) / 2 ** d
    checks = (
        _check("1 - 51/2^d", p, bound, GE, se, vacuous=bound <= 0),
        _check("pairwise same colour 25/51", pair_p, 25 / 51, EQ, pair_se),
    )
    summary = {
        "unique": _rate(unique, t),
        "magician_success": _rate(sum(o.success for o in outcomes), t),
        "pair_match": _rate(sum(o.pair_match for o in outcomes), t),
        "mean_candidates": math.fsum(o.candidates for o in outcomes) / t,
        "max_candidates": max(o.candidates for o in outcomes),
    }
    return ExperimentResult(config, p, se, checks, summary)


class _PrearrangedTrial(NamedTuple):
    unique: bool
    success: bool
    next_card: bool


def _prearranged_draw(arrangement, cut: int, position: int, d: int, gen: Optional[torch.Generator]) -> _PrearrangedTrial:
    deck = cut_deck(arrangement, cut)
    drawn = tuple(card.name for card in deck.cards[position:position + d])
    decoding = decode_draw(arrangement, deck.colors[position:position + d])
    guess = decoding.candidates[0] if gen is None else magician_guess(decoding, gen)
    actual_next = deck.cards[(position + d) % DECK_SIZE].name
    return _PrearrangedTrial(decoding.unique, decoding.cards_at(guess) == drawn,
                             decoding.next_card_at(guess) == actual_next)


def _prearranged_result(config, outcomes, d) -> ExperimentResult:
    t = len(outcomes)
    successes = sum(o.success for o in outcomes)
    p = successes / t
    checks = (_exact("every draw decodes to the drawn cards", p, 1.0, vacuous=d < PREARRANGED_DRAW),)
    summary = {
        "unique": _rate(sum(o.unique for o in outcomes), t),
        "success": _rate(successes, t),
        "next_card": _rate(sum(o.next_card for o in outcomes), t),
    }
    return ExperimentResult(config, p, proportion_and_se(successes, t)[1], checks, summary)


def exp_trick_prearranged(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    """Uniform cut, uniform draw position on the De Bruijn deck; decode against the arrangement."""
    d = config.draw
    arrangement = arrange_deck_debruijn()

    def trial(rng):
        gen = rng.generator()
        cut = _randint(gen, DECK_SIZE)
        position = _randint(gen, DECK_SIZE - d + 1)
        return _prearranged_draw(arrangement, cut, position, d, gen)

    return _prearranged_result(config, _run_trials(config, trial, profiler), d)


def prearranged_exhaustive(draw: int = PREARRANGED_DRAW) -> ExperimentResult:
    """Every cut offset times every draw position; no randomness involved."""
    arrangement = arrange_deck_debruijn()
    positions = DECK_SIZE - draw + 1
    config = ExperimentConfig(TRICK_PREARRANGED, trials=DECK_SIZE * positions, draw=draw).validate()
    t0 = time.perf_counter()
    outcomes = [
        _prearranged_draw(arrangement, cut, position, draw, None)
        for cut in range(DECK_SIZE)
        for position in range(positions)
    ]
    result = _prearranged_result(config, outcomes, draw)
    return dataclasses.replace(result, elapsed=time.perf_counter() - t0)


def exp_color_pairs(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    """Two fixed distinct positions of a uniformly shuffled deck share a colour w.p. 25/51."""
    def trial(rng):
        colors = shuffled_deck(rng.generator()).colors
        return colors[0] == colors[1]

    matches = sum(_run_trials(config, trial, profiler))
    p, se = proportion_and_se(matches, config.trials)
    checks = (
        _check("without replacement 25/51", p, 25 / 51, EQ, se),
        _check("with replacement 1/2", p, 0.5, LE, se),
    )
    return ExperimentResult(config, p, se, checks, {"matches": matches})


# ---------------------------------------------------------------------------
# Distinguishing game
# ---------------------------------------------------------------------------
class Distinguisher:
    """Streams symbols and guesses which source produced them.

    repeat-successor: memoryless iff some k-context recurs with a different successor.
    repeat-any: memoryless iff any k-window recurs.
    """

    def __init__(self, kind: str, k: int, sigma: int):
        if kind not in DISTINGUISHERS:
            raise ConfigError(f"unknown distinguisher {kind!r}; expected one of {', '.join(DISTINGUISHERS)}")
        self.kind = kind
        self.k = k
        self._bits = max(1, (sigma - 1).bit_length())
        self._mask = (1 << (k * self._bits)) - 1
        self.reset()

    def reset(self):
        self.read = 0
        self.evidence = False
        self._key = 0
        self._successors: Dict[int, int] = {}
        self._windows = set()

    def feed(self, symbol: int):
        if self.read >= self.k and self.kind == REPEAT_SUCCESSOR:
            seen = self._successors.setdefault(self._key, symbol)
            if seen != symbol:
                self.evidence = True
        self._key = ((self._key << self._bits) | symbol) & self._mask
        self.read += 1
        if self.read >= self.k and self.kind == REPEAT_ANY:
            if self._key in self._windows:
                self.evidence = True
            self._windows.add(self._key)

    def guess(self) -> str:
        return MEMORYLESS if self.evidence else MARKOV

    def consume(self, seq: Seq[int]) -> str:
        self.reset()
        for symbol in seq:
            self.feed(symbol)
        return self.guess()


def repeat_free_probability(m: int, k: int, sigma: int) -> float:
    """Birthday estimate exp(-C(m-k+1, 2) / sigma^k) that m uniform symbols repeat no k-window."""
    return math.exp(-expected_match_count(m, k, sigma))


class _Adversary:
    """Builds the repeat-free strings the deterministic source is made from."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.alphabet = Alphabet(config.sigma)
        self._lock = threading.RLock()
        self._cycle: Optional[Tuple[int, ...]] = None
        self._fixed: Optional[Sequence] = None
        length = config.sigma ** config.k
        self.fallback_available = length <= GENERATION_LIMIT and config.m <= length

    def cycle(self) -> Tuple[int, ...]:
        with self._lock:
            if self._cycle is None:
                spec = DeBruijnSpec(self.config.sigma, self.config.k)
                self._cycle = db_generate(spec, EULERIAN_RANDOM, self.config.rng.with_stream(FALLBACK_STREAM)).seq.symbols
                logger.info(f"[{self.config.name}] built fallback De Bruijn cycle of length {len(self._cycle)}")
            return self._cycle

    def fallback_window(self, gen: torch.Generator, offset: Optional[int] = None) -> Sequence:
        """m consecutive symbols of the fallback cycle: repeat-free because m <= sigma^k."""
        if not self.fallback_available:
            raise ExperimentAborted(
                f"no repeat-free string of length {self.config.m} found and no De Bruijn fallback "
                f"(sigma^k = {self.config.sigma}^{self.config.k}, m = {self.config.m})"
            )
        cycle = self.cycle()
        start = _randint(gen, len(cycle)) if offset is None else offset
        return Sequence(tuple(cycle[(start + i) % len(cycle)] for i in range(self.config.m)), self.alphabet)

    def sample(self, gen: torch.Generator, limit: int) -> Tuple[Optional[Sequence], int]:
        """Resample uniform strings until one is repeat-free; (string or None, attempts used)."""
        for attempt in range(1, limit + 1):
            candidate = random_sequence(self.config.m, self.alphabet, gen)
            if first_repeat(candidate, self.config.k, LINEAR) is None:
                return candidate, attempt
        return None, limit

    def fixed_string(self) -> Sequence:
        with self._lock:
            if self._fixed is None:
                gen = self.config.rng.with_stream(ADVERSARY_STREAM).generator()
                found, attempts = self.sample(gen, self.config.resample_limit * FIXED_SEARCH_FACTOR)
                if found is None:
                    logger.info(f"[{self.config.name}] fixed-string search failed after {attempts} attempts; using fallback cycle")
                    found = self.fallback_window(None, offset=0)
                self._fixed = found
            return self._fixed


class _GameTrial(NamedTuple):
    truth: str
    guess: str
    attempts: int
    rejections: int
    fallback: bool


def exp_distinguish(config: ExperimentConfig, profiler=None) -> ExperimentResult:
    """Fair coin: memoryless sample or a deterministic order-k source; the distinguisher reads m symbols."""
    sigma, k, m = config.sigma, config.k, config.m
    alphabet = Alphabet(sigma)
    adversary = _Adversary(config)
    p_free = repeat_free_probability(m, k, sigma)
    if config.adversary == ADVERSARY_RESAMPLE and 1 - p_free > REJECTION_ABORT_RATE and not adversary.fallback_available:
        raise ExperimentAborted(
            f"predicted rejection rate {1 - p_free:.4f} > {REJECTION_ABORT_RATE}: m={m} is far above "
            f"sigma^(k/2) = {sigma ** (k / 2):.4g} and sigma^k is too large for a De Bruijn fallback"
        )
    distinguishers = threading.local()

    def trial(rng):
        gen = rng.generator()
        truth = MARKOV if _randint(gen, 2) else MEMORYLESS
        attempts = rejections = 0
        fallback = False
        if truth == MEMORYLESS:
            s = random_sequence(m, alphabet, gen)
        else:
            if config.adversary == ADVERSARY_FIXED:
                s = adversary.fixed_string()
            else:
                s, attempts = adversary.sample(gen, config.resample_limit)
                rejections = attempts - (s is not None)
                if s is None:
                    s = adversary.fallback_window(gen)
                    fallback = True
            s = generate(build_markov_from_string(s, k), m)
        if not hasattr(distinguishers, "d"):
            distinguishers.d = Distinguisher(config.distinguisher, k, sigma)
        return _GameTrial(truth, distinguishers.d.consume(s), attempts, rejections, fallback)

    outcomes = _run_trials(config, trial, profiler)
    t = config.trials
    successes = sum(o.guess == o.truth for o in outcomes)
    p, se = proportion_and_se(successes, t)
    tails = [o for o in outcomes if o.truth == MARKOV]
    heads = [o for o in outcomes if o.truth == MEMORYLESS]
    one_sided_violations = sum(o.guess == MEMORYLESS for o in tails)
    attempts = sum(o.attempts for o in tails)
    rejections = sum(o.rejections for o in tails)
    sqrt_scale = sigma ** (k / 2)

    checks = (
        _check("success <= 2/3 below sigma^(k/2)", p, DISTINGUISH_THRESHOLD, LE, se, vacuous=m > sqrt_scale),
        _exact("no memoryless guess on a deterministic source", one_sided_violations, 0),
    )
    summary = {
        "markov_trials": len(tails),
        "memoryless_trials": len(heads),
        "markov_correct": sum(o.guess == MARKOV for o in tails),
        "memoryless_correct": sum(o.guess == MEMORYLESS for o in heads),
        "one_sided_violations": one_sided_violations,
        "resample_attempts": attempts,
        "resample_rejections": rejections,
        "resample_rate": rejections / attempts if attempts else 0.0,
        "fallback_trials": sum(o.fallback for o in tails),
        "sigma_k_half": sqrt_scale,
        "predicted_repeat_free": p_free,
    }
    if summary["resample_rate"] > REJECTION_ABORT_RATE:
        logger.warning(f"[{config.name}] resampling rejected {summary['resample_rate']:.2%} of candidates; "
                       f"{summary['fallback_trials']} trials used the De Bruijn fallback")
    return ExperimentResult(config, p, se, checks, summary)


# ---------------------------------------------------------------------------
# Dispatch and sweeps
# ---------------------------------------------------------------------------
EXPERIMENTS: Dict[str, Callable[..., ExperimentResult]] = {
    MATCHES: exp_matches,
    EXPECTED_ENTROPY: exp_expected_entropy,
    ZERO_PROB: exp_zero_prob,
    TRICK_SHUFFLED: exp_trick_shuffled,
    TRICK_PREARRANGED: exp_trick_prearranged,
    DISTINGUISH: exp_distinguish,
    COLOR_PAIRS: exp_color_pairs,
}


def run_experiment(config: ExperimentConfig, profiler: Optional[PerformanceProfiler] = None) -> ExperimentResult:
    config.validate()
    profiler = profiler or PerformanceProfiler()
    logger.info(f"[{config.name}] {config.trials} trials, seed={config.seed}, workers={config.workers}, params={config.params()}")
    profiler.start()
    result = EXPERIMENTS[config.name](config, profiler)
    elapsed = profiler.finish()
    result = dataclasses.replace(result, elapsed=elapsed)
    logger.info(f"[{config.name}] estimate={result.estimate:.6g} stderr={result.standard_error:.3g} "
                f"bound {result.bound.direction} {result.bound.value:.6g} -> {result.verdict} ({elapsed:.2f}s)")
    return result


def run_sweep(config: ExperimentConfig, param: str, values: Seq[Any],
              profiler: Optional[PerformanceProfiler] = None) -> List[ExperimentResult]:
    """One result per value of ``param``; everything else, seed included, held fixed."""
    if param not in {f.name for f in dataclasses.fields(ExperimentConfig)} - {"name"}:
        raise ConfigError(f"cannot sweep over {param!r}")
    return [run_experiment(config.replace(**{param: v}), profiler) for v in values]


def crossing_point(results: Seq[ExperimentResult], param: str, threshold: float = DISTINGUISH_THRESHOLD) -> Optional[Any]:
    """First swept value whose estimate reaches ``threshold``, or None."""
    for result in results:
        if result.estimate >= threshold:
            return getattr(result.config, param)
    return None
