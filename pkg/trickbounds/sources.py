import functools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence as Seq, Tuple, Union

import torch

from trickbounds.debruijn import DeBruijnSpec, db_generate
from trickbounds.entropy import CYCLIC, LINEAR, first_repeat
from trickbounds.errors import ConfigError, ConstructionError, GenerationError
from trickbounds.textcore import Alphabet, RngSpec, Sequence, random_sequence

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Source models
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class MemorylessSource:
    """Unbiased memoryless source: i.i.d. uniform symbols."""

    alphabet: Alphabet

    @property
    def entropy_rate(self) -> float:
        return math.log2(self.alphabet.sigma)


@dataclass(frozen=True, eq=False)
class DeterministicMarkovSource:
    """k-th order Markov source in which every context has exactly one successor."""

    order: int
    seed_context: Tuple[int, ...]
    transitions: Dict[Tuple[int, ...], int]
    source_string: Sequence
    cyclic: bool = False

    @property
    def alphabet(self) -> Alphabet:
        return self.source_string.alphabet

    @property
    def entropy_rate(self) -> float:
        return 0.0

    @property
    def max_length(self) -> Optional[int]:
        """Longest output it can define; None when cyclic completion makes it unbounded."""
        return None if self.cyclic else len(self.source_string)


Source = Union[MemorylessSource, DeterministicMarkovSource]


def build_markov_from_string(s: Sequence, k: int, cyclic_completion: bool = False) -> DeterministicMarkovSource:
    """The deterministic order-k source that emits ``s`` with probability 1.

    Needs n > k and no repeated k-tuple in s. With ``cyclic_completion`` the last
    contexts are wired back to the start, but only if the wrapped string is still
    repeat-free; otherwise completion is skipped and output stays capped at n.
    """
    n = len(s)
    if not isinstance(k, int) or k < 1:
        raise ConfigError(f"order k must be an integer >= 1, got {k!r}")
    if n <= k:
        raise ConfigError(f"source string must be longer than k (n={n}, k={k})")
    repeat = first_repeat(s, k, LINEAR)
    if repeat is not None:
        tup = list(s.window(repeat[0] - 1, k))
        raise ConstructionError(
            f"k-tuple {tup} repeats at positions {repeat[0]},{repeat[1]}; "
            f"no deterministic order-{k} source emits this string",
            positions=repeat,
        )

    transitions = {s.window(i, k): s[i + k] for i in range(n - k)}
    cyclic = False
    if cyclic_completion:
        wrap_repeat = first_repeat(s, k, CYCLIC)
        if wrap_repeat is None:
            for i in range(n - k, n):
                transitions[s.window(i, k, cyclic=True)] = s[(i + k) % n]
            cyclic = True
        else:
            logger.warning(
                f"Cyclic completion skipped: wrapped string repeats a {k}-tuple at positions "
                f"{wrap_repeat[0]},{wrap_repeat[1]}; output capped at {n} symbols"
            )
    return DeterministicMarkovSource(k, s.window(0, k), transitions, s, cyclic)


def generate(source: Source, m: int, rng: Optional[RngSpec] = None) -> Sequence:
    """Emit m symbols. Markov output is the seed context followed by its transitions."""
    if m < 0:
        raise ConfigError(f"length must be non-negative, got {m}")
    if isinstance(source, MemorylessSource):
        if rng is None:
            raise ConfigError("memoryless generation needs an RngSpec")
        return random_sequence(m, source.alphabet, rng)

    limit = source.max_length
    if limit is not None and m > limit:
        raise GenerationError(
            f"source defined by a string of length {limit} cannot emit {m} symbols without cyclic completion"
        )
    out = list(source.seed_context[:m])
    context = source.seed_context
    transitions = source.transitions
    while len(out) < m:
        nxt = transitions[context]
        out.append(nxt)
        context = context[1:] + (nxt,)
    return Sequence(tuple(out), source.alphabet)


# ---------------------------------------------------------------------------
# Playing cards
# ---------------------------------------------------------------------------
BLACK = 0
RED = 1
COLOR_NAMES = {BLACK: "black", RED: "red"}

RANKS = "A23456789TJQK"
SUITS = "SHDC"
RED_SUITS = "HD"
DECK_SIZE = 52
PREARRANGED_DRAW = 6
PREARRANGED_ORDER = 6


@dataclass(frozen=True)
class Card:
    rank: str
    suit: str

    @property
    def name(self) -> str:
        return self.suit + self.rank

    @property
    def color(self) -> int:
        return RED if self.suit in RED_SUITS else BLACK

    def __str__(self) -> str:
        return self.name


def standard_deck_cards() -> Tuple[Card, ...]:
    return tuple(Card(rank, suit) for suit in SUITS for rank in RANKS)


@dataclass(frozen=True)
class Deck:
    """52 cards, top card first. A cut is a rotation of this order."""

    cards: Tuple[Card, ...]

    def __post_init__(self):
        if len(self.cards) != DECK_SIZE or len(set(self.cards)) != DECK_SIZE:
            raise ConfigError(f"a deck holds {DECK_SIZE} distinct cards, got {len(set(self.cards))} of {len(self.cards)}")

    @property
    def colors(self) -> Tuple[int, ...]:
        return tuple(card.color for card in self.cards)

    def names(self) -> List[str]:
        return [card.name for card in self.cards]

    def color_sequence(self) -> Sequence:
        return Sequence(self.colors, Alphabet(2))

    def __len__(self) -> int:
        return DECK_SIZE


def standard_deck() -> Deck:
    return Deck(standard_deck_cards())


def deck_from_names(tokens: Seq[str]) -> Deck:
    by_name = {card.name: card for card in standard_deck_cards()}
    try:
        return Deck(tuple(by_name[token.strip().upper()] for token in tokens))
    except KeyError as e:
        raise ConfigError(f"unknown card name {e.args[0]!r}") from None


def shuffled_deck(gen: torch.Generator) -> Deck:
    cards = standard_deck_cards()
    return Deck(tuple(cards[i] for i in torch.randperm(DECK_SIZE, generator=gen).tolist()))


@functools.lru_cache(maxsize=None)
def debruijn_deck_offset() -> int:
    """Start, within the 0^6-first binary order-6 cycle, of the 52-color run used for the deck.

    The first offset whose run has 26 of each color and whose 52 cyclic 6-windows are
    all distinct, so every cut followed by a 6-card draw decodes uniquely.
    """
    cycle = db_generate(DeBruijnSpec(2, PREARRANGED_ORDER)).seq.symbols
    for offset in range(len(cycle)):
        run = Sequence(tuple(cycle[(offset + i) % len(cycle)] for i in range(DECK_SIZE)), Alphabet(2))
        if sum(run.symbols) == DECK_SIZE // 2 and first_repeat(run, PREARRANGED_ORDER, CYCLIC) is None:
            return offset
    raise RuntimeError("no balanced, cyclically repeat-free 52-color run in the order-6 cycle")


@functools.lru_cache(maxsize=None)
def arrange_deck_debruijn() -> Deck:
    """The magician's prearranged deck: colors follow the order-6 De Bruijn run.

    Red slots take hearts then diamonds, black slots spades then clubs, each in rank order.
    """
    cycle = db_generate(DeBruijnSpec(2, PREARRANGED_ORDER)).seq.symbols
    offset = debruijn_deck_offset()
    reds = [Card(rank, suit) for suit in RED_SUITS for rank in RANKS]
    blacks = [Card(rank, suit) for suit in SUITS if suit not in RED_SUITS for rank in RANKS]
    cards = []
    for i in range(DECK_SIZE):
        pool = reds if cycle[(offset + i) % len(cycle)] == RED else blacks
        cards.append(pool.pop(0))
    logger.debug(f"Prearranged deck uses cycle offset {offset}")
    return Deck(tuple(cards))


def cut_deck(deck: Deck, r: int) -> Deck:
    """Move the top r cards to the bottom."""
    if not isinstance(r, int) or not 0 <= r < DECK_SIZE:
        raise ConfigError(f"cut offset must be in [0, {DECK_SIZE}), got {r!r}")
    return Deck(deck.cards[r:] + deck.cards[:r])


@dataclass(frozen=True)
class DrawDecoding:
    deck: Deck
    colors: Tuple[int, ...]
    candidates: Tuple[int, ...]       # 0-based cyclic start positions in ``deck``

    @property
    def unique(self) -> bool:
        return len(self.candidates) == 1

    def cards_at(self, position: int) -> Tuple[str, ...]:
        return tuple(self.deck.cards[(position + j) % DECK_SIZE].name for j in range(len(self.colors)))

    def next_card_at(self, position: int) -> str:
        return self.deck.cards[(position + len(self.colors)) % DECK_SIZE].name

    @property
    def candidate_cards(self) -> List[Tuple[str, ...]]:
        return [self.cards_at(p) for p in self.candidates]

    @property
    def next_card(self) -> Optional[str]:
        """The card after the drawn run, known for certain only when the decoding is unique."""
        return self.next_card_at(self.candidates[0]) if self.unique else None


def decode_draw(deck: Deck, colors: Seq[int]) -> DrawDecoding:
    """Every cyclic position of ``deck`` whose color run matches ``colors``."""
    d = len(colors)
    if not 1 <= d <= DECK_SIZE:
        raise ConfigError(f"a draw lists between 1 and {DECK_SIZE} colors, got {d}")
    pattern = tuple(int(c) for c in colors)
    if any(c not in COLOR_NAMES for c in pattern):
        raise ConfigError(f"colors must be {BLACK} (black) or {RED} (red), got {list(pattern)}")
    deck_colors = deck.colors
    doubled = deck_colors + deck_colors[:d - 1]
    candidates = tuple(i for i in range(DECK_SIZE) if doubled[i:i + d] == pattern)
    return DrawDecoding(deck, pattern, candidates)


def magician_guess(decoding: DrawDecoding, gen: torch.Generator) -> int:
    """Pick one candidate position uniformly."""
    candidates = decoding.candidates
    if not candidates:
        raise ConfigError(f"color pattern {list(decoding.colors)} does not occur in the deck")
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(torch.randint(len(candidates), (1,), generator=gen).item())]
