import itertools

import pytest
import torch
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import stats

from trickbounds.debruijn import EULERIAN_RANDOM, DeBruijnSpec, db_generate
from trickbounds.entropy import CYCLIC, LINEAR, first_repeat, hk, match_count
from trickbounds.errors import ConfigError, ConstructionError, GenerationError
from trickbounds.sources import (
    BLACK,
    DECK_SIZE,
    PREARRANGED_DRAW,
    RED,
    Deck,
    MemorylessSource,
    arrange_deck_debruijn,
    build_markov_from_string,
    cut_deck,
    deck_from_names,
    decode_draw,
    generate,
    magician_guess,
    shuffled_deck,
    standard_deck,
)
from trickbounds.textcore import Alphabet, RngSpec, Sequence, parse_sequence


def test_markov_rejects_repeated_tuple():
    with pytest.raises(ConstructionError) as info:
        build_markov_from_string(parse_sequence(b"0110", sigma=2), 1)
    assert info.value.positions == (2, 3)
    assert "[1] repeats at positions 2,3" in str(info.value)


def test_markov_rejects_short_string():
    with pytest.raises(ConfigError):
        build_markov_from_string(parse_sequence(b"01", sigma=2), 2)


@st.composite
def repeat_free_strings(draw):
    # windows of a De Bruijn cycle never repeat a k-tuple
    sigma = draw(st.integers(2, 3))
    k = draw(st.integers(1, 5))
    spec = DeBruijnSpec(sigma, k)
    cycle = db_generate(spec, EULERIAN_RANDOM, RngSpec(draw(st.integers(0, 1000)))).seq.symbols
    m = draw(st.integers(k + 1, spec.length))
    start = draw(st.integers(0, spec.length - 1))
    return Sequence.from_symbols([cycle[(start + i) % spec.length] for i in range(m)], sigma), k


def check_reproduction(s, k):
    assert first_repeat(s, k) is None
    source = build_markov_from_string(s, k)
    assert source.entropy_rate == 0.0
    assert generate(source, len(s)) == s
    assert generate(source, k - 1).symbols == s.symbols[:k - 1]
    assert hk(s, k).h_value == 0.0


@settings(max_examples=200, deadline=None)
@given(repeat_free_strings())
def test_markov_source_reproduces_its_string(case):
    check_reproduction(*case)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_markov_source_reproduces_random_repeat_free_string(data):
    sigma = data.draw(st.integers(2, 4))
    k = data.draw(st.integers(3, 6))
    symbols = data.draw(st.lists(st.integers(0, sigma - 1), min_size=k + 1, max_size=k + 3))
    s = Sequence.from_symbols(symbols, sigma)
    assume(match_count(s, k) == 0)
    check_reproduction(s, k)


def test_markov_generation_is_capped_without_completion():
    source = build_markov_from_string(parse_sequence(b"00110", sigma=2), 2)
    assert source.max_length == 5
    with pytest.raises(GenerationError):
        generate(source, 6)


def test_cyclic_completion_on_debruijn_cycle():
    cycle = db_generate(DeBruijnSpec(2, 4)).seq
    source = build_markov_from_string(cycle, 4, cyclic_completion=True)
    assert source.cyclic and source.max_length is None
    long = generate(source, 3 * len(cycle) + 5)
    assert long.symbols[:len(cycle)] == cycle.symbols
    assert long.symbols[len(cycle):2 * len(cycle)] == cycle.symbols
    assert hk(long, 4, LINEAR).h_value == 0.0


def test_cyclic_completion_skipped_when_wrap_repeats():
    # "0010" is repeat-free linearly at k=2 but wraps into "00" again
    source = build_markov_from_string(parse_sequence(b"0010", sigma=2), 2, cyclic_completion=True)
    assert not source.cyclic
    assert source.max_length == 4


def test_memoryless_source_h0_near_log_sigma():
    source = MemorylessSource(Alphabet(4))
    assert source.entropy_rate == 2.0
    sample = generate(source, 20_000, RngSpec(31))
    assert hk(sample, 0).h_value == pytest.approx(2.0, abs=0.01)
    with pytest.raises(ConfigError):
        generate(source, 10)


def test_standard_deck_and_names():
    deck = standard_deck()
    assert len(deck.names()) == DECK_SIZE
    assert deck.names()[0] == "SA"
    assert sum(deck.colors) == 26
    assert deck_from_names(deck.names()) == deck
    assert deck_from_names([name.lower() for name in deck.names()]) == deck
    with pytest.raises(ConfigError):
        deck_from_names(deck.names()[:-1] + ["XQ"])
    with pytest.raises(ConfigError):
        Deck(deck.cards[:-1] + deck.cards[:1])


def test_shuffled_deck_is_seeded_permutation():
    a = shuffled_deck(RngSpec(4).generator())
    assert a == shuffled_deck(RngSpec(4).generator())
    assert sorted(a.names()) == sorted(standard_deck().names())


def test_shuffle_places_top_card_uniformly():
    top = standard_deck().cards[0]
    positions = [shuffled_deck(RngSpec(17, i).generator()).cards.index(top) for i in range(5200)]
    counts = torch.bincount(torch.tensor(positions), minlength=DECK_SIZE).tolist()
    assert stats.chisquare(counts).pvalue > 1e-4


def test_cut_is_rotation():
    deck = standard_deck()
    cut = cut_deck(deck, 5)
    assert cut.cards[0] == deck.cards[5]
    assert cut.cards[-5:] == deck.cards[:5]
    assert cut_deck(deck, 0) == deck
    with pytest.raises(ConfigError):
        cut_deck(deck, DECK_SIZE)


def test_prearranged_deck_layout():
    deck = arrange_deck_debruijn()
    colors = deck.colors
    assert colors.count(RED) == 26 and colors.count(BLACK) == 26
    assert first_repeat(deck.color_sequence(), PREARRANGED_DRAW, CYCLIC) is None
    cycle = "".join(str(c) for c in db_generate(DeBruijnSpec(2, 6)).seq.symbols)
    run = "".join(str(c) for c in colors)
    assert run in cycle + cycle[:DECK_SIZE]
    reds = [card for card in deck.cards if card.color == RED]
    assert reds[0].name == "HA" and reds[-1].name == "DK"


def test_every_six_card_window_decodes_uniquely():
    deck = arrange_deck_debruijn()
    doubled = deck.colors + deck.colors
    for start in range(DECK_SIZE):
        decoding = decode_draw(deck, doubled[start:start + PREARRANGED_DRAW])
        assert decoding.unique
        assert decoding.candidates == (start,)
        assert decoding.next_card == deck.cards[(start + PREARRANGED_DRAW) % DECK_SIZE].name


def test_short_draw_is_ambiguous():
    deck = arrange_deck_debruijn()
    # 52 windows over 8 patterns: some pattern must recur
    decoding = max((decode_draw(deck, p) for p in itertools.product((BLACK, RED), repeat=3)),
                   key=lambda d: len(d.candidates))
    assert len(decoding.candidates) > 1
    assert decoding.next_card is None
    guess = magician_guess(decoding, RngSpec(2).generator())
    assert guess in decoding.candidates
    assert len(decoding.candidate_cards) == len(decoding.candidates)


def test_decode_rejects_bad_patterns():
    deck = standard_deck()
    with pytest.raises(ConfigError):
        decode_draw(deck, [])
    with pytest.raises(ConfigError):
        decode_draw(deck, [0, 2])
    missing = decode_draw(deck, [RED] * 27)
    assert missing.candidates == ()
    with pytest.raises(ConfigError):
        magician_guess(missing, RngSpec(0).generator())
