from concurrent.futures import ThreadPoolExecutor

import pytest

from trickbounds.errors import ConfigError, ExperimentAborted
from trickbounds.experiments import (
    ADVERSARY_FIXED,
    COLOR_PAIRS,
    DISTINGUISH,
    EQ,
    EXPECTED_ENTROPY,
    GE,
    LE,
    MARKOV,
    MATCHES,
    MEMORYLESS,
    REPEAT_ANY,
    REPEAT_SUCCESSOR,
    TRICK_PREARRANGED,
    TRICK_SHUFFLED,
    ZERO_PROB,
    BoundCheck,
    Distinguisher,
    ExperimentConfig,
    crossing_point,
    default_config,
    mean_and_se,
    prearranged_exhaustive,
    proportion_and_se,
    repeat_free_probability,
    run_experiment,
    run_sweep,
)
from trickbounds.performance_profile import PerformanceProfiler


def run(name, **overrides):
    overrides.setdefault("seed", 12345)
    return run_experiment(default_config(name, **overrides))


def test_bound_check_directions():
    assert BoundCheck("le", 0.5, 0.4, LE, 0.11).consistent
    assert not BoundCheck("le", 0.5, 0.4, LE, 0.09).consistent
    assert BoundCheck("ge", 0.3, 0.4, GE, 0.11).consistent
    assert not BoundCheck("ge", 0.3, 0.4, GE, 0.09).consistent
    assert not BoundCheck("eq", 1, 0, EQ, 0.0).consistent
    assert BoundCheck("vacuous", 9.0, 0.0, LE, 0.0, vacuous=True).consistent


def test_standard_error_floor():
    assert mean_and_se([0.0] * 100) == (0.0, 0.01)
    p, se = proportion_and_se(0, 50)
    assert p == 0.0 and se == 1 / 50
    mean, se = mean_and_se([0.0, 2.0] * 50)
    assert mean == 1.0 and se == pytest.approx(0.1005, rel=1e-3)


def test_unknown_experiment_lists_valid_names():
    with pytest.raises(ConfigError) as info:
        run_experiment(ExperimentConfig("birthday"))
    assert ZERO_PROB in str(info.value)
    with pytest.raises(ConfigError):
        default_config("birthday")


@pytest.mark.parametrize("overrides", [
    dict(trials=0),
    dict(k=100),
    dict(sigma=1),
    dict(seed=-3),
])
def test_matches_validation(overrides):
    with pytest.raises(ConfigError):
        default_config(MATCHES, **overrides).validate()


def test_distinguish_validation():
    with pytest.raises(ConfigError):
        default_config(DISTINGUISH, m=16).validate()
    with pytest.raises(ConfigError):
        default_config(DISTINGUISH, distinguisher="oracle").validate()
    with pytest.raises(ConfigError):
        default_config(DISTINGUISH, adversary="lazy").validate()


def test_dispatch_by_name():
    result = run(ZERO_PROB, n=10, k=12, trials=50)
    assert result.config.name == ZERO_PROB
    assert result.estimate == 1.0
    assert result.verdict == "consistent"


def test_matches_near_k():
    result = run(MATCHES, n=21, k=20, trials=2000)
    assert result.estimate < 0.01
    assert result.consistent


def test_matches_at_default_scale_reduced_trials():
    result = run(MATCHES, trials=4000)
    assert result.checks[0].value == pytest.approx(3240 / 2 ** 20)
    assert result.consistent


def test_expected_entropy_is_zero_past_n():
    result = run(EXPECTED_ENTROPY, n=10, k=12, trials=50)
    assert result.estimate == 0.0
    assert result.consistent


def test_expected_entropy_flags_vacuous_bound():
    result = run(EXPECTED_ENTROPY, n=100, k=5, trials=50)
    assert result.bound.vacuous
    assert result.verdict == "consistent"
    assert result.summary["regime"]["log_sigma_n"] is False


def test_zero_prob_flags_vacuous_bound():
    result = run(ZERO_PROB, n=100, k=10, trials=50)
    assert result.bound.vacuous
    assert result.bound.value < 0
    assert result.consistent


def test_zero_prob_reduced_trials():
    result = run(ZERO_PROB, trials=4000)
    assert result.estimate >= 0.99
    assert result.consistent


def test_shuffled_trick_extremes():
    assert run(TRICK_SHUFFLED, draw=52, trials=100).estimate == 1.0
    assert run(TRICK_SHUFFLED, draw=1, trials=100).estimate == 0.0


def test_shuffled_trick_seven_cards():
    result = run(TRICK_SHUFFLED, draw=7, trials=3000)
    assert result.estimate > 0.6
    assert result.bound.value == pytest.approx(1 - 51 / 128)
    assert result.summary["magician_success"]["rate"] >= result.estimate / 2
    assert result.consistent


def test_prearranged_trick_always_succeeds():
    result = run(TRICK_PREARRANGED, trials=500)
    assert result.estimate == 1.0
    assert result.summary["next_card"]["rate"] == 1.0
    assert result.verdict == "consistent"


def test_prearranged_short_draw_sometimes_fails():
    result = run(TRICK_PREARRANGED, draw=3, trials=500)
    assert result.estimate < 1.0
    assert result.bound.vacuous


def test_prearranged_exhaustive():
    result = prearranged_exhaustive()
    assert result.config.trials == 52 * 47
    assert result.estimate == 1.0
    assert result.summary["unique"]["count"] == 52 * 47


def test_color_pairs():
    result = run(COLOR_PAIRS, trials=5000)
    assert result.estimate == pytest.approx(25 / 51, abs=0.03)
    assert result.consistent


def test_distinguisher_rules():
    assert Distinguisher(REPEAT_SUCCESSOR, 1, 2).consume([0, 1, 0, 0]) == MEMORYLESS
    assert Distinguisher(REPEAT_SUCCESSOR, 1, 2).consume([0, 1, 0, 1]) == MARKOV
    assert Distinguisher(REPEAT_ANY, 2, 2).consume([0, 1, 0, 1]) == MEMORYLESS
    assert Distinguisher(REPEAT_ANY, 2, 2).consume([0, 0, 1, 1]) == MARKOV
    d = Distinguisher(REPEAT_ANY, 2, 2)
    d.consume([0, 0, 0])
    assert d.read == 3
    assert d.consume([0, 1]) == MARKOV


def test_repeat_free_probability():
    assert repeat_free_probability(64, 16, 2) == pytest.approx(0.98222, abs=1e-4)
    assert repeat_free_probability(1024, 16, 2) < 0.01


def test_distinguish_below_threshold():
    result = run(DISTINGUISH, m=64, trials=2000)
    assert result.estimate < 0.55
    assert result.summary["one_sided_violations"] == 0
    assert result.summary["fallback_trials"] == 0
    assert result.consistent


def test_distinguish_above_threshold_uses_fallback():
    result = run(DISTINGUISH, m=1024, trials=300)
    assert result.estimate > 2 / 3
    assert result.summary["one_sided_violations"] == 0
    assert result.summary["fallback_trials"] > 0
    assert result.summary["resample_rate"] > 0.9
    assert result.bound.vacuous
    assert result.consistent


def test_distinguish_fixed_adversary():
    result = run(DISTINGUISH, m=64, trials=500, adversary=ADVERSARY_FIXED, distinguisher=REPEAT_ANY)
    assert result.summary["one_sided_violations"] == 0
    assert result.summary["resample_attempts"] == 0
    assert result.consistent


def test_distinguish_aborts_without_fallback():
    with pytest.raises(ExperimentAborted):
        run(DISTINGUISH, sigma=2, k=4, m=40, trials=10)
    with pytest.raises(ExperimentAborted):
        run(DISTINGUISH, sigma=2, k=4, m=40, trials=10, adversary=ADVERSARY_FIXED)
    with pytest.raises(ExperimentAborted):
        run(DISTINGUISH, sigma=4, k=12, m=20_000, trials=10)


@pytest.mark.parametrize("name,overrides", [
    (DISTINGUISH, dict(m=128, trials=300)),
    (TRICK_SHUFFLED, dict(trials=200)),
    (MATCHES, dict(trials=300)),
    (COLOR_PAIRS, dict(trials=300)),
])
def test_results_do_not_depend_on_worker_count(name, overrides):
    single = run(name, workers=1, **overrides)
    pooled = run(name, workers=8, **overrides)
    assert single.as_record() == pooled.as_record()
    assert "elapsed" not in single.as_record()
    assert single.as_record(include_elapsed=True)["elapsed"] >= 0


def test_profiler_counts_trials():
    profiler = PerformanceProfiler()
    run_experiment(default_config(COLOR_PAIRS, trials=120, seed=1, workers=3), profiler)
    assert profiler.metrics()["trials"] == 120
    assert profiler.metrics()["chunks"] >= 1


def test_profiler_keeps_every_concurrent_chunk():
    profiler = PerformanceProfiler()
    profiler.start()
    with ThreadPoolExecutor(max_workers=8) as pool:
        list(pool.map(lambda _: profiler.record_chunk(3, 0.001), range(4000)))
    metrics = profiler.metrics()
    assert metrics["trials"] == 12_000
    assert metrics["chunks"] == 4000


def test_sweep_and_crossing_point():
    base = default_config(DISTINGUISH, trials=200, seed=99)
    results = run_sweep(base, "m", [64, 1024])
    assert [r.config.m for r in results] == [64, 1024]
    assert crossing_point(results, "m") == 1024
    assert crossing_point(results[:1], "m") is None
    with pytest.raises(ConfigError):
        run_sweep(base, "name", ["matches"])


def test_distinguish_success_grows_with_m():
    # sigma=2, k=16: sigma^(k/2) = 256
    base = default_config(DISTINGUISH, trials=2000, seed=7, workers=4)
    results = run_sweep(base, "m", [64, 128, 256, 512, 1024])
    for prev, cur in zip(results, results[1:]):
        se = (prev.standard_error ** 2 + cur.standard_error ** 2) ** 0.5
        assert cur.estimate >= prev.estimate - 3 * se
    assert crossing_point(results, "m") in (256, 512)


@pytest.mark.slow
@pytest.mark.parametrize("name,overrides", [
    (MATCHES, {}),
    (ZERO_PROB, {}),
    (EXPECTED_ENTROPY, {}),
    (TRICK_SHUFFLED, {}),
    (TRICK_PREARRANGED, {}),
    (COLOR_PAIRS, {}),
    (DISTINGUISH, dict(m=64)),
    (DISTINGUISH, dict(m=1024)),
])
def test_acceptance_scale(name, overrides):
    result = run(name, workers=4, **overrides)
    assert result.consistent
    if name == DISTINGUISH:
        if result.config.m == 64:
            assert result.estimate < 0.55
        else:
            assert result.estimate > 2 / 3
