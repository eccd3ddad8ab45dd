import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depscale.corpus.stats import (AUDIO9, HEAD3, VIDEO11, Stat, StatSet, descriptive_stats,
                                   rounded_mode, stats_vector)
from depscale.errors import ValidationError
from oracles import stat_oracle

ALL = StatSet(list(Stat))


def rel_err(a, b):
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(b), 1e-300)


def random_series(rng, n):
    # half discrete values (so the mode is meaningful), half continuous
    if rng.random() < 0.5:
        return rng.integers(-20, 20, n) / 8.0
    return rng.normal(rng.uniform(-5, 5), rng.uniform(0.1, 10), n)


def test_matches_oracle_on_random_series(rng):
    for _ in range(200):
        x = random_series(rng, int(rng.integers(2, 300)))
        got = descriptive_stats(x, ALL)
        want = stat_oracle(x.tolist())
        for name, v in got.items():
            assert math.isclose(v, want[name], rel_tol=1e-9, abs_tol=1e-12), name


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=60))
def test_matches_oracle_property(xs):
    got = descriptive_stats(xs, ALL)
    want = stat_oracle(xs)
    scale = max(1.0, max(abs(v) for v in xs))
    for name, v in got.items():
        # moments of nearly-constant data are ill-conditioned; compare those loosely
        if name in ("skew", "kurt"):
            if np.ptp(xs) < 1e-6 * scale:
                continue
            assert math.isclose(v, want[name], rel_tol=1e-6, abs_tol=1e-6), name
        else:
            assert math.isclose(v, want[name], rel_tol=1e-9, abs_tol=1e-9 * scale), name


def test_stat_set_orders():
    assert VIDEO11.names == ["min", "max", "mean", "mode", "median", "range", "meandev",
                             "var", "std", "skew", "kurt"]
    assert AUDIO9.names == ["mean", "min", "skew", "kurt", "std", "median", "p2rms", "rms", "iqr"]
    assert HEAD3.names == ["mean", "median", "mode"]
    assert list(descriptive_stats([1.0, 2.0], AUDIO9)) == AUDIO9.names


def test_stat_set_rejects_duplicates_and_empty():
    with pytest.raises(ValidationError):
        StatSet([Stat.MEAN, Stat.MEAN])
    with pytest.raises(ValidationError):
        StatSet([])


def test_hand_computed_values():
    s = descriptive_stats([1.0, 2.0, 2.0, 5.0], ALL)
    assert s["mean"] == 2.5
    assert s["median"] == 2.0
    assert s["mode"] == 2.0
    assert s["range"] == 4.0
    assert s["var"] == pytest.approx(3.0)  # (2.25+.25+.25+6.25)/3
    assert s["meandev"] == pytest.approx(1.25)
    assert s["rms"] == pytest.approx(math.sqrt(34 / 4))
    assert s["iqr"] == pytest.approx(2.75 - 1.75)  # type-7 quartiles


def test_constant_series_has_zero_shape_moments():
    s = descriptive_stats([3.0] * 10, ALL)
    assert s["skew"] == 0.0 and s["kurt"] == 0.0 and s["var"] == 0.0 and s["mode"] == 3.0


def test_single_value():
    s = descriptive_stats([4.0], VIDEO11)
    assert s["var"] == 0.0 and s["std"] == 0.0 and s["median"] == 4.0


def test_zero_series_peak_to_rms():
    assert descriptive_stats([0.0, 0.0], AUDIO9)["p2rms"] == 0.0


def test_mode_rounds_and_prefers_smallest():
    assert rounded_mode([1.00001, 1.00002, 2.0, 2.0]) in (1.0, 2.0)
    assert rounded_mode([1.000001, 1.000002, 2.0]) == 1.0  # rounding merges the first two
    assert rounded_mode([3.0, 1.0, 2.0]) == 1.0
    assert rounded_mode([5.0, 5.0, 4.0, 4.0]) == 4.0


def test_symmetric_data_has_zero_skew():
    assert descriptive_stats([-2.0, -1.0, 0.0, 1.0, 2.0])["skew"] == pytest.approx(0.0, abs=1e-15)


def test_normal_kurtosis_is_not_excess(rng):
    assert descriptive_stats(rng.standard_normal(200_000))["kurt"] == pytest.approx(3.0, abs=0.05)


def test_rejects_empty_and_nonfinite():
    with pytest.raises(ValidationError):
        descriptive_stats([])
    with pytest.raises(ValidationError):
        descriptive_stats([1.0, np.nan])


def test_stats_vector_order():
    x = [1.0, 4.0, 9.0]
    np.testing.assert_array_equal(stats_vector(x, HEAD3),
                                  [descriptive_stats(x)["mean"], 4.0, 1.0])
