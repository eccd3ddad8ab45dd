import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from depscale.corpus.types import Phq8Labels
from depscale.errors import (MissingInputError, ParseError, SessionMismatchError,
                             ValidationError)
from depscale.fusion import (EvalReport, FusionSpec, PredictionSet, evaluate, format_report,
                             fuse, read_predictions, simplex_grid, weight_search,
                             write_predictions, write_report)

scores = st.floats(0, 24, allow_nan=False)


def pset(name, values, ids=None):
    ids = ids or [f"s{k:03d}" for k in range(len(values))]
    return PredictionSet(name, dict(zip(ids, values)))


# ---------------------------------------------------------------- fuse

def test_two_session_examples():
    a, b = pset("a", [10.0]), pset("b", [14.0])
    assert fuse([a, b], FusionSpec.parse("weighted_mean:a=0.5,b=0.5")).scores["s000"] == 12.0
    assert fuse([a, b], FusionSpec("max")).scores["s000"] == 14.0


def test_equal_weights_match_brute_force_mean(rng):
    names = ("audio", "text", "head", "fisher")
    sets = [pset(n, rng.uniform(0, 24, 50)) for n in names]
    fused = fuse(sets, FusionSpec.equal(names))
    for sid in fused.session_ids:
        manual = sum(s.scores[sid] for s in sets) / 4
        assert fused.scores[sid] == pytest.approx(manual, abs=1e-12)


def test_one_hot_weights_reproduce_the_modality(rng):
    sets = [pset(n, rng.uniform(0, 24, 20)) for n in "abc"]
    fused = fuse(sets, FusionSpec("weighted_mean", {"a": 0.0, "b": 1.0, "c": 0.0}))
    assert fused.scores == sets[1].scores


@settings(max_examples=200, deadline=None)
@given(st.lists(st.lists(scores, min_size=5, max_size=5), min_size=2, max_size=4))
def test_fusion_bounds_property(rows):
    sets = [pset(f"m{k}", r) for k, r in enumerate(rows)]
    P = np.array(rows)
    mx = fuse(sets, FusionSpec("max")).vector(sets[0].session_ids)
    mean = fuse(sets, FusionSpec.equal([s.modality for s in sets])).vector(sets[0].session_ids)
    assert np.all(mx >= P.max(0)) and np.all(mx <= 24)
    assert np.all(mean >= P.min(0) - 1e-12) and np.all(mean <= P.max(0) + 1e-12)


def test_session_mismatch_lists_symmetric_difference():
    a = pset("a", [1.0, 2.0], ["x", "y"])
    b = pset("b", [1.0, 2.0], ["y", "z"])
    with pytest.raises(SessionMismatchError) as info:
        fuse([a, b], FusionSpec("max"))
    assert sorted(info.value.symmetric_difference) == ["x", "z"]


def test_spec_validation():
    with pytest.raises(ValidationError):
        FusionSpec("weighted_mean", {"a": 0.5, "b": 0.6})
    with pytest.raises(ValidationError):
        FusionSpec("weighted_mean", {"a": -0.5, "b": 1.5})
    with pytest.raises(ValidationError):
        FusionSpec("median")
    with pytest.raises(ValidationError):
        FusionSpec.parse("weighted_mean:a")
    with pytest.raises(ValidationError):
        fuse([pset("a", [1.0]), pset("b", [2.0])], FusionSpec.parse("weighted_mean:a=0.5,c=0.5"))
    # within the 1e-9 tolerance
    FusionSpec("weighted_mean", {"a": 0.3, "b": 0.7 + 5e-10})


def test_spec_round_trip():
    for text in ("max", "weighted_mean:audio=0.25,text=0.75"):
        spec = FusionSpec.parse(text)
        assert FusionSpec.parse(spec.format()) == spec


def test_prediction_range_enforced():
    with pytest.raises(ValidationError):
        pset("a", [25.0])
    with pytest.raises(ValidationError):
        pset("a", [-0.1])


# ---------------------------------------------------------------- evaluate

def test_hand_computed_report():
    rep = evaluate(pset("p", [0.0, 4.0]), {"s000": 0, "s001": 0})
    assert rep.rmse == math.sqrt(8) and rep.mae == 2.0 and rep.n_sessions == 2
    assert rep.residuals == {"s000": 0.0, "s001": 4.0}


def test_perfect_predictions():
    labels = {"a": Phq8Labels((1, 2, 0, 3, 1, 0, 2, 1)), "b": Phq8Labels((0,) * 8)}
    rep = evaluate(PredictionSet("p", {"a": 10, "b": 0}), labels)
    assert rep.rmse == 0.0 and rep.mae == 0.0


def test_random_pairs_against_direct_formula(rng):
    p, t = rng.uniform(0, 24, 100), rng.integers(0, 25, 100)
    rep = evaluate(pset("p", p), dict(zip(pset("x", p).session_ids, t)))
    d = p - t
    assert abs(rep.rmse - math.sqrt(math.fsum(x * x for x in d) / 100)) <= 1e-12
    assert abs(rep.mae - math.fsum(abs(x) for x in d) / 100) <= 1e-12


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(scores, st.integers(0, 24)), min_size=1, max_size=30))
def test_rmse_never_below_mae(pairs):
    p = pset("p", [a for a, _ in pairs])
    rep = evaluate(p, dict(zip(p.session_ids, [b for _, b in pairs])))
    assert rep.rmse >= rep.mae >= 0


def test_report_invariant_enforced():
    with pytest.raises(ArithmeticError):
        EvalReport(1.0, 2.0, {}, 1)


def test_evaluate_session_rules():
    p = pset("p", [1.0, 2.0], ["a", "b"])
    with pytest.raises(SessionMismatchError):
        evaluate(p, {"a": 1, "c": 2})
    assert evaluate(p, {"a": 1, "c": 2}, strict=False).n_sessions == 1
    with pytest.raises(ValidationError):
        evaluate(p, {"c": 2}, strict=False)


# ---------------------------------------------------------------- weight search

def test_simplex_grid_counts():
    assert len(simplex_grid(2, 0.1)) == 11
    assert len(simplex_grid(3, 0.1)) == 66
    assert all(abs(sum(w) - 1) < 1e-12 for w in simplex_grid(4, 0.25))
    with pytest.raises(ValidationError):
        simplex_grid(2, 0.3)
    with pytest.raises(ValidationError):
        simplex_grid(2, 0.0)


def test_identical_sets_tie_to_smallest_weights(rng):
    v = rng.uniform(0, 24, 10)
    truth = dict(zip(pset("x", v).session_ids, rng.integers(0, 25, 10)))
    res = weight_search([pset("a", v), pset("b", v)], truth, 0.1)
    assert len(res.table) == 11
    assert len({round(r.rmse, 9) for r in res.table}) == 1
    assert res.best_row.weights == (0.0, 1.0)


def test_perfect_predictor_gets_full_weight(rng):
    t = rng.integers(0, 25, 12)
    ids = pset("x", t).session_ids
    res = weight_search([pset("zero", np.zeros(12)), pset("good", t.astype(float))],
                        dict(zip(ids, t)), 0.1)
    assert res.best.weights == {"zero": 0.0, "good": 1.0}
    assert res.best_row.rmse == 0.0
    assert all(res.best_row.rmse <= r.rmse for r in res.table)


def test_weight_search_is_exhaustive_minimum(rng):
    t = rng.integers(0, 25, 15)
    ids = pset("x", t).session_ids
    sets = [pset(n, np.clip(t + rng.normal(0, s, 15), 0, 24)) for n, s in
            (("a", 2.0), ("b", 4.0), ("c", 6.0))]
    res = weight_search(sets, dict(zip(ids, t)), 0.1)
    assert len(res.table) == 66
    assert res.best_row.rmse == min(r.rmse for r in res.table)
    with pytest.raises(ValidationError):
        weight_search(sets[:1], dict(zip(ids, t)))


# ---------------------------------------------------------------- files

def test_prediction_file_round_trip(tmp_path, rng):
    p = pset("audio", rng.uniform(0, 24, 7))
    write_predictions(tmp_path / "audio.csv", p, {"seed": 3})
    back = read_predictions(tmp_path / "audio.csv")
    assert back.modality == "audio" and back.scores == p.scores


def test_prediction_file_errors(tmp_path):
    with pytest.raises(MissingInputError):
        read_predictions(tmp_path / "none.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("session_id,score\na,1\na,2\n")
    with pytest.raises(ParseError):
        read_predictions(bad)
    bad.write_text("id,value\na,1\n")
    with pytest.raises(ParseError):
        read_predictions(bad)


def test_report_file(tmp_path):
    rep = evaluate(pset("p", [0.0, 4.0]), {"s000": 0, "s001": 0})
    write_report(tmp_path / "r.csv", rep, {"seed": 0})
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[-1].startswith("RMSE=2.828427") and lines[-1].endswith("MAE=2.0")
    assert lines[1] == "session_id,residual"
    t = {"s000": 0, "s001": 0}
    res = weight_search([pset("a", [0.0, 4.0]), pset("b", [0.0, 0.0])], t)
    text = format_report(rep, {}, res.table, res.modalities)
    assert "weight_a,weight_b,rmse,mae" in text
