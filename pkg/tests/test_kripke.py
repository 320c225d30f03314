import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import norm, random_model, random_raw_formula, random_relevant_sigma
from foml.extraction import extract_model
from foml.formulas import (
    And,
    Box,
    Diamond,
    Exists,
    Forall,
    FomlError,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    ResourceLimit,
    free_vars,
)
from foml.kripke import (
    KripkeModel,
    RelevanceError,
    bounded_model_search,
    check,
    model_from_json,
    model_to_json,
    validate_model,
)
from foml.parser import parse_formula


def single_world(facts=()):
    return KripkeModel(
        worlds=frozenset({"w"}),
        domain=frozenset({"e"}),
        edges=frozenset(),
        local_domain={"w": frozenset({"e"})},
        valuation={("w", p): frozenset(ts) for p, ts in facts},
    )


@pytest.fixture(scope="module")
def m0(phi1_result):
    return extract_model(phi1_result.tableau)


def test_validate_accepts_single_world():
    assert validate_model(single_world([("P", [("e",)])])) == []


def test_validate_reports_domain_shrink():
    bad = KripkeModel(
        worlds=frozenset({"w", "v"}),
        domain=frozenset({"e", "f"}),
        edges=frozenset({("w", "v")}),
        local_domain={"w": frozenset({"e", "f"}), "v": frozenset({"e"})},
        valuation={},
    )
    problems = validate_model(bad)
    assert any("shrinks" in p for p in problems)


def test_validate_accepts_extracted_model(m0):
    assert validate_model(m0) == []
    assert len(m0.worlds) == 23


def test_check_atomic_fact():
    m = single_world([("P", [("e",)])])
    assert check(m, "w", {"x": "e"}, Pred("P", ("x",)))
    assert not check(m, "w", {"x": "e"}, Pred("Q", ("x", "x")))


def test_extracted_model_fails_root_formula(phi1, m0):
    assert check(m0, "r", {}, phi1) is False


def test_extracted_model_instance_witnesses(m0):
    inst = norm("exists y. [][] P(x,y)")
    assert sorted(m0.local_domain["r.0"]) == ["v0", "v1", "v2"]
    assert check(m0, "r.0", {"x": "v0"}, inst) is True
    assert check(m0, "r.0", {"x": "v2"}, inst) is False


def test_check_rejects_irrelevant_assignment():
    m = single_world()
    with pytest.raises(RelevanceError) as err:
        check(m, "w", {}, Pred("P", ("x",)))
    assert err.value.var == "x"
    assert "x" in str(err.value) and "w" in str(err.value)
    with pytest.raises(RelevanceError):
        check(m, "w", {"x": "ghost"}, Pred("P", ("x",)))


def ref_check(model, w, sigma, phi):
    """Independent evaluator: fresh dicts, no sharing with the package code."""
    if isinstance(phi, Pred):
        args = tuple(sigma[a] for a in phi.args)
        return args in model.valuation.get((w, phi.name), frozenset())
    if isinstance(phi, Not):
        return not ref_check(model, w, sigma, phi.body)
    if isinstance(phi, And):
        return ref_check(model, w, sigma, phi.left) and ref_check(
            model, w, sigma, phi.right
        )
    if isinstance(phi, Or):
        return ref_check(model, w, sigma, phi.left) or ref_check(
            model, w, sigma, phi.right
        )
    if isinstance(phi, Implies):
        return (not ref_check(model, w, sigma, phi.left)) or ref_check(
            model, w, sigma, phi.right
        )
    if isinstance(phi, Iff):
        return ref_check(model, w, sigma, phi.left) == ref_check(
            model, w, sigma, phi.right
        )
    if isinstance(phi, Exists):
        return any(
            ref_check(model, w, {**sigma, phi.var: d}, phi.body)
            for d in model.local_domain[w]
        )
    if isinstance(phi, Forall):
        return all(
            ref_check(model, w, {**sigma, phi.var: d}, phi.body)
            for d in model.local_domain[w]
        )
    succ = [v for (u, v) in model.edges if u == w]
    if isinstance(phi, Box):
        return all(ref_check(model, v, sigma, phi.body) for v in succ)
    if isinstance(phi, Diamond):
        return any(ref_check(model, v, sigma, phi.body) for v in succ)
    raise TypeError(phi)


@given(st.integers(0, 10_000_000))
@settings(max_examples=500, deadline=None)
def test_check_agrees_with_reference_evaluator(seed):
    rng = random.Random(seed)
    model = random_model(rng)
    phi = random_raw_formula(rng, rng.randint(1, 4), ["x"])
    w = rng.choice(sorted(model.worlds))
    sigma = random_relevant_sigma(rng, model, w, sorted(free_vars(phi)))
    assert check(model, w, sigma, phi) == ref_check(model, w, sigma, phi)


def test_model_json_round_trip_is_canonical(m0):
    text = model_to_json(m0)
    assert model_to_json(model_from_json(text)) == text
    rng = random.Random(7)
    for _ in range(20):
        m = random_model(rng)
        text = model_to_json(m)
        again = model_from_json(text)
        assert model_to_json(again) == text
        assert validate_model(again) == validate_model(m)


def test_model_from_json_rejects_malformed_documents():
    for text in [
        "not json {",
        '{"worlds": ["w"]}',
        '{"worlds": ["w"], "edges": [["w"]], "domain": [], "delta": {}, "valuation": {}}',
        '{"worlds": ["w"], "edges": [], "domain": [], "delta": {"w": []}, "valuation": {"w": [["P"]]}}',
    ]:
        with pytest.raises(FomlError):
            model_from_json(text)


def test_oracle_finds_two_world_witness():
    phi = norm("<> forall x. exists y. [] P(x,y)")
    model, w, sigma = bounded_model_search(phi, 2, 1, 2)
    assert sorted(model.worlds) == ["w0", "w1"]
    assert sorted(model.edges) == [("w0", "w1")]
    assert sorted(model.domain) == ["a0"]
    assert w == "w0" and sigma == {}
    assert validate_model(model) == []
    assert check(model, w, sigma, phi)


def test_oracle_refutes_contradiction():
    phi = norm("P(x) & ~P(x)")
    assert bounded_model_search(phi, 3, 2, 2) is None


def test_oracle_refutes_flagship_in_tiny_trees(phi1):
    assert bounded_model_search(phi1, 3, 2, 3) is None


def test_oracle_results_check_out():
    rng = random.Random(11)
    hits = 0
    for _ in range(40):
        phi = norm(
            "(" + " | ".join(
                rng.choice(["P(x)", "~P(x)", "<> P(x)", "[] ~P(x)", "exists y. P(y)"])
                for _ in range(2)
            ) + ") & " + rng.choice(["<> P(x)", "P(x)", "~P(x)"])
        )
        got = bounded_model_search(phi, 2, 2, 2)
        if got is None:
            continue
        model, w, sigma = got
        hits += 1
        assert validate_model(model) == []
        assert check(model, w, sigma, phi)
    assert hits > 10


def test_oracle_budget_raises_with_count(phi1):
    with pytest.raises(ResourceLimit) as err:
        bounded_model_search(phi1, 3, 2, 3, max_steps=3)
    assert err.value.count > 3
    assert "work count" in str(err.value)


def test_oracle_rejects_bad_inputs(phi1):
    with pytest.raises(ValueError):
        bounded_model_search(parse_formula("P(x) -> Q(x,x)"), 2, 2, 2)
    with pytest.raises(ValueError):
        bounded_model_search(phi1, 0, 2, 2)
