import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import norm, random_model, random_raw_formula, subformulas
from foml.formulas import (
    And,
    ArityError,
    Box,
    Diamond,
    EBBE,
    Exists,
    FomlError,
    Forall,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    all_vars,
    binders,
    check_arities,
    classify_fragment,
    clean_rename,
    components,
    enumerate_atoms,
    formula_key,
    free_vars,
    fresh_var,
    is_clean,
    is_literal,
    is_module,
    is_nested_forall,
    is_nnf,
    nnf_complement,
    outer_ex_vars,
    substitute,
    to_nnf,
)
from foml.kripke import check


def P(*args):
    return Pred("P", args)


def Q(*args):
    return Pred("Q", args)


# --- NNF -------------------------------------------------------------------


def test_nnf_de_morgan():
    phi = Not(And(P("x"), Q("x")))
    assert to_nnf(phi) == Or(Not(P("x")), Not(Q("x")))


def test_nnf_modal_dual():
    assert to_nnf(Not(Box(P("x")))) == Diamond(Not(P("x")))


def test_nnf_bundle_dual():
    phi = Not(Exists("x", Box(P("x"))))
    assert to_nnf(phi) == Forall("x", Diamond(Not(P("x"))))


def test_nnf_shape():
    phi = norm("~((P(x) -> Q(x,y)) <-> [] P(x))")
    assert is_nnf(phi)
    for sub in subformulas(phi):
        assert not isinstance(sub, (Implies, Iff))
        if isinstance(sub, Not):
            assert isinstance(sub.body, Pred)


@given(st.integers(0, 100_000))
@settings(max_examples=200, deadline=None)
def test_nnf_idempotent(seed):
    phi = random_raw_formula(random.Random(seed), 4, ["x", "u"])
    once = to_nnf(phi)
    assert to_nnf(once) == once


@given(st.integers(0, 100_000))
@settings(max_examples=200, deadline=None)
def test_nnf_preserves_semantics(seed):
    rng = random.Random(seed)
    phi = random_raw_formula(rng, 4, ["x", "u"])
    model = random_model(rng)
    world = rng.choice(sorted(model.worlds))
    dom = sorted(model.local_domain[world])
    sigma = {v: rng.choice(dom) for v in free_vars(phi)}
    assert check(model, world, sigma, phi) == check(model, world, sigma, to_nnf(phi))


def test_nnf_arity_clash_names_predicate():
    with pytest.raises(ArityError, match="P"):
        check_arities(And(P("x"), P("x", "y")))


# --- cleanliness -----------------------------------------------------------


def naive_is_clean(phi):
    seen = []
    for sub in subformulas(phi):
        if isinstance(sub, (Exists, Forall)):
            seen.append(sub.var)
    return len(seen) == len(set(seen)) and not (set(seen) & free_vars(phi))


def alpha_eq(a, b, env=None):
    env = env or {}
    if type(a) is not type(b):
        return False
    if isinstance(a, Pred):
        if a.name != b.name or len(a.args) != len(b.args):
            return False
        return all(env.get(x, x) == y for x, y in zip(a.args, b.args))
    if isinstance(a, Not):
        return alpha_eq(a.body, b.body, env)
    if isinstance(a, (And, Or, Implies, Iff)):
        return alpha_eq(a.left, b.left, env) and alpha_eq(a.right, b.right, env)
    if isinstance(a, (Box, Diamond)):
        return alpha_eq(a.body, b.body, env)
    return alpha_eq(a.body, b.body, {**env, a.var: b.var})


def test_clean_rename_second_binder():
    phi = Or(Exists("x", Box(P("x"))), Forall("x", Diamond(Q("x", "x"))))
    out = clean_rename(phi)
    assert out == Or(
        Exists("x", Box(P("x"))), Forall("v0", Diamond(Q("v0", "v0")))
    )


def test_clean_rename_bound_and_free_clash():
    phi = And(P("x"), Box(Exists("x", Q("x", "x"))))
    out = clean_rename(phi)
    assert out == And(P("x"), Box(Exists("v0", Q("v0", "v0"))))


def test_clean_rename_fixed_point():
    phi = And(Exists("a", Box(P("a"))), Q("x", "x"))
    assert clean_rename(phi, frozenset({"z"})) == phi


@given(st.integers(0, 100_000))
@settings(max_examples=200, deadline=None)
def test_clean_rename_properties(seed):
    rng = random.Random(seed)
    phi = random_raw_formula(rng, 5, ["x", "u"])
    forbidden = frozenset(rng.sample(["q0", "q1", "q2", "a", "b"], 3))
    out = clean_rename(phi, forbidden)
    assert is_clean(out)
    assert naive_is_clean(out)
    assert not (set(binders(out)) & forbidden)
    assert alpha_eq(phi, out)
    assert free_vars(out) == free_vars(phi)


def test_fresh_var_enumeration_order():
    assert fresh_var(frozenset()) == "v0"
    assert fresh_var(frozenset({"v0", "v1"})) == "v2"


def test_substitute_refuses_capture():
    phi = Exists("y", Q("x", "y"))
    with pytest.raises(FomlError):
        substitute(phi, {"x": "y"})
    assert substitute(phi, {"x": "z"}) == Exists("y", Q("z", "y"))


# --- free variables --------------------------------------------------------


def test_free_vars_all_bound():
    phi = Forall("x", Or(P("x"), Diamond(Exists("y", Q("x", "y")))))
    assert free_vars(phi) == frozenset()


def test_free_vars_mixed():
    phi = Forall("x", Exists("y", Or(P("x"), Diamond(Q("u", "y")))))
    assert free_vars(phi) == frozenset({"u"})


def test_free_vars_of_the_universal_body(phi1):
    body = phi1.body  # forall x. ...
    assert free_vars(body) == frozenset()
    assert free_vars(body.body) == frozenset({"x"})


# --- components and modules ------------------------------------------------


def ref_components(phi):
    if isinstance(phi, (And, Or)):
        return ref_components(phi.left) | ref_components(phi.right)
    if isinstance(phi, (Exists, Forall)):
        return {phi} | ref_components(phi.body)
    return {phi}


def test_components_literal():
    assert components(P("x")) == frozenset({P("x")})


def test_components_through_exists():
    phi = And(P("x"), Exists("y", Box(Q("y", "y"))))
    assert components(phi) == frozenset(
        {P("x"), Exists("y", Box(Q("y", "y"))), Box(Q("y", "y"))}
    )


def test_components_mixed_shape():
    beta, gamma, delta = (
        Pred("B", ("x", "y")),
        Pred("G", ("x",)),
        Pred("D", ("z",)),
    )
    phi = And(
        Or(Exists("y", Box(beta)), Diamond(gamma)), Forall("z", Diamond(delta))
    )
    expect = {
        Exists("y", Box(beta)),
        Box(beta),
        Diamond(gamma),
        Forall("z", Diamond(delta)),
        Diamond(delta),
    }
    assert components(phi) == frozenset(expect)
    assert components(phi) == frozenset(ref_components(phi))


@given(st.integers(0, 100_000))
@settings(max_examples=500, deadline=None)
def test_components_match_reference(seed):
    phi = to_nnf(random_raw_formula(random.Random(seed), 4, ["x", "u"]))
    assert components(phi) == frozenset(ref_components(phi))


def test_module_and_literal_predicates():
    assert is_module(Q("x", "y")) and is_literal(Q("x", "y"))
    assert is_module(Box(Forall("x", P("x"))))
    assert not is_literal(Box(Forall("x", P("x"))))
    both = And(P("x"), Q("x", "x"))
    assert not is_module(both) and not is_literal(both)


# --- outer existential variables -------------------------------------------


def ref_outer_ex(phi):
    if isinstance(phi, (And, Or)):
        return ref_outer_ex(phi.left) | ref_outer_ex(phi.right)
    if isinstance(phi, Exists):
        return {phi.var} | ref_outer_ex(phi.body)
    return set()


def test_outer_ex_vars_examples():
    phi = And(Exists("x", Box(P("x"))), Forall("y", Diamond(Q("y", "y"))))
    assert outer_ex_vars(phi) == frozenset({"x"})
    assert outer_ex_vars(Box(P("x"))) == frozenset()
    nested = Exists("x", Box(Exists("y", Box(Q("x", "y")))))
    assert outer_ex_vars(nested) == frozenset({"x"})


@given(st.integers(0, 100_000))
@settings(max_examples=500, deadline=None)
def test_outer_ex_vars_match_reference(seed):
    phi = to_nnf(random_raw_formula(random.Random(seed), 4, ["x", "u"]))
    assert outer_ex_vars(phi) == frozenset(ref_outer_ex(phi))


# --- nested universal detection --------------------------------------------


def test_nested_forall_flagship(phi1):
    assert is_nested_forall(phi1.body)


def test_non_nested_inner_universal(phi1):
    # the first diamond body inside the big conjunction quantifies over w
    # with no quantified component in scope
    conj = phi1.body.body
    inner = [
        s
        for s in subformulas(conj)
        if isinstance(s, Forall) and s.var == "w"
    ]
    assert inner and not is_nested_forall(inner[0])


def test_universal_over_module_not_nested():
    assert not is_nested_forall(Forall("x", Box(P("x"))))


def test_nested_forall_rejects_other_shapes():
    with pytest.raises((FomlError, ValueError)):
        is_nested_forall(Box(P("x")))


# --- atoms ------------------------------------------------------------------


from oracles import atoms_as_sets, brute_atoms


def test_atoms_two_way_choice():
    psi = norm(
        "((exists y . [] B(x,y,u)) | <> G(x,u)) & forall z . <> D(x,z)"
    )
    atoms = enumerate_atoms(psi, "x")
    assert len(atoms) == 2
    assert atoms_as_sets(atoms) == brute_atoms(psi)
    tail = norm("forall z . <> D(x,z)")
    assert all(tail in a.members for a in atoms)


def test_atoms_pure_conjunction(phi1):
    psi = phi1.body.body
    atoms = enumerate_atoms(psi, "x")
    assert len(atoms) == 1
    assert len(atoms[0].members) == 3
    assert atoms_as_sets(atoms) == brute_atoms(psi)


def test_atoms_single_literal():
    atoms = enumerate_atoms(P("x"), "x")
    assert atoms_as_sets(atoms) == {frozenset({P("x")})}


def test_atoms_contradictory_branch_pruned():
    psi = Or(P("x"), And(Q("x", "x"), Not(Q("x", "x"))))
    assert atoms_as_sets(enumerate_atoms(psi, "x")) == {frozenset({P("x")})}


@given(st.integers(0, 100_000))
@settings(max_examples=100, deadline=None)
def test_atoms_match_brute_force(seed):
    phi = to_nnf(random_raw_formula(random.Random(seed), 4, ["x", "u"]))
    if len(components(phi)) > 12:
        return
    assert atoms_as_sets(enumerate_atoms(phi, "x")) == brute_atoms(phi)


def test_atom_exists_members_ordering(phi1):
    (atom,) = enumerate_atoms(phi1.body.body, "x")
    ex = atom.exists_members
    assert len(ex) == 1 and isinstance(ex[0], Exists)


# --- fragment classification ------------------------------------------------


def test_classify_flagship(phi1):
    fc = classify_fragment(phi1)
    assert fc.category == EBBE
    assert fc.bundles_present == frozenset({"exists-box", "box-exists"})


def test_classify_single_bundle_subset():
    fc = classify_fragment(norm("<> forall x . P(x)"))
    assert fc.category == EBBE
    assert fc.bundles_present == frozenset({"box-exists"})


def test_classify_unbundled():
    assert classify_fragment(Forall("x", P("x"))).category == "NotBundled"


def test_classify_no_quantifiers_is_in_fragment():
    assert classify_fragment(norm("[] P(x) & <> ~Q(x,x)")).category == EBBE


def test_classify_box_forall_family():
    for text in ["[] forall x . <> P(x)", "<> exists x . [] P(x)"]:
        fc = classify_fragment(norm(text))
        assert fc.category == "FMP-decidable"


def test_classify_forall_box_with_exists_box_is_fmp():
    fc = classify_fragment(norm("(exists x . [] P(x)) & forall y . [] Q(y,y)"))
    assert fc.category == "FMP-decidable"
    assert fc.bundles_present == frozenset({"exists-box", "forall-box"})


def test_classify_forall_box_with_box_exists_is_fmp():
    fc = classify_fragment(
        norm("([] exists x . P(x)) & forall y . [] Q(y,y)")
    )
    assert fc.category == "FMP-decidable"
    assert fc.bundles_present == frozenset({"forall-box", "box-exists"})


def test_classify_exists_box_with_box_forall_goes_undecidable():
    fc = classify_fragment(
        norm("(exists x . [] P(x)) & [] forall y . <> Q(y,y)")
    )
    assert fc.bundles_present == frozenset({"exists-box", "box-forall"})
    assert fc.category == "Undecidable"


# --- odds and ends -----------------------------------------------------------


def test_nnf_complement_involution():
    for phi in [P("x"), Not(P("x")), Box(P("x")), Diamond(Not(Q("x", "x")))]:
        assert nnf_complement(nnf_complement(phi)) == phi


def test_formula_keys_are_stable_strings():
    phi = norm("P(x) & <> Q(x,x)")
    assert formula_key(phi) == formula_key(norm("P(x) & <> Q(x,x)"))
    assert all_vars(phi) == frozenset({"x"})
