"""Random formula generation inside the decidable bundle, plus the
differential harness that plays the tableau against the brute-force oracle.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, field
from typing import Optional

from .extraction import extract_model
from .forest import SkolemForest, forest_size_bound
from .formulas import (
    And,
    Box,
    Diamond,
    EBBE,
    Exists,
    Forall,
    Formula,
    Not,
    Or,
    Pred,
    ResourceLimit,
    classify_fragment,
    free_vars,
    is_clean,
    is_literal,
    is_nnf,
)
from .kripke import bounded_model_search, check, validate_model
from .parser import print_formula
from .tableau import SAT, SearchLimits, search, verify_tableau, render_world


def _default_weights() -> dict[str, float]:
    return {
        "literal": 3.0,
        "and": 2.0,
        "or": 2.0,
        "box": 1.0,
        "diamond": 1.0,
        "exists-box": 2.0,
        "forall-diamond": 2.0,
        "box-exists": 2.0,
        "diamond-forall": 2.0,
    }


@dataclass
class GenConfig:
    max_depth: int = 4
    max_predicates: int = 3
    max_arity: int = 2
    bundle_weights: dict = field(default_factory=_default_weights)
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")
        if any(w < 0 for w in self.bundle_weights.values()):
            raise ValueError("weights must be non-negative")
        unknown = set(self.bundle_weights) - set(_default_weights())
        if unknown:
            raise ValueError(f"unknown productions: {sorted(unknown)}")


def gen_formula(cfg: GenConfig, rng: Optional[random.Random] = None) -> Formula:
    """One clean NNF formula inside the bundle, deterministic per seed."""
    if rng is None:
        rng = random.Random(cfg.seed)
    arities = {
        f"P{i}": rng.randint(0, cfg.max_arity) for i in range(cfg.max_predicates)
    }
    if cfg.max_arity >= 1 and all(a == 0 for a in arities.values()):
        arities["P0"] = 1
    pred_names = sorted(arities)
    binder_count = [0]
    scope = ["f0"]
    if rng.random() < 0.3:
        scope.append("f1")

    weights = _default_weights()
    weights.update(cfg.bundle_weights)
    structural = [k for k in weights if k != "literal"]

    def literal(sc: list[str]) -> Formula:
        name = rng.choice(pred_names)
        args = tuple(rng.choice(sc) for _ in range(arities[name]))
        atom = Pred(name, args)
        return Not(atom) if rng.random() < 0.4 else atom

    def ensure_uses(body: Formula, var: str, sc: list[str]) -> Formula:
        if var in free_vars(body) or rng.random() >= 0.9:
            return body
        wide = [p for p in pred_names if arities[p] >= 1]
        if not wide:
            return body
        name = rng.choice(wide)
        args = [rng.choice(sc + [var]) for _ in range(arities[name])]
        args[rng.randrange(len(args))] = var
        return And(body, Pred(name, tuple(args)))

    def bind() -> str:
        name = f"b{binder_count[0]}"
        binder_count[0] += 1
        return name

    # A body directly under [] must not start with forall, and one directly
    # under <> must not start with exists; those pairings leave the bundle.
    no_forall_head = frozenset({"forall-diamond"})
    no_exists_head = frozenset({"exists-box"})

    def gen(depth: int, sc: list[str], ban: frozenset = frozenset()) -> Formula:
        if depth <= 1:
            return literal(sc)
        names = ["literal"] + [k for k in structural if k not in ban]
        pick = rng.choices(names, weights=[weights[n] for n in names])[0]
        if pick == "literal":
            return literal(sc)
        if pick == "and":
            return And(gen(depth - 1, sc), gen(depth - 1, sc))
        if pick == "or":
            return Or(gen(depth - 1, sc), gen(depth - 1, sc))
        if pick == "box":
            return Box(gen(depth - 1, sc, no_forall_head))
        if pick == "diamond":
            return Diamond(gen(depth - 1, sc, no_exists_head))
        x = bind()
        if pick == "exists-box":
            inner = ensure_uses(gen(depth - 1, sc + [x], no_forall_head), x, sc)
            return Exists(x, Box(inner))
        if pick == "forall-diamond":
            inner = ensure_uses(gen(depth - 1, sc + [x], no_exists_head), x, sc)
            return Forall(x, Diamond(inner))
        inner = ensure_uses(gen(depth - 1, sc + [x]), x, sc)
        if pick == "box-exists":
            return Box(Exists(x, inner))
        return Diamond(Forall(x, inner))

    phi = gen(cfg.max_depth, scope)
    assert is_nnf(phi) and is_clean(phi)
    assert classify_fragment(phi).category == EBBE
    return phi


def last_node_literal_violations(tableau, model) -> list[str]:
    """Every literal left at a world's last node must hold there."""
    last = {}
    for node in tableau.walk():
        last[node.world] = node
    out = []
    for w, node in sorted(last.items()):
        name = render_world(w)
        for g in sorted(node.gamma, key=print_formula):
            if not is_literal(g):
                continue
            sigma = {v: v for v in free_vars(g)}
            if not check(model, name, sigma, g):
                out.append(f"literal {print_formula(g)} fails at {name}")
    return out


def forest_bound_violations(tableau) -> list[str]:
    """Enforce the node-count ceiling on every forest in the certificate."""
    out = []
    for node in tableau.walk():
        if node.rule != "nestedForall" or not isinstance(node.forest, SkolemForest):
            continue
        f = node.forest
        bound = forest_size_bound(f.psi, f.var, len(f.roots()))
        if len(f.nodes) > bound:
            out.append(
                f"forest at {render_world(node.world)} has {len(f.nodes)} nodes, "
                f"bound {bound}"
            )
    return out


def differential_run(
    cfg: GenConfig,
    n: int,
    oracle_bounds: tuple[int, int, int] = (3, 2, 3),
    limits: Optional[SearchLimits] = None,
) -> dict:
    """Generate n formulas and cross-examine tableau verdicts vs the oracle.

    A record goes bad when the oracle finds a model the tableau missed, a SAT
    certificate fails re-verification, its extracted model fails validation
    or its leftover literals, or a forest outgrows its bound.
    """
    rng = random.Random(cfg.seed)
    records = []
    discrepancies = 0
    problem_records = 0
    for i in range(n):
        phi = gen_formula(cfg, rng)
        rec = {"index": i, "formula": print_formula(phi)}
        problems = []

        t0 = time.perf_counter()
        res = search(phi, limits or SearchLimits.derive(phi))
        rec["tableau"] = res.status
        rec["tableau_ms"] = round((time.perf_counter() - t0) * 1000, 3)

        t0 = time.perf_counter()
        try:
            oracle = bounded_model_search(phi, *oracle_bounds)
            oracle_status = "sat" if oracle is not None else "none"
        except ResourceLimit:
            # Inconclusive: the oracle found no model before its budget ran
            # out, so neither completeness direction is contradicted.
            oracle_status = "resource"
        rec["oracle"] = oracle_status
        rec["oracle_ms"] = round((time.perf_counter() - t0) * 1000, 3)

        if oracle_status == "sat" and res.status != SAT:
            rec["discrepancy"] = (
                f"oracle found a model but tableau reported {res.status}"
            )
            discrepancies += 1
        else:
            rec["discrepancy"] = None
        if res.status == SAT:
            problems.extend(verify_tableau(res.tableau, phi))
            m0 = extract_model(res.tableau)
            problems.extend(validate_model(m0))
            problems.extend(last_node_literal_violations(res.tableau, m0))
            problems.extend(forest_bound_violations(res.tableau))

        rec["problems"] = problems
        rec["ok"] = not problems and rec["discrepancy"] is None
        problem_records += bool(problems)
        records.append(rec)
    return {
        "seed": cfg.seed,
        "n": n,
        "oracle_bounds": list(oracle_bounds),
        "discrepancies": discrepancies,
        "problem_records": problem_records,
        "records": records,
    }


def report_to_jsonl(report: dict) -> str:
    lines = [
        json.dumps(
            {
                "type": "header",
                "seed": report["seed"],
                "n": report["n"],
                "oracle_bounds": report["oracle_bounds"],
            },
            sort_keys=True,
        )
    ]
    for rec in report["records"]:
        lines.append(json.dumps({"type": "record", **rec}, sort_keys=True))
    lines.append(
        json.dumps(
            {
                "type": "summary",
                "discrepancies": report["discrepancies"],
                "problem_records": report["problem_records"],
                "ok": report["discrepancies"] == 0
                and report["problem_records"] == 0,
            },
            sort_keys=True,
        )
    )
    return "\n".join(lines) + "\n"
