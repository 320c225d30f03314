"""Formula AST and syntactic machinery for a bundled fragment of first-order
modal logic.

There are no constants or function symbols; predicate arguments are plain
variables. Diamond is a first-class node rather than sugar for ~[]~ because
negation normal form needs it and the solver pattern-matches on it directly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

Var = str


class FomlError(Exception):
    """Base class for errors raised by this package."""


class ArityError(FomlError):
    """A predicate symbol is used with two different arities."""

    def __init__(self, name: str, seen: int, conflicting: int):
        super().__init__(
            f"predicate {name!r} used with arity {seen} and with arity {conflicting}"
        )
        self.name = name


class FragmentError(FomlError):
    """The formula lies outside the fragment a component can handle."""


class ResourceLimit(FomlError):
    """A configured enumeration or search budget was exceeded."""

    def __init__(self, message: str, count: int = 0):
        super().__init__(f"{message} (work count {count})")
        self.count = count


@dataclass(frozen=True)
class Pred:
    """Atomic predicate application, e.g. P(x, y). Arity may be zero."""

    name: str
    args: tuple[Var, ...] = ()

    def __str__(self) -> str:
        if not self.args:
            return self.name
        return f"{self.name}({','.join(self.args)})"


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __str__(self) -> str:
        return f"~{self.body}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} -> {self.right})"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"({self.left} <-> {self.right})"


@dataclass(frozen=True)
class Exists:
    var: Var
    body: "Formula"

    def __str__(self) -> str:
        return f"(exists {self.var}. {self.body})"


@dataclass(frozen=True)
class Forall:
    var: Var
    body: "Formula"

    def __str__(self) -> str:
        return f"(forall {self.var}. {self.body})"


@dataclass(frozen=True)
class Box:
    body: "Formula"

    def __str__(self) -> str:
        return f"[]{self.body}"


@dataclass(frozen=True)
class Diamond:
    body: "Formula"

    def __str__(self) -> str:
        return f"<>{self.body}"


Formula = Union[Pred, Not, And, Or, Implies, Iff, Exists, Forall, Box, Diamond]

_BINARY = (And, Or, Implies, Iff)
_QUANT = (Exists, Forall)
_MODAL = (Box, Diamond)

_ENUM_VAR = re.compile(r"v(\d+)\Z")


def formula_key(phi: Formula) -> str:
    """Stable sort key so iteration over formula sets is deterministic."""
    return str(phi)


def var_key(name: Var) -> tuple:
    """Sort key placing the fresh enumeration v0, v1, ... in numeric order."""
    m = _ENUM_VAR.match(name)
    if m:
        return (0, int(m.group(1)), "")
    return (1, 0, name)


def fresh_var(avoid: Iterable[Var]) -> Var:
    """Smallest variable of the fixed enumeration v0, v1, ... not in avoid."""
    taken = set(avoid)
    i = 0
    while f"v{i}" in taken:
        i += 1
    return f"v{i}"


def check_arities(phi: Formula) -> dict[str, int]:
    """Collect predicate arities, raising ArityError on any inconsistency."""
    arities: dict[str, int] = {}

    def walk(node: Formula) -> None:
        if isinstance(node, Pred):
            n = len(node.args)
            old = arities.setdefault(node.name, n)
            if old != n:
                raise ArityError(node.name, old, n)
        elif isinstance(node, Not):
            walk(node.body)
        elif isinstance(node, _BINARY):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, _QUANT):
            walk(node.body)
        elif isinstance(node, _MODAL):
            walk(node.body)
        else:
            raise TypeError(f"not a formula: {node!r}")

    walk(phi)
    return arities


def free_vars(phi: Formula) -> frozenset[Var]:
    if isinstance(phi, Pred):
        return frozenset(phi.args)
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, _BINARY):
        return free_vars(phi.left) | free_vars(phi.right)
    if isinstance(phi, _QUANT):
        return free_vars(phi.body) - {phi.var}
    return free_vars(phi.body)


def binders(phi: Formula) -> list[Var]:
    """Bound-variable names in preorder, duplicates kept."""
    out: list[Var] = []

    def walk(node: Formula) -> None:
        if isinstance(node, Pred):
            return
        if isinstance(node, Not):
            walk(node.body)
        elif isinstance(node, _BINARY):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, _QUANT):
            out.append(node.var)
            walk(node.body)
        else:
            walk(node.body)

    walk(phi)
    return out


def all_vars(phi: Formula) -> frozenset[Var]:
    return free_vars(phi) | frozenset(binders(phi))


def is_clean(phi: Formula) -> bool:
    """No variable both bound and free, and no variable bound twice."""
    bs = binders(phi)
    return len(bs) == len(set(bs)) and not (set(bs) & free_vars(phi))


def substitute(phi: Formula, mapping: Mapping[Var, Var]) -> Formula:
    """Rename free occurrences of variables.

    Binders shadow the mapping. Capture (a binder equal to a substituted-in
    name while that entry is live) is an internal error; callers freshen
    binders beforehand.
    """
    if not mapping:
        return phi
    if isinstance(phi, Pred):
        return Pred(phi.name, tuple(mapping.get(a, a) for a in phi.args))
    if isinstance(phi, Not):
        return Not(substitute(phi.body, mapping))
    if isinstance(phi, _BINARY):
        return type(phi)(substitute(phi.left, mapping), substitute(phi.right, mapping))
    if isinstance(phi, _QUANT):
        live = {k: v for k, v in mapping.items() if k != phi.var}
        if not live:
            return phi
        if phi.var in live.values():
            raise FomlError(f"substitution would capture binder {phi.var!r}")
        return type(phi)(phi.var, substitute(phi.body, live))
    return type(phi)(substitute(phi.body, mapping))


def clean_rename(phi: Formula, forbidden: Iterable[Var] = ()) -> Formula:
    """Rewrite binders one by one, in preorder, so the result is clean and
    avoids the forbidden names.

    A binder is kept when its name is still unused; otherwise it becomes the
    first variable of the fixed enumeration that clashes with nothing. The
    result is alpha-equivalent to the input and deterministic.
    """
    used = set(forbidden) | set(free_vars(phi))
    taken = set(forbidden) | set(all_vars(phi))

    def walk(node: Formula, ren: dict[Var, Var]) -> Formula:
        if isinstance(node, Pred):
            return Pred(node.name, tuple(ren.get(a, a) for a in node.args))
        if isinstance(node, Not):
            return Not(walk(node.body, ren))
        if isinstance(node, _BINARY):
            return type(node)(walk(node.left, ren), walk(node.right, ren))
        if isinstance(node, _QUANT):
            name = node.var
            if name in used:
                new = fresh_var(used | taken)
                taken.add(new)
            else:
                new = name
            used.add(new)
            inner = dict(ren)
            inner[name] = new
            return type(node)(new, walk(node.body, inner))
        return type(node)(walk(node.body, ren))

    return walk(phi, {})


def to_nnf(phi: Formula) -> Formula:
    """Negation normal form: negation only on atoms, no -> or <->.

    Implication a -> b becomes ~a | b. The biconditional a <-> b becomes
    (a & b) | (~a & ~b), and its negation (a & ~b) | (~a & b).
    """
    check_arities(phi)

    def walk(node: Formula, positive: bool) -> Formula:
        if isinstance(node, Pred):
            return node if positive else Not(node)
        if isinstance(node, Not):
            return walk(node.body, not positive)
        if isinstance(node, And):
            pair = walk(node.left, positive), walk(node.right, positive)
            return And(*pair) if positive else Or(*pair)
        if isinstance(node, Or):
            pair = walk(node.left, positive), walk(node.right, positive)
            return Or(*pair) if positive else And(*pair)
        if isinstance(node, Implies):
            if positive:
                return Or(walk(node.left, False), walk(node.right, True))
            return And(walk(node.left, True), walk(node.right, False))
        if isinstance(node, Iff):
            if positive:
                return Or(
                    And(walk(node.left, True), walk(node.right, True)),
                    And(walk(node.left, False), walk(node.right, False)),
                )
            return Or(
                And(walk(node.left, True), walk(node.right, False)),
                And(walk(node.left, False), walk(node.right, True)),
            )
        if isinstance(node, Exists):
            if positive:
                return Exists(node.var, walk(node.body, True))
            return Forall(node.var, walk(node.body, False))
        if isinstance(node, Forall):
            if positive:
                return Forall(node.var, walk(node.body, True))
            return Exists(node.var, walk(node.body, False))
        if isinstance(node, Box):
            if positive:
                return Box(walk(node.body, True))
            return Diamond(walk(node.body, False))
        if positive:
            return Diamond(walk(node.body, True))
        return Box(walk(node.body, False))

    return walk(phi, True)


def is_nnf(phi: Formula) -> bool:
    if isinstance(phi, Pred):
        return True
    if isinstance(phi, Not):
        return isinstance(phi.body, Pred)
    if isinstance(phi, (Implies, Iff)):
        return False
    if isinstance(phi, (And, Or)):
        return is_nnf(phi.left) and is_nnf(phi.right)
    return is_nnf(phi.body)


def nnf_complement(phi: Formula) -> Formula:
    """Negation of an NNF formula, again in NNF."""
    if isinstance(phi, Pred):
        return Not(phi)
    if isinstance(phi, Not):
        if isinstance(phi.body, Pred):
            return phi.body
        raise ValueError(f"not in negation normal form: {phi}")
    if isinstance(phi, And):
        return Or(nnf_complement(phi.left), nnf_complement(phi.right))
    if isinstance(phi, Or):
        return And(nnf_complement(phi.left), nnf_complement(phi.right))
    if isinstance(phi, Exists):
        return Forall(phi.var, nnf_complement(phi.body))
    if isinstance(phi, Forall):
        return Exists(phi.var, nnf_complement(phi.body))
    if isinstance(phi, Box):
        return Diamond(nnf_complement(phi.body))
    if isinstance(phi, Diamond):
        return Box(nnf_complement(phi.body))
    raise ValueError(f"not in negation normal form: {phi}")


def is_literal(phi: Formula) -> bool:
    return isinstance(phi, Pred) or (
        isinstance(phi, Not) and isinstance(phi.body, Pred)
    )


def is_module(phi: Formula) -> bool:
    """A literal or a formula whose outermost symbol is a modality."""
    return is_literal(phi) or isinstance(phi, _MODAL)


def components(phi: Formula) -> frozenset[Formula]:
    """The set of subformulas evaluated at the current world.

    Modules contribute themselves; conjunction and disjunction are flattened;
    a quantified formula contributes itself plus the components of its body.
    """
    if is_module(phi):
        return frozenset({phi})
    if isinstance(phi, (And, Or)):
        return components(phi.left) | components(phi.right)
    if isinstance(phi, _QUANT):
        return frozenset({phi}) | components(phi.body)
    raise ValueError(f"not in negation normal form: {phi}")


def outer_ex_vars(phi: Formula) -> frozenset[Var]:
    """Existential variables not guarded by any modality or universal.

    These are exactly the witnesses the tableau strips at the world where the
    formula lives, so they must already sit in that world's local domain.
    """
    if is_module(phi):
        return frozenset()
    if isinstance(phi, (And, Or)):
        return outer_ex_vars(phi.left) | outer_ex_vars(phi.right)
    if isinstance(phi, Exists):
        return frozenset({phi.var}) | outer_ex_vars(phi.body)
    if isinstance(phi, Forall):
        return frozenset()
    raise ValueError(f"not in negation normal form: {phi}")


def is_nested_forall(phi: Formula) -> bool:
    """True when a universally quantified formula has a quantified component.

    Such formulas are the source of unbounded witness chains and get the
    skolem-forest treatment instead of plain instantiation.
    """
    if not isinstance(phi, Forall):
        raise ValueError(f"expected a universally quantified formula: {phi}")
    return any(isinstance(c, _QUANT) for c in components(phi.body))


def modal_depth(phi: Formula) -> int:
    if isinstance(phi, Pred):
        return 0
    if isinstance(phi, Not):
        return modal_depth(phi.body)
    if isinstance(phi, _BINARY):
        return max(modal_depth(phi.left), modal_depth(phi.right))
    if isinstance(phi, _QUANT):
        return modal_depth(phi.body)
    return 1 + modal_depth(phi.body)


@dataclass(frozen=True)
class Atom:
    """Label of a skolem-forest node.

    One minimal way a single element can satisfy the matrix of a nested
    universal formula: every disjunction resolved, every conjunction kept,
    no member together with its complement. Members stay in the matrix's
    left-to-right order.
    """

    members: tuple[Formula, ...]

    @property
    def exists_members(self) -> tuple[Exists, ...]:
        return tuple(m for m in self.members if isinstance(m, Exists))

    def __str__(self) -> str:
        return "{" + ", ".join(str(m) for m in self.members) + "}"


def skeleton_leaves(psi: Formula) -> list[Formula]:
    """Leaves of the and/or skeleton in document order, without duplicates."""
    out: list[Formula] = []
    seen: set[Formula] = set()

    def walk(node: Formula) -> None:
        if isinstance(node, (And, Or)):
            walk(node.left)
            walk(node.right)
            return
        if not (is_module(node) or isinstance(node, _QUANT)):
            raise ValueError(f"not in negation normal form: {node}")
        if node not in seen:
            seen.add(node)
            out.append(node)

    walk(psi)
    return out


def skeleton_eval(psi: Formula, members: Iterable[Formula]) -> bool:
    """Evaluate the and/or skeleton with the given leaves taken as true."""
    have = set(members)

    def walk(node: Formula) -> bool:
        if isinstance(node, And):
            return walk(node.left) and walk(node.right)
        if isinstance(node, Or):
            return walk(node.left) or walk(node.right)
        return node in have

    return walk(psi)


def enumerate_atoms(psi: Formula, x: Var) -> list[Atom]:
    """All atoms of psi with respect to x, in a fixed order.

    Resolution of the and/or skeleton generates candidate member sets; the
    inconsistent ones (containing some leaf and its complement) and the
    non-minimal ones are dropped. Every minimal consistent set of leaves
    satisfying the skeleton survives, so the enumeration is complete.
    """
    leaves = skeleton_leaves(psi)
    index = {f: i for i, f in enumerate(leaves)}

    def resolve(node: Formula) -> list[frozenset[int]]:
        if isinstance(node, And):
            lefts = resolve(node.left)
            rights = resolve(node.right)
            combos = []
            seen: set[frozenset[int]] = set()
            for a in lefts:
                for b in rights:
                    u = a | b
                    if u not in seen:
                        seen.add(u)
                        combos.append(u)
            return combos
        if isinstance(node, Or):
            merged = []
            seen = set()
            for c in resolve(node.left) + resolve(node.right):
                if c not in seen:
                    seen.add(c)
                    merged.append(c)
            return merged
        return [frozenset({index[node]})]

    candidates = resolve(psi)
    consistent = []
    for cand in candidates:
        chosen = {leaves[i] for i in cand}
        if any(nnf_complement(f) in chosen for f in chosen):
            continue
        if cand not in consistent:
            consistent.append(cand)
    minimal = [c for c in consistent if not any(o < c for o in consistent)]
    minimal.sort(key=lambda c: tuple(sorted(c)))
    return [Atom(tuple(leaves[i] for i in sorted(c))) for c in minimal]


BUNDLE_FORALL_BOX = "forall-box"
BUNDLE_EXISTS_BOX = "exists-box"
BUNDLE_BOX_FORALL = "box-forall"
BUNDLE_BOX_EXISTS = "box-exists"

EBBE = "EBBE"
FMP_DECIDABLE = "FMP-decidable"
UNDECIDABLE = "Undecidable"
NOT_BUNDLED = "NotBundled"

_EBBE_BUNDLES = frozenset({BUNDLE_EXISTS_BOX, BUNDLE_BOX_EXISTS})
_FMP_ROWS = (
    frozenset({BUNDLE_FORALL_BOX, BUNDLE_EXISTS_BOX}),
    frozenset({BUNDLE_FORALL_BOX, BUNDLE_BOX_FORALL, BUNDLE_BOX_EXISTS}),
)


@dataclass(frozen=True)
class FragmentClass:
    """Which quantifier-modality bundles occur, and the resulting category."""

    bundles_present: frozenset[str]
    category: str


def classify_fragment(phi: Formula) -> FragmentClass:
    """Detect bundle patterns in the NNF of phi and map them to a category.

    A quantifier directly under a modality is attributed to that modality;
    otherwise a modal body makes the bundle, and a quantifier adjacent to no
    modality at all rules the formula out of every bundled fragment. Any
    bundle set within {exists-box, box-exists} is EBBE, including strict
    subsets and the empty set.
    """
    nnf = to_nnf(phi)
    bundles: set[str] = set()
    unbundled = False

    def walk(node: Formula, under: str | None) -> None:
        nonlocal unbundled
        if isinstance(node, Pred):
            return
        if isinstance(node, Not):
            return
        if isinstance(node, (And, Or)):
            walk(node.left, None)
            walk(node.right, None)
            return
        if isinstance(node, Box):
            walk(node.body, "box")
            return
        if isinstance(node, Diamond):
            walk(node.body, "diamond")
            return
        if isinstance(node, Exists):
            if under == "box":
                bundles.add(BUNDLE_BOX_EXISTS)
            elif under == "diamond":
                bundles.add(BUNDLE_BOX_FORALL)
            elif isinstance(node.body, Box):
                bundles.add(BUNDLE_EXISTS_BOX)
            elif isinstance(node.body, Diamond):
                bundles.add(BUNDLE_FORALL_BOX)
            else:
                unbundled = True
            walk(node.body, None)
            return
        if under == "box":
            bundles.add(BUNDLE_BOX_FORALL)
        elif under == "diamond":
            bundles.add(BUNDLE_BOX_EXISTS)
        elif isinstance(node.body, Box):
            bundles.add(BUNDLE_FORALL_BOX)
        elif isinstance(node.body, Diamond):
            bundles.add(BUNDLE_EXISTS_BOX)
        else:
            unbundled = True
        walk(node.body, None)

    walk(nnf, None)
    present = frozenset(bundles)
    if unbundled:
        category = NOT_BUNDLED
    elif present <= _EBBE_BUNDLES:
        category = EBBE
    elif any(present <= row for row in _FMP_ROWS):
        category = FMP_DECIDABLE
    else:
        category = UNDECIDABLE
    return FragmentClass(present, category)
