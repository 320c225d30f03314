"""Skolem forests: labeled witness trees rooted at the current variable set.

A forest answers the one nested universal quantifier alive at a world. Every
node is a fresh variable labeled by an atom of the quantified body; each
existential member of a non-leaf's label gets a designated child as witness.
A branch may stop only once its label has no existential members or has
already appeared twice strictly above.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .formulas import (
    Atom,
    Exists,
    Forall,
    Formula,
    FomlError,
    ResourceLimit,
    all_vars,
    clean_rename,
    enumerate_atoms,
    fresh_var,
    is_nested_forall,
    substitute,
    var_key,
)


class _ForestSentinel:
    """Placeholder forest states a tableau node can carry."""

    def __init__(self, tag: str):
        self._tag = tag

    def __repr__(self) -> str:
        return self._tag

    def __deepcopy__(self, memo):
        return self


NOT_INIT = _ForestSentinel("NotInit")
EMPTY_TREE = _ForestSentinel("EmptyTree")


@dataclass(frozen=True)
class ForestNode:
    name: str
    parent: Optional[str]
    atom: Atom
    children: tuple[str, ...] = ()


@dataclass(frozen=True)
class SkolemForest:
    """Immutable forest for one nested quantifier ∀var. psi."""

    var: str
    psi: Formula
    nodes: tuple[ForestNode, ...]

    def by_name(self) -> dict[str, ForestNode]:
        return {n.name: n for n in self.nodes}

    def names(self) -> frozenset[str]:
        return frozenset(n.name for n in self.nodes)

    def roots(self) -> list[ForestNode]:
        return [n for n in self.nodes if n.parent is None]

    def leaves(self) -> list[ForestNode]:
        return [n for n in self.nodes if not n.children]

    def strict_ancestors(self, name: str) -> list[ForestNode]:
        """Ancestors of the named node, nearest parent first."""
        index = self.by_name()
        out = []
        cur = index[name].parent
        while cur is not None:
            node = index[cur]
            out.append(node)
            cur = node.parent
        return out


def find_nested_forall(gamma: Iterable[Formula]) -> Forall:
    """The unique nested universal in gamma; anything else is an error."""
    found = [g for g in gamma if isinstance(g, Forall) and is_nested_forall(g)]
    if len(found) != 1:
        raise FomlError(
            f"expected exactly one nested universal formula, found {len(found)}"
        )
    return found[0]


def forest_size_bound(psi: Formula, var: str, n_roots: int) -> int:
    """Node-count ceiling for minimal forests over psi with n_roots roots.

    With A atoms and at most b existential members per atom, branches repeat
    a label after at most 2A+1 nodes, so max(b, 2)^(2A+2) majorizes any tree.
    """
    atoms = enumerate_atoms(psi, var)
    n_atoms = len(atoms)
    branching = max((len(a.exists_members) for a in atoms), default=0)
    return n_roots * max(branching, 2) ** (2 * n_atoms + 2)


def _admissible(atom: Atom, ancestor_atoms: list[Atom]) -> bool:
    if not atom.exists_members:
        return True
    return sum(1 for a in ancestor_atoms if a == atom) >= 2


def enumerate_forests(
    gamma: Iterable[Formula],
    s: Iterable[str],
    limits=None,
) -> Iterator[SkolemForest]:
    """All minimal skolem-forests for gamma's nested universal, lazily.

    Label choices are tried in atom order per node (breadth-first node
    order), so the stream is canonical and duplicate-free. Shape carries no
    choice: a node closes exactly when its label is admissible. A forest
    growing past the node budget raises with the count yielded so far.
    """
    gamma = list(gamma)
    quant = find_nested_forall(gamma)
    var, psi = quant.var, quant.body
    atoms = enumerate_atoms(psi, var)
    roots = sorted(set(s), key=var_key)
    max_nodes = getattr(limits, "max_forest_nodes", None) if limits else None

    if not roots:
        yield SkolemForest(var=var, psi=psi, nodes=())
        return
    if not atoms:
        return

    avoid = set(roots)
    for g in gamma:
        avoid |= all_vars(g)

    order: list[str] = list(roots)
    parents: dict[str, Optional[str]] = {r: None for r in roots}
    labels: dict[str, Atom] = {}
    kids: dict[str, tuple[str, ...]] = {}
    used = set(avoid)
    yielded = 0

    def ancestor_atoms(name: str) -> list[Atom]:
        out = []
        cur = parents[name]
        while cur is not None:
            out.append(labels[cur])
            cur = parents[cur]
        return out

    def walk(i: int) -> Iterator[SkolemForest]:
        nonlocal yielded
        if i == len(order):
            nodes = tuple(
                ForestNode(n, parents[n], labels[n], kids[n]) for n in order
            )
            yielded += 1
            yield SkolemForest(var=var, psi=psi, nodes=nodes)
            return
        z = order[i]
        above = ancestor_atoms(z)
        for atom in atoms:
            labels[z] = atom
            if _admissible(atom, above):
                kids[z] = ()
                yield from walk(i + 1)
            else:
                n_new = len(atom.exists_members)
                if max_nodes is not None and len(order) + n_new > max_nodes:
                    raise ResourceLimit(
                        "skolem-forest node budget exceeded", yielded
                    )
                fresh = []
                for _ in range(n_new):
                    name = fresh_var(used)
                    used.add(name)
                    fresh.append(name)
                    parents[name] = z
                    order.append(name)
                kids[z] = tuple(fresh)
                yield from walk(i + 1)
                for name in fresh:
                    used.discard(name)
                    del parents[name]
                del order[len(order) - n_new :]
            del labels[z]
            del kids[z]

    yield from walk(0)


def validate_forest(
    forest: SkolemForest, gamma: Iterable[Formula], s: Iterable[str]
) -> list[str]:
    """Check every forest invariant against gamma; names each violation."""
    gamma = list(gamma)
    quant = find_nested_forall(gamma)
    out: list[str] = []
    if forest.var != quant.var or forest.psi != quant.body:
        out.append("forest was built for a different quantified formula")
        return out

    names = [n.name for n in forest.nodes]
    if len(names) != len(set(names)):
        out.append("duplicate node names")
        return out
    index = forest.by_name()

    for node in forest.nodes:
        if node.parent is not None:
            parent = index.get(node.parent)
            if parent is None:
                out.append(f"node {node.name!r} has unknown parent {node.parent!r}")
            elif node.name not in parent.children:
                out.append(
                    f"node {node.name!r} missing from children of {node.parent!r}"
                )
        for c in node.children:
            child = index.get(c)
            if child is None or child.parent != node.name:
                out.append(f"child link {node.name!r} -> {c!r} is inconsistent")

    for node in forest.nodes:
        seen = {node.name}
        cur = node.parent
        while cur is not None:
            if cur in seen:
                out.append(f"cycle through {node.name!r}")
                break
            seen.add(cur)
            cur = index[cur].parent if cur in index else None
    if out:
        return out

    roots = {n.name for n in forest.roots()}
    expected = set(s)
    if roots != expected:
        out.append(
            f"roots {sorted(roots, key=var_key)} differ from "
            f"{sorted(expected, key=var_key)}"
        )

    valid_atoms = set(enumerate_atoms(quant.body, quant.var))
    for node in forest.nodes:
        if node.atom not in valid_atoms:
            out.append(f"node {node.name!r} carries an invalid atom")
            continue
        n_exists = len(node.atom.exists_members)
        if node.children:
            if len(node.children) != n_exists:
                out.append(
                    f"node {node.name!r} has {len(node.children)} children "
                    f"for {n_exists} existential members"
                )
        else:
            above = [a.atom for a in forest.strict_ancestors(node.name)]
            if not _admissible(node.atom, above):
                out.append(
                    f"leaf {node.name!r} still owes witnesses: its label has "
                    "existential members and no two ancestors repeat it"
                )
    return out


def is_minimal_forest(forest: SkolemForest) -> bool:
    """True when every branch closes at the first admissible node."""
    for node in forest.nodes:
        above = [a.atom for a in forest.strict_ancestors(node.name)]
        if bool(node.children) == _admissible(node.atom, above):
            return False
    return True


def expand_forest(forest, gamma: Iterable[Formula]) -> frozenset[Formula]:
    """Replace the nested universal with its forest instances.

    Every node contributes its non-existential members instantiated at the
    node; every non-leaf additionally contributes one existential per member,
    rebound to the designated child. Instances are freshened one by one so
    the result stays clean as a set.
    """
    gamma = set(gamma)
    if forest is NOT_INIT:
        raise FomlError("cannot expand an uninitialized forest")
    if forest is EMPTY_TREE:
        return frozenset(gamma)
    quant = find_nested_forall(gamma)
    if forest.var != quant.var or forest.psi != quant.body:
        raise FomlError("forest does not match the nested universal in gamma")

    base = gamma - {quant}
    forbidden: set[str] = set(forest.names())
    for g in base:
        forbidden |= all_vars(g)

    out = set(base)
    for node in forest.nodes:
        exists_seen = 0
        for member in node.atom.members:
            if isinstance(member, Exists):
                slot = exists_seen
                exists_seen += 1
                if not node.children:
                    continue
                witness = node.children[slot]
                inner = substitute(
                    member.body, {forest.var: node.name, member.var: witness}
                )
                inner = clean_rename(inner, forbidden | {witness, node.name})
                inst: Formula = Exists(witness, inner)
            else:
                inst = clean_rename(
                    substitute(member, {forest.var: node.name}), forbidden
                )
            out.add(inst)
            forbidden |= all_vars(inst)
    return frozenset(out)


def extend_forest(forest: SkolemForest, leaf: str, avoid: Iterable[str] = ()) -> SkolemForest:
    """Grow the forest at a repeat-label leaf by copying the repeated subtree.

    The leaf takes the position of its nearest-to-root ancestor with the same
    label; the ancestor's subtree is copied below it with fresh names, each
    copy closing as soon as its new root path makes it admissible.
    """
    index = forest.by_name()
    if leaf not in index:
        raise FomlError(f"no node named {leaf!r} in the forest")
    node = index[leaf]
    if node.children:
        raise FomlError(f"node {leaf!r} is not a leaf")
    if not node.atom.exists_members:
        raise FomlError(f"leaf {leaf!r} has no existential members to witness")
    path = forest.strict_ancestors(leaf)
    shared = [a for a in path if a.atom == node.atom]
    if len(shared) < 2:
        raise FomlError(f"leaf {leaf!r} lacks two ancestors repeating its label")
    top = shared[-1]

    used = {n.name for n in forest.nodes}
    used |= set(avoid) | all_vars(forest.psi) | {forest.var}

    new_nodes: dict[str, ForestNode] = {n.name: n for n in forest.nodes}
    creation: list[str] = []
    counterpart = {top.name: leaf}

    def new_ancestors(name: str) -> list[Atom]:
        out = []
        cur = new_nodes[name].parent
        while cur is not None:
            here = new_nodes[cur]
            out.append(here.atom)
            cur = here.parent
        return out

    queue = [top.name]
    while queue:
        orig_name = queue.pop(0)
        orig = index[orig_name]
        copy_name = counterpart[orig_name]
        parent = (
            node.parent
            if copy_name == leaf
            else counterpart[orig.parent]
        )
        new_nodes[copy_name] = ForestNode(copy_name, parent, orig.atom, ())
        if copy_name != leaf and _admissible(orig.atom, new_ancestors(copy_name)):
            continue
        fresh_children = []
        for child in orig.children:
            name = fresh_var(used)
            used.add(name)
            counterpart[child] = name
            fresh_children.append(name)
            creation.append(name)
            queue.append(child)
        new_nodes[copy_name] = ForestNode(
            copy_name, parent, orig.atom, tuple(fresh_children)
        )

    ordered = [new_nodes[n.name] for n in forest.nodes]
    ordered.extend(new_nodes[name] for name in creation)
    return SkolemForest(var=forest.var, psi=forest.psi, nodes=tuple(ordered))


def dump_forest(forest) -> str:
    """Indented text tree, one `name : {atom members}` line per node."""
    if forest is NOT_INIT or forest is EMPTY_TREE:
        return repr(forest)
    index = forest.by_name()
    lines: list[str] = []

    def emit(name: str, depth: int) -> None:
        node = index[name]
        lines.append("  " * depth + f"{node.name} : {node.atom}")
        for c in node.children:
            emit(c, depth + 1)

    for root in forest.roots():
        emit(root.name, 0)
    return "\n".join(lines)
