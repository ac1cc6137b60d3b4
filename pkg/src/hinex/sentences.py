"""Turn a class and its hierarchy context into prompt sentences.

A branch is one specific-to-abstract chain through the target class; every
branch renders to exactly one sentence, and duplicates are deliberately
preserved so downstream aggregation weights match the branch structure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .hierarchy import SemanticHierarchy, normalize_name

IS_A_CONNECTOR = ", which is a "


@dataclass(frozen=True)
class Branch:
    """One chain: sub-categories (deepest first), the class itself, super-categories (nearest first)."""

    sub_chain: tuple[str, ...]
    coi: str
    super_chain: tuple[str, ...]

    def __post_init__(self) -> None:
        names = self.ordered_names()
        keys = [normalize_name(n) for n in names]
        if len(set(keys)) != len(keys):
            raise ValueError(f"branch repeats a category name: {names}")

    def ordered_names(self) -> list[str]:
        return [*self.sub_chain, self.coi, *self.super_chain]


@dataclass(frozen=True)
class SentenceSet:
    """Rendered sentences for one class, parallel to the branches that produced them."""

    coi: str
    sentences: tuple[str, ...]
    branch_origins: tuple[Branch, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValueError("a sentence set holds at least one sentence")
        if self.branch_origins and len(self.branch_origins) != len(self.sentences):
            raise ValueError("sentences and branch origins must stay parallel")


def enumerate_branches(hierarchy: SemanticHierarchy, coi: str) -> list[Branch]:
    """All branches through a node: sub-chains crossed with super-chains.

    Sub-chains vary in the outer loop and super-chains in the inner one,
    each in hierarchy declaration order, so output order is reproducible.
    An isolated node yields the single bare branch ((), name, ()).
    """
    node = hierarchy.node(coi)
    subs = hierarchy.lowest_sub_chains(coi)
    supers = hierarchy.super_chains(coi)
    return [
        Branch(tuple(sub), node.name, tuple(sup))
        for sub in subs
        for sup in supers
    ]


def render_is_a(branch: Branch) -> str:
    """Join the branch into one sentence with the Is-A connector.

    Template: "a {first}" then ", which is a {name}" for each later name.
    No trailing period; names pass through unchanged.
    """
    names = branch.ordered_names()
    return f"a {names[0]}" + "".join(f"{IS_A_CONNECTOR}{n}" for n in names[1:])


def render_concat(branch: Branch) -> str:
    """Space-concatenate the branch names behind a single leading article."""
    return "a " + " ".join(branch.ordered_names())


def render_ensemble_names(branch: Branch) -> list[str]:
    """One bare "a {name}" prompt per branch name; fusion happens downstream."""
    return [f"a {n}" for n in branch.ordered_names()]


def sentence_set(hierarchy: SemanticHierarchy, coi: str) -> SentenceSet:
    """Is-A sentences for every branch of a node, duplicates preserved."""
    branches = enumerate_branches(hierarchy, coi)
    return SentenceSet(
        coi=hierarchy.node(coi).name,
        sentences=tuple(render_is_a(b) for b in branches),
        branch_origins=tuple(branches),
    )
