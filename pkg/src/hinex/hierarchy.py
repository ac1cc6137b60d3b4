"""Semantic hierarchy data model.

A hierarchy is a multi-parent DAG of named categories under the Is-A
relation. Instances are immutable after construction and safe for
concurrent reads; all mutation happens in the loader.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

# Names treated as virtual roots: chains stop below them and never include them.
DEFAULT_VIRTUAL_ROOTS = frozenset({"entity", "object", "thing"})

_WS = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    """Canonical comparison form: lowercase, outer whitespace stripped, inner runs collapsed."""
    return _WS.sub(" ", name.strip()).lower()


class HierarchyError(ValueError):
    """Malformed hierarchy document or invalid query."""


class DuplicateNodeError(HierarchyError):
    pass


class DanglingReferenceError(HierarchyError):
    pass


class CycleError(HierarchyError):
    pass


class DuplicateNameError(HierarchyError):
    pass


class UnknownNodeError(HierarchyError):
    pass


class LevelMappingError(HierarchyError):
    pass


class AmbiguousAncestorError(LevelMappingError):
    pass


@dataclass(frozen=True)
class CategoryNode:
    """One category. Parent/child links are kept mutually consistent by the loader."""

    id: str
    name: str
    parent_ids: tuple[str, ...] = ()
    child_ids: tuple[str, ...] = ()
    level: int | None = None


@dataclass(frozen=True)
class Vocabulary:
    """Ordered set of target class names, optionally bound to hierarchy nodes."""

    class_names: tuple[str, ...]
    level: int | None = None
    node_bindings: dict[str, str] | None = None

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for name in self.class_names:
            key = normalize_name(name)
            if key in seen:
                raise ValueError(f"duplicate class name in vocabulary: {name!r}")
            seen.add(key)
        if self.node_bindings is not None:
            missing = [c for c in self.class_names if c not in self.node_bindings]
            if missing:
                raise ValueError(f"vocabulary classes without node binding: {missing}")

    def __len__(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class SemanticHierarchy:
    """Validated, immutable category DAG with name and level indexes."""

    nodes: dict[str, CategoryNode]
    root_ids: tuple[str, ...]
    levels: int | None = None
    root_labels_excluded: frozenset[str] = DEFAULT_VIRTUAL_ROOTS
    # normalized name -> node ids carrying it (insertion order)
    _name_index: dict[str, tuple[str, ...]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> CategoryNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(f"unknown node id: {node_id!r}") from None

    def find_by_name(self, name: str, level: int | None = None) -> tuple[str, ...]:
        """Node ids whose name matches after normalization, optionally filtered by level."""
        ids = self._name_index.get(normalize_name(name), ())
        if level is None:
            return ids
        return tuple(i for i in ids if self.nodes[i].level == level)

    def is_virtual_root(self, node: CategoryNode) -> bool:
        return normalize_name(node.name) in self.root_labels_excluded

    def super_chains(self, coi: str) -> list[list[str]]:
        """Ancestor name chains for a node, one per distinct upward path.

        Each chain runs from the immediate parent upward and stops below any
        virtual root (its name and everything above it are dropped). A node
        with no usable parents yields one empty chain.
        """
        node = self.node(coi)
        chains: list[list[str]] = []

        def walk(n: CategoryNode, acc: list[str]) -> None:
            if not n.parent_ids:
                chains.append(list(acc))
                return
            for pid in n.parent_ids:
                parent = self.nodes[pid]
                if self.is_virtual_root(parent):
                    chains.append(list(acc))
                else:
                    acc.append(parent.name)
                    walk(parent, acc)
                    acc.pop()

        walk(node, [])
        return chains

    def lowest_sub_chains(self, coi: str) -> list[list[str]]:
        """Descendant name chains, one per downward path ending at a leaf.

        Chains are ordered deepest-first and stop at the node's immediate
        child level (the node itself is excluded). A leaf yields one empty
        chain. On single-parent subtrees the chain count equals the leaf
        count; with shared descendants each distinct path counts once.
        """
        node = self.node(coi)
        chains: list[list[str]] = []

        def walk(n: CategoryNode, acc: list[str]) -> None:
            if not n.child_ids:
                chains.append(list(reversed(acc)))
                return
            for cid in n.child_ids:
                child = self.nodes[cid]
                acc.append(child.name)
                walk(child, acc)
                acc.pop()

        walk(node, [])
        return chains

    def ancestor_ids(self, node_id: str) -> set[str]:
        """All transitive ancestors (virtual roots included)."""
        out: set[str] = set()
        stack = list(self.node(node_id).parent_ids)
        while stack:
            nid = stack.pop()
            if nid in out:
                continue
            out.add(nid)
            stack.extend(self.nodes[nid].parent_ids)
        return out

    def map_to_level(self, leaf_name: str, level: int) -> str:
        """Map a named node to its unique ancestor name at a coarser level.

        Identity when the node already sits at the requested level. Raises
        instead of guessing when no ancestor exists at that level or when
        several distinct ones do.
        """
        if self.levels is None:
            raise LevelMappingError("hierarchy declares no levels")
        if level < 1:
            raise LevelMappingError(f"level must be >= 1, got {level}")
        ids = self._name_index.get(normalize_name(leaf_name), ())
        if not ids:
            raise UnknownNodeError(f"unknown label: {leaf_name!r}")

        answers: set[str] = set()
        for nid in ids:
            node = self.nodes[nid]
            if node.level is None:
                continue
            if node.level == level:
                answers.add(node.name)
            elif node.level > level:
                at_level = {
                    self.nodes[a].name
                    for a in self.ancestor_ids(nid)
                    if self.nodes[a].level == level
                }
                if len(at_level) > 1:
                    raise AmbiguousAncestorError(
                        f"label {leaf_name!r} has multiple level-{level} ancestors: "
                        f"{sorted(at_level)}"
                    )
                answers |= at_level
        if not answers:
            raise LevelMappingError(f"label {leaf_name!r} has no ancestor at level {level}")
        if len(answers) > 1:
            raise AmbiguousAncestorError(
                f"label {leaf_name!r} maps ambiguously at level {level}: {sorted(answers)}"
            )
        return answers.pop()

    def level_vocabulary(self, level: int) -> Vocabulary:
        """All class names declared at a level, in document order, bound to their nodes."""
        names: list[str] = []
        bindings: dict[str, str] = {}
        for nid, node in self.nodes.items():
            if node.level == level:
                names.append(node.name)
                bindings[node.name] = nid
        if not names:
            raise LevelMappingError(f"hierarchy has no nodes at level {level}")
        return Vocabulary(tuple(names), level=level, node_bindings=bindings)

    def to_document(self) -> dict:
        return {
            "levels": self.levels,
            "nodes": [
                {
                    "id": n.id,
                    "name": n.name,
                    "parents": list(n.parent_ids),
                    "level": n.level,
                }
                for n in self.nodes.values()
            ],
        }

    def fingerprint(self) -> str:
        """Content hash of the hierarchy, independent of node declaration order."""
        doc = self.to_document()
        doc["nodes"] = sorted(doc["nodes"], key=lambda n: n["id"])
        payload = json.dumps(doc, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _find_cycle(parents: dict[str, tuple[str, ...]]) -> list[str] | None:
    """Return one id cycle (closed walk along parent edges) if any exists."""
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {nid: WHITE for nid in parents}
    for start in parents:
        if color[start] != WHITE:
            continue
        stack: list[tuple[str, int]] = [(start, 0)]
        path = [start]
        color[start] = GRAY
        while stack:
            nid, idx = stack[-1]
            if idx < len(parents[nid]):
                stack[-1] = (nid, idx + 1)
                nxt = parents[nid][idx]
                if color[nxt] == GRAY:
                    return path[path.index(nxt):] + [nxt]
                if color[nxt] == WHITE:
                    color[nxt] = GRAY
                    stack.append((nxt, 0))
                    path.append(nxt)
            else:
                color[nid] = BLACK
                stack.pop()
                path.pop()
    return None


def load_hierarchy(
    document: dict,
    *,
    root_labels_excluded: frozenset[str] | set[str] = DEFAULT_VIRTUAL_ROOTS,
) -> SemanticHierarchy:
    """Build a validated hierarchy from its canonical document form.

    The document stores only parent links; child links are derived here.
    Raises HierarchyError subclasses on duplicate ids, dangling parents,
    cycles, duplicate names within a declared level, or an empty document.
    """
    raw_nodes = document.get("nodes") or []
    if not raw_nodes:
        raise HierarchyError("empty hierarchy document")
    levels = document.get("levels")

    parents: dict[str, tuple[str, ...]] = {}
    names: dict[str, str] = {}
    node_levels: dict[str, int | None] = {}
    for raw in raw_nodes:
        nid = raw["id"]
        if nid in parents:
            raise DuplicateNodeError(f"duplicate node id: {nid!r}")
        parents[nid] = tuple(raw.get("parents") or ())
        names[nid] = raw["name"]
        node_levels[nid] = raw.get("level")

    for nid, pids in parents.items():
        for pid in pids:
            if pid not in parents:
                raise DanglingReferenceError(
                    f"node {nid!r} references missing parent {pid!r}"
                )
            if pid == nid:
                raise CycleError(f"node {nid!r} lists itself as parent")

    cycle = _find_cycle(parents)
    if cycle is not None:
        pretty = " -> ".join(names[n] for n in cycle)
        raise CycleError(f"hierarchy contains a cycle: {pretty}")

    if levels is not None:
        seen: dict[tuple[int, str], str] = {}
        for nid in parents:
            lvl = node_levels[nid]
            if lvl is None:
                continue
            key = (lvl, normalize_name(names[nid]))
            if key in seen:
                raise DuplicateNameError(
                    f"duplicate name {names[nid]!r} at level {lvl} "
                    f"(nodes {seen[key]!r} and {nid!r})"
                )
            seen[key] = nid

    children: dict[str, list[str]] = {nid: [] for nid in parents}
    for nid, pids in parents.items():
        for pid in pids:
            children[pid].append(nid)

    nodes = {
        nid: CategoryNode(
            id=nid,
            name=names[nid],
            parent_ids=parents[nid],
            child_ids=tuple(children[nid]),
            level=node_levels[nid],
        )
        for nid in parents
    }
    root_ids = tuple(nid for nid in nodes if not parents[nid])

    name_index: dict[str, tuple[str, ...]] = {}
    for nid in nodes:
        key = normalize_name(names[nid])
        name_index[key] = name_index.get(key, ()) + (nid,)

    return SemanticHierarchy(
        nodes=nodes,
        root_ids=root_ids,
        levels=levels,
        root_labels_excluded=frozenset(normalize_name(n) for n in root_labels_excluded),
        _name_index=name_index,
    )


def load_hierarchy_file(
    path: str | Path,
    *,
    root_labels_excluded: frozenset[str] | set[str] = DEFAULT_VIRTUAL_ROOTS,
) -> SemanticHierarchy:
    with open(path, encoding="utf-8") as fh:
        document = json.load(fh)
    return load_hierarchy(document, root_labels_excluded=root_labels_excluded)


def save_hierarchy_file(hierarchy: SemanticHierarchy, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(hierarchy.to_document(), fh, ensure_ascii=False, indent=2)
        fh.write("\n")


def load_vocabulary(path: str | Path, level: int | None = None) -> Vocabulary:
    """Read a newline-delimited class list; blank lines and '#' comments are skipped."""
    names: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            entry = line.strip()
            if not entry or entry.startswith("#"):
                continue
            names.append(entry)
    return Vocabulary(tuple(names), level=level)
