"""Fixture builders shared across test modules."""

from __future__ import annotations

import numpy as np

from hinex.evaluation import DetectionRecord, GroundTruthBox


def node(nid: str, name: str, parents=(), level=None) -> dict:
    return {"id": nid, "name": name, "parents": list(parents), "level": level}


def doc(nodes, levels=None) -> dict:
    return {"levels": levels, "nodes": list(nodes)}


def random_dag_doc(rng: np.random.Generator, max_nodes: int = 16, extra_parent_prob: float = 0.35) -> dict:
    """Random multi-parent DAG in topological id order, unique names."""
    count = int(rng.integers(3, max_nodes + 1))
    nodes = []
    for i in range(count):
        parents: list[str] = []
        if i > 0 and rng.random() > 0.12:
            k = 1 + int(i > 1 and rng.random() < extra_parent_prob)
            picks = rng.choice(i, size=min(k, i), replace=False)
            parents = [f"n{int(j)}" for j in sorted(picks)]
        nodes.append(node(f"n{i}", f"cat {i}", parents))
    return doc(nodes)


def random_tree_doc(rng: np.random.Generator, max_nodes: int = 16) -> dict:
    """Random single-parent tree (every non-root has exactly one parent)."""
    count = int(rng.integers(2, max_nodes + 1))
    nodes = [node("n0", "cat 0")]
    for i in range(1, count):
        parent = f"n{int(rng.integers(0, i))}"
        nodes.append(node(f"n{i}", f"cat {i}", [parent]))
    return doc(nodes)


def inject_back_edge(rng: np.random.Generator, document: dict) -> dict | None:
    """Add one parent edge that closes a cycle; None if the graph has no descendants."""
    children: dict[str, list[str]] = {n["id"]: [] for n in document["nodes"]}
    for n in document["nodes"]:
        for pid in n["parents"]:
            children[pid].append(n["id"])

    candidates = []
    for n in document["nodes"]:
        stack = list(children[n["id"]])
        seen = set()
        while stack:
            cid = stack.pop()
            if cid in seen:
                continue
            seen.add(cid)
            stack.extend(children[cid])
        for descendant in seen:
            candidates.append((n["id"], descendant))
    if not candidates:
        return None
    ancestor, descendant = candidates[int(rng.integers(0, len(candidates)))]
    broken = {
        "levels": document["levels"],
        "nodes": [dict(n, parents=list(n["parents"])) for n in document["nodes"]],
    }
    for n in broken["nodes"]:
        if n["id"] == ancestor:
            n["parents"].append(descendant)
    return broken


def three_level_doc(n_classes: int, supers_per_class: int, subs_per_class: int) -> dict:
    """Synthetic generated-style hierarchy: shared supers per class, private subs."""
    nodes = []
    for s in range(supers_per_class):
        nodes.append(node(f"sup{s}", f"group {s}", level=1))
    for c in range(n_classes):
        parents = [f"sup{s}" for s in range(supers_per_class)]
        nodes.append(node(f"coi{c}", f"class {c}", parents, level=2))
        for b in range(subs_per_class):
            nodes.append(node(f"sub{c}_{b}", f"kind {c} {b}", [f"coi{c}"], level=3))
    return doc(nodes, levels=3)


def leveled_fixture_doc(counts: tuple[int, ...]) -> dict:
    """Tree with the requested per-level class counts, parents assigned round-robin."""
    nodes = []
    for level, count in enumerate(counts, start=1):
        above = counts[level - 2] if level > 1 else 0
        for i in range(count):
            parents = [f"l{level - 1}_{i % above}"] if above else []
            nodes.append(node(f"l{level}_{i}", f"name {level} {i}", parents, level=level))
    return doc(nodes, levels=len(counts))


def random_detection_instance(rng: np.random.Generator):
    """Small random detection problem: <=5 images, <=6 boxes each, tied confidences likely."""
    n_images = int(rng.integers(1, 6))
    labels = ["alpha", "beta", "gamma"][: int(rng.integers(1, 4))]
    gts, dets = [], []
    for i in range(n_images):
        image = f"img{i}"
        for _ in range(int(rng.integers(1, 7))):
            x1, y1 = rng.uniform(0, 50, 2)
            w, h = rng.uniform(1, 30, 2)
            gts.append(
                GroundTruthBox(
                    image,
                    (float(x1), float(y1), float(x1 + w), float(y1 + h)),
                    labels[int(rng.integers(0, len(labels)))],
                )
            )
        for _ in range(int(rng.integers(0, 7))):
            x1, y1 = rng.uniform(0, 50, 2)
            w, h = rng.uniform(1, 30, 2)
            dets.append(
                DetectionRecord(
                    image,
                    (float(x1), float(y1), float(x1 + w), float(y1 + h)),
                    labels[int(rng.integers(0, len(labels)))],
                    float(rng.choice([0.9, 0.8, 0.7, 0.6, 0.5])),
                )
            )
    for g in gts:
        if rng.random() < 0.5:
            x1, y1, x2, y2 = g.box
            dx = float(rng.uniform(0, (x2 - x1) * 0.3))
            dets.append(
                DetectionRecord(
                    g.image_id,
                    (x1 + dx, y1, x2 + dx, y2),
                    g.leaf_label if rng.random() < 0.8 else labels[0],
                    float(rng.choice([0.95, 0.85, 0.75])),
                )
            )
    return gts, dets
