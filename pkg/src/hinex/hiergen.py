"""Three-level hierarchy synthesis for a vocabulary via an LLM.

Each class is asked for super-categories and sub-categories several times;
the per-class result is the deduplicated union across queries. Raw
responses are cached verbatim on disk keyed by prompt, model, temperature
and query index, so a warm cache replays a run without any client calls.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import requests

from .hierarchy import SemanticHierarchy, Vocabulary, load_hierarchy, normalize_name

_MAX_ATTEMPTS = 3
_LIST_PREFIX = re.compile(r"^(?:\s*(?:[-*•]|\d+\s*[.)])\s*)+")


class HierGenError(RuntimeError):
    pass


@dataclass
class HierGenConfig:
    """Knobs for synthesis: list sizes, query count, sampling, identity, cache."""

    p: int = 3
    q: int = 10
    t: int = 3
    temperature: float = 0.7
    context: str = "object"
    endpoint: str | None = None
    model: str = "gpt-3.5-turbo"
    cache_dir: str | Path | None = None
    retry_base_delay: float = 1.0
    rate_interval: float = 0.0

    def __post_init__(self) -> None:
        if min(self.p, self.q, self.t) < 1:
            raise ValueError("p, q and t must all be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


def super_prompt(cfg: HierGenConfig, class_name: str) -> str:
    return (
        f"Generate a list of {cfg.p} super-categories that the following "
        f"{cfg.context} belongs to and output the list separated by '&': {class_name}"
    )


def sub_prompt(cfg: HierGenConfig, class_name: str) -> str:
    return (
        f"Generate a list of {cfg.q} types of the following "
        f"{cfg.context} and output the list separated by '&': {class_name}"
    )


def parse_amp_list(response: str) -> list[str]:
    """Split an '&'-separated response into clean names, order preserved.

    Trims whitespace, drops leading bullets or numbering, and skips empty
    items; no other cleanup is applied to the generated names.
    """
    names: list[str] = []
    for part in response.split("&"):
        name = _LIST_PREFIX.sub("", part.strip()).strip()
        if name:
            names.append(name)
    return names


class HttpChatClient:
    """Minimal chat-completions client: one user message in, first choice text out."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, prompt: str, temperature: float) -> str:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "temperature": temperature,
            "messages": [{"role": "user", "content": prompt}],
        }
        try:
            resp = requests.post(self.endpoint, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise HierGenError(f"LLM endpoint unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise HierGenError(f"LLM endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise HierGenError(f"malformed LLM response: {exc}") from exc


class ScriptedChatClient:
    """Replays canned responses from a JSON table keyed by exact prompt text.

    Values are either a single response string or a list consumed round-robin
    across repeated queries of the same prompt. Useful for offline runs and
    deterministic tests; the call counter makes cache behavior observable.
    """

    def __init__(self, table: dict[str, str | list[str]] | str | Path):
        if not isinstance(table, dict):
            with open(table, encoding="utf-8") as fh:
                table = json.load(fh)
        self.table = table
        self.calls = 0
        self._cursor: dict[str, int] = {}

    def complete(self, prompt: str, temperature: float) -> str:
        self.calls += 1
        try:
            entry = self.table[prompt]
        except KeyError:
            raise HierGenError(f"scripted client has no response for prompt: {prompt!r}") from None
        if isinstance(entry, str):
            return entry
        idx = self._cursor.get(prompt, 0)
        self._cursor[prompt] = idx + 1
        return entry[idx % len(entry)]


def _cache_key(cfg: HierGenConfig, prompt: str, query_index: int) -> str:
    payload = f"{cfg.model}\x1f{cfg.temperature!r}\x1f{query_index}\x1f{prompt}"
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _cache_read(cfg: HierGenConfig, key: str) -> str | None:
    if cfg.cache_dir is None:
        return None
    path = Path(cfg.cache_dir) / f"{key}.json"
    if not path.exists():
        return None
    try:
        with open(path, encoding="utf-8") as fh:
            record = json.load(fh)
        return record["response"]
    except (json.JSONDecodeError, KeyError, OSError) as exc:
        raise HierGenError(f"corrupt cache entry {path}: {exc}") from exc


def _cache_write(cfg: HierGenConfig, key: str, prompt: str, query_index: int, response: str) -> None:
    if cfg.cache_dir is None:
        return
    cache_dir = Path(cfg.cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    record = {
        "model": cfg.model,
        "temperature": cfg.temperature,
        "query_index": query_index,
        "prompt": prompt,
        "response": response,
    }
    # write-then-rename keeps entries atomic under concurrent runs
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(record, fh, ensure_ascii=False)
        os.replace(tmp, cache_dir / f"{key}.json")
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _QueryRunner:
    """Cache-first query execution with bounded retries and a rate ceiling."""

    def __init__(self, cfg: HierGenConfig, client):
        self.cfg = cfg
        self.client = client
        self._last_call = 0.0

    def run(self, prompt: str, query_index: int) -> str:
        key = _cache_key(self.cfg, prompt, query_index)
        cached = _cache_read(self.cfg, key)
        if cached is not None:
            return cached

        last_error: Exception | None = None
        for attempt in range(_MAX_ATTEMPTS):
            if self.cfg.rate_interval > 0:
                wait = self._last_call + self.cfg.rate_interval - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
            try:
                self._last_call = time.monotonic()
                response = self.client.complete(prompt, self.cfg.temperature)
                _cache_write(self.cfg, key, prompt, query_index, response)
                return response
            except Exception as exc:  # client failures are retried, never papered over
                last_error = exc
                if attempt + 1 < _MAX_ATTEMPTS:
                    time.sleep(self.cfg.retry_base_delay * (2**attempt))
        raise HierGenError(
            f"LLM query failed after {_MAX_ATTEMPTS} attempts: {last_error}"
        ) from last_error


def _union_queries(runner: _QueryRunner, prompt: str, t: int) -> list[str]:
    """Deduplicated union (first casing wins) over t repetitions of one prompt."""
    seen: set[str] = set()
    union: list[str] = []
    for qidx in range(1, t + 1):
        response = runner.run(prompt, qidx)
        names = parse_amp_list(response)
        if not names:
            warnings.warn(f"query {qidx} returned an empty list for prompt: {prompt!r}", stacklevel=2)
        for name in names:
            key = normalize_name(name)
            if key not in seen:
                seen.add(key)
                union.append(name)
    return union


def synthesize_hierarchy(vocab: Vocabulary, cfg: HierGenConfig, client) -> SemanticHierarchy:
    """Build a validated three-level hierarchy around the vocabulary classes.

    Levels are 1 (generated supers), 2 (the classes), 3 (generated subs).
    Names repeated across classes merge into shared nodes; a generated
    super naming another class becomes a direct cross-link unless it would
    close a cycle. Generated names equal to the class itself, to another
    class (for subs), or colliding with the class's super-chains are
    dropped so every class still enumerates clean branches.
    """
    runner = _QueryRunner(cfg, client)
    coi_key_to_id = {normalize_name(name): f"coi:{normalize_name(name)}" for name in vocab.class_names}

    node_names: dict[str, str] = {}
    node_levels: dict[str, int] = {}
    parents: dict[str, list[str]] = {}
    order: list[str] = []

    def add_node(nid: str, name: str, level: int) -> None:
        if nid not in node_names:
            node_names[nid] = name
            node_levels[nid] = level
            parents[nid] = []
            order.append(nid)

    def reaches(start: str, target: str) -> bool:
        stack = [start]
        seen: set[str] = set()
        while stack:
            nid = stack.pop()
            if nid == target:
                return True
            if nid in seen:
                continue
            seen.add(nid)
            stack.extend(parents[nid])
        return False

    for name in vocab.class_names:
        add_node(coi_key_to_id[normalize_name(name)], name, 2)

    for class_name in vocab.class_names:
        coi_key = normalize_name(class_name)
        coi_id = coi_key_to_id[coi_key]

        supers = _union_queries(runner, super_prompt(cfg, class_name), cfg.t)
        super_keys: set[str] = set()
        for sname in supers:
            skey = normalize_name(sname)
            if skey == coi_key:
                continue
            if skey in coi_key_to_id:
                target = coi_key_to_id[skey]
                if reaches(target, coi_id):
                    warnings.warn(
                        f"dropping super link {class_name!r} -> {sname!r}: it would close a cycle",
                        stacklevel=2,
                    )
                    continue
                if target not in parents[coi_id]:
                    parents[coi_id].append(target)
                super_keys.add(skey)
            else:
                sid = f"sup:{skey}"
                add_node(sid, sname, 1)
                if sid not in parents[coi_id]:
                    parents[coi_id].append(sid)
                super_keys.add(skey)

        subs = _union_queries(runner, sub_prompt(cfg, class_name), cfg.t)
        for bname in subs:
            bkey = normalize_name(bname)
            if bkey == coi_key or bkey in coi_key_to_id or bkey in super_keys:
                continue
            bid = f"sub:{bkey}"
            add_node(bid, bname, 3)
            if coi_id not in parents[bid]:
                parents[bid].append(coi_id)

    document = {
        "levels": 3,
        "nodes": [
            {"id": nid, "name": node_names[nid], "parents": parents[nid], "level": node_levels[nid]}
            for nid in order
        ],
    }
    hierarchy = load_hierarchy(document)
    return _drop_branch_collisions(hierarchy)


def _drop_branch_collisions(hierarchy: SemanticHierarchy) -> SemanticHierarchy:
    """Remove sub links whose name reappears in the class's super-chains.

    Cross-links make a class's super-chains run through other classes, so a
    collision can only be known once the whole graph exists. Sub links do
    not influence super-chains, which makes a single pass sufficient.
    Parentless subs left behind are dropped entirely.
    """
    doc = hierarchy.to_document()
    drops: set[tuple[str, str]] = set()
    for node in hierarchy.nodes.values():
        if node.level != 2:
            continue
        chain_keys = {
            normalize_name(name)
            for chain in hierarchy.super_chains(node.id)
            for name in chain
        }
        for cid in node.child_ids:
            child = hierarchy.nodes[cid]
            if child.level == 3 and normalize_name(child.name) in chain_keys:
                warnings.warn(
                    f"dropping sub link {node.name!r} -> {child.name!r}: "
                    "the name already occurs in a super-chain",
                    stacklevel=2,
                )
                drops.add((cid, node.id))
    if not drops:
        return hierarchy

    for raw in doc["nodes"]:
        raw["parents"] = [p for p in raw["parents"] if (raw["id"], p) not in drops]
    doc["nodes"] = [
        raw
        for raw in doc["nodes"]
        if raw["parents"] or hierarchy.nodes[raw["id"]].level != 3
    ]
    return load_hierarchy(doc, root_labels_excluded=hierarchy.root_labels_excluded)


def generation_stats(hierarchy: SemanticHierarchy) -> dict[str, float]:
    """Table of synthesis outcomes: node totals per level and per-class link averages."""
    cois = [n for n in hierarchy.nodes.values() if n.level == 2]
    supers = [n for n in hierarchy.nodes.values() if n.level == 1]
    subs = [n for n in hierarchy.nodes.values() if n.level == 3]
    n_coi = len(cois)
    sup_links = sum(len(n.parent_ids) for n in cois)
    sub_links = sum(
        1
        for n in cois
        for cid in n.child_ids
        if hierarchy.nodes[cid].level == 3
    )
    return {
        "classes": n_coi,
        "supers_total": len(supers),
        "supers_avg_per_class": sup_links / n_coi if n_coi else 0.0,
        "subs_total": len(subs),
        "subs_avg_per_class": sub_links / n_coi if n_coi else 0.0,
    }
