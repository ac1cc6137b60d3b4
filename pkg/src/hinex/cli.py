"""Command-line surface for the toolkit.

Subcommands cover the whole offline pipeline: synthesize a hierarchy,
build a classifier, classify stored embeddings, evaluate detections or
classification samples, and print hierarchy statistics. Exit codes:
0 success, 1 domain/evaluation error, 2 usage or IO error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import embedding, evaluation, hiergen, nexus
from .classify import predict_batch
from .hierarchy import (
    DEFAULT_VIRTUAL_ROOTS,
    HierarchyError,
    SemanticHierarchy,
    load_hierarchy_file,
    load_vocabulary,
    save_hierarchy_file,
)
from .sentences import enumerate_branches

USAGE_ERROR = 2
DOMAIN_ERROR = 1

_ENV_PREFIX = "HINEX_"
_SECRET_KEYS = {"api_key"}


class UsageError(Exception):
    pass


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"{what} not found: {path}")
    return p


def _effective_config(args: argparse.Namespace, keys: list[str]) -> dict:
    """Merge config file < environment < flags for the given keys."""
    merged: dict = {}
    if getattr(args, "config", None):
        cfg_path = _require_file(args.config, "config file")
        with open(cfg_path, encoding="utf-8") as fh:
            try:
                merged.update(json.load(fh))
            except json.JSONDecodeError as exc:
                raise UsageError(f"config file is not valid JSON: {exc}") from exc
    for key in keys:
        env_val = os.environ.get(_ENV_PREFIX + key.upper())
        if env_val is not None:
            merged[key] = env_val
    for key in keys:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged

def _print_config(merged: dict) -> None:
    redacted = {
        k: ("***" if k in _SECRET_KEYS and v else v) for k, v in sorted(merged.items())
    }
    print(f"config: {json.dumps(redacted, ensure_ascii=False)}", file=sys.stderr)


def _load_hierarchy_arg(args: argparse.Namespace) -> SemanticHierarchy:
    path = _require_file(args.hierarchy, "hierarchy file")
    roots = (
        frozenset(n.strip() for n in args.virtual_roots.split(",") if n.strip())
        if getattr(args, "virtual_roots", None)
        else DEFAULT_VIRTUAL_ROOTS
    )
    return load_hierarchy_file(path, root_labels_excluded=roots)


def _make_client(merged: dict):
    endpoint = merged.get("endpoint")
    if not endpoint:
        raise UsageError("no LLM endpoint configured (flag --endpoint, env HINEX_ENDPOINT, or config file)")
    if endpoint.startswith("scripted:"):
        return hiergen.ScriptedChatClient(_require_file(endpoint[len("scripted:"):], "scripted response file"))
    return hiergen.HttpChatClient(
        endpoint,
        model=merged.get("model", "gpt-3.5-turbo"),
        api_key=merged.get("api_key"),
    )


def cmd_generate_hierarchy(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(_require_file(args.vocab, "vocab file"))
    merged = _effective_config(args, ["endpoint", "model", "api_key", "cache_dir"])
    _print_config(merged)
    cfg = hiergen.HierGenConfig(
        p=args.supers,
        q=args.subs,
        t=args.queries,
        temperature=args.temperature,
        context=args.context,
        endpoint=merged.get("endpoint"),
        model=merged.get("model", "gpt-3.5-turbo"),
        cache_dir=merged.get("cache_dir"),
    )
    client = _make_client(merged)
    hierarchy = hiergen.synthesize_hierarchy(vocab, cfg, client)
    save_hierarchy_file(hierarchy, args.output)

    stats = hiergen.generation_stats(hierarchy)
    print(
        "classes={classes:.0f} supers_total={supers_total:.0f} "
        "supers_avg={supers_avg_per_class:.1f} subs_total={subs_total:.0f} "
        "subs_avg={subs_avg_per_class:.1f}".format(**stats)
    )
    print(f"wrote {args.output}")
    return 0


def cmd_build_classifier(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(_require_file(args.vocab, "vocab file"), level=args.vocab_level)
    hierarchy = None
    if args.strategy in nexus.HIERARCHY_STRATEGIES:
        if not args.hierarchy:
            raise UsageError(f"strategy {args.strategy!r} requires --hierarchy")
        hierarchy = _load_hierarchy_arg(args)
    backend = embedding.backend_from_spec(args.backend, seed=args.seed)
    clf = nexus.build_classifier(hierarchy, vocab, backend, args.strategy, jobs=args.jobs)
    nexus.save_classifier(clf, args.output)

    if args.dump_sentences:
        with open(args.dump_sentences, "w", encoding="utf-8") as fh:
            for name in vocab.class_names:
                node_id = None
                if hierarchy is not None:
                    node_id = (
                        vocab.node_bindings[name]
                        if vocab.node_bindings
                        else hierarchy.find_by_name(name, level=vocab.level)[0]
                    )
                texts, branches = nexus.strategy_sentences(hierarchy, node_id, name, args.strategy)
                for text, branch in zip(texts, branches):
                    fh.write(
                        json.dumps(
                            {"coi": name, "sentence": text, "branch": branch.ordered_names()},
                            ensure_ascii=False,
                        )
                        + "\n"
                    )
    print(f"wrote {args.output} ({len(clf)} classes, dim {clf.dim}, strategy {clf.strategy})")
    return 0


def cmd_classify(args: argparse.Namespace) -> int:
    clf = nexus.load_classifier(_require_file(args.classifier, "classifier file"))
    store = embedding.FileStoreBackend(_require_file(args.embeddings, "embedding store"))
    ids = store.texts()
    batch = store.embed_texts(ids)
    predictions = predict_batch(clf, batch)
    with open(args.output, "w", encoding="utf-8") as fh:
        for qid, pred in zip(ids, predictions):
            fh.write(
                json.dumps(
                    {"id": qid, "class": pred.class_name, "score": pred.score},
                    ensure_ascii=False,
                )
                + "\n"
            )
    print(f"wrote {args.output} ({len(ids)} predictions)")
    return 0


def _parse_levels(spec: str) -> list[int]:
    try:
        return [int(part) for part in spec.split(",") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --levels value {spec!r}: {exc}") from exc


def cmd_evaluate_detection(args: argparse.Namespace) -> int:
    gts = evaluation.load_ground_truth(_require_file(args.gt, "ground-truth file"))
    dets = evaluation.load_detections(_require_file(args.detections, "detections file"))
    hierarchy = _load_hierarchy_arg(args) if args.hierarchy else None
    if args.levels and hierarchy is None:
        raise UsageError("--levels requires --hierarchy for label remapping")
    levels = _parse_levels(args.levels) if args.levels else [None]

    reports = []
    for level in levels:
        level_dets = dets
        if hierarchy is not None:
            # detections labeled at a finer level are lifted to the target
            # level (identity when already there), so one finest-level file
            # can be scored across all levels in a single run
            level_dets = [
                evaluation.DetectionRecord(
                    d.image_id, d.box, hierarchy.map_to_level(d.label, level), d.confidence
                )
                for d in dets
            ]
        reports.append(evaluation.evaluate_map50(gts, level_dets, hierarchy, level))
        print(f"level={level} map50={reports[-1].map50:.6f}")

    summary = None
    if len(reports) > 1:
        try:
            summary = evaluation.summarize_levels(reports)
        except evaluation.EvaluationError as exc:
            print(f"summary statistics unavailable: {exc}", file=sys.stderr)
    prefix = str(args.output_prefix)
    evaluation.write_report_files(
        reports,
        prefix + ".json",
        prefix + ".csv",
        prefix + ".per_class.json",
        summary=summary,
    )
    print(f"wrote {prefix}.json {prefix}.csv")
    return 0


def cmd_evaluate_classification(args: argparse.Namespace) -> int:
    clf = nexus.load_classifier(_require_file(args.classifier, "classifier file"))
    store = embedding.FileStoreBackend(_require_file(args.embeddings, "embedding store"))
    hierarchy = _load_hierarchy_arg(args) if args.hierarchy else None

    samples = []
    for record in evaluation.read_jsonl(_require_file(args.samples, "samples file")):
        samples.append((store.embed_text(record["image_id"]), record["label"]))
    accuracy = evaluation.evaluate_top1(clf, samples, hierarchy, args.level)

    payload = {"level": args.level, "top1_accuracy": accuracy, "samples": len(samples)}
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    print(f"top1={accuracy:.6f} ({len(samples)} samples)")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    hierarchy = _load_hierarchy_arg(args)
    by_level: dict[int | None, int] = {}
    for node in hierarchy.nodes.values():
        by_level[node.level] = by_level.get(node.level, 0) + 1
    print(f"nodes={len(hierarchy)} roots={len(hierarchy.root_ids)} levels={hierarchy.levels}")
    for level in sorted(by_level, key=lambda x: (x is None, x)):
        print(f"level {level}: {by_level[level]} classes")
    if args.branches:
        total = sum(len(enumerate_branches(hierarchy, nid)) for nid in hierarchy.nodes)
        print(f"branches_total={total}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hinex", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-hierarchy", help="synthesize a 3-level hierarchy via an LLM")
    p.add_argument("--vocab", required=True, help="newline-delimited class names")
    p.add_argument("--output", required=True, help="hierarchy JSON destination")
    p.add_argument("--supers", type=int, default=3, help="super-categories requested per query")
    p.add_argument("--subs", type=int, default=10, help="sub-categories requested per query")
    p.add_argument("--queries", type=int, default=3, help="queries per class per direction")
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--context", default="object", help="context word inside the prompts")
    p.add_argument("--endpoint", help="chat-completions URL or scripted:<responses.json>")
    p.add_argument("--model", help="model identity for requests and cache keys")
    p.add_argument("--api-key", dest="api_key", help="bearer token (prefer HINEX_API_KEY)")
    p.add_argument("--cache-dir", dest="cache_dir", help="verbatim response cache directory")
    p.add_argument("--config", help="JSON config file (lowest precedence)")
    p.set_defaults(func=cmd_generate_hierarchy)

    p = sub.add_parser("build-classifier", help="build and save a classifier matrix")
    p.add_argument("--vocab", required=True)
    p.add_argument("--vocab-level", type=int, default=None, help="hierarchy level the vocab lives at")
    p.add_argument("--hierarchy", help="hierarchy JSON (required for hierarchy strategies)")
    p.add_argument("--virtual-roots", help="comma-separated names treated as virtual roots")
    p.add_argument("--backend", required=True, help="deterministic[:dim] | store:<path> | http(s)://...")
    p.add_argument("--seed", type=int, default=0, help="seed for the deterministic backend")
    p.add_argument("--strategy", default="shine-mean", choices=nexus.STRATEGIES)
    p.add_argument("--jobs", type=int, default=1, help="worker threads for per-class embedding")
    p.add_argument("--output", required=True)
    p.add_argument("--dump-sentences", help="optional JSONL audit dump of rendered sentences")
    p.set_defaults(func=cmd_build_classifier)

    p = sub.add_parser("classify", help="predict classes for stored query embeddings")
    p.add_argument("--classifier", required=True)
    p.add_argument("--embeddings", required=True, help="JSONL store keyed by query id")
    p.add_argument("--output", required=True, help="JSONL predictions destination")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("evaluate-detection", help="mAP50 against ground truth, per level")
    p.add_argument("--gt", required=True, help="ground-truth JSONL")
    p.add_argument("--detections", required=True, help="detections JSONL")
    p.add_argument("--hierarchy", help="hierarchy JSON for level remapping")
    p.add_argument("--virtual-roots", help="comma-separated names treated as virtual roots")
    p.add_argument("--levels", help="comma-separated levels to evaluate (default: no remap)")
    p.add_argument("--output-prefix", required=True, help="prefix for .json/.csv/.per_class.json")
    p.set_defaults(func=cmd_evaluate_detection)

    p = sub.add_parser("evaluate-classification", help="zero-shot top-1 accuracy")
    p.add_argument("--classifier", required=True)
    p.add_argument("--samples", required=True, help='JSONL of {"image_id", "label"}')
    p.add_argument("--embeddings", required=True, help="JSONL store keyed by image id")
    p.add_argument("--hierarchy", help="hierarchy JSON for level remapping")
    p.add_argument("--virtual-roots", help="comma-separated names treated as virtual roots")
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--output", required=True, help="JSON report destination")
    p.set_defaults(func=cmd_evaluate_classification)

    p = sub.add_parser("stats", help="summarize a hierarchy file")
    p.add_argument("--hierarchy", required=True)
    p.add_argument("--virtual-roots", help="comma-separated names treated as virtual roots")
    p.add_argument("--branches", action="store_true", help="also count branches per the whole graph")
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (
        HierarchyError,
        ValueError,
        evaluation.EvaluationError,
        embedding.EmbeddingError,
        hiergen.HierGenError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DOMAIN_ERROR


if __name__ == "__main__":
    sys.exit(main())
