"""Command-line entry point wiring every pipeline stage into subcommands.

Subcommands: verify | dataset | extract | baseline | refactor | stats.
Configuration precedence is flags > REFACTOR_* environment variables >
defaults.  Exit codes: 0 success, 1 domain failure (bad proof, bad data),
2 usage error.  No subcommand mutates its input files; everything lands at
the paths given by -o/--report/--stats.  A --threads flag is accepted for
interface stability, but execution is sequential either way.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import Counter

from refactor_kit.baseline import (
    library_match_rate,
    library_trees,
    mine_closures,
    top_theorems,
)
from refactor_kit.database import (
    MMError,
    parse_database,
    verify_assertion,
    write_mm,
)
from refactor_kit.dataset import (
    SCHEMA_VERSION,
    DatasetSpec,
    GraphRecord,
    build_dataset,
    read_dataset,
    read_predictions,
    write_dataset,
)
from refactor_kit.expansion import enumerate_expansions
from refactor_kit.extraction import (
    VERDICT_TREE_VALID,
    TheoremPool,
    emit_fragment,
    extracted_from_assertion,
    threshold_mask,
    verify_extraction,
)
from refactor_kit.refactor import refactor_database
from refactor_kit.trees import ProofNode, ProofTree

log = logging.getLogger("refactor_kit.cli")


class UsageError(Exception):
    """Bad invocation that argparse cannot catch (e.g. malformed env var)."""


def _env(name: str, cast, default):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        return cast(raw)
    except ValueError as exc:
        raise UsageError(f"bad {name}={raw!r}: {exc}") from None


def _resolve(flag, env_name: str, cast, default):
    """flags > environment > default."""
    if flag is not None:
        return flag
    return _env(env_name, cast, default)


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _write_report(path: str, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_db(path: str, *, verify: bool = True, on_error: str = "raise"):
    return parse_database(
        _read_text(path), name=os.path.basename(path), verify=verify, on_error=on_error
    )


def _note_threads(args) -> None:
    threads = _resolve(getattr(args, "threads", None), "REFACTOR_THREADS", int, 1)
    if threads and threads > 1:
        log.info("threads=%d requested; running sequentially", threads)


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    _note_threads(args)
    if args.labels:
        db = _parse_db(args.db, verify=False)
        wanted = [lab for lab in args.labels.split(",") if lab]
        failures = []
        checked = 0
        for label in wanted:
            assertion = db.assertions.get(label)
            if assertion is None or not assertion.is_provable:
                raise UsageError(f"no provable assertion named {label!r}")
            checked += 1
            try:
                verify_assertion(db, assertion)
            except MMError as exc:
                failures.append((label, exc))
    else:
        db = _parse_db(args.db, on_error="collect")
        checked = sum(1 for _ in db.provable_labels())
        failures = list(db.verify_failures)
    for label, exc in failures:
        print(f"{label}: {exc}", file=sys.stderr)
    print(f"verified {checked - len(failures)}/{checked} proofs in {db.name}")
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# dataset


def cmd_dataset(args) -> int:
    _note_threads(args)
    spec = DatasetSpec(
        max_nodes=_resolve(args.max_nodes, "REFACTOR_MAX_NODES", int, 1000),
        max_feature_chars=_resolve(args.max_chars, "REFACTOR_MAX_CHARS", int, 512),
        train_cap=_resolve(args.train_cap, "REFACTOR_TRAIN_CAP", int, 100),
        eval_cap=_resolve(args.eval_cap, "REFACTOR_EVAL_CAP", int, 10),
        seed=_resolve(args.seed, "REFACTOR_SEED", int, 0),
    )
    db = _parse_db(args.db)
    build = build_dataset(db, spec)
    paths = write_dataset(build, args.out)
    post = build.report["post_cap_records"]
    print(
        f"wrote {post['train']}/{post['valid']}/{post['test']} "
        f"train/valid/test records to {args.out}"
    )
    log.info("report: %s", paths["report"])
    return 0


# ---------------------------------------------------------------------------
# extract


def _tree_from_graph_record(record: GraphRecord) -> ProofTree:
    parents: list[list[int]] = [[] for _ in range(record.node_count)]
    for parent, child in record.edges:
        parents[child].append(parent)
    nodes = tuple(
        ProofNode(
            id=i,
            label=record.labels[i],
            prop=record.props[i],
            parents=tuple(parents[i]),
        )
        for i in range(record.node_count)
    )
    return ProofTree(theorem=record.graph_id, nodes=nodes)


def cmd_extract(args) -> int:
    _note_threads(args)
    db = _parse_db(args.db)
    records = read_dataset(args.dataset)
    probs_by_id = read_predictions(args.preds) if args.preds else None
    pool = TheoremPool(db)
    verdicts: Counter[str] = Counter()
    reasons: Counter[str] = Counter()
    theorems = []
    seen_names = set()
    for record in records:
        if probs_by_id is None:
            selection = record.target_ids()
        else:
            probs = probs_by_id.get(record.graph_id)
            if probs is None:
                raise ValueError(f"missing predictions for {record.graph_id!r}")
            if len(probs) != record.node_count:
                raise ValueError(
                    f"{record.graph_id}: expected {record.node_count} "
                    f"probabilities, got {len(probs)}"
                )
            selection = threshold_mask(probs)
        tree = _tree_from_graph_record(record)
        outcome = verify_extraction(db, tree, selection, pool=pool)
        verdicts[outcome.verdict] += 1
        if outcome.reason:
            reasons[outcome.reason] += 1
        if outcome.verdict == VERDICT_TREE_VALID and outcome.theorem.name not in seen_names:
            seen_names.add(outcome.theorem.name)
            theorems.append(outcome.theorem)
    if args.out:
        _write_text(args.out, emit_fragment(theorems))
    if args.report:
        _write_report(
            args.report,
            {
                "n_records": len(records),
                "verdicts": {
                    "tree_valid": verdicts["tree_valid"],
                    "tree_invalid": verdicts["tree_invalid"],
                    "not_tree_invalid": verdicts["not_tree_invalid"],
                },
                "reasons": dict(sorted(reasons.items())),
                "n_unique_theorems": len(theorems),
            },
        )
    print(
        f"extracted {len(records)} selections: "
        f"{verdicts['tree_valid']} tree_valid, "
        f"{verdicts['tree_invalid']} tree_invalid, "
        f"{verdicts['not_tree_invalid']} not_tree_invalid "
        f"({len(theorems)} unique theorems)"
    )
    return 0


# ---------------------------------------------------------------------------
# baseline


def cmd_baseline(args) -> int:
    _note_threads(args)
    db = _parse_db(args.db)
    top_n = _resolve(args.top_n, "REFACTOR_TOP_N", int, 100)
    if args.expanded:
        def trees():
            for host in db.provable_labels():
                for rec in enumerate_expansions(db, host):
                    yield rec.tree

        pool, counts, skipped = mine_closures(db, trees())
    else:
        pool, counts, skipped = mine_closures(db, library_trees(db))
    tops = top_theorems(pool, counts, top_n)
    rate = library_match_rate(db, [t for t, _ in tops])
    if args.out:
        _write_text(args.out, emit_fragment([t for t, _ in tops]))
    if args.report:
        _write_report(
            args.report,
            {
                "expanded": bool(args.expanded),
                "n_closures_mined": int(sum(counts.values())),
                "n_distinct_statements": len(counts),
                "n_skipped": skipped,
                "top_n": top_n,
                "n_selected": len(tops),
                "library_match_rate": rate,
                "theorems": [
                    {
                        "name": t.name,
                        "count": c,
                        "body_steps": t.n_body,
                        "conclusion": " ".join(t.conclusion),
                    }
                    for t, c in tops
                ],
            },
        )
    print(
        f"mined {sum(counts.values())} closures "
        f"({len(counts)} distinct, {skipped} skipped); "
        f"kept top {len(tops)}, library match rate {rate:.3f}"
    )
    return 0


# ---------------------------------------------------------------------------
# refactor


def cmd_refactor(args) -> int:
    _note_threads(args)
    base_text = _read_text(args.db)
    db = parse_database(base_text, name=os.path.basename(args.db))
    frag_text = _read_text(args.new_theorems)
    merged = parse_database(
        base_text + "\n" + frag_text, name="base+fragment"
    )
    new_labels = [
        lab for lab in merged.provable_labels() if lab not in db.assertions
    ]
    if not new_labels:
        raise ValueError(f"{args.new_theorems} adds no new provable assertions")
    theorems = [
        extracted_from_assertion(merged, merged.assertions[lab])
        for lab in new_labels
    ]
    new_db, stats = refactor_database(db, theorems)
    _write_text(args.out, write_mm(new_db))
    if args.stats:
        _write_report(args.stats, stats.to_dict())
    print(
        f"rewrote {stats.proofs_rewritten} proofs with {stats.n_used} theorems "
        f"({stats.total_applications} applications, "
        f"{stats.nodes_before} -> {stats.nodes_after} nodes)"
    )
    return 0


# ---------------------------------------------------------------------------
# stats


def cmd_stats(args) -> int:
    _note_threads(args)
    db = _parse_db(args.db, verify=False)
    provables = list(db.provable_labels())
    proof_sizes = {
        lab: len(db.assertions[lab].proof)
        for lab in provables
        if db.assertions[lab].proof is not None
    }
    largest = max(proof_sizes, key=proof_sizes.get, default=None)
    n_float = sum(1 for h in db.hypotheses.values() if h.kind == "$f")
    payload = {
        "database": db.name,
        "constants": len(db.constants),
        "variables": len(db.variables),
        "axioms": sum(1 for a in db.assertions.values() if not a.is_provable),
        "provable": len(provables),
        "floating_hypotheses": n_float,
        "essential_hypotheses": len(db.hypotheses) - n_float,
        "proof_nodes_total": sum(proof_sizes.values()),
        "proof_nodes_max": proof_sizes.get(largest, 0),
        "largest_proof": largest,
    }
    if args.out:
        _write_report(args.out, payload)
    print(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refactor-kit",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        default=None,
        choices=["debug", "info", "warning", "error"],
        help="log verbosity (env REFACTOR_LOG_LEVEL, default warning)",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument(
            "--threads",
            type=int,
            default=None,
            help="accepted for interface stability; execution is sequential "
            "(env REFACTOR_THREADS)",
        )

    p = sub.add_parser("verify", help="replay and check stored proofs")
    p.add_argument("db", help="Metamath database file")
    p.add_argument("--labels", default=None, help="comma-separated subset to verify")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("dataset", help="build train/valid/test expansion graphs")
    p.add_argument("db")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.add_argument("--max-nodes", type=int, default=None, help="drop graphs larger than this (env REFACTOR_MAX_NODES, default 1000)")
    p.add_argument("--max-chars", type=int, default=None, help="drop graphs with longer node features (env REFACTOR_MAX_CHARS, default 512)")
    p.add_argument("--train-cap", type=int, default=None, help="records per target in train (env REFACTOR_TRAIN_CAP, default 100)")
    p.add_argument("--eval-cap", type=int, default=None, help="records per target in valid/test (env REFACTOR_EVAL_CAP, default 10)")
    p.add_argument("--seed", type=int, default=None, help="split/cap RNG seed (env REFACTOR_SEED, default 0)")
    common(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser(
        "extract", help="grade node selections and emit the valid theorems"
    )
    p.add_argument("--db", required=True, help="Metamath database file")
    p.add_argument("--dataset", required=True, help="graph records (JSONL)")
    p.add_argument(
        "--preds",
        default=None,
        help="per-node probabilities (JSONL); defaults to the records' own target masks",
    )
    p.add_argument("-o", "--out", default=None, help="emit valid theorems as an .mm fragment")
    p.add_argument("--report", default=None, help="write verdict counts as JSON")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("baseline", help="mine frequent argument closures")
    p.add_argument("db")
    p.add_argument("--top-n", type=int, default=None, help="how many theorems to keep (env REFACTOR_TOP_N, default 100)")
    p.add_argument("--expanded", action="store_true", help="mine expanded proofs instead of stored ones")
    p.add_argument("-o", "--out", default=None, help="emit mined theorems as an .mm fragment")
    p.add_argument("--report", default=None, help="write mining summary as JSON")
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("refactor", help="rewrite proofs to apply new theorems")
    p.add_argument("db")
    p.add_argument("--new-theorems", required=True, help=".mm fragment with the theorems to apply")
    p.add_argument("-o", "--out", required=True, help="refactored database path")
    p.add_argument("--stats", default=None, help="write rewrite statistics as JSON")
    common(p)
    p.set_defaults(func=cmd_refactor)

    p = sub.add_parser("stats", help="database shape summary")
    p.add_argument("db")
    p.add_argument("-o", "--out", default=None, help="also write the summary as JSON")
    common(p)
    p.set_defaults(func=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage error, 0 on --help
        return int(exc.code or 0)
    try:
        level = _resolve(args.log_level, "REFACTOR_LOG_LEVEL", str, "warning")
        logging.basicConfig(
            level=getattr(logging, str(level).upper(), logging.WARNING),
            stream=sys.stderr,
            format="%(levelname)s %(name)s: %(message)s",
        )
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (MMError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
