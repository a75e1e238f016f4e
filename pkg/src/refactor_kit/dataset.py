"""Build, filter, cap, split, and serialize expansion graphs for training.

Every successful expansion becomes one graph record: node features are the
step label plus the proposition it proves, edges point from each argument
subtree root to the step that consumes it, and the binary node labels mark
the inlined theorem's body.  Records are split target-wise (every extraction
target lands in exactly one of train/valid/test, decided by a seeded hash of
the target label), then per-target occurrence caps subsample the heavy heads
so frequent theorems don't drown the split.

Serialization is deterministic: records sort by graph_id, JSON keys are
sorted, and the same seed yields byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from refactor_kit.database import Database
from refactor_kit.expansion import ExpansionRecord, enumerate_expansions

SCHEMA_VERSION = 1
LOSS_EPS = 1e-7
SPLIT_NAMES = ("train", "valid", "test")


@dataclass(frozen=True)
class DatasetSpec:
    """Filter limits, occurrence caps, split fractions, and the RNG seed."""

    max_nodes: int = 1000
    max_feature_chars: int = 512
    train_cap: int = 100
    eval_cap: int = 10
    split_fractions: tuple[float, float, float] = (0.9, 0.05, 0.05)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.train_cap < 1 or self.eval_cap < 1:
            raise ValueError("occurrence caps must be >= 1")
        if self.max_nodes < 0 or self.max_feature_chars < 0:
            raise ValueError("filter limits must be >= 0")
        fractions = tuple(self.split_fractions)
        if len(fractions) != 3 or any(f < 0 for f in fractions):
            raise ValueError("split_fractions must be three nonnegative numbers")
        if abs(sum(fractions) - 1.0) > 1e-9:
            raise ValueError("split_fractions must sum to 1")
        object.__setattr__(self, "split_fractions", fractions)

    def cap_for(self, split: str) -> int:
        return self.train_cap if split == "train" else self.eval_cap

    def to_dict(self) -> dict:
        return {
            "max_nodes": self.max_nodes,
            "max_feature_chars": self.max_feature_chars,
            "train_cap": self.train_cap,
            "eval_cap": self.eval_cap,
            "split_fractions": list(self.split_fractions),
            "seed": self.seed,
        }


def node_feature(label: str, prop: str) -> str:
    """The classifier's per-node input text: step label plus proposition."""
    return f"{label} {prop}"


@dataclass(frozen=True)
class GraphRecord:
    """One expansion graph: labeled nodes, argument->application edges."""

    graph_id: str
    target_theorem: str
    labels: tuple[str, ...]
    props: tuple[str, ...]
    targets: tuple[bool, ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def node_count(self) -> int:
        return len(self.labels)

    def feature(self, node_id: int) -> str:
        return node_feature(self.labels[node_id], self.props[node_id])

    def max_feature_chars(self) -> int:
        return max(
            (len(self.feature(i)) for i in range(self.node_count)), default=0
        )

    def target_ids(self) -> frozenset[int]:
        return frozenset(i for i, t in enumerate(self.targets) if t)

    def to_json_obj(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "target_theorem": self.target_theorem,
            "nodes": [
                {"label": lb, "prop": pr, "target": tg}
                for lb, pr, tg in zip(self.labels, self.props, self.targets)
            ],
            "edges": [list(edge) for edge in self.edges],
        }

    @classmethod
    def from_json_obj(cls, obj: Mapping) -> "GraphRecord":
        nodes = obj["nodes"]
        record = cls(
            graph_id=obj["graph_id"],
            target_theorem=obj["target_theorem"],
            labels=tuple(n["label"] for n in nodes),
            props=tuple(n["prop"] for n in nodes),
            targets=tuple(bool(n["target"]) for n in nodes),
            edges=tuple((int(p), int(c)) for p, c in obj["edges"]),
        )
        n = record.node_count
        for parent, child in record.edges:
            if not (0 <= parent < n and 0 <= child < n):
                raise ValueError(f"{record.graph_id}: edge ({parent},{child}) out of range")
        return record


def record_from_expansion(rec: ExpansionRecord) -> GraphRecord:
    tree = rec.tree
    return GraphRecord(
        graph_id=rec.graph_id,
        target_theorem=rec.expanded,
        labels=tuple(n.label for n in tree.nodes),
        props=tuple(n.prop for n in tree.nodes),
        targets=tuple(i in rec.targets for i in range(tree.node_count)),
        edges=tuple((p, n.id) for n in tree.nodes for p in n.parents),
    )


def split_for_target(
    target: str,
    seed: int,
    fractions: tuple[float, float, float] = (0.9, 0.05, 0.05),
) -> str:
    """Assign a target theorem to one split by seeded hash — stable across runs."""
    digest = hashlib.sha256(f"{seed}|{target}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    if u < fractions[0]:
        return "train"
    if u < fractions[0] + fractions[1]:
        return "valid"
    return "test"


@dataclass
class DatasetBuild:
    spec: DatasetSpec
    splits: dict[str, list[GraphRecord]]
    report: dict


def build_dataset(
    db: Database,
    spec: DatasetSpec,
    hosts: Sequence[str] | None = None,
) -> DatasetBuild:
    """Enumerate, filter, split, and cap expansion records for a database."""
    if hosts is None:
        hosts = [
            label
            for label in db.provable_labels()
            if db.assertions[label].proof is not None
        ]
    discards: Counter[str] = Counter()

    def on_discard(host: str, label: str, occurrence: int, exc: Exception) -> None:
        discards[type(exc).__name__] += 1

    kept: dict[str, list[GraphRecord]] = {s: [] for s in SPLIT_NAMES}
    n_enumerated = 0
    n_filtered_nodes = 0
    n_filtered_chars = 0
    for host in hosts:
        for rec in enumerate_expansions(db, host, on_discard=on_discard):
            n_enumerated += 1
            g = record_from_expansion(rec)
            if g.node_count > spec.max_nodes:
                n_filtered_nodes += 1
                continue
            if g.max_feature_chars() > spec.max_feature_chars:
                n_filtered_chars += 1
                continue
            split = split_for_target(g.target_theorem, spec.seed, spec.split_fractions)
            kept[split].append(g)

    pre_cap = {s: len(records) for s, records in kept.items()}
    splits: dict[str, list[GraphRecord]] = {}
    for split, records in kept.items():
        by_target: dict[str, list[GraphRecord]] = {}
        for g in sorted(records, key=lambda g: g.graph_id):
            by_target.setdefault(g.target_theorem, []).append(g)
        cap = spec.cap_for(split)
        capped: list[GraphRecord] = []
        for target in sorted(by_target):
            group = by_target[target]
            if len(group) > cap:
                rng = random.Random(f"{spec.seed}|{split}|{target}")
                group = rng.sample(group, cap)
            capped.extend(group)
        capped.sort(key=lambda g: g.graph_id)
        splits[split] = capped

    def histogram(records: list[GraphRecord]) -> dict[int, int]:
        per_target = Counter(g.target_theorem for g in records)
        return dict(sorted(Counter(per_target.values()).items()))

    report = {
        "schema_version": SCHEMA_VERSION,
        "spec": spec.to_dict(),
        "n_hosts": len(hosts),
        "n_expansions_enumerated": n_enumerated,
        "n_discarded": dict(sorted(discards.items())),
        "n_filtered_by_node_count": n_filtered_nodes,
        "n_filtered_by_feature_length": n_filtered_chars,
        "pre_cap_records": {"total": sum(pre_cap.values()), **pre_cap},
        "post_cap_records": {
            "total": sum(len(r) for r in splits.values()),
            **{s: len(r) for s, r in splits.items()},
        },
        "targets_per_split": {
            s: len({g.target_theorem for g in r}) for s, r in splits.items()
        },
        "occurrence_histograms": {s: histogram(r) for s, r in splits.items()},
    }
    return DatasetBuild(spec=spec, splits=splits, report=report)


# ---------------------------------------------------------------------------
# serialization


def dumps_record(record: GraphRecord) -> str:
    return json.dumps(record.to_json_obj(), sort_keys=True, separators=(",", ":"))


def write_dataset(build: DatasetBuild, outdir: str | os.PathLike) -> dict[str, str]:
    """Write train/valid/test JSONL plus report.json; returns the paths."""
    os.makedirs(outdir, exist_ok=True)
    paths: dict[str, str] = {}
    for split in SPLIT_NAMES:
        path = os.path.join(outdir, f"{split}.jsonl")
        with open(path, "w", encoding="utf-8") as fh:
            for record in build.splits[split]:
                fh.write(dumps_record(record) + "\n")
        paths[split] = path
    report_path = os.path.join(outdir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(build.report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths["report"] = report_path
    return paths


def read_dataset(path: str | os.PathLike) -> list[GraphRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(GraphRecord.from_json_obj(json.loads(line)))
    return records


def write_predictions(
    path: str | os.PathLike, probs_by_id: Mapping[str, Sequence[float]]
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for graph_id in sorted(probs_by_id):
            obj = {"graph_id": graph_id, "probs": [float(p) for p in probs_by_id[graph_id]]}
            fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")


def read_predictions(path: str | os.PathLike) -> dict[str, list[float]]:
    probs: dict[str, list[float]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                obj = json.loads(line)
                probs[obj["graph_id"]] = [float(p) for p in obj["probs"]]
    return probs


# ---------------------------------------------------------------------------
# loss and accuracy


def reference_loss(
    record: GraphRecord | Sequence[bool], probs: Sequence[float]
) -> float:
    """Node-normalized binary cross-entropy over one graph.

    Probabilities are clamped to [1e-7, 1 - 1e-7] since the loss is undefined
    at exactly 0 or 1.
    """
    if isinstance(record, GraphRecord):
        targets: Sequence[bool] = record.targets
    else:
        targets = [bool(t) for t in record]
    if len(probs) != len(targets):
        raise ValueError(f"expected {len(targets)} probabilities, got {len(probs)}")
    if not targets:
        raise ValueError("loss undefined for an empty graph")
    terms = []
    for is_target, p in zip(targets, probs):
        p = min(max(float(p), LOSS_EPS), 1.0 - LOSS_EPS)
        terms.append(math.log(p) if is_target else math.log(1.0 - p))
    return -math.fsum(terms) / len(terms)


def score_predictions(
    records: Iterable[GraphRecord], probs_by_id: Mapping[str, Sequence[float]]
) -> dict:
    """Node accuracy (averaged per graph, like the loss) plus proof accuracy.

    node_accuracy averages each graph's fraction of correctly classified
    nodes, so a graph counts the same regardless of size and the bound
    proof_accuracy <= node_accuracy holds unconditionally.  The raw pooled
    fraction over all nodes is reported as pooled_node_accuracy.
    """
    n_nodes = 0
    n_correct = 0
    n_records = 0
    n_perfect = 0
    per_record_acc = 0.0
    for record in records:
        probs = probs_by_id.get(record.graph_id)
        if probs is None:
            raise ValueError(f"missing predictions for {record.graph_id!r}")
        if len(probs) != record.node_count:
            raise ValueError(
                f"{record.graph_id}: expected {record.node_count} probabilities, "
                f"got {len(probs)}"
            )
        correct = [
            (float(p) > 0.5) == t for p, t in zip(probs, record.targets)
        ]
        n_nodes += len(correct)
        n_correct += sum(correct)
        n_records += 1
        n_perfect += all(correct)
        per_record_acc += sum(correct) / len(correct)
    if n_records == 0:
        raise ValueError("no records to score")
    return {
        "node_accuracy": per_record_acc / n_records,
        "pooled_node_accuracy": n_correct / n_nodes,
        "proof_accuracy": n_perfect / n_records,
        "n_records": n_records,
        "n_nodes": n_nodes,
    }
