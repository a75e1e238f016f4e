"""Inlining one proof step's stored proof into its host proof.

Applying a proved assertion t inside a host proof hides t's whole derivation
behind a single node.  Expansion undoes that: the node's subtree is replaced
by t's stored proof, with each mandatory-hypothesis leaf of that proof
replaced by the host's matching argument subtree (duplicated wherever the
hypothesis occurs).  The spliced sequence is replayed under the host frame,
so the result is a checked proof of the same conclusion.

Each successful expansion yields a training graph: the expanded tree plus
the set of nodes that came from t — its proof body and, for each argument,
the slot node where the argument's root plugged in.  Those are exactly the
nodes a selector must pick to recover t from the expanded proof.

Expansions can fail to replay: t's stored proof may use dummy variables
whose $d conditions or local $f declarations live in t's scope, not the
host's.  Those records are discarded (reported through on_discard), never
silently patched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

from refactor_kit.database import Assertion, Database, MMVerifyError
from refactor_kit.trees import ProofTree, build_tree, tree_from_steps


@dataclass(frozen=True)
class ExpansionRecord:
    host: str  # theorem whose proof was expanded
    expanded: str  # assertion label that was inlined
    occurrence: int  # 0-based count of that label in the host tree, RPN order
    tree: ProofTree  # replayed expanded proof
    targets: frozenset[int]  # node ids that a selector should recover

    @property
    def graph_id(self) -> str:
        return f"{self.host}:{self.expanded}:{self.occurrence}"


def splice_expansion(
    db: Database, tree: ProofTree, node_id: int
) -> tuple[list[str], list[bool]]:
    """Inline the stored proof of the assertion applied at node_id.

    Returns the new label sequence and a parallel mask marking the nodes a
    selector should recover: the inlined proof's own steps plus the root
    slot of each argument subtree.
    """
    node = tree.nodes[node_id]
    target = db.assertions.get(node.label)
    if target is None or target.proof is None:
        raise ValueError(f"{node.label} has no stored proof to inline")
    starts = tree.span_starts()

    arg_slices: dict[str, list[str]] = {}
    for hyp_label, arg_id in zip(target.hyp_labels, node.parents, strict=True):
        arg_slices[hyp_label] = [
            tree.nodes[i].label for i in range(starts[arg_id], arg_id + 1)
        ]

    labels: list[str] = []
    mask: list[bool] = []
    for before in tree.nodes[: starts[node_id]]:
        labels.append(before.label)
        mask.append(False)
    for label in target.proof:
        slice_labels = arg_slices.get(label)
        if slice_labels is None:
            labels.append(label)
            mask.append(True)
        else:
            labels.extend(slice_labels)
            mask.extend([False] * (len(slice_labels) - 1))
            mask.append(True)  # the argument's root is the slot node
    for after in tree.nodes[node_id + 1 :]:
        labels.append(after.label)
        mask.append(False)
    return labels, mask


def expand_application(
    db: Database,
    host: Assertion,
    tree: ProofTree,
    node_id: int,
    occurrence: int,
) -> ExpansionRecord:
    """Splice and replay one application; raises MMVerifyError on failure."""
    labels, mask = splice_expansion(db, tree, node_id)
    where = f"{host.label}[inline {tree.nodes[node_id].label}]"
    steps = db.replay(labels, db.frame_for(host), where=where)
    if steps[-1][1] != host.conclusion:
        raise MMVerifyError(
            f"{where}: expansion changed the conclusion"
        )  # pragma: no cover - splice preserves the root proposition
    return ExpansionRecord(
        host=host.label,
        expanded=tree.nodes[node_id].label,
        occurrence=occurrence,
        tree=tree_from_steps(host.label, steps),
        targets=frozenset(i for i, m in enumerate(mask) if m),
    )


DiscardHook = Callable[[str, str, int, MMVerifyError], None]


def enumerate_expansions(
    db: Database,
    host_label: str,
    on_discard: DiscardHook | None = None,
) -> Iterator[ExpansionRecord]:
    """Yield one record per provable-assertion application in host's proof.

    Occurrence indexes count every application in RPN order, including ones
    later discarded, so a record's graph_id never depends on which other
    records survived.
    """
    host = db.assertions[host_label]
    tree = build_tree(db, host)
    seen: dict[str, int] = {}
    for node in tree.nodes:
        applied = db.assertions.get(node.label)
        if applied is None or not applied.is_provable or applied.proof is None:
            continue
        occurrence = seen.get(node.label, 0)
        seen[node.label] = occurrence + 1
        try:
            yield expand_application(db, host, tree, node.id, occurrence)
        except MMVerifyError as exc:
            if on_discard is not None:
                on_discard(host_label, node.label, occurrence, exc)
