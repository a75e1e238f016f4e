"""Proofs as trees.

A plain proof is a postfix (RPN) label sequence; replaying it gives each
step a proposition and an ordered tuple of argument steps.  Viewing steps
as nodes and argument links as edges yields a tree whose root is the final
step.  Node ids are RPN positions, so the nodes of any subtree occupy a
contiguous id range ending at its root — the property every span-based
operation here relies on.

`parents` follows the dataflow direction: node.parents are the steps whose
results the node consumes (its argument subtrees), in the applied
assertion's hypothesis order.  Hypothesis steps have no parents.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from refactor_kit.database import Assertion, Database, Label


@dataclass(frozen=True)
class ProofNode:
    id: int
    label: str
    prop: str  # typecode-first proposition, space-joined
    parents: tuple[int, ...]


@dataclass
class ProofTree:
    theorem: str  # label of the assertion this proof establishes
    nodes: list[ProofNode]
    _span_starts: list[int] | None = field(default=None, repr=False, compare=False)

    @property
    def root(self) -> int:
        return len(self.nodes) - 1

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def labels(self) -> tuple[Label, ...]:
        """The plain proof this tree linearizes back to."""
        return tuple(node.label for node in self.nodes)

    def span_starts(self) -> list[int]:
        """For each node, the first id of its subtree.

        Arguments sit immediately before their consumer in RPN order, so a
        node's subtree starts where its first argument's subtree starts.
        """
        if self._span_starts is None:
            starts: list[int] = []
            for node in self.nodes:
                starts.append(starts[node.parents[0]] if node.parents else node.id)
            self._span_starts = starts
        return self._span_starts

    def subtree_ids(self, node_id: int) -> range:
        return range(self.span_starts()[node_id], node_id + 1)

    def subtree_labels(self, node_id: int) -> list[Label]:
        return [self.nodes[i].label for i in self.subtree_ids(node_id)]


def tree_from_steps(theorem: str, steps) -> ProofTree:
    """Build a tree from Database.replay output."""
    nodes = [
        ProofNode(id=i, label=label, prop=" ".join(prop), parents=arg_ids)
        for i, (label, prop, arg_ids) in enumerate(steps)
    ]
    return ProofTree(theorem=theorem, nodes=nodes)


def build_tree(db: Database, assertion: Assertion) -> ProofTree:
    """Replay an assertion's stored proof into a checked tree."""
    if assertion.proof is None:
        raise ValueError(f"{assertion.label} has no stored proof")
    steps = db.replay(
        assertion.proof, db.frame_for(assertion), where=assertion.label
    )
    return tree_from_steps(assertion.label, steps)


def to_record(tree: ProofTree) -> dict:
    return {
        "theorem": tree.theorem,
        "root": tree.root,
        "nodes": [
            {
                "id": node.id,
                "label": node.label,
                "prop": node.prop,
                "parents": list(node.parents),
            }
            for node in tree.nodes
        ],
    }


def from_record(record: dict) -> ProofTree:
    nodes = [
        ProofNode(
            id=entry["id"],
            label=entry["label"],
            prop=entry["prop"],
            parents=tuple(entry["parents"]),
        )
        for entry in record["nodes"]
    ]
    tree = ProofTree(theorem=record["theorem"], nodes=nodes)
    if [node.id for node in nodes] != list(range(len(nodes))):
        raise ValueError("node ids must be 0..n-1 in order")
    if record["root"] != tree.root:
        raise ValueError("root must be the last node")
    return tree
