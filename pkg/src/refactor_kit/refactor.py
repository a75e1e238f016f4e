"""Rewriting library proofs against a set of extracted theorems.

Each extracted theorem q names a reusable derivation.  A proof region
matches q when its label structure equals q's stored proof: body labels
must agree exactly, while q's hypothesis leaves bind whole argument
subtrees (the same hypothesis must bind identically-labeled subtrees).
A match must also respect statement semantics — the bound floating
subtrees induce a substitution under which q's essential hypotheses and
conclusion reproduce the host propositions — and q's disjointness
conditions must hold in the host frame.

A matched region is replaced by the bound argument subtrees (in q's
hypothesis order) followed by a single application of q.  Because every
eligible q has at least two body steps, each rewrite strictly shrinks the
proof, so repeated rewriting reaches a fixed point.  The scan is
first-match-restart: walk nodes in RPN (postorder) order trying theorems
in their given order, restart after every rewrite, stop on a clean pass.

Only library proofs are rewritten; the extracted theorems' own proofs are
left alone, so no q application is ever absorbed into another and the
application counts in the final database equal the counts accumulated
during rewriting.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from refactor_kit.database import (
    Assertion,
    Database,
    ReplayFrame,
    apply_subst,
    dv_pair,
    parse_database,
    toplevel_units,
    write_mm,
)
from refactor_kit.extraction import ExtractedTheorem, emit_fragment
from refactor_kit.trees import ProofTree, build_tree, tree_from_steps

Skeleton = list[tuple[str, tuple[int, ...]]]  # (label, argument skeleton ids)


def build_skeleton(db: Database, q: ExtractedTheorem) -> Skeleton:
    """RPN structure of q's proof; hypothesis leaves have no arguments."""
    hyp_labels = {label for label, _ in q.e_hyps}
    hyp_labels.update(db.float_label_of(var) for var in q.f_vars)
    nodes: Skeleton = []
    stack: list[int] = []
    for label in q.proof:
        if label in hyp_labels:
            args: tuple[int, ...] = ()
        else:
            assertion = db.assertions[label]
            n = len(assertion.hyp_labels)
            args = tuple(stack[len(stack) - n :]) if n else ()
            del stack[len(stack) - n :]
        nodes.append((label, args))
        stack.append(len(nodes) - 1)
    assert len(stack) == 1, "extracted proof must reduce to one entry"
    return nodes


def match_at(
    db: Database,
    tree: ProofTree,
    node_id: int,
    q: ExtractedTheorem,
    skeleton: Skeleton,
    host_dvs: frozenset,
) -> dict[str, int] | None:
    """Try to match q's proof structure at a host node.

    Returns hypothesis-label -> host-node-id bindings on success.  The
    walk compares body labels exactly; each hypothesis leaf binds the host
    subtree at its position, and repeated hypotheses must bind subtrees
    with identical label sequences.
    """
    hyp_labels = {label for label, _ in q.e_hyps}
    float_label = {var: db.float_label_of(var) for var in q.f_vars}
    hyp_labels.update(float_label.values())
    bindings: dict[str, int] = {}

    # Iterative pairwise walk from the roots down, left to right, so a
    # repeated hypothesis binds its first occurrence's subtree.
    todo = [(len(skeleton) - 1, node_id)]
    cursor = 0
    while cursor < len(todo):
        q_id, h_id = todo[cursor]
        cursor += 1
        q_label, q_args = skeleton[q_id]
        if q_label in hyp_labels:
            bound = bindings.get(q_label)
            if bound is None:
                bindings[q_label] = h_id
            elif tree.subtree_labels(bound) != tree.subtree_labels(h_id):
                return None
            continue
        node = tree.nodes[h_id]
        if node.label != q_label or len(node.parents) != len(q_args):
            return None
        todo.extend(zip(q_args, node.parents))

    # Substitution from the floating bindings.
    subst: dict[str, tuple[str, ...]] = {}
    for var in q.f_vars:
        h_id = bindings.get(float_label[var])
        if h_id is None:
            return None  # q never uses this variable; cannot instantiate
        prop = tree.nodes[h_id].prop.split()
        if prop[0] != db.var_typecode(var):
            return None
        subst[var] = tuple(prop[1:])
    for label, stmt in q.e_hyps:
        h_id = bindings.get(label)
        if h_id is None:
            return None
        expected = " ".join(apply_subst(stmt, subst))
        if tree.nodes[h_id].prop != expected:
            return None
    if tree.nodes[node_id].prop != " ".join(apply_subst(q.conclusion, subst)):
        return None
    for x, y in q.dvs:
        for a in db.find_vars(subst[x]):
            for b in db.find_vars(subst[y]):
                if a == b or dv_pair(a, b) not in host_dvs:
                    return None
    return bindings


def rewrite_at(
    db: Database,
    tree: ProofTree,
    node_id: int,
    q: ExtractedTheorem,
    bindings: dict[str, int],
) -> list[str]:
    """Replace the matched region with q's arguments plus one q application."""
    starts = tree.span_starts()
    arg_order = [db.float_label_of(var) for var in q.f_vars]
    arg_order.extend(label for label, _ in q.e_hyps)
    labels = [node.label for node in tree.nodes[: starts[node_id]]]
    for hyp_label in arg_order:
        labels.extend(tree.subtree_labels(bindings[hyp_label]))
    labels.append(q.name)
    labels.extend(node.label for node in tree.nodes[node_id + 1 :])
    return labels


def _open_frame(db: Database, assertion: Assertion) -> ReplayFrame:
    """The assertion's frame without the declaration-order cutoff.

    Rewritten proofs reference theorems that sit after the host in the
    working database; the final emission inserts them before their first
    use and the closing reparse re-checks ordering for real.
    """
    frame = db.frame_for(assertion)
    return ReplayFrame(
        f_hyps=frame.f_hyps,
        e_hyps=frame.e_hyps,
        dvs=frame.dvs,
        cutoff=None,
        extra_hyps=frame.extra_hyps,
    )


def refactor_proof(
    db: Database,
    assertion: Assertion,
    qs: list[ExtractedTheorem],
    skeletons: list[Skeleton],
) -> tuple[ProofTree, Counter]:
    """Rewrite one proof to fixed point; returns the final tree and counts."""
    tree = build_tree(db, assertion)
    frame = _open_frame(db, assertion)
    counts: Counter = Counter()
    changed = True
    while changed:
        changed = False
        for node in tree.nodes:
            for q, skeleton in zip(qs, skeletons):
                bindings = match_at(
                    db, tree, node.id, q, skeleton, assertion.active_dvs
                )
                if bindings is None:
                    continue
                labels = rewrite_at(db, tree, node.id, q, bindings)
                steps = db.replay(labels, frame, where=assertion.label)
                assert steps[-1][1] == assertion.conclusion
                tree = tree_from_steps(assertion.label, steps)
                counts[q.name] += 1
                changed = True
                break
            if changed:
                break
    return tree, counts


@dataclass
class RefactorStats:
    n_supplied: int  # theorems handed in, before the body-size filter
    n_eligible: int  # kept after requiring at least 2 body steps
    n_used: int  # applied in at least one proof
    total_applications: int
    nodes_before: int
    nodes_after: int
    proofs_rewritten: int
    per_theorem: dict[str, int] = field(default_factory=dict)

    @property
    def avg_applications(self) -> float:
        return self.total_applications / self.n_supplied if self.n_supplied else 0.0

    @property
    def avg_nodes_saved(self) -> float:
        if not self.n_supplied:
            return 0.0
        return (self.nodes_before - self.nodes_after) / self.n_supplied

    @property
    def max_applications(self) -> int:
        return max(self.per_theorem.values(), default=0)

    @property
    def total_nodes_saved(self) -> int:
        return self.nodes_before - self.nodes_after

    def to_dict(self) -> dict:
        return {
            "n_supplied": self.n_supplied,
            "n_eligible": self.n_eligible,
            "n_used": self.n_used,
            "total_applications": self.total_applications,
            "max_applications": self.max_applications,
            "nodes_before": self.nodes_before,
            "nodes_after": self.nodes_after,
            "total_nodes_saved": self.total_nodes_saved,
            "proofs_rewritten": self.proofs_rewritten,
            "avg_applications": self.avg_applications,
            "avg_nodes_saved": self.avg_nodes_saved,
            "per_theorem": dict(self.per_theorem),
        }


def count_applications(db: Database, names) -> Counter:
    """Occurrences of the given labels across all stored proofs.

    Extracted-theorem applications are never absorbed by later rewrites, so
    this recount must agree with the counters a refactor run accumulates.
    """
    wanted = set(names)
    counts: Counter = Counter()
    for assertion in db.assertions.values():
        if assertion.proof is None or assertion.label in wanted:
            continue
        for label in assertion.proof:
            if label in wanted:
                counts[label] += 1
    return counts


def refactor_database(
    db: Database,
    theorems: list[ExtractedTheorem],
    progress=None,
) -> tuple[Database, RefactorStats]:
    """Rewrite every library proof against the given theorems.

    Returns a freshly parsed database in which each used theorem is
    declared immediately before the first proof that applies it (unused
    ones go at the end), together with run statistics.  The returned
    database has been fully re-verified by the parser.
    """
    eligible = [q for q in theorems if q.n_body >= 2]
    # Theorems from an earlier run may already be in the database; declare
    # only the missing ones, but match and place all of them.
    to_declare = [q for q in eligible if q.name not in db.assertions]
    work = parse_database(
        write_mm(db) + emit_fragment(to_declare),
        name=f"{db.name}+extracted",
    )
    skeletons = [build_skeleton(work, q) for q in eligible]
    q_names = {q.name for q in eligible}
    library = [
        a
        for a in work.assertions_in_order()
        if a.is_provable and a.label not in q_names
    ]

    counts: Counter = Counter()
    nodes_before = 0
    nodes_after = 0
    proofs_rewritten = 0
    for assertion in library:
        nodes_before += len(assertion.proof)
        tree, local = refactor_proof(work, assertion, eligible, skeletons)
        nodes_after += tree.node_count
        if local:
            proofs_rewritten += 1
            counts.update(local)
            assertion.proof = tree.labels()
        if progress is not None:
            progress(assertion.label, tree.node_count)

    # Re-emit with each used theorem placed before its first user.
    units = [
        unit
        for unit in toplevel_units(work.events)
        if not any(e[0] == "p" and e[1] in q_names for e in unit)
    ]
    first_use: dict[str, int] = {}
    for index, unit in enumerate(units):
        for event in unit:
            if event[0] != "p":
                continue
            proof = work.assertions[event[1]].proof
            for label in proof:
                if label in q_names and label not in first_use:
                    first_use[label] = index
    by_name = {q.name: q for q in eligible}

    shell = Database(work.name)
    shell.constants = work.constants
    shell.variables = work.variables
    shell.hypotheses = work.hypotheses
    shell.assertions = work.assertions
    pieces: list[str] = []
    emitted: set[str] = set()
    for index, unit in enumerate(units):
        for q in eligible:
            if first_use.get(q.name) == index and q.name not in emitted:
                pieces.append(emit_fragment([q]))
                emitted.add(q.name)
        shell.events = unit
        pieces.append(write_mm(shell))
    for q in eligible:
        if q.name not in emitted:
            pieces.append(emit_fragment([q]))

    final = parse_database("".join(pieces), name=f"{db.name}+refactored")
    stats = RefactorStats(
        n_supplied=len(theorems),
        n_eligible=len(eligible),
        n_used=sum(1 for q in eligible if counts[q.name]),
        total_applications=sum(counts.values()),
        nodes_before=nodes_before,
        nodes_after=nodes_after,
        proofs_rewritten=proofs_rewritten,
        per_theorem={q.name: counts[q.name] for q in eligible},
    )
    return final, stats
