"""Frequency mining of argument closures as a no-learning reference.

Every node of a proof tree that has arguments closes over a complete
subtree — a candidate theorem needing no selection model at all.  Mining
standardizes each such closure (root closures included: re-deriving the
proof's own theorem is a legitimate, if unhelpful, candidate here),
deduplicates by statement, and counts occurrences across the supplied
trees.  Ranking by frequency gives a baseline set of reusable theorems;
checking mined statements against the database's own assertions measures
how often frequency alone rediscovers human-curated lemmas.
"""

from __future__ import annotations

from collections import Counter
from typing import Iterable

from refactor_kit.database import Database
from refactor_kit.extraction import (
    ExtractedTheorem,
    StandardizationError,
    TheoremPool,
    assertion_match_key,
    standardize,
)
from refactor_kit.trees import ProofTree, build_tree


def library_trees(db: Database, labels=None) -> Iterable[ProofTree]:
    for label in labels if labels is not None else db.provable_labels():
        assertion = db.assertions[label]
        if assertion.proof is not None:
            yield build_tree(db, assertion)


def mine_closures(
    db: Database,
    trees: Iterable[ProofTree],
    pool: TheoremPool | None = None,
) -> tuple[TheoremPool, Counter, int]:
    """Standardize the argument closure of every non-leaf node.

    Returns the deduplicating pool, occurrence counts keyed by dedup_key,
    and the number of closures that could not be standardized (e.g. the
    canonical variable pool ran out).
    """
    if pool is None:
        pool = TheoremPool(db)
    counts: Counter = Counter()
    skipped = 0
    for tree in trees:
        for node in tree.nodes:
            if not node.parents:
                continue
            try:
                std = standardize(db, tree, tree.subtree_ids(node.id))
            except StandardizationError:
                skipped += 1
                continue
            theorem, _ = pool.add(std)
            counts[theorem.dedup_key] += 1
    return pool, counts, skipped


def top_theorems(
    pool: TheoremPool, counts: Counter, n: int
) -> list[tuple[ExtractedTheorem, int]]:
    """Most frequent mined theorems; ties broken by statement key."""
    ranked = sorted(
        pool.theorems(), key=lambda t: (-counts[t.dedup_key], t.dedup_key)
    )
    return [(t, counts[t.dedup_key]) for t in ranked[:n]]


def library_match_rate(db: Database, theorems) -> float:
    """Fraction of theorems whose statement already exists in the database."""
    theorems = list(theorems)
    if not theorems:
        return 0.0
    library_keys = {
        assertion_match_key(db, a) for a in db.assertions.values()
    }
    matched = sum(1 for t in theorems if t.match_key in library_keys)
    return matched / len(theorems)
