"""Generated corpora: determinism, verification, size limits, record yield."""

from __future__ import annotations

import pytest

from refactor_kit.dataset import DatasetSpec, build_dataset
from refactor_kit.expansion import enumerate_expansions
from refactor_kit.toygen import (
    SMALL_CORPUS_SPEC,
    TRAINING_CORPUS_SPEC,
    ToySpec,
    build_toy_database,
    syntax_labels,
    toy_database_text,
    wff_size,
    wff_tokens,
)


def test_wff_helpers():
    w = ("imp", ("var", "ph"), ("not", ("var", "ps")))
    assert wff_tokens(w) == ["(", "ph", "->", "-.", "ps", ")"]
    assert syntax_labels(w) == ["wph", "wps", "wn", "wi"]
    assert wff_size(w) == 4


def test_text_is_deterministic():
    spec = ToySpec(n_theorems=40, seed=11)
    assert toy_database_text(spec) == toy_database_text(spec)
    assert toy_database_text(spec) != toy_database_text(ToySpec(n_theorems=40, seed=12))


def test_small_corpus_builds_and_verifies():
    db = build_toy_database(ToySpec(n_theorems=50, seed=3))
    assert not db.verify_failures
    generated = [lb for lb in db.provable_labels() if lb.startswith("t")]
    assert len(generated) == 50


@pytest.fixture(scope="module")
def small_corpus():
    return build_toy_database(SMALL_CORPUS_SPEC)


def test_small_corpus_shape(small_corpus):
    db = small_corpus
    provables = list(db.provable_labels())
    assert len(provables) == 200  # 4 handwritten + 196 generated
    for label in provables:
        assert len(db.assertions[label].proof) <= 30


def test_small_corpus_expansions_all_verify(small_corpus):
    db = small_corpus
    discarded = []
    n = 0
    for host in db.provable_labels():
        for rec in enumerate_expansions(
            db, host, on_discard=lambda *a: discarded.append(a)
        ):
            n += 1
            assert rec.tree.node_count >= 1
            assert rec.targets
    assert not discarded  # corpus has no local $f/$d, so nothing is dropped
    assert n >= 100


def test_training_corpus_yields_enough_records():
    db = build_toy_database(TRAINING_CORPUS_SPEC)
    assert not db.verify_failures
    build = build_dataset(db, DatasetSpec(seed=7))
    report = build.report
    assert report["post_cap_records"]["total"] >= 2000
    # every split is populated and targets are disjoint across splits
    targets = {
        split: {g.target_theorem for g in records}
        for split, records in build.splits.items()
    }
    assert all(targets.values())
    assert not (targets["train"] & targets["valid"])
    assert not (targets["train"] & targets["test"])
    assert not (targets["valid"] & targets["test"])
