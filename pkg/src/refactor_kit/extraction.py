"""Turning a selected region of a proof tree into a standalone theorem.

A selection (set of node ids) is usable when it forms a single connected
subtree and every selected application either keeps all of its arguments or
loses all of them.  The boundary nodes — hypothesis leaves and applications
whose arguments were all left out — become the new theorem's hypotheses
("slots"); the interior applications become its proof body.

Slot propositions whose typecode is covered by $f statements (wff-like)
become variables: each distinct slot proposition is assigned the next
globally declared variable of its typecode, so the result is phrased over
the database's own canonical variables.  Slots with other typecodes
(|- -like) become essential hypotheses; their statements are not copied
from the source tree but derived by unification while the body is replayed
symbolically, which is what makes the result a genuine theorem rather than
a transcript.  Disjoint-variable obligations are accumulated from the body
applications instead of being checked against a frame.

Extraction outcomes are graded: a selection that is not a single complete
subtree is `not_tree_invalid`; one that is tree-shaped but yields no
theorem (no body steps, failed unification, a collapsed $d pair, variable
pool exhausted, or the trivial whole-library-proof selection) is
`tree_invalid`; otherwise `tree_valid` with the extracted theorem attached.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from refactor_kit.database import (
    Database,
    DvPair,
    Expr,
    Hypothesis,
    ReplayFrame,
    apply_subst,
    dv_pair,
    verify_proof,
)
from refactor_kit.trees import ProofTree

VERDICT_NOT_TREE = "not_tree_invalid"
VERDICT_TREE_INVALID = "tree_invalid"
VERDICT_TREE_VALID = "tree_valid"

REASON_NOT_TREE = "not_tree"
REASON_INCOMPLETE_ARGUMENTS = "incomplete_arguments"
REASON_NO_ASSERTION_STEPS = "no_assertion_steps"
REASON_LIBRARY_TREE = "library_tree"
REASON_NO_VALID_SUBSTITUTION = "no_valid_substitution"
REASON_SELF_DISJOINTNESS = "self_disjointness"
REASON_POOL_EXHAUSTED = "variable_pool_exhausted"


class StandardizationError(Exception):
    """Tree-shaped selection that still cannot become a theorem."""

    reason = REASON_NO_VALID_SUBSTITUTION


class NoValidSubstitutionError(StandardizationError):
    reason = REASON_NO_VALID_SUBSTITUTION


class SelfDisjointnessError(StandardizationError):
    reason = REASON_SELF_DISJOINTNESS


class PoolExhaustedError(StandardizationError):
    reason = REASON_POOL_EXHAUSTED


class NoAssertionStepsError(StandardizationError):
    reason = REASON_NO_ASSERTION_STEPS


def threshold_mask(scores, threshold: float = 0.5) -> frozenset[int]:
    """Node ids whose score strictly exceeds the threshold."""
    return frozenset(i for i, score in enumerate(scores) if score > threshold)


def check_structure(tree: ProofTree, selection) -> str:
    """Classify a selection's shape: "ok", "not_tree", or "incomplete_arguments".

    not_tree: the selection is empty or has more than one selected node
    whose consumer is unselected (so it is not a single connected subtree).
    incomplete_arguments: some selected application keeps only part of its
    argument list.  not_tree takes precedence when both apply.
    """
    selected = frozenset(selection)
    if not selected:
        return REASON_NOT_TREE
    tops = 0
    consumer: dict[int, int] = {}
    for node in tree.nodes:
        for parent in node.parents:
            consumer[parent] = node.id
    for i in selected:
        if consumer.get(i) not in selected:
            tops += 1
    if tops != 1:
        return REASON_NOT_TREE
    for i in selected:
        parents = tree.nodes[i].parents
        if parents:
            kept = sum(1 for p in parents if p in selected)
            if 0 < kept < len(parents):
                return REASON_INCOMPLETE_ARGUMENTS
    return "ok"


@dataclass(frozen=True)
class StandardizedProof:
    """Raw standardization result, before naming and deduplication."""

    f_vars: tuple[str, ...]  # canonical variables, declaration order
    e_exprs: tuple[Expr, ...]  # deduplicated essential statements, slot order
    conclusion: Expr
    dvs: frozenset[DvPair]
    proof: tuple[str, ...]  # essential slots appear as "hyp.N"
    n_body: int  # number of application steps in the proof


def hyp_slot_label(index: int) -> str:
    return f"hyp.{index}"


def standardize(db: Database, tree: ProofTree, selection) -> StandardizedProof:
    """Standardize a structurally valid selection; see the module docstring.

    Raises a StandardizationError subclass when the selection is
    tree-shaped but yields no theorem.  The caller is responsible for
    check_structure.
    """
    selected = frozenset(selection)
    order = sorted(selected)
    float_tcs = db.float_typecodes()

    # Classify slots.  A slot is a hypothesis leaf or an application whose
    # arguments were all left out of the selection.
    slot_ids = set()
    for i in order:
        node = tree.nodes[i]
        if node.label in db.hypotheses and not node.parents:
            slot_ids.add(i)
        elif node.parents and not any(p in selected for p in node.parents):
            slot_ids.add(i)
    n_body = len(order) - len(slot_ids)
    if n_body == 0:
        raise NoAssertionStepsError("selection has no application steps")

    # Assign canonical variables to float slots, one per distinct proposition.
    pool_index: dict[str, int] = {}
    var_of_prop: dict[str, str] = {}
    float_var: dict[int, str] = {}  # slot node id -> canonical variable
    ess_placeholder: dict[int, int] = {}  # slot node id -> placeholder index
    placeholders: list[Expr | None] = []
    for i in order:
        if i not in slot_ids:
            continue
        prop = tree.nodes[i].prop
        tc = prop.split(" ", 1)[0]
        if tc in float_tcs:
            var = var_of_prop.get(prop)
            if var is None:
                pool = db.var_pool(tc)
                k = pool_index.get(tc, 0)
                if k >= len(pool):
                    raise PoolExhaustedError(
                        f"no unused global {tc} variable left (pool size {len(pool)})"
                    )
                var = pool[k]
                pool_index[tc] = k + 1
                var_of_prop[prop] = var
            float_var[i] = var
        else:
            ess_placeholder[i] = len(placeholders)
            placeholders.append(None)

    # Symbolic replay: entries are ("expr", Expr) or ("ph", placeholder id).
    dvs: set[DvPair] = set()
    stack: list[tuple[str, object]] = []
    proof: list[str] = []  # essential slots recorded as ("ph", k) markers
    for i in order:
        node = tree.nodes[i]
        if i in float_var:
            var = float_var[i]
            tc = node.prop.split(" ", 1)[0]
            stack.append(("expr", (tc, var)))
            proof.append(db.float_label_of(var))
            continue
        if i in ess_placeholder:
            stack.append(("ph", ess_placeholder[i]))
            proof.append(f"__ph:{ess_placeholder[i]}")
            continue
        assertion = db.assertions.get(node.label)
        if assertion is None:
            # A hypothesis step with arguments cannot exist; a selected
            # hypothesis leaf is always a slot, so this is a bad tree input.
            raise NoValidSubstitutionError(
                f"node {i} has label {node.label!r} which is neither a slot "
                "hypothesis nor an assertion"
            )
        n_pop = len(assertion.f_hyps) + len(assertion.e_hyps)
        args = stack[len(stack) - n_pop :] if n_pop else []
        assert len(args) == n_pop, "selection replay lost stack discipline"
        subst: dict[str, tuple[str, ...]] = {}
        for k, lab in enumerate(assertion.f_hyps):
            hyp = db.hypotheses[lab]
            kind, value = args[k]
            if kind != "expr":
                raise NoValidSubstitutionError(
                    f"node {i}: argument {k} of {node.label} must be a "
                    f"{hyp.typecode} expression, got an underived hypothesis"
                )
            if value[0] != hyp.typecode:
                raise NoValidSubstitutionError(
                    f"node {i}: argument {k} of {node.label} has typecode "
                    f"{value[0]!r}, expected {hyp.typecode!r}"
                )
            subst[hyp.variable] = tuple(value[1:])
        n_f = len(assertion.f_hyps)
        for k, lab in enumerate(assertion.e_hyps):
            expected = apply_subst(db.hypotheses[lab].stmt, subst)
            kind, value = args[n_f + k]
            if kind == "ph":
                bound = placeholders[value]
                if bound is None:
                    placeholders[value] = expected
                elif bound != expected:
                    raise NoValidSubstitutionError(
                        f"node {i}: hypothesis slot must be "
                        f"{' '.join(expected)!r} here but was already "
                        f"{' '.join(bound)!r}"
                    )
            elif value != expected:
                raise NoValidSubstitutionError(
                    f"node {i}: essential argument of {node.label} is "
                    f"{' '.join(value)!r}, expected {' '.join(expected)!r}"
                )
        for x, y in assertion.dvs:
            for a in db.find_vars(subst[x]):
                for b in db.find_vars(subst[y]):
                    if a == b:
                        raise SelfDisjointnessError(
                            f"node {i}: $d {x} {y} of {node.label} collapses "
                            f"onto variable {a!r}"
                        )
                    dvs.add(dv_pair(a, b))
        if n_pop:
            del stack[len(stack) - n_pop :]
        stack.append(("expr", apply_subst(assertion.conclusion, subst)))
        proof.append(node.label)

    assert len(stack) == 1, "selection replay must end with a single entry"
    kind, conclusion = stack[0]
    if kind != "expr":
        raise NoAssertionStepsError("selection reduces to a bare hypothesis")
    assert all(p is not None for p in placeholders), "unbound hypothesis slot"

    # Deduplicate identical essential statements, first-appearance order.
    e_exprs: list[Expr] = []
    e_index: dict[Expr, int] = {}
    ph_to_hyp: list[int] = []
    for expr in placeholders:
        idx = e_index.get(expr)
        if idx is None:
            idx = len(e_exprs)
            e_index[expr] = idx
            e_exprs.append(expr)
        ph_to_hyp.append(idx)
    final_proof = tuple(
        hyp_slot_label(ph_to_hyp[int(lab.split(":", 1)[1])])
        if lab.startswith("__ph:")
        else lab
        for lab in proof
    )

    # Mandatory variables in database declaration order, matching the frame
    # the emitted assertion will get back from the parser.
    used = set(float_var.values())
    f_vars = tuple(
        db.hypotheses[lab].variable
        for lab in db._global_floats
        if db.hypotheses[lab].variable in used
    )

    return StandardizedProof(
        f_vars=f_vars,
        e_exprs=tuple(e_exprs),
        conclusion=tuple(conclusion),
        dvs=frozenset(dvs),
        proof=final_proof,
        n_body=n_body,
    )


# -- fingerprints ----------------------------------------------------------------


def _rename_statement(
    var_tc: dict[str, str], e_exprs, conclusion, dvs
) -> tuple[str, str]:
    """Return (match_key, dedup_key) with variables renamed positionally.

    Variables become "{typecode}#{k}" in order of first appearance scanning
    the essential statements (in order) and then the conclusion, so keys are
    invariant under variable renaming.  The dedup key additionally carries
    the sorted disjointness pairs; the match key does not.
    """
    mapping: dict[str, str] = {}
    counters: dict[str, int] = {}

    def rename(expr) -> str:
        out = [expr[0]]
        for tok in expr[1:]:
            tc = var_tc.get(tok)
            if tc is None:
                out.append(tok)
                continue
            name = mapping.get(tok)
            if name is None:
                k = counters.get(tc, 0)
                counters[tc] = k + 1
                name = f"{tc}#{k}"
                mapping[tok] = name
            out.append(name)
        return " ".join(out)

    parts = [f"E {rename(e)}" for e in e_exprs]
    parts.append(f"C {rename(conclusion)}")
    match_key = " | ".join(parts)
    renamed_pairs = sorted(
        " ".join(sorted((mapping[x], mapping[y])))
        for x, y in dvs
        if x in mapping and y in mapping
    )
    dedup_key = match_key
    if renamed_pairs:
        dedup_key += " | D " + " ; ".join(renamed_pairs)
    return match_key, dedup_key


def statement_keys(db: Database, std: StandardizedProof) -> tuple[str, str]:
    var_tc = {v: db.var_typecode(v) for v in std.f_vars}
    return _rename_statement(var_tc, std.e_exprs, std.conclusion, std.dvs)


def assertion_match_key(db: Database, assertion) -> str:
    """Renaming-invariant statement key for a database assertion."""
    var_tc = {
        db.hypotheses[lab].variable: db.hypotheses[lab].typecode
        for lab in assertion.f_hyps
    }
    e_exprs = [db.hypotheses[lab].stmt for lab in assertion.e_hyps]
    match_key, _ = _rename_statement(var_tc, e_exprs, assertion.conclusion, ())
    return match_key


def extracted_from_assertion(db: Database, assertion) -> "ExtractedTheorem":
    """View a parsed provable assertion as an extracted theorem.

    Lets theorems shipped as an .mm fragment drive refactoring: parse the
    fragment against its base database, then convert each new assertion.
    The assertion's floats must come from the global pool, which holds for
    every fragment this package emits.
    """
    if assertion.proof is None:
        raise ValueError(f"{assertion.label} has no stored proof")
    f_hyps = [db.hypotheses[lab] for lab in assertion.f_hyps]
    e_hyps = [db.hypotheses[lab] for lab in assertion.e_hyps]
    var_tc = {h.variable: h.typecode for h in f_hyps}
    match_key, dedup_key = _rename_statement(
        var_tc, [h.stmt for h in e_hyps], assertion.conclusion, assertion.dvs
    )
    hyp_labels = set(assertion.hyp_labels)
    return ExtractedTheorem(
        name=assertion.label,
        f_vars=tuple(h.variable for h in f_hyps),
        e_hyps=tuple((h.label, h.stmt) for h in e_hyps),
        conclusion=assertion.conclusion,
        dvs=frozenset(assertion.dvs),
        proof=tuple(assertion.proof),
        match_key=match_key,
        dedup_key=dedup_key,
        n_body=sum(1 for lab in assertion.proof if lab not in hyp_labels),
    )


# -- named theorems ---------------------------------------------------------------


@dataclass(frozen=True)
class ExtractedTheorem:
    name: str
    f_vars: tuple[str, ...]
    e_hyps: tuple[tuple[str, Expr], ...]  # (label, statement), emission order
    conclusion: Expr
    dvs: frozenset[DvPair]
    proof: tuple[str, ...]  # body labels + slot labels, RPN order
    match_key: str
    dedup_key: str
    n_body: int

    @property
    def hyp_count(self) -> int:
        return len(self.f_vars) + len(self.e_hyps)


class TheoremPool:
    """Deduplicating registry of extracted theorems with stable names.

    Names are content hashes of the renaming-invariant statement key, so
    the same theorem gets the same name in any run.  A hash prefix that is
    already taken (by the database or by a different statement) grows until
    it is free.
    """

    def __init__(self, db: Database) -> None:
        self.db = db
        self.by_dedup_key: dict[str, ExtractedTheorem] = {}
        self._names: dict[str, str] = {}  # name -> dedup_key

    def _pick_name(self, dedup_key: str) -> str:
        digest = hashlib.sha256(dedup_key.encode("utf-8")).hexdigest()
        for length in range(8, len(digest) + 1):
            name = f"rf_{digest[:length]}"
            taken = (
                name in self.db.assertions
                or name in self.db.hypotheses
                or self._names.get(name, dedup_key) != dedup_key
            )
            if not taken:
                return name
        raise RuntimeError("hash space exhausted")  # pragma: no cover

    def add(self, std: StandardizedProof) -> tuple[ExtractedTheorem, bool]:
        """Register a standardized proof; returns (theorem, is_new)."""
        match_key, dedup_key = statement_keys(self.db, std)
        existing = self.by_dedup_key.get(dedup_key)
        if existing is not None:
            return existing, False
        name = self._pick_name(dedup_key)
        e_hyps = tuple(
            (f"{name}.{i}", expr) for i, expr in enumerate(std.e_exprs)
        )
        rename = {
            hyp_slot_label(i): label for i, (label, _) in enumerate(e_hyps)
        }
        theorem = ExtractedTheorem(
            name=name,
            f_vars=std.f_vars,
            e_hyps=e_hyps,
            conclusion=std.conclusion,
            dvs=std.dvs,
            proof=tuple(rename.get(lab, lab) for lab in std.proof),
            match_key=match_key,
            dedup_key=dedup_key,
            n_body=std.n_body,
        )
        self.by_dedup_key[dedup_key] = theorem
        self._names[name] = dedup_key
        return theorem, True

    def theorems(self) -> list[ExtractedTheorem]:
        return list(self.by_dedup_key.values())


@dataclass(frozen=True)
class ExtractionOutcome:
    verdict: str  # not_tree_invalid | tree_invalid | tree_valid
    reason: str | None
    theorem: ExtractedTheorem | None = None
    std: StandardizedProof | None = None


def verify_extraction(
    db: Database,
    tree: ProofTree,
    selection,
    *,
    pool: TheoremPool | None = None,
    library_tree: bool = False,
) -> ExtractionOutcome:
    """Grade a selection and extract its theorem when valid.

    library_tree marks trees taken directly from the database: selecting
    such a proof in full only restates the theorem it proves, so the whole
    selection is rejected rather than extracted.
    """
    structure = check_structure(tree, selection)
    if structure != "ok":
        return ExtractionOutcome(VERDICT_NOT_TREE, structure)
    if library_tree and len(frozenset(selection)) == tree.node_count:
        return ExtractionOutcome(VERDICT_TREE_INVALID, REASON_LIBRARY_TREE)
    try:
        std = standardize(db, tree, selection)
    except StandardizationError as exc:
        return ExtractionOutcome(VERDICT_TREE_INVALID, exc.reason)
    if pool is None:
        pool = TheoremPool(db)
    theorem, _ = pool.add(std)
    return ExtractionOutcome(VERDICT_TREE_VALID, None, theorem, std)


def extraction_frame(db: Database, theorem: ExtractedTheorem) -> ReplayFrame:
    """Replay frame for an extracted theorem's proof (pre-emission check)."""
    f_hyps = tuple(
        db.hypotheses[db.float_label_of(var)] for var in theorem.f_vars
    )
    e_hyps = tuple(
        Hypothesis(label=label, kind="$e", stmt=stmt, pos=-1, is_global=False)
        for label, stmt in theorem.e_hyps
    )
    return ReplayFrame(f_hyps=f_hyps, e_hyps=e_hyps, dvs=theorem.dvs, cutoff=None)


def verify_extracted_theorem(db: Database, theorem: ExtractedTheorem) -> None:
    """Replay an extracted theorem's proof against its own statement."""
    verify_proof(
        db,
        theorem.conclusion,
        theorem.proof,
        extraction_frame(db, theorem),
        where=theorem.name,
    )


def emit_fragment(theorems) -> str:
    """Render extracted theorems as .mm text blocks.

    Floating hypotheses are the database's own global $f statements, so a
    block only declares the essential hypotheses and $d conditions.
    """
    out: list[str] = []
    for theorem in theorems:
        out.append("${")
        for x, y in sorted(theorem.dvs):
            out.append(f"  $d {x} {y} $.")
        for label, stmt in theorem.e_hyps:
            out.append(f"  {label} $e {' '.join(stmt)} $.")
        out.append(
            f"  {theorem.name} $p {' '.join(theorem.conclusion)} $="
        )
        body = " ".join(theorem.proof)
        out.append(f"    {body} $.")
        out.append("$}")
    return "\n".join(out) + "\n"
