"""Metamath database parsing, proof inflation, and stack-machine verification.

The .mm format packs a formal system into labeled statements ($c, $v, $f,
$e, $d, $a, $p) with block scoping.  This module reads a database into
typed records, inflates compressed proofs into plain label sequences, and
replays proofs through the substitution stack machine, enforcing typecode
unification and disjoint-variable conditions.

Inputs are expected to be single files: file inclusions ($[ ... $]) must be
flattened before parsing and are rejected here.
"""

from __future__ import annotations

import itertools
import sys
from dataclasses import dataclass

Symbol = str
Label = str
Expr = tuple[str, ...]  # typecode-first token tuple
DvPair = tuple[str, str]  # normalized: (min, max)

_LABEL_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789-_."
)


class MMError(Exception):
    """Any error raised while reading or checking a database."""


class MMSyntaxError(MMError):
    """Malformed database text (reported with a line number)."""


class IncompleteProofError(MMSyntaxError):
    """A proof contains the '?' placeholder and cannot be checked."""


class MMVerifyError(MMError):
    """A structurally well-formed proof failed verification."""


class UnknownLabelError(MMVerifyError):
    """A proof step names a label that is not visible at that point."""


class StackUnderflowError(MMVerifyError):
    """An assertion step pops more entries than the stack holds."""


class UnificationError(MMVerifyError):
    """A popped stack entry does not fit the hypothesis it must match."""


class DisjointnessError(MMVerifyError):
    """A substitution violates an active $d condition."""


class ConclusionMismatchError(MMVerifyError):
    """The final stack does not reduce to the stated conclusion."""


@dataclass(frozen=True)
class Hypothesis:
    """A $f or $e statement.  For $f, stmt is exactly (typecode, var)."""

    label: Label
    kind: str  # "$f" | "$e"
    stmt: Expr
    pos: int
    is_global: bool

    @property
    def typecode(self) -> str:
        return self.stmt[0]

    @property
    def variable(self) -> str:
        assert self.kind == "$f"
        return self.stmt[1]


@dataclass
class Assertion:
    """A $a or $p statement together with its mandatory frame.

    f_hyps and e_hyps hold hypothesis labels in declaration order; that
    order is the argument order of every application of this assertion.
    active_dvs is the full $d set visible at the declaration point (a
    superset of the mandatory dvs, needed to replay proofs that use dummy
    variables).  extra_f lists visible non-mandatory local $f labels, i.e.
    scoped dummy variables a stored proof may mention.
    """

    label: Label
    kind: str  # "$a" | "$p"
    conclusion: Expr
    f_hyps: tuple[Label, ...]
    e_hyps: tuple[Label, ...]
    dvs: frozenset[DvPair]
    active_dvs: frozenset[DvPair]
    extra_f: tuple[Label, ...]
    pos: int
    proof: tuple[Label, ...] | None = None

    @property
    def hyp_labels(self) -> tuple[Label, ...]:
        return self.f_hyps + self.e_hyps

    @property
    def is_provable(self) -> bool:
        return self.kind == "$p"


class ReplayFrame:
    """Hypothesis context a proof is replayed under.

    cutoff bounds which database statements the proof may reference (all
    labels must sit strictly before it); None lifts the bound, which is
    only safe when the caller re-verifies the final ordering separately.
    """

    __slots__ = ("f_hyps", "e_hyps", "dvs", "cutoff", "extra_hyps", "_by_label")

    def __init__(
        self,
        f_hyps: tuple[Hypothesis, ...],
        e_hyps: tuple[Hypothesis, ...],
        dvs: frozenset[DvPair],
        cutoff: int | None = None,
        extra_hyps: tuple[Hypothesis, ...] = (),
    ) -> None:
        self.f_hyps = f_hyps
        self.e_hyps = e_hyps
        self.dvs = dvs
        self.cutoff = cutoff
        self.extra_hyps = extra_hyps
        self._by_label = {
            h.label: h for h in itertools.chain(f_hyps, e_hyps, extra_hyps)
        }

    def lookup(self, label: Label) -> Hypothesis | None:
        return self._by_label.get(label)


def dv_pair(a: str, b: str) -> DvPair:
    return (a, b) if a < b else (b, a)


def apply_subst(stmt: Expr, subst: dict[str, tuple[str, ...]]) -> Expr:
    """Substitute variables in a typecode-first token tuple."""
    out = [stmt[0]]
    for tok in stmt[1:]:
        rep = subst.get(tok)
        if rep is None:
            out.append(tok)
        else:
            out.extend(rep)
    return tuple(out)


class Database:
    """Parsed .mm database: ordered statements plus label indexes."""

    def __init__(self, name: str = "<db>") -> None:
        self.name = name
        self.constants: set[str] = set()
        self.variables: set[str] = set()
        self.hypotheses: dict[Label, Hypothesis] = {}
        self.assertions: dict[Label, Assertion] = {}
        # Statement stream for re-emission: ("open",) ("close",)
        # ("c"|"v"|"d", tokens) ("f"|"e"|"a"|"p", label).
        self.events: list[tuple] = []
        self.verify_failures: list[tuple[Label, MMError]] = []
        self._global_floats: list[Label] = []
        self._global_float_of_var: dict[str, Label] = {}
        self._n_statements = 0

    # -- querying -----------------------------------------------------------

    def assertions_in_order(self) -> list[Assertion]:
        return sorted(self.assertions.values(), key=lambda a: a.pos)

    def provable_labels(self) -> list[Label]:
        return [a.label for a in self.assertions_in_order() if a.is_provable]

    def float_typecodes(self) -> set[str]:
        return {h.typecode for h in self.hypotheses.values() if h.kind == "$f"}

    def var_pool(self, typecode: str) -> list[str]:
        """Globally declared variables of a typecode, in declaration order."""
        return [
            self.hypotheses[lab].variable
            for lab in self._global_floats
            if self.hypotheses[lab].typecode == typecode
        ]

    def float_label_of(self, var: str) -> Label:
        return self._global_float_of_var[var]

    def var_typecode(self, var: str) -> str | None:
        label = self._global_float_of_var.get(var)
        return self.hypotheses[label].typecode if label else None

    def frame_for(self, assertion: Assertion) -> ReplayFrame:
        return ReplayFrame(
            f_hyps=tuple(self.hypotheses[lab] for lab in assertion.f_hyps),
            e_hyps=tuple(self.hypotheses[lab] for lab in assertion.e_hyps),
            dvs=assertion.active_dvs,
            cutoff=assertion.pos,
            extra_hyps=tuple(self.hypotheses[lab] for lab in assertion.extra_f),
        )

    def find_vars(self, tokens) -> set[str]:
        vs = self.variables
        return {t for t in tokens if t in vs}

    # -- replay ---------------------------------------------------------------

    def resolve(self, frame: ReplayFrame, label: Label):
        """Map a proof label to ("h", Hypothesis) or ("a", Assertion)."""
        hyp = frame.lookup(label)
        if hyp is not None:
            return "h", hyp
        hyp = self.hypotheses.get(label)
        if (
            hyp is not None
            and hyp.kind == "$f"
            and hyp.is_global
            and (frame.cutoff is None or hyp.pos < frame.cutoff)
        ):
            return "h", hyp
        assertion = self.assertions.get(label)
        if assertion is not None and (
            frame.cutoff is None or assertion.pos < frame.cutoff
        ):
            return "a", assertion
        raise UnknownLabelError(
            f"label {label!r} is not visible at this proof step"
        )

    def _apply_step(
        self,
        assertion: Assertion,
        popped: list[Expr],
        dvs: frozenset[DvPair],
        where: str,
    ) -> Expr:
        """Unify an application's popped arguments, check $d, return its conclusion.

        popped must hold exactly the argument entries, mandatory-hypothesis
        order (floating first, then essential).
        """
        subst: dict[str, tuple[str, ...]] = {}
        for i, lab in enumerate(assertion.f_hyps):
            hyp = self.hypotheses[lab]
            entry = popped[i]
            if entry[0] != hyp.typecode:
                raise UnificationError(
                    f"{where}: argument {i} of {assertion.label} has typecode "
                    f"{entry[0]!r}, expected {hyp.typecode!r}"
                )
            subst[hyp.variable] = entry[1:]
        n_f = len(assertion.f_hyps)
        for i, lab in enumerate(assertion.e_hyps):
            hyp = self.hypotheses[lab]
            expected = apply_subst(hyp.stmt, subst)
            entry = popped[n_f + i]
            if entry != expected:
                raise UnificationError(
                    f"{where}: essential argument {lab} of {assertion.label} "
                    f"is {' '.join(entry)!r}, expected {' '.join(expected)!r}"
                )
        for x, y in assertion.dvs:
            x_vars = self.find_vars(subst[x])
            y_vars = self.find_vars(subst[y])
            for a in x_vars:
                for b in y_vars:
                    if a == b:
                        raise DisjointnessError(
                            f"{where}: $d {x} {y} of {assertion.label} "
                            f"collapses onto variable {a!r}"
                        )
                    if dv_pair(a, b) not in dvs:
                        raise DisjointnessError(
                            f"{where}: $d {x} {y} of {assertion.label} needs "
                            f"$d {a} {b} in the outer frame"
                        )
        return apply_subst(assertion.conclusion, subst)

    def replay(
        self, labels, frame: ReplayFrame, where: str = "proof"
    ) -> list[tuple[Label, Expr, tuple[int, ...]]]:
        """Run the stack machine over a plain label sequence.

        Returns one (label, proposition, argument step ids) triple per step,
        in order; argument ids index into the returned list.  Raises an
        MMVerifyError subclass if any step fails.  The final stack must hold
        exactly one entry; matching it against a stated conclusion is the
        caller's job (see verify_proof).
        """
        steps: list[tuple[Label, Expr, tuple[int, ...]]] = []
        # stack holds step ids; the step table holds each entry's proposition
        stack: list[int] = []
        for label in labels:
            if label == "?":
                raise IncompleteProofError(f"{where}: placeholder '?' in proof")
            kind, obj = self.resolve(frame, label)
            if kind == "h":
                steps.append((label, obj.stmt, ()))
            else:
                n_pop = len(obj.f_hyps) + len(obj.e_hyps)
                if n_pop > len(stack):
                    raise StackUnderflowError(
                        f"{where}: {label} needs {n_pop} stack entries, "
                        f"have {len(stack)}"
                    )
                sp = len(stack) - n_pop
                arg_ids = tuple(stack[sp:])
                popped = [steps[i][1] for i in arg_ids]
                concl = self._apply_step(obj, popped, frame.dvs, where)
                del stack[sp:]
                steps.append((label, concl, arg_ids))
            stack.append(len(steps) - 1)
        if not steps:
            raise MMVerifyError(f"{where}: empty proof")
        if len(stack) != 1:
            raise ConclusionMismatchError(
                f"{where}: {len(stack)} entries left on the stack, expected 1"
            )
        return steps


def verify_proof(
    db: Database,
    conclusion: Expr,
    labels,
    frame: ReplayFrame,
    where: str = "proof",
) -> list[str]:
    """Replay a plain proof and check it lands exactly on the conclusion.

    Returns the per-step substituted propositions as strings.  Raises an
    MMVerifyError subclass on any failure.
    """
    steps = db.replay(labels, frame, where)
    final = steps[-1][1]
    if final != tuple(conclusion):
        raise ConclusionMismatchError(
            f"{where}: proved {' '.join(final)!r}, "
            f"stated {' '.join(conclusion)!r}"
        )
    return [" ".join(stmt) for _, stmt, _ in steps]


def verify_assertion(db: Database, assertion: Assertion) -> list[str]:
    """Verify a provable assertion against its own stored proof."""
    if assertion.proof is None:
        raise MMVerifyError(f"{assertion.label} has no stored proof")
    return verify_proof(
        db,
        assertion.conclusion,
        assertion.proof,
        db.frame_for(assertion),
        where=assertion.label,
    )


# -- parsing -------------------------------------------------------------------


class _Frame:
    __slots__ = ("v", "d", "f", "e")

    def __init__(self) -> None:
        self.v: set[str] = set()
        self.d: set[DvPair] = set()
        self.f: list[Label] = []  # $f labels, declaration order
        self.e: list[Label] = []


class _Tokens:
    """Whitespace token stream with line tracking and comment stripping."""

    def __init__(self, text: str, name: str) -> None:
        self.name = name
        toks: list[tuple[str, int]] = []
        intern = sys.intern
        in_comment = False
        comment_line = 0
        for line_no, line in enumerate(text.splitlines(), start=1):
            for tok in line.split():
                if in_comment:
                    if tok == "$)":
                        in_comment = False
                    elif tok == "$(":
                        raise MMSyntaxError(
                            f"{name}:{line_no}: comments may not nest"
                        )
                    continue
                if tok == "$(":
                    in_comment = True
                    comment_line = line_no
                    continue
                if tok == "$)":
                    raise MMSyntaxError(f"{name}:{line_no}: stray '$)'")
                if tok in ("$[", "$]"):
                    raise MMSyntaxError(
                        f"{name}:{line_no}: file inclusions must be "
                        "flattened before parsing"
                    )
                toks.append((intern(tok), line_no))
        if in_comment:
            raise MMSyntaxError(f"{name}:{comment_line}: unterminated comment")
        self._toks = toks
        self._i = 0

    def next(self) -> str | None:
        if self._i >= len(self._toks):
            return None
        tok = self._toks[self._i][0]
        self._i += 1
        return tok

    def line(self) -> int:
        if not self._toks:
            return 0
        return self._toks[min(self._i, len(self._toks) - 1)][1]

    def err(self, msg: str) -> MMSyntaxError:
        return MMSyntaxError(f"{self.name}:{self.line()}: {msg}")

    def read_until(self, end: str) -> list[str]:
        out = []
        while True:
            tok = self.next()
            if tok is None:
                raise self.err(f"end of file while looking for {end!r}")
            if tok == end:
                return out
            if tok.startswith("$"):
                raise self.err(f"unexpected keyword {tok!r} inside statement")
            out.append(tok)


def _valid_label(tok: str) -> bool:
    return bool(tok) and all(c in _LABEL_CHARS for c in tok)


def _valid_symbol(tok: str) -> bool:
    return bool(tok) and "$" not in tok and all(33 <= ord(c) <= 126 for c in tok)


class _Parser:
    def __init__(self, text: str, name: str, verify: bool, on_error: str):
        self.toks = _Tokens(text, name)
        self.db = Database(name)
        self.frames: list[_Frame] = [_Frame()]
        self.verify = verify
        self.collect = on_error == "collect"

    # active-scope lookups ----------------------------------------------------

    def _active_var(self, v: str) -> bool:
        return any(v in fr.v for fr in self.frames)

    def _active_float_of(self, v: str) -> Hypothesis | None:
        for fr in reversed(self.frames):
            for lab in reversed(fr.f):
                hyp = self.db.hypotheses[lab]
                if hyp.variable == v:
                    return hyp
        return None

    def _check_new_label(self, label: str) -> None:
        if not _valid_label(label):
            raise self.toks.err(f"invalid label {label!r}")
        if label in self.db.hypotheses or label in self.db.assertions:
            raise self.toks.err(f"duplicate label {label!r}")

    def _validate_expr(self, keyword: str, tokens: list[str]) -> Expr:
        if not tokens:
            raise self.toks.err(f"empty {keyword} statement")
        tc = tokens[0]
        if tc not in self.db.constants:
            raise self.toks.err(
                f"{keyword} must open with a constant typecode, got {tc!r}"
            )
        for tok in tokens[1:]:
            if tok in self.db.constants:
                continue
            if self._active_var(tok):
                if self._active_float_of(tok) is None:
                    raise self.toks.err(
                        f"variable {tok!r} used without an active $f"
                    )
                continue
            raise self.toks.err(f"unknown math symbol {tok!r}")
        return tuple(tokens)

    # frame assembly ------------------------------------------------------------

    def _make_assertion(self, label: str, kind: str, conclusion: Expr) -> Assertion:
        db = self.db
        e_labels = [lab for fr in self.frames for lab in fr.e]
        mand_vars = set()
        for lab in e_labels:
            mand_vars.update(db.find_vars(db.hypotheses[lab].stmt))
        mand_vars.update(db.find_vars(conclusion))
        f_labels, extra_f = [], []
        for fr in self.frames:
            for lab in fr.f:
                if db.hypotheses[lab].variable in mand_vars:
                    f_labels.append(lab)
                elif not db.hypotheses[lab].is_global:
                    extra_f.append(lab)
        active_dvs = frozenset().union(*(fr.d for fr in self.frames))
        dvs = frozenset(
            (x, y) for x, y in active_dvs if x in mand_vars and y in mand_vars
        )
        return Assertion(
            label=label,
            kind=kind,
            conclusion=conclusion,
            f_hyps=tuple(f_labels),
            e_hyps=tuple(e_labels),
            dvs=dvs,
            active_dvs=active_dvs,
            extra_f=tuple(extra_f),
            pos=db._n_statements,
        )

    # main loop ---------------------------------------------------------------

    def run(self) -> Database:
        label: str | None = None
        while True:
            tok = self.toks.next()
            if tok is None:
                break
            if tok == "${":
                self._no_label(label, "${")
                self.frames.append(_Frame())
                self.db.events.append(("open",))
            elif tok == "$}":
                self._no_label(label, "$}")
                if len(self.frames) == 1:
                    raise self.toks.err("'$}' without matching '${'")
                self.frames.pop()
                self.db.events.append(("close",))
            elif tok == "$c":
                self._no_label(label, "$c")
                self._handle_c()
            elif tok == "$v":
                self._no_label(label, "$v")
                self._handle_v()
            elif tok == "$d":
                self._no_label(label, "$d")
                self._handle_d()
            elif tok == "$f":
                self._handle_f(self._take_label(label, "$f"))
            elif tok == "$e":
                self._handle_e(self._take_label(label, "$e"))
            elif tok == "$a":
                self._handle_a(self._take_label(label, "$a"))
            elif tok == "$p":
                self._handle_p(self._take_label(label, "$p"))
            elif tok.startswith("$"):
                raise self.toks.err(f"unexpected keyword {tok!r}")
            else:
                if label is not None:
                    raise self.toks.err(f"two labels in a row: {label!r}, {tok!r}")
                label = tok
                continue
            label = None
        if label is not None:
            raise self.toks.err(f"dangling label {label!r} at end of file")
        if len(self.frames) != 1:
            raise self.toks.err("unclosed '${' at end of file")
        return self.db

    def _no_label(self, label: str | None, kw: str) -> None:
        if label is not None:
            raise self.toks.err(f"{kw} statements take no label")

    def _take_label(self, label: str | None, kw: str) -> str:
        if label is None:
            raise self.toks.err(f"{kw} statement requires a label")
        self._check_new_label(label)
        return label

    def _handle_c(self) -> None:
        if len(self.frames) > 1:
            raise self.toks.err("$c is only allowed in the outermost scope")
        tokens = self.toks.read_until("$.")
        if not tokens:
            raise self.toks.err("empty $c statement")
        for tok in tokens:
            if not _valid_symbol(tok):
                raise self.toks.err(f"invalid math symbol {tok!r}")
            if tok in self.db.constants:
                raise self.toks.err(f"constant {tok!r} declared twice")
            if tok in self.db.variables:
                raise self.toks.err(
                    f"{tok!r} is already a variable, cannot be a constant"
                )
            self.db.constants.add(tok)
        self.db.events.append(("c", tuple(tokens)))
        self.db._n_statements += 1

    def _handle_v(self) -> None:
        tokens = self.toks.read_until("$.")
        if not tokens:
            raise self.toks.err("empty $v statement")
        for tok in tokens:
            if not _valid_symbol(tok):
                raise self.toks.err(f"invalid math symbol {tok!r}")
            if tok in self.db.constants:
                raise self.toks.err(
                    f"{tok!r} is already a constant, cannot be a variable"
                )
            if self._active_var(tok):
                raise self.toks.err(f"variable {tok!r} is already active")
            self.frames[-1].v.add(tok)
            self.db.variables.add(tok)
        self.db.events.append(("v", tuple(tokens)))
        self.db._n_statements += 1

    def _handle_d(self) -> None:
        tokens = self.toks.read_until("$.")
        if len(tokens) < 2:
            raise self.toks.err("$d needs at least two variables")
        if len(set(tokens)) != len(tokens):
            raise self.toks.err("$d variables must be distinct")
        for tok in tokens:
            if not self._active_var(tok):
                raise self.toks.err(f"$d names inactive variable {tok!r}")
        for x, y in itertools.combinations(tokens, 2):
            self.frames[-1].d.add(dv_pair(x, y))
        self.db.events.append(("d", tuple(tokens)))
        self.db._n_statements += 1

    def _handle_f(self, label: str) -> None:
        tokens = self.toks.read_until("$.")
        if len(tokens) != 2:
            raise self.toks.err("$f must be exactly 'typecode variable'")
        tc, var = tokens
        if tc not in self.db.constants:
            raise self.toks.err(f"$f typecode {tc!r} is not a constant")
        if not self._active_var(var):
            raise self.toks.err(f"$f names inactive variable {var!r}")
        if self._active_float_of(var) is not None:
            raise self.toks.err(f"variable {var!r} already has an active $f")
        is_global = len(self.frames) == 1
        hyp = Hypothesis(
            label=label,
            kind="$f",
            stmt=(tc, var),
            pos=self.db._n_statements,
            is_global=is_global,
        )
        self.db.hypotheses[label] = hyp
        self.frames[-1].f.append(label)
        if is_global:
            self.db._global_floats.append(label)
            self.db._global_float_of_var[var] = label
        self.db.events.append(("f", label))
        self.db._n_statements += 1

    def _handle_e(self, label: str) -> None:
        stmt = self._validate_expr("$e", self.toks.read_until("$."))
        hyp = Hypothesis(
            label=label,
            kind="$e",
            stmt=stmt,
            pos=self.db._n_statements,
            is_global=len(self.frames) == 1,
        )
        self.db.hypotheses[label] = hyp
        self.frames[-1].e.append(label)
        self.db.events.append(("e", label))
        self.db._n_statements += 1

    def _handle_a(self, label: str) -> None:
        conclusion = self._validate_expr("$a", self.toks.read_until("$."))
        self.db.assertions[label] = self._make_assertion(label, "$a", conclusion)
        self.db.events.append(("a", label))
        self.db._n_statements += 1

    def _handle_p(self, label: str) -> None:
        conclusion = self._validate_expr("$p", self.toks.read_until("$="))
        proof_tokens = self.toks.read_until("$.")
        assertion = self._make_assertion(label, "$p", conclusion)
        try:
            assertion.proof = self._treat_proof(assertion, proof_tokens)
        except MMError as exc:
            if not self.collect:
                raise
            self.db.verify_failures.append((label, exc))
            assertion.proof = None
        self.db.assertions[label] = assertion
        self.db.events.append(("p", label))
        self.db._n_statements += 1

    # proof handling ---------------------------------------------------------

    def _treat_proof(
        self, assertion: Assertion, tokens: list[str]
    ) -> tuple[Label, ...]:
        if not tokens:
            raise self.toks.err(f"{assertion.label}: empty proof")
        if tokens[0] == "(":
            return self._inflate_compressed(assertion, tokens)
        for tok in tokens:
            if tok == "?":
                raise IncompleteProofError(
                    f"{assertion.label}: proof contains '?'"
                )
            if not _valid_label(tok):
                raise self.toks.err(
                    f"{assertion.label}: invalid proof label {tok!r}"
                )
        labels = tuple(tokens)
        if self.verify:
            verify_proof(
                self.db,
                assertion.conclusion,
                labels,
                self.db.frame_for(assertion),
                where=assertion.label,
            )
        return labels

    def _inflate_compressed(
        self, assertion: Assertion, tokens: list[str]
    ) -> tuple[Label, ...]:
        """Decode a compressed proof into a plain label sequence.

        Letters A..T close a step number in base 20, U..Y extend it in base
        5, and Z marks the entry just pushed for later reuse.  A reused step
        splices its full label subsequence back in, so the result is the
        tree-shaped proof with shared subproofs written out.  When
        verification is on, the replay runs alongside the decode and each
        shared subproof is checked exactly once.
        """
        try:
            close = tokens.index(")")
        except ValueError:
            raise self.toks.err(
                f"{assertion.label}: unterminated '(' in proof"
            ) from None
        block = tokens[1:close]
        for lab in block:
            if lab == "?":
                raise IncompleteProofError(
                    f"{assertion.label}: proof contains '?'"
                )
            if not _valid_label(lab):
                raise self.toks.err(
                    f"{assertion.label}: invalid proof label {lab!r}"
                )
        letters = "".join(tokens[close + 1:])
        where = assertion.label
        db = self.db
        frame = self.db.frame_for(assertion) if self.verify else None
        referable: list[Label] = list(assertion.hyp_labels) + block

        # Stack entries are (expr-or-None, piece); a piece is either a label
        # or a tuple of pieces whose flattening is the step's label sequence.
        stack: list[tuple[Expr | None, object]] = []
        saved: list[tuple[Expr | None, object]] = []

        def push_label(label: Label) -> None:
            if frame is not None:
                kind, obj = db.resolve(frame, label)
            else:
                found = db.hypotheses.get(label) or db.assertions.get(label)
                if found is None:
                    raise UnknownLabelError(
                        f"{where}: unknown proof label {label!r}"
                    )
                kind = "h" if isinstance(found, Hypothesis) else "a"
                obj = found
            if kind == "h":
                stack.append((obj.stmt if frame is not None else None, label))
                return
            n_pop = len(obj.f_hyps) + len(obj.e_hyps)
            sp = len(stack) - n_pop
            if sp < 0:
                raise StackUnderflowError(
                    f"{where}: {label} needs {n_pop} stack entries, "
                    f"have {len(stack)}"
                )
            piece = tuple(p for _, p in stack[sp:]) + (label,)
            if frame is not None:
                popped = [e for e, _ in stack[sp:]]
                concl = db._apply_step(obj, popped, frame.dvs, where)
            else:
                concl = None
            del stack[sp:]
            stack.append((concl, piece))

        n = 0
        for ch in letters:
            if ch == "?":
                raise IncompleteProofError(f"{where}: proof contains '?'")
            o = ord(ch)
            if 65 <= o <= 84:  # A..T
                n = n * 20 + (o - 65)
                if n < len(referable):
                    push_label(referable[n])
                else:
                    idx = n - len(referable)
                    if idx >= len(saved):
                        raise self.toks.err(
                            f"{where}: compressed step {n + 1} out of range"
                        )
                    stack.append(saved[idx])
                n = 0
            elif 85 <= o <= 89:  # U..Y
                n = n * 5 + (o - 84)
            elif ch == "Z":
                if not stack:
                    raise self.toks.err(f"{where}: 'Z' with empty stack")
                saved.append(stack[-1])
            else:
                raise self.toks.err(
                    f"{where}: invalid character {ch!r} in compressed proof"
                )
        if n != 0:
            raise self.toks.err(
                f"{where}: truncated number in compressed proof"
            )
        if len(stack) != 1:
            raise ConclusionMismatchError(
                f"{where}: {len(stack)} entries left on the stack, expected 1"
            )
        expr, piece = stack[0]
        if frame is not None and expr != assertion.conclusion:
            raise ConclusionMismatchError(
                f"{where}: proved {' '.join(expr)!r}, "
                f"stated {' '.join(assertion.conclusion)!r}"
            )
        return _flatten_piece(piece)


def _flatten_piece(piece) -> tuple[Label, ...]:
    out: list[Label] = []
    todo = [piece]
    while todo:
        item = todo.pop()
        if isinstance(item, str):
            out.append(item)
        else:
            todo.extend(reversed(item))
    return tuple(out)


def parse_database(
    text: str,
    name: str = "<db>",
    *,
    verify: bool = True,
    on_error: str = "raise",
) -> Database:
    """Parse .mm text into a Database.

    All compressed proofs are inflated to plain label sequences.  With
    verify=True every stored proof is replayed as it is read; on_error
    chooses between raising on the first bad proof ("raise") and recording
    failures in db.verify_failures ("collect").  Syntax errors always raise.
    """
    if on_error not in ("raise", "collect"):
        raise ValueError(
            f"on_error must be 'raise' or 'collect', got {on_error!r}"
        )
    return _Parser(text, name, verify, on_error).run()


def parse_file(path, *, verify: bool = True, on_error: str = "raise") -> Database:
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    return parse_database(text, name=str(path), verify=verify, on_error=on_error)


# -- emission -------------------------------------------------------------------


def _wrap_tokens(tokens, indent: str, width: int = 78) -> list[str]:
    lines: list[str] = []
    cur: list[str] = []
    cur_len = len(indent)
    for tok in tokens:
        add = len(tok) + (1 if cur else 0)
        if cur and cur_len + add > width:
            lines.append(indent + " ".join(cur))
            cur, cur_len = [], len(indent)
            add = len(tok)
        cur.append(tok)
        cur_len += add
    if cur:
        lines.append(indent + " ".join(cur))
    return lines


def toplevel_units(events) -> list[list[tuple]]:
    """Chunk an event stream into top-level statements and whole blocks."""
    units: list[list[tuple]] = []
    cur: list[tuple] = []
    depth = 0
    for event in events:
        cur.append(event)
        if event[0] == "open":
            depth += 1
        elif event[0] == "close":
            depth -= 1
        if depth == 0:
            units.append(cur)
            cur = []
    if cur:
        units.append(cur)
    return units


def write_mm(db: Database) -> str:
    """Render a Database back to .mm text with plain-format proofs."""
    out: list[str] = []
    depth = 0
    for event in db.events:
        kind = event[0]
        indent = "  " * depth
        if kind == "open":
            out.append(indent + "${")
            depth += 1
        elif kind == "close":
            depth -= 1
            out.append("  " * depth + "$}")
        elif kind in ("c", "v", "d"):
            out.extend(_wrap_tokens(["$" + kind, *event[1], "$."], indent))
        elif kind in ("f", "e"):
            hyp = db.hypotheses[event[1]]
            out.extend(
                _wrap_tokens([hyp.label, hyp.kind, *hyp.stmt, "$."], indent)
            )
        elif kind == "a":
            assertion = db.assertions[event[1]]
            out.extend(
                _wrap_tokens(
                    [assertion.label, "$a", *assertion.conclusion, "$."], indent
                )
            )
        elif kind == "p":
            assertion = db.assertions[event[1]]
            if assertion.proof is None:
                raise MMError(f"cannot emit {assertion.label}: no stored proof")
            out.extend(
                _wrap_tokens(
                    [assertion.label, "$p", *assertion.conclusion, "$="], indent
                )
            )
            out.extend(_wrap_tokens(assertion.proof, indent + "    "))
            out.append(indent + "    $.")
        else:  # pragma: no cover - event kinds are fixed above
            raise AssertionError(f"unknown event {event!r}")
    return "\n".join(out) + "\n"


def truncate_after(db: Database, n_provables: int) -> str:
    """Emit only the database prefix through the n-th $p statement.

    The cut happens at a top-level statement boundary, so the result is a
    well-formed database containing every earlier declaration.
    """
    if n_provables <= 0:
        raise ValueError("n_provables must be positive")
    kept: list[tuple] = []
    seen = 0
    for unit in toplevel_units(db.events):
        kept.extend(unit)
        seen += sum(1 for event in unit if event[0] == "p")
        if seen >= n_provables:
            break
    sliced = Database(f"{db.name}[:{n_provables}]")
    sliced.constants = db.constants
    sliced.variables = db.variables
    sliced.hypotheses = db.hypotheses
    sliced.assertions = db.assertions
    sliced.events = kept
    return write_mm(sliced)
