"""Deterministic toy Metamath corpora.

Generates propositional-logic databases of arbitrary size from a fixed seed:
a handful of handwritten combinators (a1i, mp1i, jmp, j3) plus generated
theorems that instantiate axioms, weaken earlier results, and apply earlier
theorems under random substitutions.  Every proof verifies, every generated
proof applies other proved theorems, and the same spec always produces the
same bytes — so corpora can be rebuilt inside tests instead of shipped.

Two presets cover the test suite's needs: SMALL_CORPUS_SPEC keeps every
proof at 30 nodes or fewer so exhaustive selection enumeration stays cheap;
TRAINING_CORPUS_SPEC is large enough that the capped dataset built from it
clears 2000 records.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from refactor_kit.database import Database, parse_database

VARS = ("ph", "ps", "ch", "th", "ta")
FLOAT_OF = {"ph": "wph", "ps": "wps", "ch": "wch", "th": "wth", "ta": "wta"}

PREAMBLE = """$c ( ) -> -. wff |- $.
$v ph ps ch th ta $.
wph $f wff ph $.
wps $f wff ps $.
wch $f wff ch $.
wth $f wff th $.
wta $f wff ta $.
wn $a wff -. ph $.
wi $a wff ( ph -> ps ) $.
ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
ax-2 $a |- ( ( ph -> ( ps -> ch ) ) -> ( ( ph -> ps ) -> ( ph -> ch ) ) ) $.
ax-3 $a |- ( ( -. ph -> -. ps ) -> ( ps -> ph ) ) $.
${
  min $e |- ph $.
  maj $e |- ( ph -> ps ) $.
  ax-mp $a |- ps $.
$}
${
  a1i.1 $e |- ph $.
  a1i $p |- ( ps -> ph ) $= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.
$}
${
  mp1i.a $e |- ph $.
  mp1i.b $e |- ( ph -> ps ) $.
  mp1i $p |- ( ch -> ps ) $= wps wch wph wps mp1i.a mp1i.b ax-mp a1i $.
$}
${
  jmp.1 $e |- ph $.
  jmp.2 $e |- ps $.
  jmp $p |- ( ph -> ps ) $= wps wph jmp.2 a1i $.
$}
${
  j3.1 $e |- ph $.
  j3.2 $e |- ps $.
  j3.3 $e |- ch $.
  j3 $p |- ( ph -> ( ps -> ch ) ) $= wps wch wi wph wch wps j3.3 a1i a1i $.
$}
"""

# wffs as nested tuples: ("var", name) | ("not", w) | ("imp", a, b)
Wff = tuple


def wff_tokens(w: Wff) -> list[str]:
    if w[0] == "var":
        return [w[1]]
    if w[0] == "not":
        return ["-."] + wff_tokens(w[1])
    return ["("] + wff_tokens(w[1]) + ["->"] + wff_tokens(w[2]) + [")"]


def syntax_labels(w: Wff) -> list[str]:
    """RPN labels that build the wff from float hypotheses and wn/wi."""
    if w[0] == "var":
        return [FLOAT_OF[w[1]]]
    if w[0] == "not":
        return syntax_labels(w[1]) + ["wn"]
    return syntax_labels(w[1]) + syntax_labels(w[2]) + ["wi"]


def wff_size(w: Wff) -> int:
    return len(syntax_labels(w))


def wff_vars(w: Wff) -> set[str]:
    if w[0] == "var":
        return {w[1]}
    if w[0] == "not":
        return wff_vars(w[1])
    return wff_vars(w[1]) | wff_vars(w[2])


def subst_wff(w: Wff, sigma: dict[str, Wff]) -> Wff:
    if w[0] == "var":
        return sigma.get(w[1], w)
    if w[0] == "not":
        return ("not", subst_wff(w[1], sigma))
    return ("imp", subst_wff(w[1], sigma), subst_wff(w[2], sigma))


@dataclass(frozen=True)
class ToySpec:
    """Size, shape, and seed of a generated corpus."""

    n_theorems: int = 200
    seed: int = 0
    max_proof_nodes: int = 30
    max_wff_size: int = 4
    # only theorems whose conclusion stays this small are re-applied later;
    # without the bound, conclusions compound across generations and late
    # proofs blow every size budget
    max_concl_size: int = 12
    # pattern -> weight; patterns with missing prerequisites fall back to ax1
    weights: tuple[tuple[str, float], ...] = (
        ("ax1", 0.06),
        ("a1i", 0.18),
        ("jmp", 0.28),
        ("j3", 0.32),
        ("reapply", 0.16),
    )


SMALL_CORPUS_SPEC = ToySpec(
    n_theorems=196, seed=101, max_proof_nodes=30, max_wff_size=4, max_concl_size=6
)
TRAINING_CORPUS_SPEC = ToySpec(
    n_theorems=1300, seed=202, max_proof_nodes=120, max_wff_size=7, max_concl_size=14
)


@dataclass(frozen=True)
class _Proved:
    label: str
    wff: Wff  # conclusion body, after the |- typecode
    vars: tuple[str, ...]  # mandatory float variables in declaration order


def _rand_wff(rng: random.Random, budget: int, vars_allowed: tuple[str, ...]) -> Wff:
    if budget <= 1 or rng.random() < 0.35:
        return ("var", rng.choice(vars_allowed))
    if budget >= 3 and rng.random() < 0.45:
        left = _rand_wff(rng, rng.randint(1, budget - 2), vars_allowed)
        right = _rand_wff(rng, budget - 1 - wff_size(left), vars_allowed)
        return ("imp", left, right)
    return ("not", _rand_wff(rng, budget - 1, vars_allowed))


def _apply_piece(rng: random.Random, t: _Proved, vars_allowed) -> tuple[list[str], Wff]:
    """Proof labels applying t under a random substitution, plus the result."""
    sigma = {v: _rand_wff(rng, 2, vars_allowed) for v in t.vars}
    labels = [lab for v in t.vars for lab in syntax_labels(sigma[v])]
    labels.append(t.label)
    return labels, subst_wff(t.wff, sigma)


def _gen_theorem(
    rng: random.Random, spec: ToySpec, proved: list[_Proved], label: str
) -> tuple[_Proved, str]:
    names = [name for name, _ in spec.weights]
    weights = [w for _, w in spec.weights]
    ax1_budget = max(1, (spec.max_concl_size - 2) // 3)
    for _ in range(10):
        candidates = [t for t in proved if wff_size(t.wff) <= spec.max_concl_size]
        kind = rng.choices(names, weights=weights)[0] if candidates else "ax1"
        vars_allowed = tuple(rng.sample(VARS, rng.randint(1, 3)))
        budget = spec.max_wff_size
        if kind == "ax1":
            a = _rand_wff(rng, ax1_budget, vars_allowed)
            b = _rand_wff(rng, ax1_budget, vars_allowed)
            concl: Wff = ("imp", a, ("imp", b, a))
            proof = syntax_labels(a) + syntax_labels(b) + ["ax-1"]
        elif kind == "a1i":
            piece, x = _apply_piece(rng, rng.choice(candidates), vars_allowed)
            y = _rand_wff(rng, budget, vars_allowed)
            concl = ("imp", y, x)
            proof = syntax_labels(x) + syntax_labels(y) + piece + ["a1i"]
        elif kind == "jmp":
            piece_u, u = _apply_piece(rng, rng.choice(candidates), vars_allowed)
            piece_v, v = _apply_piece(rng, rng.choice(candidates), vars_allowed)
            concl = ("imp", u, v)
            proof = syntax_labels(u) + syntax_labels(v) + piece_u + piece_v + ["jmp"]
        elif kind == "j3":
            piece_a, a = _apply_piece(rng, rng.choice(candidates), vars_allowed)
            piece_b, b = _apply_piece(rng, rng.choice(candidates), vars_allowed)
            piece_c, c = _apply_piece(rng, rng.choice(candidates), vars_allowed)
            concl = ("imp", a, ("imp", b, c))
            proof = (
                syntax_labels(a)
                + syntax_labels(b)
                + syntax_labels(c)
                + piece_a
                + piece_b
                + piece_c
                + ["j3"]
            )
        else:  # reapply
            proof, concl = _apply_piece(rng, rng.choice(candidates), vars_allowed)
        if len(proof) <= spec.max_proof_nodes:
            break
    else:
        a = ("var", "ph")
        concl = ("imp", a, ("imp", a, a))
        proof = ["wph", "wph", "ax-1"]
    thm = _Proved(
        label=label,
        wff=concl,
        vars=tuple(v for v in VARS if v in wff_vars(concl)),
    )
    stmt = f"{label} $p |- {' '.join(wff_tokens(concl))} $= {' '.join(proof)} $."
    return thm, stmt


def toy_database_text(spec: ToySpec = ToySpec()) -> str:
    rng = random.Random(spec.seed)
    lines = [PREAMBLE.rstrip("\n")]
    proved: list[_Proved] = []
    for i in range(spec.n_theorems):
        thm, stmt = _gen_theorem(rng, spec, proved, f"t{i:04d}")
        proved.append(thm)
        lines.append(stmt)
    return "\n".join(lines) + "\n"


def build_toy_database(spec: ToySpec = ToySpec()) -> Database:
    """Generate, parse, and fully verify a corpus."""
    return parse_database(toy_database_text(spec), name=f"toy-seed{spec.seed}")
