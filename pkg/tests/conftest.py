"""Shared fixtures: small hand-checked databases."""

import pytest

from refactor_kit.database import parse_database

# Minimal propositional-logic database.  a1i and mp1i carry hand-verified
# plain proofs (9 and 8 steps); several tests freeze these exact sequences.
LOGIC_DB = """
$c ( ) -> -. wff |- $.
$v ph ps ch $.
wph $f wff ph $.
wps $f wff ps $.
wch $f wff ch $.
wn $a wff -. ph $.
wi $a wff ( ph -> ps ) $.
ax-1 $a |- ( ph -> ( ps -> ph ) ) $.
ax-2 $a |- ( ( ph -> ( ps -> ch ) ) -> ( ( ph -> ps ) -> ( ph -> ch ) ) ) $.
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
"""

A1I_PROOF = (
    "wph", "wps", "wph", "wi", "a1i.1", "wph", "wps", "ax-1", "ax-mp",
)
MP1I_PROOF = (
    "wps", "wch", "wph", "wps", "mp1i.a", "mp1i.b", "ax-mp", "a1i",
)

# Same database with both proofs in compressed form (hand-encoded).
LOGIC_DB_COMPRESSED = LOGIC_DB.replace(
    "$= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.",
    "$= ( wi ax-1 ax-mp ) ABADCABEF $.",
).replace(
    "$= wps wch wph wps mp1i.a mp1i.b ax-mp a1i $.",
    "$= ( ax-mp a1i ) BCABDEFG $.",
)

# Disjoint-variable exercise: ax-dvdemo demands $d x y, and the two uses
# below supply it through their own scopes (simple and compound terms).
DV_DB = """
$c |- pair term $.
$v x y z w u $.
vx $f term x $.
vy $f term y $.
vz $f term z $.
vw $f term w $.
vu $f term u $.
wpair $a term pair x y $.
${
  $d x y $.
  ax-dvdemo $a |- pair x y $.
$}
${
  $d z w $.
  dvok $p |- pair z w $= vz vw ax-dvdemo $.
$}
${
  $d z u $.
  $d w u $.
  dvcompound $p |- pair pair z w u $= vz vw wpair vu ax-dvdemo $.
$}
"""


# Logic database plus two negation theorems with repetitive proofs, giving
# the rewriter and the frequency miner something to chew on.
REF_DB = LOGIC_DB + """
wnn $p wff -. -. ph $= wph wn wn $.
wfour $p wff -. -. -. -. ph $= wph wn wn wn wn $.
"""


@pytest.fixture(scope="session")
def logic_db():
    return parse_database(LOGIC_DB, name="logic.mm")


@pytest.fixture(scope="session")
def ref_db():
    return parse_database(REF_DB, name="ref.mm")


@pytest.fixture(scope="session")
def dv_db():
    return parse_database(DV_DB, name="dv.mm")
