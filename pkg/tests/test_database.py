"""Parser, decompressor, and verifier behavior on small databases."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from refactor_kit.database import (
    ConclusionMismatchError,
    DisjointnessError,
    IncompleteProofError,
    MMSyntaxError,
    MMVerifyError,
    StackUnderflowError,
    UnificationError,
    UnknownLabelError,
    apply_subst,
    parse_database,
    truncate_after,
    verify_assertion,
    verify_proof,
    write_mm,
)

from .conftest import A1I_PROOF, DV_DB, LOGIC_DB, LOGIC_DB_COMPRESSED, MP1I_PROOF
from .helpers import compress_proof, int_to_letters, letters_to_ints


# -- parsing basics ---------------------------------------------------------


def test_symbols_and_labels(logic_db):
    assert "wff" in logic_db.constants
    assert "ph" in logic_db.variables
    assert logic_db.hypotheses["wph"].stmt == ("wff", "ph")
    assert logic_db.hypotheses["wph"].is_global
    assert not logic_db.hypotheses["a1i.1"].is_global
    assert set(logic_db.provable_labels()) == {"a1i", "mp1i"}


def test_frames(logic_db):
    a1i = logic_db.assertions["a1i"]
    assert a1i.f_hyps == ("wph", "wps")
    assert a1i.e_hyps == ("a1i.1",)
    assert a1i.conclusion == ("|-", "(", "ps", "->", "ph", ")")
    mp1i = logic_db.assertions["mp1i"]
    assert mp1i.f_hyps == ("wph", "wps", "wch")
    assert mp1i.e_hyps == ("mp1i.a", "mp1i.b")
    ax_mp = logic_db.assertions["ax-mp"]
    assert ax_mp.f_hyps == ("wph", "wps")
    assert ax_mp.e_hyps == ("min", "maj")


def test_stored_proofs(logic_db):
    assert logic_db.assertions["a1i"].proof == A1I_PROOF
    assert logic_db.assertions["mp1i"].proof == MP1I_PROOF


def test_verify_each_provable(logic_db):
    for label in logic_db.provable_labels():
        props = verify_assertion(logic_db, logic_db.assertions[label])
        assert props[-1] == " ".join(logic_db.assertions[label].conclusion)


def test_ordering_positions(logic_db):
    order = [a.label for a in logic_db.assertions_in_order()]
    assert order.index("ax-mp") < order.index("a1i") < order.index("mp1i")


def test_var_pool(logic_db):
    assert logic_db.var_pool("wff") == ["ph", "ps", "ch"]
    assert logic_db.float_label_of("ps") == "wps"
    assert logic_db.var_typecode("ch") == "wff"


# -- compressed proofs ------------------------------------------------------


def test_compressed_matches_plain():
    db = parse_database(LOGIC_DB_COMPRESSED, name="logic-z.mm")
    assert db.assertions["a1i"].proof == A1I_PROOF
    assert db.assertions["mp1i"].proof == MP1I_PROOF


def test_z_save_and_reuse():
    text = LOGIC_DB + (
        "wsq $p wff ( ( ph -> ph ) -> ( ph -> ph ) ) $= ( wi ) AABZCB $.\n"
    )
    db = parse_database(text, name="z.mm")
    assert db.assertions["wsq"].proof == (
        "wph", "wph", "wi", "wph", "wph", "wi", "wi",
    )


def test_compressed_index_out_of_range():
    text = LOGIC_DB + "bad $p wff ph $= ( ) C $.\n"
    with pytest.raises(MMSyntaxError, match="out of range"):
        parse_database(text, name="bad.mm")


def test_compressed_bad_letter():
    text = LOGIC_DB + "bad $p wff ph $= ( ) a $.\n"
    with pytest.raises(MMSyntaxError, match="invalid character"):
        parse_database(text, name="bad.mm")


def test_compressed_truncated_number():
    text = LOGIC_DB + "bad $p wff ph $= ( ) U $.\n"
    with pytest.raises(MMSyntaxError, match="truncated"):
        parse_database(text, name="bad.mm")


def test_letters_roundtrip_small():
    # Spot checks against the documented radix scheme.
    assert int_to_letters(0) == "A"
    assert int_to_letters(19) == "T"
    assert int_to_letters(20) == "UA"
    assert int_to_letters(119) == "YT"
    assert int_to_letters(120) == "UUA"


@given(st.integers(min_value=0, max_value=200_000))
def test_letters_roundtrip(value):
    assert letters_to_ints(int_to_letters(value)) == [value]


def test_oracle_compressor_roundtrip(logic_db):
    # Re-encode both stored proofs with the independent compressor and make
    # sure the parser inflates them back to the same label sequences.
    a1i = logic_db.assertions["a1i"]
    mp1i = logic_db.assertions["mp1i"]
    text = LOGIC_DB.replace(
        "$= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.",
        "$= " + compress_proof(a1i.hyp_labels, A1I_PROOF) + " $.",
    ).replace(
        "$= wps wch wph wps mp1i.a mp1i.b ax-mp a1i $.",
        "$= " + compress_proof(mp1i.hyp_labels, MP1I_PROOF) + " $.",
    )
    db = parse_database(text, name="reenc.mm")
    assert db.assertions["a1i"].proof == A1I_PROOF
    assert db.assertions["mp1i"].proof == MP1I_PROOF


# -- syntax errors ----------------------------------------------------------


@pytest.mark.parametrize(
    "snippet, message",
    [
        ("$c wff $. $c wff $.", "declared twice"),
        ("$v ph $. $v ph $.", "already active"),
        ("$c wff $. $v wff $.", "already a constant"),
        ("foo $c wff $.", "take no label"),
        ("$c wff $. wx $f wff x $.", "inactive variable"),
        ("$c wff $. $v x y $. wx $f wff x y $.", "exactly"),
        ("$c wff $. $v x $. ax $a wff x $.", "without an active"),
        ("$c wff $. ax $a foo $.", "constant typecode"),
        ("${", "unclosed"),
        ("$}", "without matching"),
        ("$c wff $. $( no close", "unterminated comment"),
        ("$c wff $. $( a $( b $) $)", "may not nest"),
        ("$[ other.mm $]", "flattened"),
        ("$c wff $. ${ $c bad $. $}", "outermost"),
        ("$c wff $. $v x $. $d x $.", "at least two"),
        ("$c wff $. $v x $. $d x x $.", "distinct"),
        ("lonely", "dangling label"),
        ("$c wff $. ax $a wff $. ax2", "dangling label"),
        ("$q wff $.", "unexpected keyword"),
    ],
)
def test_syntax_errors(snippet, message):
    with pytest.raises(MMSyntaxError, match=message):
        parse_database(snippet, name="snippet.mm")


def test_two_labels_in_a_row():
    with pytest.raises(MMSyntaxError, match="two labels"):
        parse_database("foo bar $a wff $.", name="snippet.mm")


def test_duplicate_label_across_kinds():
    text = "$c wff $. $v x $. wx $f wff x $. wx $a wff x $."
    with pytest.raises(MMSyntaxError, match="duplicate label"):
        parse_database(text, name="snippet.mm")


def test_incomplete_proof_is_distinct_error():
    text = LOGIC_DB + "idq $p wff ph $= ? $.\n"
    with pytest.raises(IncompleteProofError):
        parse_database(text, name="q.mm")
    text = LOGIC_DB + "idq $p wff ph $= ( ? ) A $.\n"
    with pytest.raises(IncompleteProofError):
        parse_database(text, name="q.mm")


# -- verification errors ----------------------------------------------------


def test_unknown_label():
    text = LOGIC_DB + "bad $p wff ph $= nosuch $.\n"
    with pytest.raises(UnknownLabelError):
        parse_database(text, name="bad.mm")


def test_forward_reference_rejected():
    # mp1i's proof may not use a label declared after it.
    text = LOGIC_DB.replace(
        "$= wps wch wph wps mp1i.a mp1i.b ax-mp a1i $.",
        "$= wps wch wph wps mp1i.a mp1i.b ax-mp later $.",
    ) + "later $a |- ( ps -> ph ) $.\n"
    with pytest.raises(UnknownLabelError):
        parse_database(text, name="fwd.mm")


def test_local_hypothesis_not_visible_elsewhere():
    text = LOGIC_DB + "bad $p wff ph $= a1i.1 $.\n"
    with pytest.raises(UnknownLabelError):
        parse_database(text, name="bad.mm")


def test_stack_underflow():
    text = LOGIC_DB + "bad $p wff ( ph -> ps ) $= wph wi $.\n"
    with pytest.raises(StackUnderflowError):
        parse_database(text, name="bad.mm")


def test_typecode_unification_failure():
    # ax-mp's first argument must be a wff-typed entry; |- won't do.
    text = LOGIC_DB.replace(
        "$= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.",
        "$= a1i.1 wps wph wi a1i.1 wph wps ax-1 ax-mp $.",
    )
    with pytest.raises(UnificationError):
        parse_database(text, name="bad.mm")


def test_essential_mismatch():
    text = LOGIC_DB + (
        "bad $p |- ( ps -> ph ) $= wph wps wph wi wph wps ax-1 wph wps ax-1"
        " ax-mp $.\n"
    )
    with pytest.raises(UnificationError):
        parse_database(text, name="bad.mm")


def test_conclusion_mismatch():
    text = LOGIC_DB.replace(
        "a1i $p |- ( ps -> ph ) $=",
        "a1i $p |- ( ph -> ps ) $=",
    )
    with pytest.raises(ConclusionMismatchError):
        parse_database(text, name="bad.mm")


def test_leftover_stack():
    text = LOGIC_DB + "bad $p wff ph $= wph wps $.\n"
    with pytest.raises(ConclusionMismatchError, match="entries left"):
        parse_database(text, name="bad.mm")


def test_empty_proof(logic_db):
    text = LOGIC_DB + "bad $p wff ph $= $.\n"
    with pytest.raises(MMSyntaxError, match="empty proof"):
        parse_database(text, name="bad.mm")
    a1i = logic_db.assertions["a1i"]
    with pytest.raises(MMVerifyError, match="empty proof"):
        logic_db.replay([], logic_db.frame_for(a1i))


# -- disjoint variables -----------------------------------------------------


def test_dv_ok(dv_db):
    for label in dv_db.provable_labels():
        verify_assertion(dv_db, dv_db.assertions[label])
    demo = dv_db.assertions["ax-dvdemo"]
    assert demo.dvs == frozenset({("x", "y")})


def test_dv_collapse_rejected():
    text = DV_DB + "dvbad $p |- pair z z $= vz vz ax-dvdemo $.\n"
    with pytest.raises(DisjointnessError, match="collapses"):
        parse_database(text, name="dv.mm")


def test_dv_missing_outer_rejected():
    text = DV_DB + "dvmiss $p |- pair z w $= vz vw ax-dvdemo $.\n"
    with pytest.raises(DisjointnessError, match="outer frame"):
        parse_database(text, name="dv.mm")


def test_dv_compound_needs_every_pair():
    # x := pair z w needs both $d z u and $d w u; give only one.
    text = DV_DB + (
        "${ $d z u $.\n"
        "dvhalf $p |- pair pair z w u $= vz vw wpair vu ax-dvdemo $. $}\n"
    )
    with pytest.raises(DisjointnessError):
        parse_database(text, name="dv.mm")


# -- collect mode -----------------------------------------------------------


def test_collect_mode_records_failures():
    # Damage a1i's proof but leave its statement alone.
    text = LOGIC_DB.replace(
        "$= wph wps wph wi a1i.1 wph wps ax-1 ax-mp $.",
        "$= wph wps a1i.1 wph wps ax-1 ax-mp $.",
    )
    with pytest.raises(UnificationError):
        parse_database(text, name="strict.mm")
    db = parse_database(text, name="collect.mm", on_error="collect")
    assert [label for label, _ in db.verify_failures] == ["a1i"]
    assert db.assertions["a1i"].proof is None
    # mp1i applies a1i; its own replay still checks out because it only
    # needs a1i's (stated) frame and conclusion.
    assert db.assertions["mp1i"].proof == MP1I_PROOF


def test_verify_off_still_inflates():
    db = parse_database(LOGIC_DB_COMPRESSED, name="fast.mm", verify=False)
    assert db.assertions["a1i"].proof == A1I_PROOF
    assert db.assertions["mp1i"].proof == MP1I_PROOF


# -- substitution -----------------------------------------------------------


def test_apply_subst():
    stmt = ("wff", "(", "ph", "->", "ps", ")")
    subst = {"ph": ("ch",), "ps": ("(", "ch", "->", "ch", ")")}
    assert apply_subst(stmt, subst) == (
        "wff", "(", "ch", "->", "(", "ch", "->", "ch", ")", ")",
    )


def test_verify_proof_direct(logic_db):
    a1i = logic_db.assertions["a1i"]
    frame = logic_db.frame_for(a1i)
    props = verify_proof(logic_db, a1i.conclusion, A1I_PROOF, frame)
    assert props == [
        "wff ph",
        "wff ps",
        "wff ph",
        "wff ( ps -> ph )",
        "|- ph",
        "wff ph",
        "wff ps",
        "|- ( ph -> ( ps -> ph ) )",
        "|- ( ps -> ph )",
    ]


# -- emission ---------------------------------------------------------------


def test_write_mm_roundtrip(logic_db):
    text = write_mm(logic_db)
    again = parse_database(text, name="again.mm")
    assert set(again.assertions) == set(logic_db.assertions)
    for label, assertion in logic_db.assertions.items():
        assert again.assertions[label].conclusion == assertion.conclusion
        assert again.assertions[label].proof == assertion.proof
        assert again.assertions[label].dvs == assertion.dvs


def test_write_mm_roundtrip_dv(dv_db):
    again = parse_database(write_mm(dv_db), name="again.mm")
    assert set(again.assertions) == set(dv_db.assertions)
    assert again.assertions["ax-dvdemo"].dvs == frozenset({("x", "y")})


def test_truncate_after(logic_db):
    text = truncate_after(logic_db, 1)
    db = parse_database(text, name="slice.mm")
    assert db.provable_labels() == ["a1i"]
    assert "mp1i" not in db.assertions
    assert "ax-2" in db.assertions  # everything before the cut is kept
    text2 = truncate_after(logic_db, 2)
    db2 = parse_database(text2, name="slice2.mm")
    assert db2.provable_labels() == ["a1i", "mp1i"]


def test_truncate_after_rejects_nonpositive(logic_db):
    with pytest.raises(ValueError):
        truncate_after(logic_db, 0)
