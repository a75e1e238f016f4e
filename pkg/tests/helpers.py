"""Independent oracles used across the test suite.

The compressed-proof encoder here is written against the format description
only (base-20 close letters A..T, base-5 continuation letters U..Y), not
against the package's decoder, so round-trips are meaningful checks.
"""

from __future__ import annotations


def int_to_letters(value: int) -> str:
    """Encode a 0-based step index as compressed-proof letters."""
    if value < 0:
        raise ValueError("negative index")
    out = [chr(65 + value % 20)]  # A..T closes the number
    value //= 20
    while value > 0:
        digit = value % 5
        if digit == 0:
            digit = 5
            value = value // 5 - 1
        else:
            value //= 5
        out.append(chr(84 + digit))  # U..Y
    return "".join(reversed(out))


def letters_to_ints(letters: str) -> list[int]:
    """Decode a letter run back to 0-based indices (reference decoder)."""
    out: list[int] = []
    n = 0
    for ch in letters:
        o = ord(ch)
        if 65 <= o <= 84:
            out.append(n * 20 + (o - 65))
            n = 0
        elif 85 <= o <= 89:
            n = n * 5 + (o - 84)
        else:
            raise ValueError(f"bad letter {ch!r}")
    if n:
        raise ValueError("truncated number")
    return out


def compress_proof(hyp_labels, labels) -> str:
    """Encode a plain proof in compressed format (no Z-saves).

    hyp_labels: the assertion's mandatory hypothesis labels in frame order.
    labels: the plain proof.
    """
    block: list[str] = []
    index = {lab: i for i, lab in enumerate(hyp_labels)}
    for lab in labels:
        if lab not in index:
            index[lab] = len(hyp_labels) + len(block)
            block.append(lab)
    letters = "".join(int_to_letters(index[lab]) for lab in labels)
    return "( " + " ".join(block) + " ) " + letters if block else "( ) " + letters
