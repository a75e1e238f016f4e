#!/usr/bin/env python3
"""Generate a synthetic Metamath corpus and write it to a file.

The corpus is built from a tiny propositional axiom system plus four
handwritten helper theorems; generated theorems reapply earlier results so
proofs contain inlinable applications.  Same arguments, same bytes.
"""

from __future__ import annotations

import argparse
import sys

from refactor_kit.toygen import (
    SMALL_CORPUS_SPEC,
    TRAINING_CORPUS_SPEC,
    ToySpec,
    toy_database_text,
)

PRESETS = {
    "small": SMALL_CORPUS_SPEC,
    "training": TRAINING_CORPUS_SPEC,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="path for the generated .mm file")
    parser.add_argument(
        "--preset",
        choices=sorted(PRESETS),
        help="named corpus: 'small' (200 proofs, each <= 30 nodes) or "
        "'training' (1304 proofs sized for dataset building)",
    )
    parser.add_argument("--n-theorems", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-proof-nodes", type=int, default=30)
    parser.add_argument("--max-concl-size", type=int, default=12)
    args = parser.parse_args(argv)

    if args.preset:
        spec = PRESETS[args.preset]
    else:
        spec = ToySpec(
            n_theorems=args.n_theorems,
            seed=args.seed,
            max_proof_nodes=args.max_proof_nodes,
            max_concl_size=args.max_concl_size,
        )
    text = toy_database_text(spec)
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write(text)
    print(f"wrote {args.output} ({text.count('$p')} provable assertions)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
