#!/usr/bin/env python3
"""Emit shared loss test vectors as JSON.

Other implementations of the node-classification loss (e.g. the trainer in
frontend/) check themselves against these cases; each entry carries targets,
probabilities, and the loss value this package computes.
"""

from __future__ import annotations

import argparse
import json
import random
import sys

from refactor_kit.dataset import reference_loss


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("output", help="path for the JSON file")
    parser.add_argument("--n-cases", type=int, default=20)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)

    rng = random.Random(args.seed)
    cases = []
    for _ in range(args.n_cases):
        n = rng.randint(1, 40)
        targets = [rng.random() < 0.4 for _ in range(n)]
        probs = [round(rng.uniform(0.01, 0.99), 6) for _ in range(n)]
        cases.append(
            {
                "targets": targets,
                "probs": probs,
                "loss": reference_loss(targets, probs),
            }
        )
    with open(args.output, "w", encoding="utf-8") as fh:
        json.dump({"clamp_eps": 1e-7, "cases": cases}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(cases)} cases to {args.output}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
