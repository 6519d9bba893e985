#!/usr/bin/env python3
"""Generate the two disjoint-vocabulary synthetic corpora as TSV splits.

Writes data/flights/{train,validation,test}.tsv and the same for
data/smart_home. The two corpora share no surface tokens, which is what
lets the case study separate memorization of the pre-training corpus
from general reconstruction ability.
"""

import argparse
from pathlib import Path

from dprw.corpus import write_split
from dprw.synth import make_disjoint_pair

SPLITS = ("train", "validation", "test")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data", help="output root directory (default data/)")
    ap.add_argument("--seed", type=int, default=7, help="corpus sampling seed (default 7)")
    ap.add_argument("--train-size", type=int, default=200)
    ap.add_argument("--val-size", type=int, default=40)
    ap.add_argument("--test-size", type=int, default=160)
    args = ap.parse_args()

    flights, smart_home = make_disjoint_pair(
        seed=args.seed,
        train_size=args.train_size,
        val_size=args.val_size,
        test_size=args.test_size,
    )
    for name, dataset in (("flights", flights), ("smart_home", smart_home)):
        base = Path(args.out) / name
        base.mkdir(parents=True, exist_ok=True)
        for split in SPLITS:
            write_split(getattr(dataset, split), base / f"{split}.tsv")
        print(
            f"{name}: train={len(dataset.train)} validation={len(dataset.validation)} "
            f"test={len(dataset.test)} -> {base}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
