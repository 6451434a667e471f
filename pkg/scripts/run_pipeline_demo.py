#!/usr/bin/env python3
"""One episode end to end: generate, extract pseudo labels from the
script/ASR pair, diarize with all three methods and score each against
the reference."""

import argparse
import subprocess
import sys
from pathlib import Path


def sh(*args):
    print("+", " ".join(str(a) for a in args))
    subprocess.run([sys.executable, "-m", "scriptdiar.cli", *map(str, args)], check=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="demo_episode")
    ap.add_argument("--n-speakers", type=int, default=8)
    ap.add_argument("--runtime", type=float, default=600.0)
    ap.add_argument("--noise", type=float, default=0.6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ep = Path(args.out)
    sh(
        "synth", "--out", ep,
        "--n-speakers", args.n_speakers,
        "--runtime", args.runtime,
        "--noise", args.noise,
        "--seed", args.seed,
    )
    sh("extract", "--episode", ep)
    for method in ("unsupervised", "unsupervised-kprime", "semi"):
        sh("diarize", "--episode", ep, "--method", method)
        print(f"--- {method} ---")
        sh(
            "score",
            "--reference", ep / "reference.rttm",
            "--hypothesis", ep / f"hypothesis_{method}.rttm",
            "--out", ep / f"score_{method}.json",
        )


if __name__ == "__main__":
    main()
