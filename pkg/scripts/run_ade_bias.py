#!/usr/bin/env python3
"""Run the ade-bias preset (observational DGP, estimator bias comparison).

Results land in results/ade-bias/. Extra arguments pass through to the
CLI, e.g. ``--jobs 4`` or ``--seed 123``.
"""
import sys

from dml4ssi.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "experiment",
                "--config",
                "ade-bias",
                "--out-dir",
                "results/ade-bias",
                *sys.argv[1:],
            ]
        )
    )
