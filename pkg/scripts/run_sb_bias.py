#!/usr/bin/env python3
"""Run the sb-bias preset (switchback experiment, bias and CI width).

Results land in results/sb-bias/. Extra arguments pass through to the CLI.
"""
import sys

from dml4ssi.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "experiment",
                "--config",
                "sb-bias",
                "--out-dir",
                "results/sb-bias",
                *sys.argv[1:],
            ]
        )
    )
