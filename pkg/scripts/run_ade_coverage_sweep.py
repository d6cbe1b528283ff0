#!/usr/bin/env python3
"""Run the ade-coverage-sweep preset (CI coverage against horizon T).

Results land in results/ade-coverage-sweep/, one replications/summary CSV
pair per grid point. Extra arguments pass through to the CLI.
"""
import sys

from dml4ssi.cli import main

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "experiment",
                "--config",
                "ade-coverage-sweep",
                "--out-dir",
                "results/ade-coverage-sweep",
                *sys.argv[1:],
            ]
        )
    )
