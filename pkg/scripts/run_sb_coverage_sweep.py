#!/usr/bin/env python3
"""Run the sb-coverage-sweep preset (switchback CI coverage against T).

Results land in results/sb-coverage-sweep/, one replications/summary CSV
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
                "sb-coverage-sweep",
                "--out-dir",
                "results/sb-coverage-sweep",
                *sys.argv[1:],
            ]
        )
    )
