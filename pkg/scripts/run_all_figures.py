#!/usr/bin/env python3
"""Render every bundled preset panel to CSV and SVG.

Usage: python scripts/run_all_figures.py [--out-dir out] [--format csv svg]
"""

import argparse
import os
import sys

from kerrcavity import PRESET_IDS
from kerrcavity.cli import WRITERS, run_sweep
from kerrcavity.sweep import figure_preset


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="out")
    parser.add_argument("--format", nargs="+", default=["csv", "svg"],
                        choices=sorted(WRITERS))
    args = parser.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)
    for pid in PRESET_IDS:
        result = run_sweep(figure_preset(pid))
        for fmt in args.format:
            path = os.path.join(args.out_dir, f"{pid}.{fmt}")
            WRITERS[fmt](result, path)
        print(f"{pid}: {result.summary['points']} points "
              f"-> {args.out_dir}/{pid}.{{{','.join(args.format)}}}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
