"""Run the default grid on the bundled fixture and print both tables.

    python scripts/run_grid.py [--generator echo|retrieval] [--out DIR]
"""

import argparse
import sys
import tempfile
from pathlib import Path

from sumctx.cli import main as cli_main

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "sumctx" / "data" / "personachat_sample.txt"


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--generator", default="retrieval", choices=["echo", "retrieval"])
    parser.add_argument("--out", help="output directory (default: a temporary one)")
    args = parser.parse_args()
    out = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="sumctx-grid-"))
    rc = cli_main(["experiment", "--corpus", str(FIXTURE), "--generator", args.generator,
                   "--out", str(out)])
    if rc == 0:
        for name in ("table1.md", "table2.md"):
            print((out / name).read_text(encoding="utf-8"))
    return rc


if __name__ == "__main__":
    sys.exit(main())
